#pragma once

// Embedded copies of data/stopwords_en_v1.txt and data/lemma_exceptions_v1.tsv.
// Regenerate both together; tests/unit/lexical_test.cpp checks they match.

#include <string_view>

namespace ddp::lexicon_data {

inline constexpr std::string_view kStopwordsVersion = "en_v1";

inline constexpr std::string_view kStopwords = R"ddp(i
me
my
myself
we
our
ours
ourselves
you
your
yours
yourself
yourselves
he
him
his
himself
she
her
hers
herself
it
its
itself
they
them
their
theirs
themselves
what
which
who
whom
this
that
these
those
am
is
are
was
were
be
been
being
have
has
had
having
do
does
did
doing
a
an
the
and
but
if
or
because
as
until
while
of
at
by
for
with
about
against
between
into
through
during
before
after
above
below
to
from
up
down
in
out
on
off
over
under
again
further
then
once
here
there
when
where
why
how
all
any
both
each
few
more
most
other
some
such
no
nor
not
only
own
same
so
than
too
very
s
t
can
will
just
don
should
now
)ddp";

inline constexpr std::string_view kLemmaExceptionsVersion = "v1";

inline constexpr std::string_view kLemmaExceptions = R"ddp(# lemma exceptions v1: word<TAB>lemma<TAB>pos
lied	lie	VERB
lying	lie	VERB
lies	lie	VERB
told	tell	VERB
said	say	VERB
says	say	VERB
saw	see	VERB
seen	see	VERB
went	go	VERB
gone	go	VERB
goes	go	VERB
came	come	VERB
took	take	VERB
taken	take	VERB
knew	know	VERB
known	know	VERB
thought	think	VERB
got	get	VERB
gotten	get	VERB
made	make	VERB
gave	give	VERB
given	give	VERB
found	find	VERB
left	leave	VERB
felt	feel	VERB
kept	keep	VERB
heard	hear	VERB
ran	run	VERB
ate	eat	VERB
wrote	write	VERB
written	write	VERB
bought	buy	VERB
brought	bring	VERB
stole	steal	VERB
stolen	steal	VERB
shot	shoot	VERB
dying	die	VERB
died	die	VERB
tied	tie	VERB
used	use	VERB
men	man	NOUN
women	woman	NOUN
children	child	NOUN
feet	foot	NOUN
teeth	tooth	NOUN
mice	mouse	NOUN
news	news	NOUN
always	always	ADV
perhaps	perhaps	ADV
sometimes	sometimes	ADV
thus	thus	ADV
yes	yes	ADV
anything	anything	NOUN
something	something	NOUN
nothing	nothing	NOUN
everything	everything	NOUN
morning	morning	NOUN
evening	evening	NOUN
need	need	VERB
speed	speed	NOUN
indeed	indeed	ADV
seed	seed	NOUN
proceed	proceed	VERB
succeed	succeed	VERB
exceed	exceed	VERB
bed	bed	NOUN
red	red	ADJ
hundred	hundred	NUM
kindred	kindred	NOUN
)ddp";

}  // namespace ddp::lexicon_data
