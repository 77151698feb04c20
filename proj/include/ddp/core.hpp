#pragma once

// Shared vocabulary for the whole library: error kinds, labels, modalities,
// a portable seeded RNG and a stable content hash.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ddp {

// Error kinds map one-to-one onto CLI exit codes (see tools/ddp.cpp).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// Deceptive is the positive class everywhere (encoded 1).
enum class Label : int { truthful = 0, deceptive = 1 };

inline constexpr double kDecisionThreshold = 0.5;

inline Label label_from_score(double score) {
  return score >= kDecisionThreshold ? Label::deceptive : Label::truthful;
}

inline std::string_view to_string(Label l) {
  return l == Label::deceptive ? "deceptive" : "truthful";
}

inline Label parse_label(std::string_view s) {
  if (s == "deceptive") return Label::deceptive;
  if (s == "truthful") return Label::truthful;
  throw DataError("unknown label '" + std::string(s) + "'");
}

inline int to_int(Label l) { return static_cast<int>(l); }
inline double to_pm1(Label l) { return l == Label::deceptive ? 1.0 : -1.0; }

enum class Modality { visual, acoustic, lexical };

inline constexpr Modality kAllModalities[] = {Modality::visual, Modality::acoustic,
                                              Modality::lexical};

inline std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::visual: return "visual";
    case Modality::acoustic: return "acoustic";
    case Modality::lexical: return "lexical";
  }
  return "?";
}

inline Modality parse_modality(std::string_view s) {
  if (s == "visual") return Modality::visual;
  if (s == "acoustic") return Modality::acoustic;
  if (s == "lexical") return Modality::lexical;
  throw UsageError("unknown modality '" + std::string(s) + "'");
}

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractError(what);
}

inline void check_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw NumericError("non-finite value in " + what);
}

/// 64-bit FNV-1a. Stable across platforms, used for cache keys and for
/// deriving per-item seeds.
class Fnv64 {
 public:
  Fnv64& add(std::string_view bytes) {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  Fnv64& add(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      state_ ^= (v >> (8 * i)) & 0xffU;
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  std::uint64_t value() const { return state_; }
  std::string hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 0; i < 16; ++i) out[15 - i] = digits[(state_ >> (4 * i)) & 0xf];
    return out;
  }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t hash_string(std::string_view s) { return Fnv64{}.add(s).value(); }

/// splitmix64-seeded xoshiro256** generator. Every distribution is
/// implemented here so that results do not depend on the standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& s : s_) {
      x += 0x9e3779b97f4a7c15ULL;
      std::uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      s = z ^ (z >> 31);
    }
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n) {
    require(n > 0, "Rng::below: n must be positive");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t r;
    do {
      r = next();
    } while (r >= limit);
    return r % n;
  }

  /// Uniform integer in [lo, hi].
  std::int64_t between(std::int64_t lo, std::int64_t hi) {
    require(lo <= hi, "Rng::between: empty range");
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4]{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Derive an independent stream seed from a parent seed and a tag.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  return Fnv64{}.add(seed).add(tag).value();
}

/// Logistic function clamped into the open interval (0, 1).
inline double sigmoid(double z) {
  constexpr double kEps = 1e-15;
  double p;
  if (z >= 0) {
    p = 1.0 / (1.0 + std::exp(-z));
  } else {
    const double e = std::exp(z);
    p = e / (1.0 + e);
  }
  return std::clamp(p, kEps, 1.0 - kEps);
}

}  // namespace ddp
