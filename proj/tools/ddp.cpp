// ddp: command-line front end for the deception-detection pipeline.
//
//   ddp synth   --out DIR [--seed N] [--videos N]
//   ddp ingest  --config FILE
//   ddp features --config FILE --modality M
//   ddp train   --config FILE [--modality M]
//   ddp eval    --config FILE [--modality M]
//   ddp fuse    --config FILE
//   ddp report  --config FILE
//
// Exit codes: 0 ok, 1 usage, 2 data, 3 numeric.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "ddp/harness/report.hpp"
#include "ddp/harness/synthetic.hpp"

namespace fs = std::filesystem;
using namespace ddp;

namespace {

struct Options {
  std::string config;
  std::string manifest;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string modality;
  int videos = 40;
};

ExperimentConfig resolve_config(const Options& o) {
  if (o.config.empty()) throw UsageError("--config is required");
  ExperimentConfig c = load_config(o.config);
  if (!o.manifest.empty()) c.manifest = o.manifest;
  if (!o.out.empty()) c.output_dir = o.out;
  if (o.seed) {
    c.seed = *o.seed;
    c.propagate_seed();
  }
  c.validate();
  return c;
}

std::vector<Modality> selected(const Options& o, const ExperimentConfig& c) {
  if (o.modality.empty()) return c.modalities;
  return {parse_modality(o.modality)};
}

SplitPlan first_split(const Corpus& corpus) {
  auto plans = plan_splits(corpus);
  if (plans.size() > 1)
    std::cerr << "note: n_folds is set; train/eval/fuse use fold 0 only (report pools all folds)\n";
  return plans.front();
}

fs::path model_path(const ExperimentConfig& c, Modality m) {
  return fs::path(c.output_dir) / "models" / (std::string(to_string(m)) + ".art");
}

fs::path verdict_path(const ExperimentConfig& c, Modality m) {
  return fs::path(c.output_dir) / "verdicts" / (std::string(to_string(m)) + ".jsonl");
}

void write_lines(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  detail::write_file_bytes(path, text);
}

int cmd_synth(const Options& o) {
  if (o.out.empty()) throw UsageError("--out is required");
  const std::uint64_t seed = o.seed.value_or(1);
  const auto manifest = generate_synthetic_corpus(o.videos, seed, o.out);
  nlohmann::ordered_json cfg = {{"manifest", "manifest.jsonl"},
                                {"cache_dir", "cache"},
                                {"output_dir", "out"},
                                {"seed", seed},
                                {"visual", {{"detector", "replay"}, {"detector_dir", "detections"}, {"cnn", {{"epochs", 3}}}}}};
  detail::write_file_bytes(fs::path(o.out) / "config.json", cfg.dump(2) + "\n");
  std::cout << manifest.string() << "\n";
  return 0;
}

int cmd_ingest(const Options& o) {
  const auto c = resolve_config(o);
  const auto corpus = load_corpus(c);
  const auto data = ingest_corpus(corpus);
  for (const auto& [id, v] : data)
    std::cout << id << " frames=" << v.frames.size() << " audio_s="
              << (v.audio ? format_fixed(v.audio->duration_s(), 3) : std::string("none")) << "\n";
  return 0;
}

int cmd_features(const Options& o) {
  const auto c = resolve_config(o);
  if (o.modality.empty()) throw UsageError("--modality is required for features");
  const Modality m = parse_modality(o.modality);
  const auto corpus = load_corpus(c);
  const auto data = ingest_corpus(corpus);
  std::string lines;
  if (m == Modality::acoustic) {
    for (const auto& [id, v] : data) {
      const auto u = in_stage("acoustic.features", id, [&] { return acoustic_units(v, c.acoustic, 0); });
      for (std::size_t i = 0; i < u.rows.size(); ++i)
        lines += nlohmann::ordered_json{{"video_id", id}, {"unit", u.unit_ids[i]}, {"features", u.rows[i]}}.dump() + "\n";
    }
  } else if (m == Modality::lexical) {
    for (const auto& [id, v] : data) {
      const auto doc = in_stage("lexical.normalize", id, [&] { return normalize_text(v.transcript); });
      lines += nlohmann::ordered_json{{"video_id", id}, {"tokens", doc.tokens}}.dump() + "\n";
    }
  } else {
    const auto detector = make_detector(c);
    for (const auto& [id, v] : data) {
      const auto frames = visual_units(corpus, v, *detector);
      nlohmann::ordered_json ts = nlohmann::ordered_json::array();
      for (const auto& f : frames) ts.push_back(f.timestamp_s);
      lines += nlohmann::ordered_json{{"video_id", id}, {"n_frames", v.frames.size()}, {"kept_timestamps", ts}}.dump() +
               "\n";
    }
  }
  const auto path = fs::path(c.output_dir) / "features" / (std::string(to_string(m)) + ".jsonl");
  write_lines(path, lines);
  std::cout << path.string() << "\n";
  return 0;
}

int cmd_train(const Options& o) {
  const auto c = resolve_config(o);
  const auto corpus = load_corpus(c);
  const auto plan = first_split(corpus);
  const auto data = ingest_corpus(corpus);
  LeakageGuard guard;
  for (Modality m : selected(o, c)) {
    const auto t = train_modality(corpus, data, plan, m, guard);
    save_artifact(model_path(c, m), t.bundle);
    std::cout << to_string(m) << ": " << t.n_train_units << " training units"
              << (t.from_cache ? " (cached)" : "") << " -> " << model_path(c, m).string() << "\n";
  }
  return 0;
}

int cmd_eval(const Options& o) {
  const auto c = resolve_config(o);
  const auto corpus = load_corpus(c);
  const auto plan = first_split(corpus);
  const auto data = ingest_corpus(corpus);
  LeakageGuard guard;
  for (Modality m : selected(o, c)) {
    TrainedModality t;
    t.modality = m;
    t.bundle = load_artifact(model_path(c, m));
    const auto verdicts = predict_modality(corpus, data, plan, t, guard);
    std::string lines;
    for (const auto& [id, v] : verdicts) lines += verdict_to_json(v).dump() + "\n";
    write_lines(verdict_path(c, m), lines);
    const auto metrics = evaluate(verdict_labels(plan.test_ids, verdicts), corpus.truth);
    std::cout << to_string(m) << ": accuracy " << format_fixed(metrics.accuracy) << " over " << metrics.n_scored()
              << " videos (" << metrics.n_abstained << " abstained)\n";
  }
  return 0;
}

ModalityVerdict verdict_from_json(const nlohmann::json& j) {
  const Modality m = parse_modality(j.at("modality").get<std::string>());
  const std::string id = j.at("video_id");
  if (j.at("score").is_null()) return abstain_verdict(m, id);
  return make_verdict(m, id, j.at("score").get<double>(), j.at("n_units").get<std::size_t>());
}

int cmd_fuse(const Options& o) {
  const auto c = resolve_config(o);
  const auto corpus = load_corpus(c);
  const auto plan = first_split(corpus);
  std::map<Modality, std::map<std::string, ModalityVerdict>> verdicts;
  for (Modality m : c.modalities) {
    std::ifstream in(verdict_path(c, m));
    if (!in) throw DataError("missing verdicts for " + std::string(to_string(m)) + "; run eval first");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        auto v = verdict_from_json(nlohmann::json::parse(line));
        verdicts[m][v.video_id] = v;
      } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("corrupt verdict file: ") + e.what());
      }
    }
  }
  const auto outcome = fuse_verdicts(plan.test_ids, verdicts, c.fusion);
  std::string lines;
  for (const auto& f : outcome.fused) lines += fused_to_json(f).dump() + "\n";
  write_lines(fs::path(c.output_dir) / "fused.jsonl", lines);
  const auto m = fused_metrics(plan.test_ids, outcome, corpus.truth);
  std::cout << "fused (" << to_string(c.fusion) << "): accuracy " << format_fixed(m.accuracy) << ", "
            << outcome.no_evidence.size() << " without evidence\n";
  return 0;
}

int cmd_report(const Options& o) {
  const auto c = resolve_config(o);
  const auto rb = run_experiment(c);
  write_report(c.output_dir, rb);
  for (const auto& [m, met] : rb.modality_metrics)
    std::cout << to_string(m) << ": " << format_fixed(met.accuracy) << "\n";
  for (const auto& [mode, met] : rb.fused_metrics) std::cout << "fused " << to_string(mode) << ": " << format_fixed(met.accuracy) << "\n";
  std::cout << (fs::path(c.output_dir) / "report.md").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal deception detection pipeline"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Experiment config (JSON)");
    sub->add_option("--manifest", o.manifest, "Override the manifest path");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--seed", o.seed, "Override the seed");
    sub->add_option("--modality", o.modality, "visual | acoustic | lexical")
        ->check(CLI::IsMember({"visual", "acoustic", "lexical"}));
  };
  std::map<std::string, std::function<int(const Options&)>> commands{
      {"synth", cmd_synth}, {"ingest", cmd_ingest}, {"features", cmd_features}, {"train", cmd_train},
      {"eval", cmd_eval},   {"fuse", cmd_fuse},     {"report", cmd_report}};
  const std::map<std::string, std::string> help{
      {"synth", "Generate the synthetic corpus and a config for it"},
      {"ingest", "Decode media into the frame/audio cache"},
      {"features", "Write per-unit features for one modality"},
      {"train", "Train per-modality models on the training split"},
      {"eval", "Score the test split with trained models"},
      {"fuse", "Vote over per-modality verdicts"},
      {"report", "Run the full experiment and write report.json / report.md"}};
  for (const auto& [name, fn] : commands) {
    auto* sub = app.add_subcommand(name, help.at(name));
    add_common(sub);
    if (name == "synth") sub->add_option("--videos", o.videos, "Number of videos (even, >= 8)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  try {
    for (const auto& [name, fn] : commands)
      if (app.got_subcommand(name)) return fn(o);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const ContractError& e) {
    std::cerr << "internal contract violation: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
