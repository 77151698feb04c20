#pragma once

// Deterministic JSON and Markdown renderings of a ReportBundle.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "ddp/harness/experiment.hpp"

namespace ddp {

inline nlohmann::ordered_json verdict_to_json(const ModalityVerdict& v) {
  nlohmann::ordered_json j = {{"modality", std::string(to_string(v.modality))}, {"video_id", v.video_id}};
  j["score"] = v.score ? nlohmann::ordered_json(*v.score) : nlohmann::ordered_json(nullptr);
  j["label"] = v.label ? nlohmann::ordered_json(std::string(to_string(*v.label))) : nlohmann::ordered_json("abstain");
  j["n_units"] = v.n_units;
  return j;
}

inline nlohmann::ordered_json report_to_json(const ReportBundle& rb) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["format_version"] = rb.format_version;
  j["seed"] = rb.seed;
  j["manifest_hash"] = rb.manifest_hash;
  j["config"] = rb.config;
  ordered_json splits = ordered_json::array();
  for (const auto& s : rb.splits) splits.push_back(split_to_json(s));
  j["splits"] = splits;
  ordered_json mods = ordered_json::object();
  for (Modality m : kAllModalities) {
    auto it = rb.modality_metrics.find(m);
    if (it == rb.modality_metrics.end()) continue;
    ordered_json e = metrics_to_json(it->second);
    e["n_train_units"] = rb.train_units.count(m) ? rb.train_units.at(m) : 0;
    mods[std::string(to_string(m))] = e;
  }
  j["modalities"] = mods;
  ordered_json fused = ordered_json::object();
  for (const auto& [mode, met] : rb.fused_metrics) fused[to_string(mode)] = metrics_to_json(met);
  j["fusion"] = {{"primary_mode", to_string(rb.primary_mode)}, {"metrics", fused}, {"no_evidence", rb.no_evidence}};
  j["leakage_checks"] = rb.leakage_checks;
  j["reference_dataset"] = rb.reference_dataset ? ordered_json(*rb.reference_dataset) : ordered_json(nullptr);
  j["reference_comparison"] = comparison_to_json(rb.comparison);
  return j;
}

inline std::string report_to_markdown(const ReportBundle& rb) {
  std::string md = "# Experiment report\n\n";
  md += "- format_version: " + std::to_string(rb.format_version) + "\n";
  md += "- seed: " + std::to_string(rb.seed) + "\n";
  md += "- manifest hash: " + rb.manifest_hash + "\n";
  md += "- splits: " + std::to_string(rb.splits.size()) + "\n";
  md += "- leakage checks passed: " + std::to_string(rb.leakage_checks) + "\n\n";

  md += "## Per-modality metrics (video level)\n\n";
  md += "| modality | accuracy | precision | recall | F1 | TP | FP | FN | TN | scored | abstained | train units |\n";
  md += "|---|---|---|---|---|---|---|---|---|---|---|---|\n";
  auto row = [&](const std::string& name, const Metrics& m, const std::string& units) {
    md += "| " + name + " | " + format_fixed(m.accuracy) + " | " + format_fixed(m.precision) + " | " +
          format_fixed(m.recall) + " | " + format_fixed(m.f1) + " | " + std::to_string(m.tp) + " | " +
          std::to_string(m.fp) + " | " + std::to_string(m.fn) + " | " + std::to_string(m.tn) + " | " +
          std::to_string(m.n_scored()) + " | " + std::to_string(m.n_abstained) + " | " + units + " |\n";
  };
  for (Modality m : kAllModalities)
    if (auto it = rb.modality_metrics.find(m); it != rb.modality_metrics.end())
      row(std::string(to_string(m)), it->second, std::to_string(rb.train_units.count(m) ? rb.train_units.at(m) : 0));
  md += "\n## Fusion\n\n";
  md += "| mode | accuracy | precision | recall | F1 | TP | FP | FN | TN | scored | abstained | |\n";
  md += "|---|---|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& [mode, m] : rb.fused_metrics)
    row(to_string(mode) + (mode == rb.primary_mode ? " (primary)" : ""), m, "");
  if (!rb.no_evidence.empty()) {
    md += "\nVideos with no evidence from any modality: ";
    for (std::size_t i = 0; i < rb.no_evidence.size(); ++i) md += (i ? ", " : "") + rb.no_evidence[i];
    md += "\n";
  }
  md += "\n## Reference comparison (informational)\n\n";
  md += rb.reference_dataset ? "Manifest dataset: " + *rb.reference_dataset + ".\n\n"
                             : "The manifest is not one of the published datasets; the ours column is n/a.\n\n";
  md += render_comparison_markdown(rb.comparison);
  md += "\nRows marked as an inconsistent pair carry two published values for the same cell.\n";
  return md;
}

/// Writes report.json, report.md, verdicts.jsonl and fused.jsonl.
inline void write_report(const std::filesystem::path& out_dir, const ReportBundle& rb) {
  std::filesystem::create_directories(out_dir);
  detail::write_file_bytes(out_dir / "report.json", report_to_json(rb).dump(2) + "\n");
  detail::write_file_bytes(out_dir / "report.md", report_to_markdown(rb));
  std::string verdicts;
  for (const auto& [m, per_video] : rb.verdicts)
    for (const auto& [id, v] : per_video) verdicts += verdict_to_json(v).dump() + "\n";
  detail::write_file_bytes(out_dir / "verdicts.jsonl", verdicts);
  std::string fused;
  for (const auto& f : rb.fused) fused += fused_to_json(f).dump() + "\n";
  detail::write_file_bytes(out_dir / "fused.jsonl", fused);
}

}  // namespace ddp
