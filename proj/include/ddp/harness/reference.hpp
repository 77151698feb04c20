#pragma once

// Published reference accuracies used for the informational comparison in
// reports. Nothing here is a pass/fail threshold.

#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ddp {

struct ReferenceValue {
  std::string_view dataset;  // "rlt" or "mu3d"
  std::string_view row;      // visual | acoustic | lexical | fused
  double value;
  std::string_view citation;
};

/// Headline per-modality and fused accuracies. Rows sharing (dataset, row)
/// with different values are inconsistent published pairs and are reported
/// as a range.
inline constexpr std::array<ReferenceValue, 9> kHeadlineReference{{
    {"rlt", "visual", 0.97, "Table 2"},
    {"rlt", "acoustic", 0.96, "Table 3"},
    {"rlt", "lexical", 0.92, "Table 4"},
    {"rlt", "fused", 0.97, "Table 5"},
    {"rlt", "fused", 0.90, "Conclusion (\"around 90%\")"},
    {"mu3d", "visual", 0.97, "Abstract"},
    {"mu3d", "acoustic", 0.82, "Abstract"},
    {"mu3d", "lexical", 0.73, "Abstract"},
    {"mu3d", "fused", 0.77, "Conclusion"},
}};

struct GridReference {
  std::string_view dataset;
  std::string_view model;
  std::string_view setting;
  double value;
  std::string_view citation;
};

inline constexpr std::array<GridReference, 36> kGridReference{{
    {"rlt", "lexical svm", "C=1 gamma=4", 0.79, "Table 6"},
    {"rlt", "lexical svm", "C=1 gamma=9", 0.91, "Table 6"},
    {"rlt", "lexical svm", "C=2 gamma=9", 0.82, "Table 6"},
    {"rlt", "lexical svm", "C=3 gamma=9", 0.74, "Table 6"},
    {"mu3d", "lexical svm", "C=1 gamma=3", 0.65, "Table 6"},
    {"mu3d", "lexical svm", "C=1 gamma=9", 0.6875, "Table 6"},
    {"mu3d", "lexical svm", "C=2 gamma=9", 0.66, "Table 6"},
    {"mu3d", "lexical svm", "C=3 gamma=9", 0.60, "Table 6"},
    {"rlt", "lexical mnb", "alpha=1", 0.92, "Table 7"},
    {"mu3d", "lexical mnb", "alpha=1", 0.73, "Table 7"},
    {"rlt", "acoustic svm", "C=3 gamma=1", 0.96, "Table 8"},
    {"rlt", "acoustic svm", "C=2 gamma=1", 0.96, "Table 8"},
    {"rlt", "acoustic svm", "C=4 gamma=1", 0.97, "Table 8"},
    {"mu3d", "acoustic svm", "C=3 gamma=1", 0.52, "Table 8"},
    {"mu3d", "acoustic svm", "C=2 gamma=1", 0.53, "Table 8"},
    {"mu3d", "acoustic svm", "C=4 gamma=1", 0.52, "Table 8"},
    {"rlt", "acoustic forest", "max_depth=2", 0.79, "Table 9"},
    {"rlt", "acoustic forest", "max_depth=3", 0.82, "Table 9"},
    {"rlt", "acoustic forest", "max_depth=4", 0.84, "Table 9"},
    {"mu3d", "acoustic forest", "max_depth=2", 0.57, "Table 9"},
    {"mu3d", "acoustic forest", "max_depth=3", 0.56, "Table 9"},
    {"mu3d", "acoustic forest", "max_depth=4", 0.54, "Table 9"},
    {"rlt", "acoustic boost", "n=100 lr=1.0 depth=1", 0.90, "Table 10"},
    {"rlt", "acoustic boost", "n=50 lr=1.0 depth=1", 0.88, "Table 10"},
    {"rlt", "acoustic boost", "n=10 lr=0.5 depth=1", 0.81, "Table 10"},
    {"rlt", "acoustic boost", "n=10 lr=0.1 depth=3", 0.84, "Table 10"},
    {"rlt", "acoustic boost", "n=20 lr=0.3 depth=5", 0.93, "Table 10"},
    {"rlt", "acoustic boost", "n=5 lr=0.1 depth=1", 0.82, "Table 10"},
    {"mu3d", "acoustic boost", "n=100 lr=1.0 depth=1", 0.53, "Table 10"},
    {"mu3d", "acoustic boost", "n=50 lr=1.0 depth=1", 0.53, "Table 10"},
    {"mu3d", "acoustic boost", "n=10 lr=0.5 depth=1", 0.81, "Table 10"},
    {"mu3d", "acoustic boost", "n=10 lr=0.1 depth=3", 0.52, "Table 10"},
    {"mu3d", "acoustic boost", "n=20 lr=0.3 depth=5", 0.52, "Table 10"},
    {"mu3d", "acoustic boost", "n=5 lr=0.1 depth=1", 0.82, "Table 10"},
    {"rlt", "visual cnn", "single_face filtering", 0.95, "Table 11"},
    {"rlt", "visual cnn", "no filtering", 0.97, "Table 11"},
}};

struct ComparisonRow {
  std::string dataset;
  std::string row;
  std::optional<double> ours;
  std::vector<const ReferenceValue*> references;  // one, or several for a flagged pair

  bool flagged() const { return references.size() > 1; }
};

/// Headline rows for `dataset` in visual, acoustic, lexical, fused order.
inline std::vector<ComparisonRow> compare_to_reference(const std::string& dataset,
                                                       const std::optional<double> (&ours)[4]) {
  static constexpr std::array<std::string_view, 4> rows{"visual", "acoustic", "lexical", "fused"};
  std::vector<ComparisonRow> out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    ComparisonRow row{dataset, std::string(rows[r]), ours[r], {}};
    for (const auto& ref : kHeadlineReference)
      if (ref.dataset == dataset && ref.row == rows[r])
        row.references.push_back(&ref);
    out.push_back(std::move(row));
  }
  return out;
}

/// Fixed 4-decimal rendering so reports do not depend on printf defaults.
inline std::string format_fixed(double v, int decimals = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s(buf);
  if (s == "-0.0000") s = "0.0000";
  return s;
}

inline std::string render_comparison_markdown(const std::vector<ComparisonRow>& rows) {
  std::string md = "| dataset | row | ours | reference | delta (ours - reference) | source |\n";
  md += "|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    for (const auto* ref : r.references) {
      md += "| " + r.dataset + " | " + r.row + (r.flagged() ? " (inconsistent pair)" : "") + " | ";
      md += r.ours ? format_fixed(*r.ours) : std::string("n/a");
      md += " | " + format_fixed(ref->value) + " | ";
      md += r.ours ? format_fixed(*r.ours - ref->value) : std::string("n/a");
      md += " | " + std::string(ref->citation) + " |\n";
    }
  }
  return md;
}

inline nlohmann::ordered_json comparison_to_json(const std::vector<ComparisonRow>& rows) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json refs = nlohmann::ordered_json::array();
    for (const auto* ref : r.references) {
      nlohmann::ordered_json j = {{"value", ref->value}, {"citation", std::string(ref->citation)}};
      j["delta"] = r.ours ? nlohmann::ordered_json(*r.ours - ref->value) : nlohmann::ordered_json(nullptr);
      refs.push_back(j);
    }
    nlohmann::ordered_json row = {{"dataset", r.dataset}, {"row", r.row}};
    row["ours"] = r.ours ? nlohmann::ordered_json(*r.ours) : nlohmann::ordered_json(nullptr);
    row["flagged_inconsistent"] = r.flagged();
    row["references"] = refs;
    out.push_back(row);
  }
  return out;
}

}  // namespace ddp
