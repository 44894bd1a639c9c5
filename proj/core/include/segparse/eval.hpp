#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "segparse/dataset.hpp"
#include "segparse/span.hpp"

namespace segparse {

/// Exact-match evaluation results. Fractions are in [0, 1]; failed parses
/// count as wrong.
struct EvalReport {
  int n = 0;
  double exact_match_accuracy = 0.0;
  std::map<std::string, double> by_split;
  std::map<int, double> by_depth;  // gold nesting depth (synthetic only)
  std::optional<double> segmentation_agreement;
  std::string traces_path;

  std::string to_json() const;
  static EvalReport from_json(const std::string& text);
  static EvalReport load(const std::string& path);
  void save(const std::string& path) const;
};

/// Scores predictions against gold by canonical equality. labels may be
/// empty (instance labels are used, defaulting to "all"); otherwise it must
/// parallel the inputs. first_spans, when given, yields the fraction of
/// first predicted spans matching the gold innermost span over instances
/// that have gold spans. Throws LengthMismatch.
EvalReport evaluate(const std::vector<std::optional<MrNode>>& predictions,
                    const std::vector<Instance>& gold,
                    const std::vector<std::string>& labels = {},
                    const std::vector<std::optional<Span>>& first_spans = {});

/// Fixed-width accuracy-delta table between two reports, plus a JSON form.
struct Comparison {
  std::string text_table;
  std::string json;
};
Comparison compare_reports(const EvalReport& baseline, const EvalReport& other);

}  // namespace segparse
