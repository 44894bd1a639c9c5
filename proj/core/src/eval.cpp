#include "segparse/eval.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "json.hpp"

namespace segparse {

using nlohmann::json;

EvalReport evaluate(const std::vector<std::optional<MrNode>>& predictions,
                    const std::vector<Instance>& gold,
                    const std::vector<std::string>& labels,
                    const std::vector<std::optional<Span>>& first_spans) {
  if (predictions.size() != gold.size())
    throw LengthMismatch("predictions/gold length mismatch: " +
                         std::to_string(predictions.size()) + " vs " +
                         std::to_string(gold.size()));
  if (!labels.empty() && labels.size() != gold.size())
    throw LengthMismatch("labels length mismatch");
  if (!first_spans.empty() && first_spans.size() != gold.size())
    throw LengthMismatch("first_spans length mismatch");

  EvalReport report;
  report.n = static_cast<int>(gold.size());
  int correct = 0;
  std::map<std::string, std::pair<int, int>> split_counts;
  std::map<int, std::pair<int, int>> depth_counts;
  int span_hits = 0, span_total = 0;

  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool ok =
        predictions[i] && canonical_equal(*predictions[i], gold[i].mr);
    correct += ok ? 1 : 0;
    std::string label = labels.empty() ? gold[i].label : labels[i];
    if (label.empty()) label = "all";
    auto& sc = split_counts[label];
    sc.first += ok ? 1 : 0;
    sc.second += 1;
    if (!gold[i].gold_spans.empty()) {
      auto& dc = depth_counts[static_cast<int>(gold[i].gold_spans.size())];
      dc.first += ok ? 1 : 0;
      dc.second += 1;
      if (!first_spans.empty()) {
        ++span_total;
        if (first_spans[i] && *first_spans[i] == gold[i].gold_spans[0].first)
          ++span_hits;
      }
    }
  }
  report.exact_match_accuracy =
      gold.empty() ? 0.0
                   : static_cast<double>(correct) / static_cast<double>(gold.size());
  for (const auto& [label, c] : split_counts)
    report.by_split[label] =
        static_cast<double>(c.first) / static_cast<double>(c.second);
  for (const auto& [depth, c] : depth_counts)
    report.by_depth[depth] =
        static_cast<double>(c.first) / static_cast<double>(c.second);
  if (span_total > 0)
    report.segmentation_agreement =
        static_cast<double>(span_hits) / static_cast<double>(span_total);
  return report;
}

std::string EvalReport::to_json() const {
  json j;
  j["n"] = n;
  j["exact_match_accuracy"] = exact_match_accuracy;
  j["by_split"] = json::object();
  for (const auto& [k, v] : by_split) j["by_split"][k] = v;
  j["by_depth"] = json::object();
  for (const auto& [k, v] : by_depth) j["by_depth"][std::to_string(k)] = v;
  if (segmentation_agreement)
    j["segmentation_agreement"] = *segmentation_agreement;
  if (!traces_path.empty()) j["traces_path"] = traces_path;
  return j.dump(2);
}

EvalReport EvalReport::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("bad report JSON: ") + e.what());
  }
  EvalReport r;
  r.n = j.at("n").get<int>();
  r.exact_match_accuracy = j.at("exact_match_accuracy").get<double>();
  for (auto& [k, v] : j.value("by_split", json::object()).items())
    r.by_split[k] = v.get<double>();
  for (auto& [k, v] : j.value("by_depth", json::object()).items())
    r.by_depth[std::stoi(k)] = v.get<double>();
  if (j.contains("segmentation_agreement"))
    r.segmentation_agreement = j.at("segmentation_agreement").get<double>();
  r.traces_path = j.value("traces_path", "");
  return r;
}

EvalReport EvalReport::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open report: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void EvalReport::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report: " + path);
  out << to_json() << '\n';
}

Comparison compare_reports(const EvalReport& baseline, const EvalReport& other) {
  std::set<std::string> splits;
  for (const auto& [k, v] : baseline.by_split) splits.insert(k);
  for (const auto& [k, v] : other.by_split) splits.insert(k);

  std::ostringstream table;
  json j;
  table << std::left << std::setw(18) << "split" << std::right << std::setw(10)
        << "baseline" << std::setw(10) << "other" << std::setw(10) << "delta"
        << '\n';
  auto row = [&](const std::string& name, double a, double b) {
    table << std::left << std::setw(18) << name << std::right << std::fixed
          << std::setprecision(4) << std::setw(10) << a << std::setw(10) << b
          << std::showpos << std::setw(10) << (b - a) << std::noshowpos << '\n';
    j[name] = {{"baseline", a}, {"other", b}, {"delta", b - a}};
  };
  row("overall", baseline.exact_match_accuracy, other.exact_match_accuracy);
  for (const auto& s : splits) {
    const double a =
        baseline.by_split.count(s) ? baseline.by_split.at(s) : 0.0;
    const double b = other.by_split.count(s) ? other.by_split.at(s) : 0.0;
    row(s, a, b);
  }
  return Comparison{table.str(), j.dump(2)};
}

}  // namespace segparse
