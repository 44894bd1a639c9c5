#include "doctest.h"

#include <algorithm>
#include <random>

#include "segparse/eval.hpp"
#include "segparse/grammar.hpp"

using namespace segparse;

namespace {
const SignatureTable& table() { return SignatureTable::geo_default(); }
}

TEST_CASE("perfect predictions score 1.0, failures 0.0") {
  auto gold = generate(default_rules(), 50, 3, 107, table());
  std::vector<std::optional<MrNode>> perfect, failed;
  for (const auto& inst : gold) {
    perfect.emplace_back(inst.mr);
    failed.emplace_back(std::nullopt);
  }
  CHECK(evaluate(perfect, gold).exact_match_accuracy == 1.0);
  CHECK(evaluate(failed, gold).exact_match_accuracy == 0.0);
}

TEST_CASE("split breakdown matches per-label accuracy") {
  auto gold = generate(default_rules(), 100, 3, 109, table());
  std::vector<std::optional<MrNode>> preds;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    preds.emplace_back(i < 81 ? std::optional<MrNode>(gold[i].mr)
                              : std::nullopt);
    labels.push_back("compositional");
  }
  EvalReport r = evaluate(preds, gold, labels);
  CHECK(r.by_split.at("compositional") == doctest::Approx(0.81));
  CHECK(r.n == 100);
}

TEST_CASE("length mismatches throw") {
  auto gold = generate(default_rules(), 5, 2, 113, table());
  std::vector<std::optional<MrNode>> preds(4);
  CHECK_THROWS_AS(evaluate(preds, gold), LengthMismatch);
  std::vector<std::optional<MrNode>> ok(5);
  CHECK_THROWS_AS(evaluate(ok, gold, {"a", "b"}), LengthMismatch);
}

TEST_CASE("evaluation is order-invariant under consistent permutation") {
  auto gold = generate(default_rules(), 60, 3, 127, table());
  std::vector<std::optional<MrNode>> preds;
  for (std::size_t i = 0; i < gold.size(); ++i)
    preds.emplace_back(i % 3 == 0 ? std::optional<MrNode>(gold[i].mr)
                                  : std::nullopt);
  EvalReport before = evaluate(preds, gold);

  std::vector<std::size_t> perm(gold.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::mt19937_64 rng(5);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Instance> gold2;
  std::vector<std::optional<MrNode>> preds2;
  for (std::size_t i : perm) {
    gold2.push_back(gold[i]);
    preds2.push_back(preds[i]);
  }
  EvalReport after = evaluate(preds2, gold2);
  CHECK(before.exact_match_accuracy == after.exact_match_accuracy);
  CHECK(before.by_depth == after.by_depth);
}

TEST_CASE("depth breakdown and segmentation agreement") {
  auto gold = generate(default_rules(), 80, 3, 131, table());
  std::vector<std::optional<MrNode>> preds;
  std::vector<std::optional<Span>> spans;
  for (const auto& inst : gold) {
    preds.emplace_back(inst.mr);
    spans.emplace_back(inst.gold_spans[0].first);
  }
  // Miss the span on the first instance only.
  spans[0] = Span{1, 2} == gold[0].gold_spans[0].first ? Span{1, 3} : Span{1, 2};
  EvalReport r = evaluate(preds, gold, {}, spans);
  REQUIRE(r.segmentation_agreement.has_value());
  CHECK(*r.segmentation_agreement ==
        doctest::Approx(1.0 - 1.0 / static_cast<double>(gold.size())));
  CHECK(!r.by_depth.empty());
  for (const auto& [depth, acc] : r.by_depth) CHECK(acc == 1.0);
}

TEST_CASE("report JSON round trip and comparison table") {
  EvalReport a;
  a.n = 100;
  a.exact_match_accuracy = 0.631;
  a.by_split["unseen"] = 0.631;
  EvalReport b;
  b.n = 100;
  b.exact_match_accuracy = 0.812;
  b.by_split["unseen"] = 0.812;

  EvalReport a2 = EvalReport::from_json(a.to_json());
  CHECK(a2.exact_match_accuracy == a.exact_match_accuracy);
  CHECK(a2.by_split == a.by_split);

  Comparison cmp = compare_reports(a, b);
  CHECK(cmp.text_table.find("overall") != std::string::npos);
  CHECK(cmp.text_table.find("unseen") != std::string::npos);
  CHECK(cmp.json.find("delta") != std::string::npos);
  CHECK(cmp.text_table.find("+0.181") != std::string::npos);
}
