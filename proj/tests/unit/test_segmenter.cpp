#include "doctest.h"

#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "segparse/grammar.hpp"
#include "segparse/segmenter_model.hpp"

using namespace segparse;

namespace {

const SignatureTable& table() { return SignatureTable::geo_default(); }

SegmenterConfig tiny_config() {
  SegmenterConfig cfg;
  cfg.emb_dim = 8;
  cfg.hidden = 10;
  cfg.dropout = 0.0;
  cfg.batch_size = 8;
  cfg.epochs = 3;
  cfg.seed = 5;
  return cfg;
}

VocabMap synth_vocab() {
  auto data = generate(default_rules(), 60, 3, 19, table());
  return build_vocab(data, 1).input;
}

}  // namespace

TEST_CASE("span distributions are simplexes") {
  Segmenter seg(synth_vocab(), tiny_config());
  auto [ps, pe] = seg.span_distributions({"how", "many", "rivers", "?"});
  CHECK(ps.sum() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(pe.sum() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(ps.minCoeff() >= 0.0);
  CHECK(pe.minCoeff() >= 0.0);
}

TEST_CASE("length-1 input degenerates to a point mass and whole span") {
  Segmenter seg(synth_vocab(), tiny_config());
  auto [ps, pe] = seg.span_distributions({"colorado"});
  CHECK(ps.size() == 1);
  CHECK(ps(0) == doctest::Approx(1.0));
  CHECK(pe(0) == doctest::Approx(1.0));
  CHECK(seg.predict_span({"colorado"}) == Span::whole(1));
}

TEST_CASE("predict_span equals the exhaustive pair scan") {
  // Multiple random models and inputs; all lengths up to 30.
  auto data = generate(default_rules(), 60, 3, 53, table());
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    SegmenterConfig cfg = tiny_config();
    cfg.seed = seed;
    Segmenter seg(synth_vocab(), cfg);
    for (const auto& inst : data) {
      auto [ps, pe] = seg.span_distributions(inst.utterance);
      Span got = seg.predict_span(inst.utterance);
      Span want = oracles::span_scan(ps, pe);
      CHECK(got == want);
      CHECK(got.valid_for(inst.utterance.size()));
    }
  }
  // Long input exercise.
  Segmenter seg(synth_vocab(), tiny_config());
  std::vector<std::string> long_input(30, "state");
  auto [ps, pe] = seg.span_distributions(long_input);
  CHECK(seg.predict_span(long_input) == oracles::span_scan(ps, pe));
}

TEST_CASE("infeasible peaks resolve to the best feasible pair") {
  // If the end head peaks before the start head, the argmax must still
  // satisfy i < j; the oracle scan defines the answer.
  Segmenter seg(synth_vocab(), tiny_config());
  bool saw_infeasible_peak = false;
  auto data = generate(default_rules(), 120, 3, 59, table());
  for (const auto& inst : data) {
    auto [ps, pe] = seg.span_distributions(inst.utterance);
    int argmax_s = 0, argmax_e = 0;
    ps.maxCoeff(&argmax_s);
    pe.maxCoeff(&argmax_e);
    Span got = seg.predict_span(inst.utterance);
    if (argmax_s >= argmax_e) {
      saw_infeasible_peak = true;
      CHECK(got == oracles::span_scan(ps, pe));
      CHECK(got.start < got.end);
    }
  }
  CHECK(saw_infeasible_peak);  // random models hit this case
}

TEST_CASE("segmenter gradients match central finite differences") {
  VocabMap vocab = synth_vocab();
  Segmenter seg(vocab, tiny_config());
  auto data = generate(default_rules(), 8, 3, 61, table());
  std::vector<std::pair<std::vector<std::string>, Span>> signals;
  for (const auto& inst : data)
    signals.emplace_back(inst.utterance, inst.gold_spans[0].first);

  auto& store = seg.params();
  auto loss_value = [&]() { return seg.batch_loss(signals, false); };
  store.zero_grad();
  seg.batch_loss(signals, true);

  std::mt19937_64 rng(17);
  std::uniform_int_distribution<std::size_t> dist(0, store.scalar_count() - 1);
  for (int k = 0; k < 20; ++k) {
    std::size_t flat = dist(rng);
    const double fd = oracles::central_difference(store, flat, loss_value);
    CHECK(oracles::relative_error(store.grad_scalar(flat), fd) < 1e-4);
  }
  // W_I explicitly, per the span-loss example.
  const int wi = store.find("W_I");
  REQUIRE(wi >= 0);
  std::size_t offset = 0;
  for (int p = 0; p < wi; ++p)
    offset += static_cast<std::size_t>(store.value(p).size());
  const double fd = oracles::central_difference(store, offset, loss_value);
  CHECK(oracles::relative_error(store.grad_scalar(offset), fd) < 1e-4);
}

TEST_CASE("factorized objective: loss is the sum of the two head NLLs") {
  VocabMap vocab = synth_vocab();
  Segmenter seg(vocab, tiny_config());
  std::vector<std::string> x = {"the", "states", "bordering", "texas", "?"};
  Span span{1, 4};
  auto [ps, pe] = seg.span_distributions(x);
  const double expect = -std::log(ps(span.start - 1)) - std::log(pe(span.end - 1));
  CHECK(seg.batch_loss({{x, span}}, false) ==
        doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("learning rate zero leaves parameters unchanged") {
  SegmenterConfig cfg = tiny_config();
  cfg.learning_rate = 0.0;
  cfg.epochs = 2;
  Segmenter seg(synth_vocab(), cfg);
  auto data = generate(default_rules(), 10, 2, 67, table());
  std::vector<std::pair<std::vector<std::string>, Span>> signals;
  for (const auto& inst : data)
    signals.emplace_back(inst.utterance, inst.gold_spans[0].first);
  std::vector<double> before;
  for (std::size_t i = 0; i < seg.params().scalar_count(); i += 53)
    before.push_back(seg.params().get_scalar(i));
  seg.train(signals);
  std::size_t k = 0;
  for (std::size_t i = 0; i < seg.params().scalar_count(); i += 53)
    CHECK(seg.params().get_scalar(i) == before[k++]);
}

TEST_CASE("train validates spans") {
  Segmenter seg(synth_vocab(), tiny_config());
  CHECK_THROWS(seg.train({{{"a", "b", "c"}, Span{2, 5}}}));
  CHECK_THROWS(seg.train({}));
}

TEST_CASE("checkpoint round trip and vocab hash refusal") {
  VocabMap vocab = synth_vocab();
  Segmenter seg(vocab, tiny_config());
  auto dir = std::filesystem::temp_directory_path() / "segparse_seg_ckpt";
  std::filesystem::remove_all(dir);
  seg.save(dir.string());
  Segmenter back = Segmenter::load(dir.string(), vocab);
  for (std::size_t i = 0; i < seg.params().scalar_count(); i += 101)
    CHECK(back.params().get_scalar(i) == seg.params().get_scalar(i));

  auto other_data = generate(default_rules(), 10, 1, 91, table());
  VocabMap other = build_vocab(other_data, 1).input;
  Vocabulary a, b;
  a.input = vocab;
  b.input = other;
  if (a.hash() != b.hash())
    CHECK_THROWS_AS(Segmenter::load(dir.string(), other), CheckpointError);
  std::filesystem::remove_all(dir);
}
