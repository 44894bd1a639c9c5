#include "doctest.h"

#include <filesystem>
#include <map>
#include <memory>

#include "segparse/config.hpp"
#include "segparse/grammar.hpp"
#include "segparse/pipeline.hpp"

using namespace segparse;

namespace {

const SignatureTable& table() { return SignatureTable::geo_default(); }

/// Gold oracles for one instance: the segmenter returns the recorded gold
/// span for each reduced utterance, the parser the paired partial MR.
struct GoldOracles {
  std::map<std::vector<std::string>, Span> spans;
  std::map<std::vector<std::string>, MrNode> parses;

  explicit GoldOracles(const Instance& inst) {
    std::vector<std::string> x = inst.utterance;
    for (std::size_t k = 0; k < inst.gold_spans.size(); ++k) {
      const auto& [span, partial] = inst.gold_spans[k];
      spans[x] = span;
      std::vector<std::string> span_tokens(x.begin() + (span.start - 1),
                                           x.begin() + span.end);
      parses[span_tokens] = partial;
      if (k + 1 < inst.gold_spans.size())
        x = reduce_utterance(x, span, denotation_type(partial, table()));
    }
  }

  SpanPredictorFn predictor() const {
    return [this](const std::vector<std::string>& tokens) {
      auto it = spans.find(tokens);
      return it == spans.end() ? Span::whole(tokens.size()) : it->second;
    };
  }
  SpanParserFn parser() const {
    return [this](const std::vector<std::string>& tokens)
               -> std::optional<MrNode> {
      auto it = parses.find(tokens);
      if (it == parses.end()) return std::nullopt;
      return it->second;
    };
  }
};

}  // namespace

TEST_CASE("infer with gold oracles reproduces the gold MR") {
  auto data = generate(default_rules(), 250, 3, 97, table());
  int exact = 0;
  for (const auto& inst : data) {
    GoldOracles oracles(inst);
    InferenceTrace t = infer(inst.utterance, oracles.predictor(),
                             oracles.parser(), table(), 8);
    REQUIRE(t.final_mr.has_value());
    if (canonical_equal(*t.final_mr, inst.mr)) ++exact;
    CHECK(t.stop_reason == StopReason::WholeSpan);
    CHECK(t.iterations.size() == inst.gold_spans.size());
    // Reduced utterances strictly shrink except at the final whole step.
    for (std::size_t k = 0; k + 1 < t.iterations.size(); ++k)
      CHECK(t.iterations[k].reduced.size() < t.iterations[k].input.size());
  }
  CHECK(exact == static_cast<int>(data.size()));
}

TEST_CASE("atomic utterance stops in one whole-span iteration") {
  Instance inst;
  inst.utterance = tokenize("the capital of texas ?");
  inst.mr = parse_mr("capital_1(stateid('texas'))", table());
  inst.gold_spans.emplace_back(Span::whole(5), inst.mr);
  GoldOracles oracles(inst);
  InferenceTrace t = infer(inst.utterance, oracles.predictor(),
                           oracles.parser(), table(), 8);
  CHECK(t.iterations.size() == 1);
  CHECK(t.stop_reason == StopReason::WholeSpan);
  REQUIRE(t.final_mr.has_value());
  CHECK(canonical_equal(*t.final_mr, inst.mr));
}

TEST_CASE("adversarial segmenter terminates within the iteration cap") {
  // Always segments the first two tokens; the parser always returns a
  // state-typed MR, so every round reduces by one token.
  SpanPredictorFn always_front = [](const std::vector<std::string>& tokens) {
    if (tokens.size() < 3) return Span::whole(tokens.size());
    return Span{1, 2};
  };
  MrNode state_mr = parse_mr("state(next_to_2(stateid('utah')))", table());
  SpanParserFn constant_parser =
      [state_mr](const std::vector<std::string>&) -> std::optional<MrNode> {
    return state_mr;
  };
  std::vector<std::string> input(30, "state");
  InferenceTrace t = infer(input, always_front, constant_parser, table(), 8);
  CHECK(t.iterations.size() <= 9);  // 8 reductions plus the cap's whole parse
  CHECK(t.stop_reason == StopReason::MaxIters);
}

TEST_CASE("span parse failure falls back to a whole-utterance parse") {
  Instance inst;
  inst.utterance = tokenize("how many rivers run through utah ?");
  inst.mr = parse_mr("count(river(traverse_2(stateid('utah'))))", table());
  SpanPredictorFn bad_span = [](const std::vector<std::string>& tokens) {
    return Span{2, static_cast<int>(tokens.size()) - 1};
  };
  auto whole = inst.utterance;
  MrNode mr = inst.mr;
  SpanParserFn parser = [whole, mr](const std::vector<std::string>& tokens)
      -> std::optional<MrNode> {
    if (tokens == whole) return mr;
    return std::nullopt;  // every proper span fails
  };
  InferenceTrace t = infer(inst.utterance, bad_span, parser, table(), 8);
  CHECK(t.stop_reason == StopReason::ParseFailed);
  REQUIRE(t.final_mr.has_value());
  CHECK(canonical_equal(*t.final_mr, inst.mr));
}

TEST_CASE("ghost-producing span parses also fall back") {
  std::vector<std::string> utt = tokenize("the states bordering colorado ?");
  SpanPredictorFn front = [](const std::vector<std::string>& tokens) {
    return Span{1, 3};  // "the states bordering"
  };
  MrNode ghost = parse_mr("state(next_to_2(stateid('colorado')))", table());
  SpanParserFn parser = [ghost, utt](const std::vector<std::string>& tokens)
      -> std::optional<MrNode> {
    if (tokens == utt) return ghost;  // whole parse succeeds
    return ghost;                     // span parse carries a ghost entity
  };
  InferenceTrace t = infer(utt, front, parser, table(), 8);
  CHECK(t.stop_reason == StopReason::ParseFailed);
  REQUIRE(t.final_mr.has_value());
  CHECK(canonical_equal(*t.final_mr, ghost));
}

TEST_CASE("unparseable input yields a flagged failure, never a fake MR") {
  SpanPredictorFn whole = [](const std::vector<std::string>& tokens) {
    return Span::whole(tokens.size());
  };
  SpanParserFn never = [](const std::vector<std::string>&)
      -> std::optional<MrNode> { return std::nullopt; };
  InferenceTrace t = infer(tokenize("gibberish input ?"), whole, never,
                           table(), 8);
  CHECK_FALSE(t.final_mr.has_value());
  CHECK(t.stop_reason == StopReason::ParseFailed);
}

TEST_CASE("composition failures are flagged") {
  std::vector<std::string> utt = tokenize("how many rivers in utah ?");
  SpanPredictorFn front = [](const std::vector<std::string>& tokens) {
    if (tokens.size() < 5) return Span::whole(tokens.size());
    return Span{4, 5};  // "in utah"
  };
  MrNode state_mr = parse_mr("state(next_to_2(stateid('utah')))", table());
  MrNode no_placeholder = parse_mr("count(river(all))", table());
  SpanParserFn parser = [=](const std::vector<std::string>& tokens)
      -> std::optional<MrNode> {
    if (tokens.size() == 2) return state_mr;
    return no_placeholder;  // whole parse lacks the $state$ placeholder
  };
  InferenceTrace t = infer(utt, front, parser, table(), 8);
  CHECK(t.stop_reason == StopReason::ComposeError);
  CHECK_FALSE(t.final_mr.has_value());
}

TEST_CASE("trace files round trip") {
  auto data = generate(default_rules(), 20, 3, 101, table());
  std::vector<InferenceTrace> traces;
  for (const auto& inst : data) {
    GoldOracles oracles(inst);
    traces.push_back(infer(inst.utterance, oracles.predictor(),
                           oracles.parser(), table(), 8));
  }
  auto path = std::filesystem::temp_directory_path() / "segparse_traces.jsonl";
  save_traces(traces, path.string());
  auto back = load_traces(path.string(), table());
  REQUIRE(back.size() == traces.size());
  for (std::size_t i = 0; i < traces.size(); ++i) {
    CHECK(back[i].stop_reason == traces[i].stop_reason);
    REQUIRE(back[i].final_mr.has_value() == traces[i].final_mr.has_value());
    if (traces[i].final_mr)
      CHECK(canonical_equal(*back[i].final_mr, *traces[i].final_mr));
    REQUIRE(back[i].iterations.size() == traces[i].iterations.size());
    for (std::size_t k = 0; k < traces[i].iterations.size(); ++k) {
      CHECK(back[i].iterations[k].span == traces[i].iterations[k].span);
      CHECK(back[i].iterations[k].input == traces[i].iterations[k].input);
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("config file parsing") {
  PipelineConfig cfg = parse_config(
      "# comment\n"
      "emb_dim = 16\n"
      "parser_hidden = 24\n"
      "segmenter_hidden = 20\n"
      "pretrain_epochs = 4\n"
      "finetune_epochs = 2\n"
      "segmenter_epochs = 3\n"
      "learning_rate = 0.002\n"
      "dropout = 0.1\n"
      "batch_size = 16\n"
      "beam = 2\n"
      "max_iters = 6\n"
      "recurse = false\n"
      "copy = true\n"
      "anonymize_mr = true\n");
  CHECK(cfg.parser.emb_dim == 16);
  CHECK(cfg.parser.hidden == 24);
  CHECK(cfg.segmenter.hidden == 20);
  CHECK(cfg.parser.epochs == 4);
  CHECK(cfg.finetune_epochs == 2);
  CHECK(cfg.segmenter.epochs == 3);
  CHECK(cfg.parser.learning_rate == 0.002);
  CHECK(cfg.parser.dropout == 0.1);
  CHECK(cfg.parser.batch_size == 16);
  CHECK(cfg.beam == 2);
  CHECK(cfg.max_iters == 6);
  CHECK_FALSE(cfg.recurse);
  CHECK(cfg.parser.copy_enabled);
  CHECK(cfg.anonymize_mr);

  CHECK_THROWS_AS(parse_config("bogus_key = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("emb_dim : 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("recurse = maybe\n"), ConfigError);

  // Round trip through the text form.
  PipelineConfig back = parse_config(config_to_text(cfg));
  CHECK(config_to_text(back) == config_to_text(cfg));
}

TEST_CASE("run_training produces a deterministic report on a tiny dataset") {
  auto data = generate(default_rules(), 60, 2, 103, table());
  std::vector<Instance> train(data.begin(), data.begin() + 50);
  std::vector<Instance> dev(data.begin() + 50, data.end());

  PipelineConfig cfg;
  cfg.parser.emb_dim = 10;
  cfg.parser.hidden = 12;
  cfg.parser.epochs = 2;
  cfg.parser.dropout = 0.0;
  cfg.segmenter.emb_dim = 10;
  cfg.segmenter.hidden = 12;
  cfg.segmenter.epochs = 2;
  cfg.finetune_epochs = 1;
  cfg.beam = 1;
  cfg.reseed(9);

  TrainOutcome a = run_training(train, dev, cfg);
  TrainOutcome b = run_training(train, dev, cfg);
  CHECK(a.report_json == b.report_json);
  CHECK(a.report_json.find("pretrain") != std::string::npos);
  CHECK(a.report_json.find("whole_span_fraction") != std::string::npos);
  CHECK(a.report_json.find("pde") != std::string::npos);

  // Stage-1 snapshot differs from the fine-tuned parser.
  bool differs = false;
  for (std::size_t i = 0; i < a.baseline.params().scalar_count(); i += 257) {
    if (a.baseline.params().get_scalar(i) != a.parser.params().get_scalar(i)) {
      differs = true;
      break;
    }
  }
  CHECK(differs);
}

TEST_CASE("run_training rejects an empty train set") {
  PipelineConfig cfg;
  CHECK_THROWS(run_training({}, {}, cfg));
}
