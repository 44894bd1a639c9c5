#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "segparse/dataset.hpp"
#include "segparse/pseudo.hpp"
#include "segparse/segmenter_model.hpp"

namespace segparse {

using SpanPredictorFn = std::function<Span(const std::vector<std::string>&)>;

SpanPredictorFn make_span_predictor(const Segmenter& segmenter);

enum class StopReason { WholeSpan, Fixpoint, MaxIters, ComposeError, ParseFailed };
std::string to_string(StopReason r);

struct InferenceIteration {
  std::vector<std::string> input;
  Span span;
  MrNode partial;
  std::vector<std::string> reduced;  // equals input on the final whole step
};

struct InferenceTrace {
  std::vector<InferenceIteration> iterations;
  std::optional<MrNode> final_mr;
  StopReason stop_reason = StopReason::WholeSpan;
};

/// The segment-parse-reduce loop. Each round predicts a span; a whole-
/// utterance span parses the remainder and composes (whole_span). A span
/// parse that fails, carries ghost entities, or has terminal num type falls
/// back to parsing the current utterance whole and stops (parse_failed).
/// Otherwise the utterance is reduced and the loop continues, capped at
/// max_iters (the remainder is then parsed whole). Failures are recorded in
/// stop_reason, never thrown.
InferenceTrace infer(const std::vector<std::string>& tokens,
                     const SpanPredictorFn& predict, const SpanParserFn& parse,
                     const SignatureTable& table, int max_iters = 8);

void save_traces(const std::vector<InferenceTrace>& traces,
                 const std::string& path);
std::vector<InferenceTrace> load_traces(const std::string& path,
                                        const SignatureTable& table);

struct PipelineConfig {
  ParserConfig parser;        // parser.epochs = pre-training epochs
  SegmenterConfig segmenter;  // segmenter.epochs = segmenter epochs
  int finetune_epochs = 30;
  int beam = 5;
  int max_iters = 8;
  int min_count = 1;
  bool recurse = true;
  bool anonymize_mr = false;
  std::uint64_t seed = 1;

  /// Propagates the top-level seed into the stage configs.
  void reseed(std::uint64_t s);
};

struct TrainOutcome {
  Vocabulary vocab;
  BaseParser baseline;  // stage-1 parser, pre-trained on D only
  BaseParser parser;    // fine-tuned on D and the derived pairs
  Segmenter segmenter;
  std::string report_json;  // build metadata, per-stage losses, dev accuracy
};

/// Whole-utterance exact-match accuracy of a parser.
double parser_accuracy(const BaseParser& parser,
                       const std::vector<Instance>& data, int beam);

/// Exact-match accuracy of the full iterative pipeline.
double pde_accuracy(const BaseParser& parser, const Segmenter& segmenter,
                    const std::vector<Instance>& data, int beam, int max_iters,
                    std::vector<InferenceTrace>* traces_out = nullptr);

/// The full training recipe: pre-train the parser on the train set, derive
/// pseudo supervision with the frozen parser, train the segmenter on the
/// best spans, fine-tune the parser on the union of original and derived
/// pairs (fresh optimizer state, warm-started values). Deterministic given
/// config.seed. Throws DivergenceError with a stage label.
TrainOutcome run_training(const std::vector<Instance>& train,
                          const std::vector<Instance>& dev,
                          const PipelineConfig& config);

}  // namespace segparse
