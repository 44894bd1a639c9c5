#include "segparse/pipeline.hpp"

#include <fstream>

#include "json.hpp"

namespace segparse {

using nlohmann::json;

SpanPredictorFn make_span_predictor(const Segmenter& segmenter) {
  return [&segmenter](const std::vector<std::string>& tokens) {
    return segmenter.predict_span(tokens);
  };
}

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::WholeSpan: return "whole_span";
    case StopReason::Fixpoint: return "fixpoint";
    case StopReason::MaxIters: return "max_iters";
    case StopReason::ComposeError: return "compose_error";
    case StopReason::ParseFailed: return "parse_failed";
  }
  return "unknown";
}

namespace {

std::optional<StopReason> stop_reason_from(const std::string& s) {
  if (s == "whole_span") return StopReason::WholeSpan;
  if (s == "fixpoint") return StopReason::Fixpoint;
  if (s == "max_iters") return StopReason::MaxIters;
  if (s == "compose_error") return StopReason::ComposeError;
  if (s == "parse_failed") return StopReason::ParseFailed;
  return std::nullopt;
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

// Parses the current utterance whole, composes everything collected, and
// closes the trace. A failed whole parse or composition flags the trace.
void close_with_whole_parse(InferenceTrace& trace, std::vector<MrNode>& partials,
                            const std::vector<std::string>& x,
                            const SpanParserFn& parse,
                            const SignatureTable& table, StopReason reason) {
  std::optional<MrNode> whole = parse(x);
  if (!whole) {
    trace.final_mr = std::nullopt;
    trace.stop_reason = StopReason::ParseFailed;
    return;
  }
  partials.push_back(*whole);
  trace.iterations.push_back({x, Span::whole(x.size()), *whole, x});
  trace.stop_reason = reason;
  try {
    trace.final_mr = compose(partials, table);
  } catch (const CompositionError&) {
    trace.final_mr = std::nullopt;
    trace.stop_reason = StopReason::ComposeError;
  }
}

}  // namespace

InferenceTrace infer(const std::vector<std::string>& tokens,
                     const SpanPredictorFn& predict, const SpanParserFn& parse,
                     const SignatureTable& table, int max_iters) {
  InferenceTrace trace;
  std::vector<MrNode> partials;
  std::vector<std::string> x = tokens;

  for (int iter = 0; iter < max_iters; ++iter) {
    const Span span = predict(x);
    if (span.is_whole(x.size())) {
      close_with_whole_parse(trace, partials, x, parse, table,
                             StopReason::WholeSpan);
      return trace;
    }

    std::vector<std::string> span_tokens(x.begin() + (span.start - 1),
                                         x.begin() + span.end);
    std::optional<MrNode> mr = parse(span_tokens);
    std::optional<TypeTag> tag;
    if (mr) {
      try {
        tag = denotation_type(*mr, table);
      } catch (const TypeError&) {
        mr = std::nullopt;
      }
    }
    const bool ghosted = mr && !find_ghost_entities(*mr, span_tokens).empty();
    const bool terminal = tag && *tag == TypeTag::Num;
    if (!mr || ghosted || terminal) {
      // Leave the rest to the base parser: parse the current utterance
      // whole and stop.
      close_with_whole_parse(trace, partials, x, parse, table,
                             StopReason::ParseFailed);
      return trace;
    }

    std::vector<std::string> reduced = reduce_utterance(x, span, *tag);
    partials.push_back(*mr);
    trace.iterations.push_back({x, span, *mr, reduced});
    if (reduced == x) {  // unreachable for proper spans; belt and braces
      trace.final_mr = std::nullopt;
      trace.stop_reason = StopReason::Fixpoint;
      return trace;
    }
    x = std::move(reduced);
  }

  // Iteration cap: parse the remainder whole.
  close_with_whole_parse(trace, partials, x, parse, table, StopReason::MaxIters);
  return trace;
}

void save_traces(const std::vector<InferenceTrace>& traces,
                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write traces: " + path);
  for (const auto& t : traces) {
    json j;
    json iters = json::array();
    for (const auto& it : t.iterations) {
      iters.push_back({{"input", join(it.input)},
                       {"span", {it.span.start, it.span.end}},
                       {"partial_mr", serialize_mr(it.partial)},
                       {"reduced", join(it.reduced)}});
    }
    j["iterations"] = iters;
    j["final_mr"] = t.final_mr ? json(serialize_mr(*t.final_mr)) : json();
    j["stop_reason"] = to_string(t.stop_reason);
    out << j.dump() << '\n';
  }
}

std::vector<InferenceTrace> load_traces(const std::string& path,
                                        const SignatureTable& table) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open traces: " + path);
  std::vector<InferenceTrace> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw IoError(where + ": bad JSON: " + e.what());
    }
    InferenceTrace t;
    for (const auto& it : j.value("iterations", json::array())) {
      InferenceIteration iter;
      iter.input = tokenize(it.at("input").get<std::string>());
      iter.span = Span{it.at("span")[0].get<int>(), it.at("span")[1].get<int>()};
      iter.partial = parse_mr(it.at("partial_mr").get<std::string>(), table);
      iter.reduced = tokenize(it.at("reduced").get<std::string>());
      t.iterations.push_back(std::move(iter));
    }
    if (j.contains("final_mr") && !j.at("final_mr").is_null())
      t.final_mr = parse_mr(j.at("final_mr").get<std::string>(), table);
    auto reason = stop_reason_from(j.value("stop_reason", ""));
    if (!reason) throw IoError(where + ": bad stop_reason");
    t.stop_reason = *reason;
    out.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training recipe
// ---------------------------------------------------------------------------

void PipelineConfig::reseed(std::uint64_t s) {
  seed = s;
  parser.seed = s * 2654435761u + 1;
  segmenter.seed = s * 2654435761u + 2;
}

double parser_accuracy(const BaseParser& parser,
                       const std::vector<Instance>& data, int beam) {
  if (data.empty()) return 0.0;
  int correct = 0;
  for (const auto& inst : data) {
    DecodeResult r = parser.parse(inst.utterance, beam);
    if (!r.parse_failed && r.mr && canonical_equal(*r.mr, inst.mr)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double pde_accuracy(const BaseParser& parser, const Segmenter& segmenter,
                    const std::vector<Instance>& data, int beam, int max_iters,
                    std::vector<InferenceTrace>* traces_out) {
  if (data.empty()) return 0.0;
  SpanParserFn parse = make_span_parser(parser, beam);
  SpanPredictorFn predict = make_span_predictor(segmenter);
  int correct = 0;
  for (const auto& inst : data) {
    InferenceTrace t =
        infer(inst.utterance, predict, parse, parser.table(), max_iters);
    if (t.final_mr && canonical_equal(*t.final_mr, inst.mr)) ++correct;
    if (traces_out) traces_out->push_back(std::move(t));
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainOutcome run_training(const std::vector<Instance>& train,
                          const std::vector<Instance>& dev,
                          const PipelineConfig& config) {
  if (train.empty()) throw Error("run_training: empty train set");
  const SignatureTable& table = SignatureTable::geo_default();

  std::vector<Instance> train_set = train;
  std::vector<Instance> dev_set = dev;
  if (config.anonymize_mr) {
    for (auto& inst : train_set) inst = anonymize_instance(inst, table);
    for (auto& inst : dev_set) inst = anonymize_instance(inst, table);
  }

  Vocabulary vocab = build_vocab(train_set, config.min_count);
  json report;
  report["seed"] = config.seed;
  report["train_size"] = train_set.size();
  report["dev_size"] = dev_set.size();

  // Stage 1: pre-train the base parser on D.
  std::vector<std::pair<std::vector<std::string>, MrNode>> d_pairs;
  d_pairs.reserve(train_set.size());
  for (const auto& inst : train_set)
    d_pairs.emplace_back(inst.utterance, inst.mr);

  BaseParser parser(vocab, config.parser, table);
  TrainStats pretrain_stats;
  try {
    pretrain_stats = parser.train(d_pairs);
  } catch (const DivergenceError& e) {
    throw DivergenceError(std::string("pretrain: ") + e.what());
  }
  BaseParser baseline = parser;  // frozen stage-1 snapshot
  const double baseline_dev = parser_accuracy(parser, dev_set, config.beam);
  report["stages"]["pretrain"] = {
      {"epoch_losses", pretrain_stats.epoch_losses},
      {"dev_accuracy", baseline_dev}};

  // Stage 2: derive pseudo supervision with the frozen preliminary parser.
  Derivation derivation = derive_all(train_set, parser, /*beam=*/1,
                                     config.recurse);
  auto a_signals = derivation.span_signals();
  auto d_hat = derivation.derived_pairs();
  report["stages"]["derive"] = {
      {"num_span_signals", a_signals.size()},
      {"num_derived_pairs", d_hat.size()},
      {"whole_span_fraction",
       static_cast<double>(derivation.whole_count()) /
           static_cast<double>(std::max<std::size_t>(1, derivation.signals.size()))},
      {"max_level", derivation.max_level()}};

  // Stage 3: train the segmenter on A.
  Segmenter segmenter(vocab.input, config.segmenter);
  Segmenter::TrainStats seg_stats;
  try {
    seg_stats = segmenter.train(a_signals);
  } catch (const DivergenceError& e) {
    throw DivergenceError(std::string("segmenter: ") + e.what());
  }
  report["stages"]["segmenter"] = {{"epoch_losses", seg_stats.epoch_losses}};

  // Stage 4: fine-tune the parser on D plus the derived pairs, warm-started
  // values, fresh optimizer state.
  std::vector<std::pair<std::vector<std::string>, MrNode>> tune_pairs = d_pairs;
  tune_pairs.insert(tune_pairs.end(), d_hat.begin(), d_hat.end());
  parser.params().reset_optimizer();
  ParserConfig tune_cfg = config.parser;
  tune_cfg.epochs = config.finetune_epochs;
  parser.set_config(tune_cfg);
  TrainStats tune_stats;
  try {
    tune_stats = parser.train(tune_pairs);
  } catch (const DivergenceError& e) {
    throw DivergenceError(std::string("finetune: ") + e.what());
  }
  const double tuned_dev = parser_accuracy(parser, dev_set, config.beam);
  report["stages"]["finetune"] = {{"epoch_losses", tune_stats.epoch_losses},
                                  {"dev_accuracy", tuned_dev}};

  const double pde_dev = pde_accuracy(parser, segmenter, dev_set, config.beam,
                                      config.max_iters);
  report["stages"]["pde"] = {{"dev_accuracy", pde_dev}};

  return TrainOutcome{std::move(vocab), std::move(baseline), std::move(parser),
                      std::move(segmenter), report.dump(2)};
}

}  // namespace segparse
