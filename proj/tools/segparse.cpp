// Command-line surface for the segment-and-parse semantic parsing pipeline:
// synthetic data generation, training, pseudo-supervision derivation,
// iterative inference, evaluation, and report comparison.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "segparse/config.hpp"
#include "segparse/eval.hpp"
#include "segparse/grammar.hpp"
#include "segparse/pipeline.hpp"

namespace fs = std::filesystem;
using namespace segparse;

namespace {

int run_gen_synth(const std::string& rules_path, int n, int depth,
                  std::uint64_t seed, const std::string& out,
                  const std::string& split, double holdout) {
  const SignatureTable& table = SignatureTable::geo_default();
  std::vector<GrammarRule> rules =
      rules_path.empty() ? default_rules() : load_rules(rules_path, table);
  std::vector<Instance> data = generate(rules, n, depth, seed, table);
  if (split.empty()) {
    save_dataset(data, out);
    std::cout << "wrote " << data.size() << " instances to " << out << "\n";
    return 0;
  }
  const bool skeleton = split == "compositional";
  if (!skeleton && split != "standard")
    throw ConfigError("--split must be compositional or standard");
  SplitResult sr = compositional_split(data, holdout, seed + 1, skeleton);
  std::string stem = out;
  if (stem.size() > 6 && stem.substr(stem.size() - 6) == ".jsonl")
    stem = stem.substr(0, stem.size() - 6);
  save_dataset(sr.train, stem + ".train.jsonl");
  save_dataset(sr.test, stem + ".test.jsonl");
  std::cout << "wrote " << sr.train.size() << " train / " << sr.test.size()
            << " test instances to " << stem << ".{train,test}.jsonl\n";
  return 0;
}

int run_train(const std::string& config_path, const std::string& train_path,
              const std::string& dev_path, const std::string& out_dir,
              std::uint64_t seed) {
  const SignatureTable& table = SignatureTable::geo_default();
  PipelineConfig cfg =
      config_path.empty() ? PipelineConfig{} : load_config(config_path);
  cfg.reseed(seed);
  std::vector<Instance> train = load_dataset(train_path, table);
  std::vector<Instance> dev =
      dev_path.empty() ? std::vector<Instance>{} : load_dataset(dev_path, table);

  TrainOutcome outcome = run_training(train, dev, cfg);

  fs::create_directories(out_dir);
  outcome.vocab.save(out_dir);
  outcome.baseline.save(out_dir + "/parser_baseline");
  outcome.parser.save(out_dir + "/parser");
  outcome.segmenter.save(out_dir + "/segmenter");
  {
    std::ofstream rf(out_dir + "/report.json");
    if (!rf) throw IoError("cannot write report: " + out_dir);
    rf << outcome.report_json << '\n';
  }
  {
    std::ofstream cf(out_dir + "/config.txt");
    cf << config_to_text(cfg);
  }
  std::cout << "training complete; artifacts in " << out_dir << "\n";
  return 0;
}

int run_derive(const std::string& data_path, const std::string& parser_dir,
               const std::string& vocab_dir, const std::string& out,
               int beam, bool recurse) {
  const SignatureTable& table = SignatureTable::geo_default();
  std::vector<Instance> data = load_dataset(data_path, table);
  Vocabulary vocab = Vocabulary::load(vocab_dir);
  BaseParser parser = BaseParser::load(parser_dir, vocab, table);
  Derivation d = derive_all(data, parser, beam, recurse);
  d.save_jsonl(out);
  std::cout << "derived " << d.signals.size() << " signals ("
            << d.whole_count() << " whole-utterance) to " << out << "\n";
  return 0;
}

int run_infer(const std::string& data_path, const std::string& model_dir,
              const std::string& out, int beam, int max_iters) {
  const SignatureTable& table = SignatureTable::geo_default();
  std::vector<Instance> data = load_dataset(data_path, table);
  Vocabulary vocab = Vocabulary::load(model_dir);
  BaseParser parser = BaseParser::load(model_dir + "/parser", vocab, table);
  Segmenter segmenter =
      Segmenter::load(model_dir + "/segmenter", vocab.input);
  std::vector<InferenceTrace> traces;
  traces.reserve(data.size());
  SpanParserFn parse = make_span_parser(parser, beam);
  SpanPredictorFn predict = make_span_predictor(segmenter);
  for (const auto& inst : data)
    traces.push_back(infer(inst.utterance, predict, parse, table, max_iters));
  save_traces(traces, out);
  std::cout << "wrote " << traces.size() << " traces to " << out << "\n";
  return 0;
}

int run_eval(const std::string& pred_path, const std::string& gold_path,
             const std::string& out) {
  const SignatureTable& table = SignatureTable::geo_default();
  std::vector<Instance> gold = load_dataset(gold_path, table);
  std::vector<InferenceTrace> traces = load_traces(pred_path, table);
  std::vector<std::optional<MrNode>> predictions;
  std::vector<std::optional<Span>> first_spans;
  predictions.reserve(traces.size());
  for (const auto& t : traces) {
    predictions.push_back(t.final_mr);
    first_spans.push_back(t.iterations.empty()
                              ? std::nullopt
                              : std::optional<Span>(t.iterations[0].span));
  }
  EvalReport report = evaluate(predictions, gold, {}, first_spans);
  report.traces_path = pred_path;
  report.save(out);
  std::cout << report.to_json() << "\n";
  return 0;
}

int run_compare(const std::string& a_path, const std::string& b_path,
                const std::string& out) {
  EvalReport a = EvalReport::load(a_path);
  EvalReport b = EvalReport::load(b_path);
  Comparison cmp = compare_reports(a, b);
  std::cout << cmp.text_table;
  if (!out.empty()) {
    std::ofstream of(out);
    if (!of) throw IoError("cannot write comparison: " + out);
    of << cmp.json << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Iterative segment-and-parse semantic parsing pipeline"};
  app.require_subcommand(1);

  // gen-synth
  std::string gs_rules, gs_out = "synth.jsonl", gs_split;
  int gs_n = 1000, gs_depth = 3;
  std::uint64_t gs_seed = 1;
  double gs_holdout = 0.2;
  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic dataset");
  gen->add_option("--rules", gs_rules, "Rules file (JSON); built-in when omitted");
  gen->add_option("--n", gs_n, "Number of instances")->check(CLI::PositiveNumber);
  gen->add_option("--depth", gs_depth, "Maximum clause nesting depth")
      ->check(CLI::PositiveNumber);
  gen->add_option("--seed", gs_seed, "Random seed");
  gen->add_option("--out", gs_out, "Output JSONL path (or stem with --split)");
  gen->add_option("--split", gs_split,
                  "Write a train/test split: compositional or standard");
  gen->add_option("--holdout", gs_holdout, "Held-out fraction for --split");

  // train
  std::string tr_config, tr_train, tr_dev, tr_out = "run";
  std::uint64_t tr_seed = 1;
  auto* train = app.add_subcommand("train", "Run the full training pipeline");
  train->add_option("--config", tr_config, "Flat key=value config file");
  train->add_option("--train", tr_train, "Train JSONL")->required();
  train->add_option("--dev", tr_dev, "Dev JSONL");
  train->add_option("--out-dir", tr_out, "Output directory");
  train->add_option("--seed", tr_seed, "Random seed controlling all stages");

  // derive-pseudo
  std::string dp_data, dp_parser, dp_vocab, dp_out = "pseudo.jsonl";
  int dp_beam = 1;
  bool dp_no_recurse = false;
  auto* derive = app.add_subcommand("derive-pseudo",
                                    "Derive pseudo supervision signals");
  derive->add_option("--data", dp_data, "Dataset JSONL")->required();
  derive->add_option("--parser", dp_parser, "Parser checkpoint dir")->required();
  derive->add_option("--vocab", dp_vocab, "Vocabulary dir")->required();
  derive->add_option("--out", dp_out, "Output JSONL");
  derive->add_option("--beam", dp_beam, "Span-parsing beam");
  derive->add_flag("--no-recurse", dp_no_recurse, "Single-level derivation");

  // infer
  std::string in_data, in_model, in_out = "traces.jsonl";
  int in_beam = 5, in_iters = 8;
  auto* inf = app.add_subcommand("infer", "Iterative segment-and-parse inference");
  inf->add_option("--data", in_data, "Dataset JSONL")->required();
  inf->add_option("--model-dir", in_model, "Training output directory")->required();
  inf->add_option("--out", in_out, "Traces JSONL");
  inf->add_option("--beam", in_beam, "Decode beam");
  inf->add_option("--max-iters", in_iters, "Inference iteration cap");

  // eval
  std::string ev_pred, ev_gold, ev_out = "report.json";
  auto* ev = app.add_subcommand("eval", "Exact-match evaluation of traces");
  ev->add_option("--pred", ev_pred, "Traces JSONL")->required();
  ev->add_option("--gold", ev_gold, "Gold dataset JSONL")->required();
  ev->add_option("--out", ev_out, "Report JSON");

  // compare
  std::string cp_a, cp_b, cp_out;
  auto* cp = app.add_subcommand("compare", "Accuracy delta between two reports");
  cp->add_option("baseline", cp_a, "Baseline report JSON")->required();
  cp->add_option("other", cp_b, "Other report JSON")->required();
  cp->add_option("--out", cp_out, "Machine-readable delta JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << e.what() << "\n";
    return 1;
  }

  try {
    if (gen->parsed())
      return run_gen_synth(gs_rules, gs_n, gs_depth, gs_seed, gs_out, gs_split,
                           gs_holdout);
    if (train->parsed())
      return run_train(tr_config, tr_train, tr_dev, tr_out, tr_seed);
    if (derive->parsed())
      return run_derive(dp_data, dp_parser, dp_vocab, dp_out, dp_beam,
                        !dp_no_recurse);
    if (inf->parsed())
      return run_infer(in_data, in_model, in_out, in_beam, in_iters);
    if (ev->parsed()) return run_eval(ev_pred, ev_gold, ev_out);
    if (cp->parsed()) return run_compare(cp_a, cp_b, cp_out);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const MalformedMr& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const MarkerMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const LengthMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const SplitError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const GrammarError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
