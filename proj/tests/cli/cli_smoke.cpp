// End-to-end exercise of the command-line tool: generate -> train ->
// derive-pseudo -> infer -> eval -> compare, checking exit codes and files.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

namespace fs = std::filesystem;

namespace {

int failures = 0;

void expect(bool ok, const std::string& what) {
  if (ok) {
    std::cout << "[ok] " << what << "\n";
  } else {
    std::cerr << "[FAIL] " << what << "\n";
    ++failures;
  }
}

int run(const std::string& cmd) {
  std::cout << "$ " << cmd << "\n";
  int rc = std::system(cmd.c_str());
  return rc == -1 ? -1 : WEXITSTATUS(rc);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: cli_smoke <path-to-segparse>\n";
    return 2;
  }
  const std::string bin = argv[1];
  fs::path dir = fs::temp_directory_path() / "segparse_cli_smoke";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string d = dir.string();

  expect(run(bin + " gen-synth --n 160 --depth 2 --seed 7 --out " + d +
             "/data.jsonl --split compositional --holdout 0.2") == 0,
         "gen-synth with compositional split exits 0");
  expect(fs::exists(d + "/data.train.jsonl") && fs::exists(d + "/data.test.jsonl"),
         "split files written");

  {
    std::ofstream cfg(d + "/tiny.cfg");
    cfg << "emb_dim = 12\nparser_hidden = 16\nsegmenter_hidden = 12\n"
           "pretrain_epochs = 6\nfinetune_epochs = 3\nsegmenter_epochs = 6\n"
           "dropout = 0.0\nbatch_size = 16\nbeam = 1\n";
  }
  expect(run(bin + " train --config " + d + "/tiny.cfg --train " + d +
             "/data.train.jsonl --dev " + d + "/data.test.jsonl --out-dir " +
             d + "/run --seed 5") == 0,
         "train exits 0");
  for (const char* f : {"/run/report.json", "/run/vocab_input.tsv",
                        "/run/parser/params.bin", "/run/parser_baseline/params.bin",
                        "/run/segmenter/params.bin"})
    expect(fs::exists(d + f), std::string("artifact exists: ") + f);

  expect(run(bin + " derive-pseudo --data " + d + "/data.train.jsonl --parser " +
             d + "/run/parser_baseline --vocab " + d + "/run --out " + d +
             "/pseudo.jsonl") == 0,
         "derive-pseudo exits 0");
  expect(fs::exists(d + "/pseudo.jsonl"), "pseudo signals written");

  expect(run(bin + " infer --data " + d + "/data.test.jsonl --model-dir " + d +
             "/run --out " + d + "/traces.jsonl --beam 1") == 0,
         "infer exits 0");

  expect(run(bin + " eval --pred " + d + "/traces.jsonl --gold " + d +
             "/data.test.jsonl --out " + d + "/report_pde.json") == 0,
         "eval exits 0");

  // Mismatched lengths must exit 1.
  {
    std::ifstream in(d + "/traces.jsonl");
    std::ofstream out(d + "/short.jsonl");
    std::string line;
    if (std::getline(in, line)) out << line << "\n";
  }
  expect(run(bin + " eval --pred " + d + "/short.jsonl --gold " + d +
             "/data.test.jsonl --out " + d + "/bad.json") == 1,
         "eval length mismatch exits 1");

  expect(run(bin + " compare " + d + "/report_pde.json " + d +
             "/report_pde.json --out " + d + "/delta.json") == 0,
         "compare exits 0");

  // Unknown config key is a validation error.
  {
    std::ofstream cfg(d + "/bad.cfg");
    cfg << "bogus = 1\n";
  }
  expect(run(bin + " train --config " + d + "/bad.cfg --train " + d +
             "/data.train.jsonl --out-dir " + d + "/r2 --seed 5") == 1,
         "bad config exits 1");

  expect(run(bin + " eval --pred /nonexistent.jsonl --gold " + d +
             "/data.test.jsonl --out " + d + "/x.json") == 1,
         "missing file exits 1");

  expect(run(bin + " definitely-not-a-command") == 1, "usage error exits 1");

  if (failures == 0) fs::remove_all(dir);
  std::cout << (failures == 0 ? "CLI smoke: all checks passed\n"
                              : "CLI smoke: FAILURES\n");
  return failures == 0 ? 0 : 1;
}
