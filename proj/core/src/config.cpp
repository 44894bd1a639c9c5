#include "segparse/config.hpp"

#include <fstream>
#include <sstream>

namespace segparse {

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("bad boolean for " + key + ": " + v);
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

}  // namespace

PipelineConfig parse_config(const std::string& text) {
  PipelineConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    try {
      if (key == "emb_dim") {
        cfg.parser.emb_dim = std::stoi(value);
        cfg.segmenter.emb_dim = std::stoi(value);
      } else if (key == "parser_hidden") {
        cfg.parser.hidden = std::stoi(value);
      } else if (key == "segmenter_hidden") {
        cfg.segmenter.hidden = std::stoi(value);
      } else if (key == "pretrain_epochs") {
        cfg.parser.epochs = std::stoi(value);
      } else if (key == "finetune_epochs") {
        cfg.finetune_epochs = std::stoi(value);
      } else if (key == "segmenter_epochs") {
        cfg.segmenter.epochs = std::stoi(value);
      } else if (key == "learning_rate") {
        cfg.parser.learning_rate = std::stod(value);
        cfg.segmenter.learning_rate = std::stod(value);
      } else if (key == "dropout") {
        cfg.parser.dropout = std::stod(value);
        cfg.segmenter.dropout = std::stod(value);
      } else if (key == "batch_size") {
        cfg.parser.batch_size = std::stoi(value);
        cfg.segmenter.batch_size = std::stoi(value);
      } else if (key == "beam") {
        cfg.beam = std::stoi(value);
      } else if (key == "max_iters") {
        cfg.max_iters = std::stoi(value);
      } else if (key == "length_cap") {
        cfg.parser.length_cap = std::stoi(value);
      } else if (key == "min_count") {
        cfg.min_count = std::stoi(value);
      } else if (key == "recurse") {
        cfg.recurse = parse_bool(value, key);
      } else if (key == "copy") {
        cfg.parser.copy_enabled = parse_bool(value, key);
      } else if (key == "anonymize_mr") {
        cfg.anonymize_mr = parse_bool(value, key);
      } else {
        throw ConfigError("unknown config key: " + key);
      }
    } catch (const std::invalid_argument&) {
      throw ConfigError("bad value for " + key + ": " + value);
    } catch (const std::out_of_range&) {
      throw ConfigError("value out of range for " + key + ": " + value);
    }
  }
  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_text(const PipelineConfig& c) {
  std::ostringstream out;
  out << "emb_dim = " << c.parser.emb_dim << '\n';
  out << "parser_hidden = " << c.parser.hidden << '\n';
  out << "segmenter_hidden = " << c.segmenter.hidden << '\n';
  out << "pretrain_epochs = " << c.parser.epochs << '\n';
  out << "finetune_epochs = " << c.finetune_epochs << '\n';
  out << "segmenter_epochs = " << c.segmenter.epochs << '\n';
  out << "learning_rate = " << c.parser.learning_rate << '\n';
  out << "dropout = " << c.parser.dropout << '\n';
  out << "batch_size = " << c.parser.batch_size << '\n';
  out << "beam = " << c.beam << '\n';
  out << "max_iters = " << c.max_iters << '\n';
  out << "length_cap = " << c.parser.length_cap << '\n';
  out << "min_count = " << c.min_count << '\n';
  out << "recurse = " << (c.recurse ? "true" : "false") << '\n';
  out << "copy = " << (c.parser.copy_enabled ? "true" : "false") << '\n';
  out << "anonymize_mr = " << (c.anonymize_mr ? "true" : "false") << '\n';
  return out.str();
}

}  // namespace segparse
