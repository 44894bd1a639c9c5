#include "segparse/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace segparse {

using nlohmann::json;

std::string Instance::utterance_text() const {
  std::string out;
  for (std::size_t i = 0; i < utterance.size(); ++i) {
    if (i) out += ' ';
    out += utterance[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// VocabMap / Vocabulary
// ---------------------------------------------------------------------------

VocabMap::VocabMap() {
  add("<pad>");
  add("<unk>");
  add("<s>");
  add("</s>");
  for (TypeTag t : kAllTypeTags) add(type_tag_token(t));
}

int VocabMap::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

int VocabMap::index(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

bool VocabMap::contains(const std::string& token) const {
  return index_.count(token) > 0;
}

const std::string& VocabMap::token(int index) const {
  return tokens_.at(static_cast<std::size_t>(index));
}

int VocabMap::placeholder_index(TypeTag tag) const {
  return index(type_tag_token(tag));
}

std::vector<int> VocabMap::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(index(t));
  return ids;
}

std::vector<std::string> VocabMap::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(token(id));
  return out;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
    h ^= 0xff;
    h *= 1099511628211ull;
  };
  for (const auto& t : input.tokens()) mix(t);
  mix("\x1d");
  for (const auto& t : output.tokens()) mix(t);
  return h;
}

namespace {

void save_map(const VocabMap& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary: " + path);
  for (int i = 0; i < m.size(); ++i) out << m.token(i) << '\t' << i << '\n';
}

VocabMap load_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary: " + path);
  VocabMap m;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.rfind('\t');
    if (tab == std::string::npos)
      throw IoError(path + ":" + std::to_string(lineno) + ": expected token<TAB>index");
    std::string token = line.substr(0, tab);
    int idx = std::stoi(line.substr(tab + 1));
    int got = m.add(token);
    if (got != idx)
      throw IoError(path + ":" + std::to_string(lineno) +
                    ": non-contiguous index " + std::to_string(idx));
  }
  return m;
}

}  // namespace

void Vocabulary::save(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  save_map(input, dir + "/vocab_input.tsv");
  save_map(output, dir + "/vocab_output.tsv");
}

Vocabulary Vocabulary::load(const std::string& dir) {
  Vocabulary v;
  v.input = load_map(dir + "/vocab_input.tsv");
  v.output = load_map(dir + "/vocab_output.tsv");
  return v;
}

// ---------------------------------------------------------------------------
// Dataset files
// ---------------------------------------------------------------------------

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (c == '?' || c == '!' || c == ';') {
      flush();
      tokens.push_back(std::string(1, c));
    } else {
      cur += c;
    }
  }
  flush();
  return tokens;
}

std::vector<Instance> load_dataset(const std::string& path,
                                   const SignatureTable& table) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset: " + path);
  std::vector<Instance> out;
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
    if (!j.contains("utterance") || !j.contains("mr"))
      throw IoError(where + ": missing utterance or mr field");
    Instance inst;
    inst.utterance = tokenize(j.at("utterance").get<std::string>());
    if (inst.utterance.empty()) throw IoError(where + ": empty utterance");
    try {
      inst.mr = parse_mr(j.at("mr").get<std::string>(), table);
      validate_mr(inst.mr, table);
    } catch (const Error& e) {
      throw MalformedMr(where + ": " + e.what());
    }
    if (j.contains("entities")) {
      for (auto& [k, v] : j.at("entities").items())
        inst.entity_map[k] = v.get<std::string>();
    }
    for (const auto& tok : inst.utterance) {
      if (is_marker_token(tok) && !inst.entity_map.empty() &&
          !inst.entity_map.count(tok))
        throw MarkerMismatch(where + ": marker " + tok +
                             " missing from entity map");
    }
    if (j.contains("gold_spans")) {
      for (const auto& g : j.at("gold_spans")) {
        if (!g.is_array() || g.size() != 3)
          throw IoError(where + ": gold_spans entries must be [start, end, mr]");
        Span s{g[0].get<int>(), g[1].get<int>()};
        MrNode partial;
        try {
          partial = parse_mr(g[2].get<std::string>(), table);
        } catch (const Error& e) {
          throw MalformedMr(where + ": " + e.what());
        }
        inst.gold_spans.emplace_back(s, std::move(partial));
      }
    }
    if (j.contains("label")) inst.label = j.at("label").get<std::string>();
    out.push_back(std::move(inst));
  }
  return out;
}

void save_dataset(const std::vector<Instance>& instances,
                  const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset: " + path);
  for (const auto& inst : instances) {
    json j;
    j["utterance"] = inst.utterance_text();
    j["mr"] = serialize_mr(inst.mr);
    if (!inst.entity_map.empty()) {
      json e = json::object();
      for (const auto& [k, v] : inst.entity_map) e[k] = v;
      j["entities"] = e;
    }
    if (!inst.gold_spans.empty()) {
      json g = json::array();
      for (const auto& [span, mr] : inst.gold_spans)
        g.push_back({span.start, span.end, serialize_mr(mr)});
      j["gold_spans"] = g;
    }
    if (!inst.label.empty()) j["label"] = inst.label;
    out << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Vocabulary construction
// ---------------------------------------------------------------------------

Vocabulary build_vocab(const std::vector<Instance>& instances, int min_count) {
  std::map<std::string, int> in_counts;
  std::map<std::string, int> out_counts;
  for (const auto& inst : instances) {
    for (const auto& t : inst.utterance) ++in_counts[t];
    for (const auto& s : mr_to_symbols(inst.mr)) ++out_counts[s];
  }
  auto ordered = [](const std::map<std::string, int>& counts) {
    std::vector<std::pair<std::string, int>> v(counts.begin(), counts.end());
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    return v;
  };
  Vocabulary vocab;
  for (const auto& [token, count] : ordered(in_counts)) {
    if (count >= min_count) vocab.input.add(token);
  }
  for (const auto& [symbol, count] : ordered(out_counts)) {
    (void)count;  // MR symbols are closed-vocabulary
    vocab.output.add(symbol);
  }
  return vocab;
}

// ---------------------------------------------------------------------------
// Anonymization
// ---------------------------------------------------------------------------

namespace {

TypeTag constructor_tag(const std::string& name, const SignatureTable& table) {
  const FunctionSignature& sig = table.at(name);
  return sig.return_type.kind == RetType::Kind::Tag ? sig.return_type.tag
                                                    : TypeTag::Place;
}

void anonymize_tree(MrNode& m, const SignatureTable& table,
                    std::map<std::string, int>& counters,
                    std::map<std::string, std::string>& entity_map,
                    std::map<std::string, std::string>& assigned) {
  static const char* kCtors[] = {"stateid", "cityid", "riverid", "placeid",
                                 "countryid"};
  bool ctor = m.kind == MrNode::Kind::Function &&
              std::find_if(std::begin(kCtors), std::end(kCtors),
                           [&](const char* c) { return m.name == c; }) !=
                  std::end(kCtors);
  if (ctor && m.children.size() == 1 && m.children[0].is_literal()) {
    const std::string surface = m.children[0].name;
    auto it = assigned.find(surface);
    std::string marker;
    if (it != assigned.end()) {
      marker = it->second;
    } else {
      std::string tname = type_tag_name(constructor_tag(m.name, table));
      marker = tname + "_" + std::to_string(counters[tname]++);
      assigned[surface] = marker;
      entity_map[marker] = surface;
    }
    m = MrNode::literal(marker);
    return;
  }
  for (auto& c : m.children)
    anonymize_tree(c, table, counters, entity_map, assigned);
}

}  // namespace

Instance anonymize_instance(const Instance& inst, const SignatureTable& table) {
  Instance out = inst;
  std::map<std::string, int> counters;
  std::map<std::string, std::string> assigned;  // surface -> marker
  out.entity_map.clear();
  anonymize_tree(out.mr, table, counters, out.entity_map, assigned);
  for (auto& [span, partial] : out.gold_spans) {
    (void)span;
    std::map<std::string, int> unused;
    anonymize_tree(partial, table, unused, out.entity_map, assigned);
  }
  // Replace utterance mentions. Multi-word surfaces are matched greedily.
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < out.utterance.size();) {
    bool replaced = false;
    for (const auto& [surface, marker] : assigned) {
      std::vector<std::string> words = tokenize(surface);
      if (words.empty() || i + words.size() > out.utterance.size()) continue;
      bool match = true;
      for (std::size_t k = 0; k < words.size(); ++k) {
        if (out.utterance[i + k] != words[k]) {
          match = false;
          break;
        }
      }
      if (match) {
        tokens.push_back(marker);
        i += words.size();
        replaced = true;
        break;
      }
    }
    if (!replaced) tokens.push_back(out.utterance[i++]);
  }
  // Gold span indices survive only length-preserving replacements.
  if (tokens.size() != out.utterance.size()) out.gold_spans.clear();
  out.utterance = std::move(tokens);
  return out;
}

}  // namespace segparse
