#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "segparse/mr.hpp"
#include "segparse/span.hpp"

namespace segparse {

/// One (utterance, meaning representation) training pair. Synthetic data
/// additionally records the generator's gold decomposition: (span, partial MR)
/// pairs, innermost first, each span relative to the utterance reduced by the
/// previous levels.
struct Instance {
  std::vector<std::string> utterance;
  MrNode mr;
  std::map<std::string, std::string> entity_map;  // marker -> surface form
  std::vector<std::pair<Span, MrNode>> gold_spans;
  std::string label;  // optional split label for evaluation breakdowns

  std::string utterance_text() const;
};

/// Bijective token <-> index map with reserved specials. Index layout:
/// 0 pad, 1 unk, 2 <s>, 3 </s>, then one index per TypeTag placeholder
/// token, then regular tokens.
class VocabMap {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;

  VocabMap();

  /// Adds a token if absent; returns its index.
  int add(const std::string& token);
  /// Index of token, or kUnk when absent.
  int index(const std::string& token) const;
  /// True iff token is present (specials included).
  bool contains(const std::string& token) const;
  const std::string& token(int index) const;
  int size() const { return static_cast<int>(tokens_.size()); }

  int placeholder_index(TypeTag tag) const;

  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(const std::vector<int>& ids) const;

  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> index_;
};

/// Input-side and output-side token maps used by the models.
struct Vocabulary {
  VocabMap input;   // utterance tokens
  VocabMap output;  // MR symbols

  /// FNV-1a over both token lists; checkpoint manifests embed this and
  /// loading refuses a mismatch.
  std::uint64_t hash() const;

  void save(const std::string& dir) const;
  static Vocabulary load(const std::string& dir);
};

/// Reads a JSONL dataset: one object per line with fields "utterance" (string,
/// whitespace-tokenized), "mr" (FunQL text), optional "entities" (object),
/// optional "gold_spans" (arrays of [start, end, mr-string]), optional
/// "label". MRs are parsed and typechecked; markers in the utterance must
/// appear in the entity map when one is present.
/// Throws IoError, MalformedMr (with line number), MarkerMismatch.
std::vector<Instance> load_dataset(const std::string& path,
                                   const SignatureTable& table);

void save_dataset(const std::vector<Instance>& instances,
                  const std::string& path);

/// Builds the joint vocabulary. Input tokens with frequency < min_count map
/// to unk; MR output symbols are closed-vocabulary and always kept.
/// Index assignment is deterministic: by descending count, ties broken
/// lexicographically.
Vocabulary build_vocab(const std::vector<Instance>& instances, int min_count);

/// Replaces entity literals with numbered markers, in both the MR and the
/// utterance, recording surfaces in entity_map. Markers are typed by the
/// literal's constructor (state_0, city_0, ...) and numbered per type in
/// order of first occurrence within each instance.
Instance anonymize_instance(const Instance& inst, const SignatureTable& table);

/// Whitespace tokenizer for pre-tokenized text; falls back to splitting
/// punctuation off word boundaries for raw text.
std::vector<std::string> tokenize(const std::string& text);

}  // namespace segparse
