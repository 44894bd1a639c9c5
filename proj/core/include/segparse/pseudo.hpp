#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "segparse/dataset.hpp"
#include "segparse/mr.hpp"
#include "segparse/parser_model.hpp"
#include "segparse/span.hpp"

namespace segparse {

/// Parses a token sequence to an MR, or nullopt when decoding does not yield
/// a well-formed, well-typed MR. Implementations must be pure for a frozen
/// parser so that derivation is deterministic.
using SpanParserFn =
    std::function<std::optional<MrNode>(const std::vector<std::string>&)>;

/// Wraps a frozen base parser at a fixed beam; memoizes by token sequence.
SpanParserFn make_span_parser(const BaseParser& parser, int beam);

/// Replaces tokens [span.start, span.end] (1-based, inclusive) with the
/// placeholder token of tag. The span must be valid and proper (not the
/// whole utterance); num is terminal and never inserted.
std::vector<std::string> reduce_utterance(const std::vector<std::string>& tokens,
                                          const Span& span, TypeTag tag);

/// One pseudo-supervision signal: the best span of an utterance plus the
/// reduced (utterance, MR) pair it induces. whole means no selectable span
/// existed and the utterance is its own best span.
struct PseudoSignal {
  std::vector<std::string> utterance;
  Span best_span;
  MrNode partial_mr;
  std::vector<std::string> reduced_utterance;
  MrNode reduced_mr;
  int level = 1;
  bool whole = false;
};

struct ScoredSpan {
  Span span;
  MrNode mr;
};

/// Good spans of an instance: candidate spans (2 <= length <= |x|-1) whose
/// parse is a subtree of the instance MR. Spans whose parse carries ghost
/// entities, or whose denotation is the terminal num type, are returned in
/// flagged instead and never become the best span. The good list is ordered
/// by (length, start), so its head is the best span.
struct GoodSpans {
  std::vector<ScoredSpan> good;
  std::vector<ScoredSpan> flagged;
};
GoodSpans good_spans(const Instance& instance, const SpanParserFn& parse,
                     const SignatureTable& table);

/// The shortest ghost-free good span (ties leftmost); the whole utterance
/// when none exists.
PseudoSignal best_span(const Instance& instance, const SpanParserFn& parse,
                       const SignatureTable& table);

/// Derivation output over a dataset. signals preserves dataset order, with
/// per-instance recursion levels consecutive.
struct Derivation {
  std::vector<PseudoSignal> signals;

  /// A: utterance -> best span, the segmenter's training set.
  std::vector<std::pair<std::vector<std::string>, Span>> span_signals() const;
  /// D-hat: (span tokens, partial MR) and (reduced utterance, reduced MR)
  /// pairs; whole-utterance signals contribute a single pair.
  std::vector<std::pair<std::vector<std::string>, MrNode>> derived_pairs() const;

  std::size_t whole_count() const;
  int max_level() const;

  void save_jsonl(const std::string& path) const;
};

/// Runs best-span derivation over every instance. With recurse on, the
/// reduced instance is derived again until the best span is the whole
/// utterance, accumulating signals at every level.
Derivation derive_all(const std::vector<Instance>& dataset,
                      const SpanParserFn& parse, bool recurse,
                      const SignatureTable& table);

/// Convenience overload wiring in a frozen parser at the given beam.
Derivation derive_all(const std::vector<Instance>& dataset,
                      const BaseParser& parser, int beam, bool recurse);

}  // namespace segparse
