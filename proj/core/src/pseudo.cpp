#include "segparse/pseudo.hpp"

#include <fstream>
#include <map>
#include <memory>

#include "json.hpp"

namespace segparse {

using nlohmann::json;

SpanParserFn make_span_parser(const BaseParser& parser, int beam) {
  auto cache = std::make_shared<
      std::map<std::vector<std::string>, std::optional<MrNode>>>();
  return [&parser, beam, cache](const std::vector<std::string>& tokens)
             -> std::optional<MrNode> {
    auto it = cache->find(tokens);
    if (it != cache->end()) return it->second;
    DecodeResult r = parser.parse(tokens, beam);
    std::optional<MrNode> mr = r.parse_failed ? std::nullopt : r.mr;
    cache->emplace(tokens, mr);
    return mr;
  };
}

std::vector<std::string> reduce_utterance(const std::vector<std::string>& tokens,
                                          const Span& span, TypeTag tag) {
  if (!span.valid_for(tokens.size()) || span.is_whole(tokens.size()))
    throw Error("reduce_utterance: span must be a proper sub-span");
  if (tag == TypeTag::Num)
    throw TypeError("$num$ is terminal and cannot be inserted as a placeholder");
  std::vector<std::string> out;
  out.reserve(tokens.size() - static_cast<std::size_t>(span.length()) + 1);
  for (int i = 0; i < span.start - 1; ++i)
    out.push_back(tokens[static_cast<std::size_t>(i)]);
  out.push_back(type_tag_token(tag));
  for (int i = span.end; i < static_cast<int>(tokens.size()); ++i)
    out.push_back(tokens[static_cast<std::size_t>(i)]);
  return out;
}

GoodSpans good_spans(const Instance& instance, const SpanParserFn& parse,
                     const SignatureTable& table) {
  GoodSpans out;
  const auto& x = instance.utterance;
  const int m = static_cast<int>(x.size());
  for (int len = 2; len <= m - 1; ++len) {
    for (int start = 1; start + len - 1 <= m; ++start) {
      Span span{start, start + len - 1};
      std::vector<std::string> span_tokens(
          x.begin() + (start - 1), x.begin() + (start - 1) + len);
      std::optional<MrNode> mr = parse(span_tokens);
      if (!mr) continue;
      // A bare placeholder carries no content; reducing on it would replace
      // tokens with the same tag and teach nothing.
      if (mr->is_placeholder()) continue;
      std::optional<TypeTag> tag;
      try {
        tag = denotation_type(*mr, table);
      } catch (const TypeError&) {
        continue;
      }
      if (!is_part_of(*mr, instance.mr, table)) continue;
      if (!find_ghost_entities(*mr, span_tokens).empty()) {
        out.flagged.push_back({span, *mr});
      } else if (*tag == TypeTag::Num && !span.is_whole(x.size())) {
        // num-typed parses are terminal: the span cannot be reduced.
        out.flagged.push_back({span, *mr});
      } else {
        out.good.push_back({span, *mr});
      }
    }
  }
  return out;
}

PseudoSignal best_span(const Instance& instance, const SpanParserFn& parse,
                       const SignatureTable& table) {
  PseudoSignal sig;
  sig.utterance = instance.utterance;
  GoodSpans gs = good_spans(instance, parse, table);
  if (gs.good.empty()) {
    sig.best_span = Span::whole(instance.utterance.size());
    sig.partial_mr = instance.mr;
    sig.reduced_utterance = instance.utterance;
    sig.reduced_mr = instance.mr;
    sig.whole = true;
    return sig;
  }
  const ScoredSpan& best = gs.good.front();  // (length, start) ordered
  sig.best_span = best.span;
  sig.partial_mr = best.mr;
  const TypeTag tag = denotation_type(best.mr, table);
  sig.reduced_utterance = reduce_utterance(instance.utterance, best.span, tag);
  sig.reduced_mr =
      substitute_mr(instance.mr, best.mr, MrNode::placeholder(tag), table);
  return sig;
}

Derivation derive_all(const std::vector<Instance>& dataset,
                      const SpanParserFn& parse, bool recurse,
                      const SignatureTable& table) {
  Derivation out;
  for (const Instance& inst : dataset) {
    Instance current;
    current.utterance = inst.utterance;
    current.mr = inst.mr;
    const int level_cap = static_cast<int>(inst.utterance.size());
    for (int level = 1; level <= level_cap; ++level) {
      PseudoSignal sig = best_span(current, parse, table);
      sig.level = level;
      const bool stop = sig.whole || !recurse;
      current.utterance = sig.reduced_utterance;
      current.mr = sig.reduced_mr;
      out.signals.push_back(std::move(sig));
      if (stop) break;
    }
  }
  return out;
}

Derivation derive_all(const std::vector<Instance>& dataset,
                      const BaseParser& parser, int beam, bool recurse) {
  return derive_all(dataset, make_span_parser(parser, beam), recurse,
                    parser.table());
}

std::vector<std::pair<std::vector<std::string>, Span>>
Derivation::span_signals() const {
  std::vector<std::pair<std::vector<std::string>, Span>> a;
  a.reserve(signals.size());
  for (const auto& s : signals) a.emplace_back(s.utterance, s.best_span);
  return a;
}

std::vector<std::pair<std::vector<std::string>, MrNode>>
Derivation::derived_pairs() const {
  std::vector<std::pair<std::vector<std::string>, MrNode>> d;
  for (const auto& s : signals) {
    if (s.whole) {
      d.emplace_back(s.utterance, s.partial_mr);
      continue;
    }
    std::vector<std::string> span_tokens(
        s.utterance.begin() + (s.best_span.start - 1),
        s.utterance.begin() + s.best_span.end);
    d.emplace_back(std::move(span_tokens), s.partial_mr);
    d.emplace_back(s.reduced_utterance, s.reduced_mr);
  }
  return d;
}

std::size_t Derivation::whole_count() const {
  std::size_t n = 0;
  for (const auto& s : signals)
    if (s.whole) ++n;
  return n;
}

int Derivation::max_level() const {
  int m = 0;
  for (const auto& s : signals) m = std::max(m, s.level);
  return m;
}

void Derivation::save_jsonl(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write derivation: " + path);
  for (const auto& s : signals) {
    json j;
    std::string utt;
    for (std::size_t i = 0; i < s.utterance.size(); ++i) {
      if (i) utt += ' ';
      utt += s.utterance[i];
    }
    std::string red;
    for (std::size_t i = 0; i < s.reduced_utterance.size(); ++i) {
      if (i) red += ' ';
      red += s.reduced_utterance[i];
    }
    j["utterance"] = utt;
    j["span"] = {s.best_span.start, s.best_span.end};
    j["partial_mr"] = serialize_mr(s.partial_mr);
    j["reduced_utterance"] = red;
    j["reduced_mr"] = serialize_mr(s.reduced_mr);
    j["level"] = s.level;
    out << j.dump() << '\n';
  }
}

}  // namespace segparse
