// Test-side oracles: brute-force reference implementations kept independent
// of the library code paths they check.
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "segparse/mr.hpp"
#include "segparse/nn.hpp"
#include "segparse/span.hpp"

namespace oracles {

using segparse::ArgType;
using segparse::FunctionSignature;
using segparse::MrNode;
using segparse::RetType;
using segparse::SignatureTable;
using segparse::Span;
using segparse::TypeTag;

inline void collect_subtrees(const MrNode& m, std::vector<const MrNode*>& out) {
  out.push_back(&m);
  for (const auto& c : m.children) collect_subtrees(c, out);
}

inline std::vector<const MrNode*> all_subtrees(const MrNode& m) {
  std::vector<const MrNode*> out;
  collect_subtrees(m, out);
  return out;
}

/// Independent bottom-up typer over the public signature-table accessors.
inline std::optional<TypeTag> type_of(const MrNode& m, const SignatureTable& table) {
  if (m.kind == MrNode::Kind::Placeholder)
    return segparse::type_tag_from_token(m.name);
  if (m.kind == MrNode::Kind::Literal) {
    if (segparse::is_marker_token(m.name)) {
      auto us = m.name.rfind('_');
      return segparse::type_tag_from_name(m.name.substr(0, us));
    }
    if (segparse::is_number_token(m.name)) return TypeTag::Num;
    return std::nullopt;
  }
  const FunctionSignature* sig = table.find(m.name);
  if (!sig || sig->arg_types.size() != m.children.size()) return std::nullopt;
  std::optional<TypeTag> first;
  for (std::size_t i = 0; i < m.children.size(); ++i) {
    const auto& child = m.children[i];
    const auto& want = sig->arg_types[i];
    auto got = type_of(child, table);
    switch (want.kind) {
      case ArgType::Kind::Text:
        if (child.kind != MrNode::Kind::Literal) return std::nullopt;
        break;
      case ArgType::Kind::Any:
        if (child.kind != MrNode::Kind::Literal && !got) return std::nullopt;
        break;
      case ArgType::Kind::Tag:
        if (!got || *got != want.tag) return std::nullopt;
        break;
    }
    if (i == 0) first = got;
  }
  if (sig->return_type.kind == RetType::Kind::Tag) return sig->return_type.tag;
  return first;
}

/// Placeholder-aware match, written against the definition: a placeholder in
/// part accepts any subtree of equal denotation type; everything else must
/// agree structurally.
inline bool match(const MrNode& part, const MrNode& sub, const SignatureTable& table) {
  if (part.kind == MrNode::Kind::Placeholder) {
    auto t = type_of(sub, table);
    return t && segparse::type_tag_token(*t) == part.name;
  }
  if (sub.kind != part.kind || sub.name != part.name) return false;
  if (sub.children.size() != part.children.size()) return false;
  for (std::size_t i = 0; i < part.children.size(); ++i)
    if (!match(part.children[i], sub.children[i], table)) return false;
  return true;
}

inline bool is_part_of(const MrNode& part, const MrNode& whole,
                       const SignatureTable& table) {
  for (const MrNode* sub : all_subtrees(whole))
    if (match(part, *sub, table)) return true;
  return false;
}

/// Replaces the k-th (pre-order) occurrence of target; returns whether one
/// was found. k counts down.
inline bool substitute_kth(MrNode& node, const MrNode& target,
                           const MrNode& replacement, const SignatureTable& table,
                           int& k) {
  if (match(target, node, table)) {
    if (k == 0) {
      node = replacement;
      return true;
    }
    --k;
  }
  for (auto& c : node.children)
    if (substitute_kth(c, target, replacement, table, k)) return true;
  return false;
}

inline std::optional<MrNode> substitute_leftmost(const MrNode& whole,
                                                 const MrNode& target,
                                                 const MrNode& replacement,
                                                 const SignatureTable& table) {
  MrNode out = whole;
  int k = 0;
  if (!substitute_kth(out, target, replacement, table, k)) return std::nullopt;
  return out;
}

/// Central finite difference of loss at one parameter scalar.
inline double central_difference(segparse::nn::ParameterStore& store,
                                 std::size_t flat,
                                 const std::function<double()>& loss,
                                 double step = 1e-5) {
  const double saved = store.get_scalar(flat);
  store.set_scalar(flat, saved + step);
  const double up = loss();
  store.set_scalar(flat, saved - step);
  const double down = loss();
  store.set_scalar(flat, saved);
  return (up - down) / (2.0 * step);
}

/// Relative error with a small floor for near-zero gradients.
inline double relative_error(double a, double b, double floor = 1e-6) {
  const double denom = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / denom;
}

/// Exhaustive feasible-pair scan for span prediction: argmax of
/// p_start(i) * p_end(j) over i < j, ties toward smaller i then j.
inline Span span_scan(const segparse::nn::Vec& ps, const segparse::nn::Vec& pe) {
  const int m = static_cast<int>(ps.size());
  double best = -1.0;
  Span best_span{1, m};
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      const double score = ps(i) * pe(j);
      if (score > best) {
        best = score;
        best_span = Span{i + 1, j + 1};
      }
    }
  }
  return best_span;
}

}  // namespace oracles
