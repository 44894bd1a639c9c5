#pragma once

#include <array>
#include <optional>
#include <map>
#include <string>
#include <vector>

#include "segparse/errors.hpp"

namespace segparse {

/// Denotation types of FunQL expressions. The placeholder token for a tag is
/// the tag name wrapped in dollar signs, e.g. "$state$". Num is a valid
/// denotation type but is never inserted into an utterance as a placeholder
/// token: a num-typed parse is terminal.
enum class TypeTag { State, City, River, Place, Mountain, Lake, Num };

inline constexpr std::array<TypeTag, 7> kAllTypeTags = {
    TypeTag::State, TypeTag::City,     TypeTag::River, TypeTag::Place,
    TypeTag::Mountain, TypeTag::Lake, TypeTag::Num};

/// "$state$", "$num$", ...
std::string type_tag_token(TypeTag tag);
/// Bare tag name without dollar signs: "state", "num", ...
std::string type_tag_name(TypeTag tag);
std::optional<TypeTag> type_tag_from_token(const std::string& token);
std::optional<TypeTag> type_tag_from_name(const std::string& name);

/// Node of a FunQL abstract syntax tree.
///
/// Function nodes have a name drawn from the signature table and as many
/// children as the signature's arity. Placeholder nodes carry a TypeTag.
/// Literal nodes carry the unquoted literal text; anonymized entity markers
/// (state_0, city_1, ...) and plain numbers are stored as literals and
/// serialized without quotes, anything else is serialized single-quoted.
struct MrNode {
  enum class Kind { Function, Placeholder, Literal };

  Kind kind = Kind::Function;
  std::string name;  // function name | placeholder token | literal text
  std::vector<MrNode> children;

  bool operator==(const MrNode&) const = default;

  static MrNode function(std::string name, std::vector<MrNode> children = {});
  static MrNode placeholder(TypeTag tag);
  static MrNode literal(std::string text);

  bool is_placeholder() const { return kind == Kind::Placeholder; }
  bool is_literal() const { return kind == Kind::Literal; }
  /// Tag of a placeholder node; undefined for other kinds.
  TypeTag placeholder_tag() const;

  std::size_t node_count() const;
};

/// Argument type in a function signature: a concrete tag, literal text
/// ("str" in the table file), or wildcard ("*").
struct ArgType {
  enum class Kind { Tag, Text, Any };
  Kind kind = Kind::Any;
  TypeTag tag = TypeTag::Place;

  static ArgType of(TypeTag t) { return {Kind::Tag, t}; }
  static ArgType text() { return {Kind::Text, TypeTag::Place}; }
  static ArgType any() { return {Kind::Any, TypeTag::Place}; }
  bool operator==(const ArgType&) const = default;
};

/// Return type: a concrete tag, or "=": same type as the first argument
/// (used by superlatives such as largest/smallest).
struct RetType {
  enum class Kind { Tag, FirstArg };
  Kind kind = Kind::Tag;
  TypeTag tag = TypeTag::Place;

  static RetType of(TypeTag t) { return {Kind::Tag, t}; }
  static RetType first_arg() { return {Kind::FirstArg, TypeTag::Place}; }
  bool operator==(const RetType&) const = default;
};

struct FunctionSignature {
  std::string name;
  std::vector<ArgType> arg_types;
  RetType return_type;
  bool operator==(const FunctionSignature&) const = default;
};

/// Table of FunQL predicates. One entry per function name; lookup must be
/// total over every function appearing in loaded datasets (validated at
/// load time).
///
/// Text format, one line per predicate:
///   name<TAB>argtype,argtype<TAB>rettype
/// where argtype is a placeholder token ($state$ ...), "str" for literal
/// arguments, or "*" for any; rettype is a placeholder token or "=" for
/// "same as first argument". A predicate with no arguments has an empty
/// second column.
class SignatureTable {
 public:
  SignatureTable() = default;
  explicit SignatureTable(std::vector<FunctionSignature> entries);

  /// The built-in table covering GEO FunQL plus the synthetic grammar.
  static const SignatureTable& geo_default();

  static SignatureTable parse(const std::string& text);
  static SignatureTable load(const std::string& path);
  std::string to_text() const;
  void save(const std::string& path) const;

  const FunctionSignature* find(const std::string& name) const;
  const FunctionSignature& at(const std::string& name) const;
  std::size_t size() const { return by_name_.size(); }

 private:
  std::map<std::string, FunctionSignature> by_name_;
};

/// Parses serialized FunQL. Literals may be single- or double-quoted; quoting
/// is normalized away in the AST. Whitespace is not significant.
/// Throws MalformedMr on unbalanced parentheses, unknown symbols, or arity
/// mismatches against the signature table.
MrNode parse_mr(const std::string& text, const SignatureTable& table);

/// Canonical serialization: function(arg1,arg2), no spaces, single quotes.
std::string serialize_mr(const MrNode& m);

/// Splits the canonical serialization into decoder output symbols:
/// function names, parentheses, commas, and whole literal atoms.
std::vector<std::string> mr_to_symbols(const MrNode& m);
/// Joins symbols back to text and parses. Throws MalformedMr.
MrNode symbols_to_mr(const std::vector<std::string>& symbols,
                     const SignatureTable& table);

/// Denotation type d(m): return type of the root per the signature table,
/// computed by a bottom-up syntax-directed pass that also typechecks the
/// whole tree. Placeholders denote their own tag; typed markers (state_0)
/// denote the tag named by their prefix. Throws TypeError on mismatch or
/// on a bare untyped literal.
TypeTag denotation_type(const MrNode& m, const SignatureTable& table);

/// Typechecks m without needing the root type. Throws TypeError.
void validate_mr(const MrNode& m, const SignatureTable& table);

/// True iff part matches some subtree of whole. A placeholder leaf in part
/// matches any whole subtree of the same denotation type.
bool is_part_of(const MrNode& part, const MrNode& whole,
                const SignatureTable& table);

/// Replaces the leftmost pre-order occurrence of target in whole with
/// replacement. Occurrence matching is placeholder-aware, as in is_part_of.
/// Throws TargetNotFound.
MrNode substitute_mr(const MrNode& whole, const MrNode& target,
                     const MrNode& replacement, const SignatureTable& table);

/// Entity literals in m (arguments of entity constructors, or anonymized
/// markers anywhere) whose surface form does not occur among span_tokens.
/// Matching is case-insensitive; multi-word literals are mentioned iff every
/// word occurs among the span tokens.
std::vector<std::string> find_ghost_entities(
    const MrNode& m, const std::vector<std::string>& span_tokens);

/// Stitches partial MRs from the segment-and-parse iterations back together.
/// partials are in iteration order (innermost first). Walking from the last
/// partial down, the leftmost placeholder whose tag equals the denotation
/// type of the previous partial is replaced by the composed prefix.
/// Throws CompositionError when a required placeholder is absent.
MrNode compose(const std::vector<MrNode>& partials, const SignatureTable& table);

/// Structural equality; literal quoting is already normalized by parsing.
bool canonical_equal(const MrNode& a, const MrNode& b);

/// True for tokens of the anonymized-marker form <type>_<digits>.
bool is_marker_token(const std::string& token);
/// True for integer or decimal number tokens.
bool is_number_token(const std::string& token);

}  // namespace segparse
