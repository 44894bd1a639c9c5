#include "segparse/mr.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace segparse {

namespace {

const char* kTagNames[] = {"state", "city", "river", "place",
                           "mountain", "lake", "num"};

bool is_digit_str(const std::string& s, std::size_t from) {
  if (from >= s.size()) return false;
  for (std::size_t i = from; i < s.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  return true;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

std::string type_tag_token(TypeTag tag) {
  return "$" + type_tag_name(tag) + "$";
}

std::string type_tag_name(TypeTag tag) {
  return kTagNames[static_cast<int>(tag)];
}

std::optional<TypeTag> type_tag_from_name(const std::string& name) {
  for (TypeTag t : kAllTypeTags)
    if (name == kTagNames[static_cast<int>(t)]) return t;
  return std::nullopt;
}

std::optional<TypeTag> type_tag_from_token(const std::string& token) {
  if (token.size() < 3 || token.front() != '$' || token.back() != '$')
    return std::nullopt;
  return type_tag_from_name(token.substr(1, token.size() - 2));
}

bool is_marker_token(const std::string& token) {
  auto us = token.rfind('_');
  if (us == std::string::npos || us == 0) return false;
  if (!is_digit_str(token, us + 1)) return false;
  for (std::size_t i = 0; i < us; ++i) {
    unsigned char c = token[i];
    if (!std::islower(c) && c != '_') return false;
  }
  return true;
}

bool is_number_token(const std::string& token) {
  std::size_t i = token.size() && token[0] == '-' ? 1 : 0;
  if (i >= token.size()) return false;
  bool dot = false;
  for (; i < token.size(); ++i) {
    if (token[i] == '.') {
      if (dot || i + 1 == token.size()) return false;
      dot = true;
    } else if (!std::isdigit(static_cast<unsigned char>(token[i]))) {
      return false;
    }
  }
  return true;
}

MrNode MrNode::function(std::string name, std::vector<MrNode> children) {
  return MrNode{Kind::Function, std::move(name), std::move(children)};
}

MrNode MrNode::placeholder(TypeTag tag) {
  return MrNode{Kind::Placeholder, type_tag_token(tag), {}};
}

MrNode MrNode::literal(std::string text) {
  return MrNode{Kind::Literal, std::move(text), {}};
}

TypeTag MrNode::placeholder_tag() const {
  auto t = type_tag_from_token(name);
  return t ? *t : TypeTag::Place;
}

std::size_t MrNode::node_count() const {
  std::size_t n = 1;
  for (const auto& c : children) n += c.node_count();
  return n;
}

// ---------------------------------------------------------------------------
// Signature table
// ---------------------------------------------------------------------------

SignatureTable::SignatureTable(std::vector<FunctionSignature> entries) {
  for (auto& e : entries) {
    std::string name = e.name;
    by_name_.emplace(std::move(name), std::move(e));
  }
}

const FunctionSignature* SignatureTable::find(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : &it->second;
}

const FunctionSignature& SignatureTable::at(const std::string& name) const {
  const FunctionSignature* s = find(name);
  if (!s) throw MalformedMr("unknown function name: " + name);
  return *s;
}

namespace {

ArgType parse_arg_type(const std::string& s) {
  if (s == "*") return ArgType::any();
  if (s == "str") return ArgType::text();
  if (auto t = type_tag_from_token(s)) return ArgType::of(*t);
  throw IoError("bad argument type in signature table: " + s);
}

std::string arg_type_text(const ArgType& a) {
  switch (a.kind) {
    case ArgType::Kind::Any: return "*";
    case ArgType::Kind::Text: return "str";
    case ArgType::Kind::Tag: return type_tag_token(a.tag);
  }
  return "*";
}

RetType parse_ret_type(const std::string& s) {
  if (s == "=") return RetType::first_arg();
  if (auto t = type_tag_from_token(s)) return RetType::of(*t);
  throw IoError("bad return type in signature table: " + s);
}

std::string ret_type_text(const RetType& r) {
  return r.kind == RetType::Kind::FirstArg ? "=" : type_tag_token(r.tag);
}

}  // namespace

SignatureTable SignatureTable::parse(const std::string& text) {
  std::vector<FunctionSignature> entries;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string name, args, ret;
    if (!std::getline(ls, name, '\t') || !std::getline(ls, args, '\t') ||
        !std::getline(ls, ret, '\t'))
      throw IoError("bad signature table line: " + line);
    FunctionSignature sig;
    sig.name = name;
    if (!args.empty()) {
      std::istringstream as(args);
      std::string a;
      while (std::getline(as, a, ',')) sig.arg_types.push_back(parse_arg_type(a));
    }
    sig.return_type = parse_ret_type(ret);
    entries.push_back(std::move(sig));
  }
  return SignatureTable(std::move(entries));
}

SignatureTable SignatureTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open signature table: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string SignatureTable::to_text() const {
  std::ostringstream out;
  for (const auto& [name, sig] : by_name_) {
    out << name << '\t';
    for (std::size_t i = 0; i < sig.arg_types.size(); ++i) {
      if (i) out << ',';
      out << arg_type_text(sig.arg_types[i]);
    }
    out << '\t' << ret_type_text(sig.return_type) << '\n';
  }
  return out.str();
}

void SignatureTable::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write signature table: " + path);
  out << to_text();
}

const SignatureTable& SignatureTable::geo_default() {
  static const SignatureTable table = [] {
    auto tag = [](TypeTag t) { return ArgType::of(t); };
    auto any = ArgType::any();
    auto str = ArgType::text();
    auto ret = [](TypeTag t) { return RetType::of(t); };
    auto same = RetType::first_arg();
    std::vector<FunctionSignature> e;
    // Entity constructors.
    e.push_back({"stateid", {str}, ret(TypeTag::State)});
    e.push_back({"cityid", {str}, ret(TypeTag::City)});
    e.push_back({"riverid", {str}, ret(TypeTag::River)});
    e.push_back({"placeid", {str}, ret(TypeTag::Place)});
    e.push_back({"countryid", {str}, ret(TypeTag::Place)});
    // Set filters.
    e.push_back({"state", {any}, ret(TypeTag::State)});
    e.push_back({"city", {any}, ret(TypeTag::City)});
    e.push_back({"river", {any}, ret(TypeTag::River)});
    e.push_back({"place", {any}, ret(TypeTag::Place)});
    e.push_back({"mountain", {any}, ret(TypeTag::Mountain)});
    e.push_back({"lake", {any}, ret(TypeTag::Lake)});
    e.push_back({"capital", {any}, ret(TypeTag::City)});
    e.push_back({"major", {any}, same});
    e.push_back({"all", {}, ret(TypeTag::Place)});
    // Relations. The _1/_2 suffix picks the argument position being solved
    // for, following the FunQL convention.
    e.push_back({"next_to_1", {tag(TypeTag::State)}, ret(TypeTag::State)});
    e.push_back({"next_to_2", {tag(TypeTag::State)}, ret(TypeTag::State)});
    e.push_back({"traverse_1", {tag(TypeTag::River)}, ret(TypeTag::State)});
    e.push_back({"traverse_2", {tag(TypeTag::State)}, ret(TypeTag::River)});
    e.push_back({"loc_1", {any}, ret(TypeTag::Place)});
    e.push_back({"loc_2", {any}, ret(TypeTag::Place)});
    e.push_back({"capital_1", {tag(TypeTag::State)}, ret(TypeTag::City)});
    e.push_back({"capital_2", {any}, ret(TypeTag::State)});
    e.push_back({"high_point_1", {tag(TypeTag::State)}, ret(TypeTag::Place)});
    e.push_back({"high_point_2", {any}, ret(TypeTag::State)});
    e.push_back({"low_point_1", {tag(TypeTag::State)}, ret(TypeTag::Place)});
    e.push_back({"low_point_2", {any}, ret(TypeTag::State)});
    e.push_back({"elevation_1", {any}, ret(TypeTag::Num)});
    e.push_back({"elevation_2", {tag(TypeTag::Num)}, ret(TypeTag::Place)});
    // Numeric attributes and aggregates.
    e.push_back({"area_1", {any}, ret(TypeTag::Num)});
    e.push_back({"population_1", {any}, ret(TypeTag::Num)});
    e.push_back({"density_1", {any}, ret(TypeTag::Num)});
    e.push_back({"len", {any}, ret(TypeTag::Num)});
    e.push_back({"size", {any}, ret(TypeTag::Num)});
    e.push_back({"count", {any}, ret(TypeTag::Num)});
    e.push_back({"sum", {any}, ret(TypeTag::Num)});
    // Superlatives keep the type of their argument.
    e.push_back({"smallest", {any}, same});
    e.push_back({"largest", {any}, same});
    e.push_back({"highest", {any}, same});
    e.push_back({"lowest", {any}, same});
    e.push_back({"longest", {any}, same});
    e.push_back({"shortest", {any}, same});
    e.push_back({"most", {any}, same});
    e.push_back({"fewest", {any}, same});
    e.push_back({"smallest_one", {any}, ret(TypeTag::Place)});
    e.push_back({"largest_one", {any}, ret(TypeTag::Place)});
    // Set algebra and top-level wrapper.
    e.push_back({"exclude", {any, any}, same});
    e.push_back({"intersection", {any, any}, same});
    e.push_back({"answer", {any}, same});
    return SignatureTable(std::move(e));
  }();
  return table;
}

// ---------------------------------------------------------------------------
// Parsing and serialization
// ---------------------------------------------------------------------------

namespace {

struct Token {
  enum class Kind { LParen, RParen, Comma, Quoted, Atom, End };
  Kind kind;
  std::string text;
};

class Lexer {
 public:
  explicit Lexer(const std::string& s) : s_(s) {}

  Token next() {
    while (pos_ < s_.size() &&
           std::isspace(static_cast<unsigned char>(s_[pos_])))
      ++pos_;
    if (pos_ >= s_.size()) return {Token::Kind::End, ""};
    char c = s_[pos_];
    if (c == '(') { ++pos_; return {Token::Kind::LParen, "("}; }
    if (c == ')') { ++pos_; return {Token::Kind::RParen, ")"}; }
    if (c == ',') { ++pos_; return {Token::Kind::Comma, ","}; }
    if (c == '\'' || c == '"') {
      char quote = c;
      std::size_t end = s_.find(quote, pos_ + 1);
      if (end == std::string::npos)
        throw MalformedMr("unterminated quoted literal");
      std::string body = s_.substr(pos_ + 1, end - pos_ - 1);
      pos_ = end + 1;
      return {Token::Kind::Quoted, std::move(body)};
    }
    std::size_t start = pos_;
    while (pos_ < s_.size()) {
      char d = s_[pos_];
      if (d == '(' || d == ')' || d == ',' || d == '\'' || d == '"' ||
          std::isspace(static_cast<unsigned char>(d)))
        break;
      ++pos_;
    }
    if (pos_ == start) throw MalformedMr(std::string("unexpected character: ") + c);
    return {Token::Kind::Atom, s_.substr(start, pos_ - start)};
  }

  Token peek() {
    std::size_t save = pos_;
    Token t = next();
    pos_ = save;
    return t;
  }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
};

MrNode parse_expr(Lexer& lex, const SignatureTable& table) {
  Token t = lex.next();
  switch (t.kind) {
    case Token::Kind::Quoted:
      return MrNode::literal(t.text);
    case Token::Kind::Atom:
      break;
    case Token::Kind::End:
      throw MalformedMr("unexpected end of input");
    default:
      throw MalformedMr("unexpected token: " + t.text);
  }
  if (lex.peek().kind == Token::Kind::LParen) {
    const FunctionSignature* sig = table.find(t.text);
    if (!sig) throw MalformedMr("unknown function name: " + t.text);
    lex.next();  // consume '('
    std::vector<MrNode> children;
    if (lex.peek().kind == Token::Kind::RParen) {
      lex.next();
    } else {
      for (;;) {
        children.push_back(parse_expr(lex, table));
        Token sep = lex.next();
        if (sep.kind == Token::Kind::RParen) break;
        if (sep.kind != Token::Kind::Comma)
          throw MalformedMr("expected ',' or ')' in arguments of " + t.text);
      }
    }
    if (children.size() != sig->arg_types.size())
      throw MalformedMr("arity mismatch for " + t.text + ": got " +
                        std::to_string(children.size()) + ", expected " +
                        std::to_string(sig->arg_types.size()));
    return MrNode::function(t.text, std::move(children));
  }
  // Bare atom.
  if (t.text.front() == '$') {
    if (auto tag = type_tag_from_token(t.text))
      return MrNode::placeholder(*tag);
    throw MalformedMr("unknown placeholder tag: " + t.text);
  }
  if (const FunctionSignature* sig = table.find(t.text)) {
    if (!sig->arg_types.empty())
      throw MalformedMr("function " + t.text + " used without arguments");
    return MrNode::function(t.text, {});
  }
  if (is_marker_token(t.text) || is_number_token(t.text))
    return MrNode::literal(t.text);
  throw MalformedMr("unknown symbol: " + t.text);
}

}  // namespace

MrNode parse_mr(const std::string& text, const SignatureTable& table) {
  Lexer lex(text);
  MrNode root = parse_expr(lex, table);
  if (lex.next().kind != Token::Kind::End)
    throw MalformedMr("trailing input after expression");
  return root;
}

namespace {

void serialize_into(const MrNode& m, std::string& out) {
  switch (m.kind) {
    case MrNode::Kind::Placeholder:
      out += m.name;
      return;
    case MrNode::Kind::Literal:
      if (is_marker_token(m.name) || is_number_token(m.name)) {
        out += m.name;
      } else {
        out += '\'';
        out += m.name;
        out += '\'';
      }
      return;
    case MrNode::Kind::Function:
      out += m.name;
      if (m.children.empty()) return;
      out += '(';
      for (std::size_t i = 0; i < m.children.size(); ++i) {
        if (i) out += ',';
        serialize_into(m.children[i], out);
      }
      out += ')';
      return;
  }
}

}  // namespace

std::string serialize_mr(const MrNode& m) {
  std::string out;
  serialize_into(m, out);
  return out;
}

namespace {

void symbols_into(const MrNode& m, std::vector<std::string>& out) {
  switch (m.kind) {
    case MrNode::Kind::Placeholder:
      out.push_back(m.name);
      return;
    case MrNode::Kind::Literal: {
      std::string atom;
      serialize_into(m, atom);
      out.push_back(std::move(atom));
      return;
    }
    case MrNode::Kind::Function:
      out.push_back(m.name);
      if (m.children.empty()) return;
      out.push_back("(");
      for (std::size_t i = 0; i < m.children.size(); ++i) {
        if (i) out.push_back(",");
        symbols_into(m.children[i], out);
      }
      out.push_back(")");
      return;
  }
}

}  // namespace

std::vector<std::string> mr_to_symbols(const MrNode& m) {
  std::vector<std::string> out;
  symbols_into(m, out);
  return out;
}

MrNode symbols_to_mr(const std::vector<std::string>& symbols,
                     const SignatureTable& table) {
  std::string joined;
  for (const auto& s : symbols) joined += s;
  return parse_mr(joined, table);
}

// ---------------------------------------------------------------------------
// Typing
// ---------------------------------------------------------------------------

namespace {

// Bottom-up typing shared by denotation_type / validate_mr / matching.
// Returns nullopt on failure; fills *err with a message when provided.
std::optional<TypeTag> denotation_impl(const MrNode& m,
                                       const SignatureTable& table,
                                       std::string* err) {
  switch (m.kind) {
    case MrNode::Kind::Placeholder:
      return m.placeholder_tag();
    case MrNode::Kind::Literal: {
      if (is_marker_token(m.name)) {
        auto us = m.name.rfind('_');
        if (auto t = type_tag_from_name(m.name.substr(0, us))) return t;
      }
      if (is_number_token(m.name)) return TypeTag::Num;
      if (err) *err = "bare literal has no denotation type: " + m.name;
      return std::nullopt;
    }
    case MrNode::Kind::Function:
      break;
  }
  const FunctionSignature* sig = table.find(m.name);
  if (!sig) {
    if (err) *err = "unknown function name: " + m.name;
    return std::nullopt;
  }
  if (sig->arg_types.size() != m.children.size()) {
    if (err) *err = "arity mismatch for " + m.name;
    return std::nullopt;
  }
  std::optional<TypeTag> first_child_type;
  for (std::size_t i = 0; i < m.children.size(); ++i) {
    const MrNode& child = m.children[i];
    const ArgType& want = sig->arg_types[i];
    std::optional<TypeTag> got;
    if (child.is_literal() && (want.kind == ArgType::Kind::Text ||
                               want.kind == ArgType::Kind::Any)) {
      // Literal accepted verbatim; typed markers still yield a type below
      // when needed as the first argument.
      got = denotation_impl(child, table, nullptr);
    } else {
      got = denotation_impl(child, table, err);
      if (!got) return std::nullopt;
      if (want.kind == ArgType::Kind::Tag && *got != want.tag) {
        if (err)
          *err = "argument " + std::to_string(i + 1) + " of " + m.name +
                 " has type " + type_tag_token(*got) + ", expected " +
                 type_tag_token(want.tag);
        return std::nullopt;
      }
      if (want.kind == ArgType::Kind::Text) {
        if (err)
          *err = "argument " + std::to_string(i + 1) + " of " + m.name +
                 " must be a literal";
        return std::nullopt;
      }
    }
    if (i == 0) first_child_type = got;
  }
  if (sig->return_type.kind == RetType::Kind::Tag) return sig->return_type.tag;
  if (!first_child_type) {
    if (err)
      *err = "cannot infer result type of " + m.name +
             " from an untyped first argument";
    return std::nullopt;
  }
  return first_child_type;
}

}  // namespace

TypeTag denotation_type(const MrNode& m, const SignatureTable& table) {
  std::string err;
  auto t = denotation_impl(m, table, &err);
  if (!t) throw TypeError(err);
  return *t;
}

void validate_mr(const MrNode& m, const SignatureTable& table) {
  if (m.is_literal() && !is_marker_token(m.name) && !is_number_token(m.name))
    return;  // a bare plain literal is inert but not ill-typed
  denotation_type(m, table);
}

// ---------------------------------------------------------------------------
// Containment, substitution, composition
// ---------------------------------------------------------------------------

namespace {

// Placeholder-aware structural matching: a placeholder in `part` matches any
// `sub` with an equal denotation type.
bool matches(const MrNode& part, const MrNode& sub, const SignatureTable& table) {
  if (part.is_placeholder()) {
    auto t = denotation_impl(sub, table, nullptr);
    return t && *t == part.placeholder_tag();
  }
  if (part.kind != sub.kind || part.name != sub.name ||
      part.children.size() != sub.children.size())
    return false;
  for (std::size_t i = 0; i < part.children.size(); ++i)
    if (!matches(part.children[i], sub.children[i], table)) return false;
  return true;
}

bool contains(const MrNode& part, const MrNode& whole,
              const SignatureTable& table) {
  if (matches(part, whole, table)) return true;
  for (const auto& c : whole.children)
    if (contains(part, c, table)) return true;
  return false;
}

bool substitute_first(MrNode& whole, const MrNode& target,
                      const MrNode& replacement, const SignatureTable& table) {
  if (matches(target, whole, table)) {
    whole = replacement;
    return true;
  }
  for (auto& c : whole.children)
    if (substitute_first(c, target, replacement, table)) return true;
  return false;
}

}  // namespace

bool is_part_of(const MrNode& part, const MrNode& whole,
                const SignatureTable& table) {
  return contains(part, whole, table);
}

MrNode substitute_mr(const MrNode& whole, const MrNode& target,
                     const MrNode& replacement, const SignatureTable& table) {
  MrNode out = whole;
  if (!substitute_first(out, target, replacement, table))
    throw TargetNotFound("substitution target not found in: " +
                         serialize_mr(whole));
  return out;
}

namespace {

const char* kEntityConstructors[] = {"stateid", "cityid", "riverid", "placeid",
                                     "countryid"};

bool is_entity_constructor(const std::string& name) {
  for (const char* c : kEntityConstructors)
    if (name == c) return true;
  return false;
}

void collect_entity_literals(const MrNode& m, bool under_constructor,
                             std::vector<std::string>& out) {
  if (m.is_literal()) {
    if (under_constructor || is_marker_token(m.name)) out.push_back(m.name);
    return;
  }
  bool ctor = m.kind == MrNode::Kind::Function && is_entity_constructor(m.name);
  for (const auto& c : m.children) collect_entity_literals(c, ctor, out);
}

bool mentioned_in(const std::string& literal,
                  const std::vector<std::string>& lowered_tokens) {
  // Every whitespace-separated word of the literal must occur as a token.
  std::istringstream words(lower(literal));
  std::string w;
  while (words >> w) {
    if (std::find(lowered_tokens.begin(), lowered_tokens.end(), w) ==
        lowered_tokens.end())
      return false;
  }
  return true;
}

}  // namespace

std::vector<std::string> find_ghost_entities(
    const MrNode& m, const std::vector<std::string>& span_tokens) {
  std::vector<std::string> literals;
  collect_entity_literals(m, false, literals);
  std::vector<std::string> lowered;
  lowered.reserve(span_tokens.size());
  for (const auto& t : span_tokens) lowered.push_back(lower(t));
  std::vector<std::string> ghosts;
  for (const auto& lit : literals) {
    if (!mentioned_in(lit, lowered) &&
        std::find(ghosts.begin(), ghosts.end(), lit) == ghosts.end())
      ghosts.push_back(lit);
  }
  return ghosts;
}

namespace {

bool replace_leftmost_placeholder(MrNode& m, TypeTag tag, const MrNode& value) {
  if (m.is_placeholder() && m.placeholder_tag() == tag) {
    m = value;
    return true;
  }
  for (auto& c : m.children)
    if (replace_leftmost_placeholder(c, tag, value)) return true;
  return false;
}

}  // namespace

MrNode compose(const std::vector<MrNode>& partials, const SignatureTable& table) {
  if (partials.empty()) throw CompositionError("no partial MRs to compose");
  MrNode acc = partials.front();
  for (std::size_t k = 1; k < partials.size(); ++k) {
    std::string err;
    auto tag = denotation_impl(acc, table, &err);
    if (!tag) throw CompositionError("untypable partial MR: " + err);
    MrNode next = partials[k];
    if (!replace_leftmost_placeholder(next, *tag, acc))
      throw CompositionError("no " + type_tag_token(*tag) +
                             " placeholder in: " + serialize_mr(partials[k]));
    acc = std::move(next);
  }
  return acc;
}

bool canonical_equal(const MrNode& a, const MrNode& b) { return a == b; }

}  // namespace segparse
