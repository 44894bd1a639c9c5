#include "doctest.h"

#include "oracles.hpp"
#include "segparse/grammar.hpp"
#include "segparse/mr.hpp"

using namespace segparse;

namespace {
const SignatureTable& table() { return SignatureTable::geo_default(); }

const char* kTable1Mr =
    "count(river(traverse_2(state(next_to_2(stateid('colorado'))))))";
const char* kTable1M1 = "state(next_to_2(stateid('colorado')))";
const char* kTable1M2 = "river(traverse_2($state$))";
const char* kTable1M3 = "count($river$)";
}  // namespace

TEST_CASE("parse_mr builds the six-level tree of the running example") {
  MrNode m = parse_mr(kTable1Mr, table());
  CHECK(m.name == "count");
  CHECK(m.children.size() == 1);
  const MrNode* cur = &m;
  int depth = 0;
  while (!cur->children.empty()) {
    cur = &cur->children[0];
    ++depth;
  }
  CHECK(depth == 6);
  CHECK(cur->is_literal());
  CHECK(cur->name == "colorado");
}

TEST_CASE("parse_mr handles placeholders") {
  MrNode p = parse_mr("$state$", table());
  CHECK(p.is_placeholder());
  CHECK(p.placeholder_tag() == TypeTag::State);

  MrNode m = parse_mr("river(traverse_2($state$))", table());
  CHECK(m.children[0].children[0].is_placeholder());
}

TEST_CASE("parse_mr whitespace insensitivity and canonical form") {
  MrNode a = parse_mr(" count( river( traverse_2( state_0 ) ) ) ", table());
  CHECK(serialize_mr(a) == "count(river(traverse_2(state_0)))");
}

TEST_CASE("parse_mr error paths") {
  CHECK_THROWS_AS(parse_mr("count(river(", table()), MalformedMr);
  CHECK_THROWS_AS(parse_mr("count(river(traverse_2(state_0))", table()),
                  MalformedMr);
  CHECK_THROWS_AS(parse_mr("frobnicate(state_0)", table()), MalformedMr);
  CHECK_THROWS_AS(parse_mr("next_to_2(stateid('a'),stateid('b'))", table()),
                  MalformedMr);  // arity
  CHECK_THROWS_AS(parse_mr("$galaxy$", table()), MalformedMr);
  CHECK_THROWS_AS(parse_mr("count(river(traverse_2(state_0))) extra", table()),
                  MalformedMr);
}

TEST_CASE("round trip on every synthetic MR") {
  auto data = generate(default_rules(), 300, 3, 11, table());
  for (const auto& inst : data) {
    const std::string text = serialize_mr(inst.mr);
    CHECK(canonical_equal(parse_mr(text, table()), inst.mr));
  }
}

TEST_CASE("symbols round trip") {
  MrNode m = parse_mr(kTable1Mr, table());
  auto symbols = mr_to_symbols(m);
  CHECK(symbols.front() == "count");
  CHECK(canonical_equal(symbols_to_mr(symbols, table()), m));
}

TEST_CASE("denotation_type on the running example") {
  CHECK(denotation_type(parse_mr(kTable1M1, table()), table()) == TypeTag::State);
  CHECK(denotation_type(parse_mr(kTable1M2, table()), table()) == TypeTag::River);
  CHECK(denotation_type(parse_mr(kTable1M3, table()), table()) == TypeTag::Num);
  CHECK(denotation_type(parse_mr(kTable1Mr, table()), table()) == TypeTag::Num);
}

TEST_CASE("denotation_type errors") {
  // traverse_2 requires a state-typed argument.
  MrNode bad = parse_mr("river(traverse_2(riverid('snake')))", table());
  CHECK_THROWS_AS(denotation_type(bad, table()), TypeError);
  CHECK_THROWS_AS(denotation_type(MrNode::literal("colorado"), table()),
                  TypeError);
}

TEST_CASE("marker literals are typed by their prefix") {
  MrNode m = parse_mr("count(river(traverse_2(state_0)))", table());
  CHECK(denotation_type(m, table()) == TypeTag::Num);
  CHECK(denotation_type(MrNode::literal("river_3"), table()) == TypeTag::River);
}

TEST_CASE("is_part_of on the running example") {
  MrNode whole = parse_mr(kTable1Mr, table());
  CHECK(is_part_of(parse_mr(kTable1M1, table()), whole, table()));
  CHECK(is_part_of(whole, whole, table()));  // reflexivity
  // A well-typed parse that is not a subtree is not a good span.
  MrNode not_part = parse_mr("state(traverse_1(riverid('snake')))", table());
  CHECK_FALSE(is_part_of(not_part, whole, table()));
}

TEST_CASE("is_part_of placeholder matching by denotation type") {
  MrNode whole = parse_mr(kTable1Mr, table());
  // river(traverse_2($state$)) matches river(traverse_2(state(...))) because
  // the placeholder accepts any state-typed subtree.
  CHECK(is_part_of(parse_mr(kTable1M2, table()), whole, table()));
  CHECK_FALSE(is_part_of(parse_mr("river(traverse_2($city$))", table()),
                         whole, table()));
  // A reduced whole: the placeholder in part matches the placeholder leaf.
  MrNode reduced = parse_mr("count(river(traverse_2($state$)))", table());
  CHECK(is_part_of(parse_mr(kTable1M2, table()), reduced, table()));
}

TEST_CASE("substitute_mr reproduces the reduced contexts") {
  MrNode whole = parse_mr(kTable1Mr, table());
  MrNode m1 = parse_mr(kTable1M1, table());
  MrNode reduced =
      substitute_mr(whole, m1, MrNode::placeholder(TypeTag::State), table());
  CHECK(serialize_mr(reduced) == "count(river(traverse_2($state$)))");

  // Root replacement.
  MrNode r = substitute_mr(whole, whole, MrNode::placeholder(TypeTag::Num),
                           table());
  CHECK(r.is_placeholder());

  CHECK_THROWS_AS(substitute_mr(whole, parse_mr("capital_1($state$)", table()),
                                MrNode::placeholder(TypeTag::City), table()),
                  TargetNotFound);
}

TEST_CASE("substitution round trip when target occurs once") {
  MrNode whole = parse_mr(kTable1Mr, table());
  MrNode m1 = parse_mr(kTable1M1, table());
  MrNode p = MrNode::placeholder(TypeTag::State);
  MrNode back = substitute_mr(substitute_mr(whole, m1, p, table()), p, m1,
                              table());
  CHECK(canonical_equal(back, whole));
}

TEST_CASE("find_ghost_entities") {
  MrNode m1 = parse_mr(kTable1M1, table());
  // The ghost case: the parse mentions colorado, the span does not.
  auto ghosts = find_ghost_entities(m1, {"the", "states", "bordering"});
  REQUIRE(ghosts.size() == 1);
  CHECK(ghosts[0] == "colorado");
  // Mentioned entity (case-insensitive).
  CHECK(find_ghost_entities(m1, {"the", "states", "bordering", "Colorado"})
            .empty());
  // Anonymized marker mentioned in span.
  MrNode marked = parse_mr("state(next_to_2(state_0))", table());
  CHECK(find_ghost_entities(marked, {"state", "border", "state_0"}).empty());
  CHECK(find_ghost_entities(marked, {"state", "border"}).size() == 1);
  // Two literals, one mentioned.
  MrNode two = parse_mr(
      "intersection(state(next_to_2(stateid('texas'))),state(loc_1(cityid('denver'))))",
      table());
  auto g = find_ghost_entities(two, {"by", "texas", "city"});
  REQUIRE(g.size() == 1);
  CHECK(g[0] == "denver");
}

TEST_CASE("compose stitches the running example back together") {
  std::vector<MrNode> partials = {parse_mr(kTable1M1, table()),
                                  parse_mr(kTable1M2, table()),
                                  parse_mr(kTable1M3, table())};
  MrNode m = compose(partials, table());
  CHECK(serialize_mr(m) == kTable1Mr);

  // K = 1.
  CHECK(canonical_equal(compose({partials[0]}, table()), partials[0]));

  // Missing placeholder of the required tag.
  CHECK_THROWS_AS(
      compose({parse_mr(kTable1M1, table()), parse_mr("count($river$)", table())},
              table()),
      CompositionError);
}

TEST_CASE("canonical_equal normalizes quoting and detects perturbations") {
  MrNode a = parse_mr("state(next_to_2(stateid('colorado')))", table());
  MrNode b = parse_mr("state(next_to_2(stateid(\"colorado\")))", table());
  CHECK(canonical_equal(a, b));
  MrNode c = parse_mr("state(next_to_1(stateid('colorado')))", table());
  CHECK_FALSE(canonical_equal(a, c));
}

TEST_CASE("signature table text round trip and data file") {
  const SignatureTable& t = table();
  SignatureTable reparsed = SignatureTable::parse(t.to_text());
  CHECK(reparsed.to_text() == t.to_text());
  CHECK(reparsed.size() == t.size());

  SignatureTable from_file =
      SignatureTable::load(std::string(SEGPARSE_SOURCE_DIR) +
                           "/data/funql_signatures.tsv");
  CHECK(from_file.to_text() == t.to_text());
}

TEST_CASE("signature table covers every synthetic dataset MR") {
  auto data = generate(default_rules(), 200, 3, 5, table());
  for (const auto& inst : data) CHECK_NOTHROW(validate_mr(inst.mr, table()));
}

// Brute-force agreement sweep on a small corpus; the acceptance binary runs
// the full 1,000-instance version.
TEST_CASE("mr algebra agrees with brute-force oracles") {
  auto data = generate(default_rules(), 120, 3, 17, table());
  int part_checks = 0;
  for (const auto& inst : data) {
    auto subs = oracles::all_subtrees(inst.mr);
    REQUIRE(inst.mr.node_count() <= 12);
    for (const MrNode* sub : subs) {
      CHECK(is_part_of(*sub, inst.mr, table()));
      auto impl_type = [&]() -> std::optional<TypeTag> {
        try {
          return denotation_type(*sub, table());
        } catch (const TypeError&) {
          return std::nullopt;
        }
      };
      CHECK(impl_type() == oracles::type_of(*sub, table()));
      ++part_checks;
    }
    // Cross-instance negatives.
    const auto& other = data[(static_cast<std::size_t>(part_checks) * 7 + 3) %
                             data.size()];
    for (const MrNode* sub : oracles::all_subtrees(other.mr)) {
      CHECK(is_part_of(*sub, inst.mr, table()) ==
            oracles::is_part_of(*sub, inst.mr, table()));
    }
    // Substitution against the occurrence-indexed oracle.
    for (const MrNode* sub : subs) {
      if (sub->is_literal()) continue;
      MrNode p = MrNode::placeholder(oracles::type_of(*sub, table()).value());
      auto want = oracles::substitute_leftmost(inst.mr, *sub, p, table());
      REQUIRE(want.has_value());
      CHECK(canonical_equal(substitute_mr(inst.mr, *sub, p, table()), *want));
    }
  }
  CHECK(part_checks > 500);
}
