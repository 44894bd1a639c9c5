#include "segparse/grammar.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

namespace segparse {

using nlohmann::json;

namespace {

int count_placeholders(const MrNode& m, std::optional<TypeTag>& tag) {
  if (m.is_placeholder()) {
    tag = m.placeholder_tag();
    return 1;
  }
  int n = 0;
  for (const auto& c : m.children) n += count_placeholders(c, tag);
  return n;
}

GrammarRule make_rule(const std::string& surface, const std::string& mr,
                      const SignatureTable& table) {
  GrammarRule r;
  r.surface = tokenize(surface);
  r.mr_template = parse_mr(mr, table);
  return r;
}

}  // namespace

void validate_rules(std::vector<GrammarRule>& rules, const SignatureTable& table) {
  if (rules.empty()) throw GrammarError("empty rule set");
  for (auto& r : rules) {
    std::optional<TypeTag> mr_slot;
    int mr_slots = count_placeholders(r.mr_template, mr_slot);
    std::optional<TypeTag> surf_slot;
    int surf_slots = 0;
    for (const auto& tok : r.surface) {
      if (auto t = type_tag_from_token(tok)) {
        surf_slot = *t;
        ++surf_slots;
      }
    }
    if (mr_slots > 1 || surf_slots > 1)
      throw GrammarError("rule has more than one slot: " +
                         serialize_mr(r.mr_template));
    if (mr_slots != surf_slots || (mr_slots == 1 && *mr_slot != *surf_slot))
      throw GrammarError("surface and MR slots disagree in rule: " +
                         serialize_mr(r.mr_template));
    r.slot_type = mr_slots == 1 ? mr_slot : std::nullopt;
    try {
      r.result_type = denotation_type(r.mr_template, table);
    } catch (const TypeError& e) {
      throw GrammarError(std::string("rule template does not typecheck: ") +
                         e.what());
    }
    if (r.surface.empty()) throw GrammarError("rule with empty surface");
  }
}

std::vector<GrammarRule> default_rules() {
  const SignatureTable& table = SignatureTable::geo_default();
  std::vector<GrammarRule> rules;
  auto add = [&](const std::string& surface, const std::string& mr) {
    rules.push_back(make_rule(surface, mr, table));
  };

  // Entities.
  for (const char* s : {"colorado", "texas", "ohio", "montana", "idaho",
                        "oregon", "utah", "nevada", "georgia", "maine"})
    add(s, "stateid('" + std::string(s) + "')");
  for (const char* s : {"denver", "austin", "boise", "portland", "dallas",
                        "atlanta", "houston", "columbus"})
    add(s, "cityid('" + std::string(s) + "')");
  for (const char* s : {"snake", "missouri", "cimarron", "yampa", "gila",
                        "pecos", "chattahoochee"})
    add(s, "riverid('" + std::string(s) + "')");

  // State-valued clauses.
  add("the states bordering $state$", "state(next_to_2($state$))");
  add("the states that border $state$", "state(next_to_2($state$))");
  add("the states crossed by $river$", "state(traverse_1($river$))");
  add("the states $river$ runs through", "state(traverse_1($river$))");
  add("the state containing $city$", "state(loc_1($city$))");
  add("the largest of $state$", "largest($state$)");
  add("the smallest of $state$", "smallest($state$)");
  // River-valued clauses.
  add("the rivers running through $state$", "river(traverse_2($state$))");
  add("rivers run through $state$", "river(traverse_2($state$))");
  add("the longest river in $state$", "longest(river(traverse_2($state$)))");
  // City-valued clauses.
  add("the cities in $state$", "city(loc_2($state$))");
  add("the capital of $state$", "capital_1($state$)");
  add("the major cities in $state$", "major(city(loc_2($state$)))");
  // Mountain- and lake-valued clauses.
  add("the mountains of $state$", "mountain(loc_2($state$))");
  add("the highest peak of $state$", "highest(mountain(loc_2($state$)))");
  add("the lakes in $state$", "lake(loc_2($state$))");
  // Numeric questions; nothing takes a $num$ slot, so these stay at the root.
  add("how many $river$", "count($river$)");
  add("how many $state$", "count($state$)");
  add("how many $city$", "count($city$)");
  add("the number of $lake$", "count($lake$)");
  add("the population of $city$", "population_1($city$)");
  add("the area of $state$", "area_1($state$)");
  add("the length of $river$", "len($river$)");
  add("the elevation of $mountain$", "elevation_1($mountain$)");

  validate_rules(rules, table);
  return rules;
}

std::vector<GrammarRule> load_rules(const std::string& path,
                                    const SignatureTable& table) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open rules file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError(path + ": bad JSON: " + e.what());
  }
  std::vector<GrammarRule> rules;
  for (const auto& r : j) {
    rules.push_back(make_rule(r.at("surface").get<std::string>(),
                              r.at("mr").get<std::string>(), table));
  }
  validate_rules(rules, table);
  return rules;
}

void save_rules(const std::vector<GrammarRule>& rules, const std::string& path) {
  json j = json::array();
  for (const auto& r : rules) {
    std::string surface;
    for (std::size_t i = 0; i < r.surface.size(); ++i) {
      if (i) surface += ' ';
      surface += r.surface[i];
    }
    j.push_back({{"surface", surface}, {"mr", serialize_mr(r.mr_template)}});
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write rules file: " + path);
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

namespace {

struct RuleIndex {
  std::map<TypeTag, std::vector<int>> entities;
  std::map<TypeTag, std::vector<int>> clauses;
};

RuleIndex index_rules(const std::vector<GrammarRule>& rules) {
  RuleIndex idx;
  for (std::size_t i = 0; i < rules.size(); ++i) {
    auto& bucket = rules[i].is_entity() ? idx.entities : idx.clauses;
    bucket[rules[i].result_type].push_back(static_cast<int>(i));
  }
  return idx;
}

// feasible[d] holds the types expandable with exactly d clause levels.
std::vector<std::set<TypeTag>> feasibility(const std::vector<GrammarRule>& rules,
                                           const RuleIndex& idx, int max_depth) {
  std::vector<std::set<TypeTag>> feasible(max_depth + 1);
  for (const auto& [t, v] : idx.entities)
    if (!v.empty()) feasible[0].insert(t);
  for (int d = 1; d <= max_depth; ++d) {
    for (const auto& [t, v] : idx.clauses) {
      for (int ri : v) {
        if (feasible[d - 1].count(*rules[ri].slot_type)) {
          feasible[d].insert(t);
          break;
        }
      }
    }
  }
  return feasible;
}

std::vector<std::string> realize_surface(const GrammarRule& rule,
                                         const std::vector<std::string>& inner) {
  std::vector<std::string> out;
  for (const auto& tok : rule.surface) {
    if (rule.slot_type && tok == type_tag_token(*rule.slot_type)) {
      out.insert(out.end(), inner.begin(), inner.end());
    } else {
      out.push_back(tok);
    }
  }
  return out;
}

int surface_prefix_len(const GrammarRule& rule) {
  int n = 0;
  for (const auto& tok : rule.surface) {
    if (rule.slot_type && tok == type_tag_token(*rule.slot_type)) break;
    ++n;
  }
  return n;
}

MrNode fill_template(const MrNode& tmpl, const MrNode& inner) {
  if (tmpl.is_placeholder()) return inner;
  MrNode out = tmpl;
  for (auto& c : out.children) c = fill_template(c, inner);
  return out;
}

}  // namespace

std::vector<Instance> generate(const std::vector<GrammarRule>& rule_set, int n,
                               int max_depth, std::uint64_t seed,
                               const SignatureTable& table) {
  if (rule_set.empty()) throw GrammarError("empty rule set");
  if (max_depth < 1) throw GrammarError("max_depth must be >= 1");
  std::vector<GrammarRule> rules = rule_set;
  validate_rules(rules, table);
  RuleIndex idx = index_rules(rules);
  auto feasible = feasibility(rules, idx, max_depth);
  if (feasible[1].empty())
    throw GrammarError("no clause rule can reach an entity rule");

  std::mt19937_64 rng(seed);
  auto pick = [&rng](const std::vector<int>& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };

  std::vector<Instance> out;
  out.reserve(static_cast<std::size_t>(n));
  while (static_cast<int>(out.size()) < n) {
    int depth =
        std::uniform_int_distribution<int>(1, max_depth)(rng);
    while (feasible[depth].empty()) --depth;  // depth 1 is always feasible

    // Sample the clause chain outermost-first.
    std::vector<int> chain;
    std::vector<TypeTag> types(feasible[depth].begin(), feasible[depth].end());
    TypeTag need = types[std::uniform_int_distribution<std::size_t>(
        0, types.size() - 1)(rng)];
    for (int d = depth; d >= 1; --d) {
      std::vector<int> candidates;
      auto it = idx.clauses.find(need);
      if (it != idx.clauses.end()) {
        for (int ri : it->second)
          if (feasible[d - 1].count(*rules[ri].slot_type))
            candidates.push_back(ri);
      }
      if (candidates.empty())
        throw GrammarError("no rule produces slot type " +
                           type_tag_token(need) + " at depth " +
                           std::to_string(d));
      int ri = pick(candidates);
      chain.push_back(ri);
      need = *rules[ri].slot_type;
    }
    auto eit = idx.entities.find(need);
    if (eit == idx.entities.end() || eit->second.empty())
      throw GrammarError("no entity rule of type " + type_tag_token(need));
    const GrammarRule& entity = rules[pick(eit->second)];

    // Realize innermost-first. chain is outermost-first, so walk it backwards.
    Instance inst;
    std::vector<MrNode> partials;
    std::vector<std::vector<std::string>> level_tokens;  // realized span per level
    MrNode inner_mr = entity.mr_template;
    std::vector<std::string> inner_tokens = entity.surface;
    for (int k = depth - 1; k >= 0; --k) {
      const GrammarRule& rule = rules[chain[k]];
      // Partial MR: entity filled in at the innermost level, the slot
      // placeholder kept at every outer level.
      partials.push_back(k == depth - 1
                             ? fill_template(rule.mr_template, inner_mr)
                             : rule.mr_template);
      level_tokens.push_back(realize_surface(rule, inner_tokens));
      inner_mr = fill_template(rule.mr_template, inner_mr);
      inner_tokens = {type_tag_token(rules[chain[k]].result_type)};
    }
    inst.mr = inner_mr;

    // Utterance: the outermost clause wraps everything, then "?".
    std::vector<std::string> x = entity.surface;
    for (int k = depth - 1; k >= 0; --k)
      x = realize_surface(rules[chain[k]], x);
    x.push_back("?");
    inst.utterance = std::move(x);

    // Gold spans. Level m's span within the m-times reduced utterance
    // starts after the surface prefixes of all outer clauses; the last
    // span covers the whole reduced utterance including "?".
    for (int m = 0; m < depth; ++m) {
      Span span;
      if (m == depth - 1) {
        span = Span{1, static_cast<int>(level_tokens[m].size()) + 1};
      } else {
        int prefix = 0;
        for (int k = 0; k < depth - 1 - m; ++k)
          prefix += surface_prefix_len(rules[chain[k]]);
        span = Span{prefix + 1,
                    prefix + static_cast<int>(level_tokens[m].size())};
      }
      inst.gold_spans.emplace_back(span, partials[m]);
    }

    // Generation-time verification.
    validate_mr(inst.mr, table);
    std::vector<MrNode> gold_partials;
    for (const auto& [s, p] : inst.gold_spans) gold_partials.push_back(p);
    if (!canonical_equal(compose(gold_partials, table), inst.mr))
      throw GrammarError("generator decomposition does not compose back: " +
                         serialize_mr(inst.mr));
    out.push_back(std::move(inst));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

namespace {

void strip_literals(MrNode& m) {
  if (m.is_literal()) m.name = "e_0";
  for (auto& c : m.children) strip_literals(c);
}

}  // namespace

std::string mr_skeleton(const MrNode& m) {
  MrNode stripped = m;
  strip_literals(stripped);
  return serialize_mr(stripped);
}

SplitResult compositional_split(const std::vector<Instance>& instances,
                                double held_out_fraction, std::uint64_t seed,
                                bool skeleton_constraint) {
  if (held_out_fraction <= 0.0 || held_out_fraction >= 1.0)
    throw SplitError("held-out fraction must be in (0, 1)");
  if (instances.empty()) throw SplitError("empty dataset");

  // Group by skeleton (or by utterance text in standard mode).
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    std::string key = skeleton_constraint ? mr_skeleton(instances[i].mr)
                                          : instances[i].utterance_text();
    groups[key].push_back(i);
  }
  if (groups.size() < 2)
    throw SplitError("need at least two distinct " +
                     std::string(skeleton_constraint ? "skeletons" : "utterances") +
                     " to split");

  std::vector<std::string> keys;
  keys.reserve(groups.size());
  for (const auto& [k, v] : groups) keys.push_back(k);
  std::mt19937_64 rng(seed);
  std::shuffle(keys.begin(), keys.end(), rng);

  std::size_t held = static_cast<std::size_t>(
      std::max(1.0, held_out_fraction * static_cast<double>(keys.size())));
  if (held >= keys.size())
    throw SplitError("held-out fraction leaves no training groups");

  std::set<std::string> test_keys(keys.begin(), keys.begin() + held);
  SplitResult result;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    std::string key = skeleton_constraint ? mr_skeleton(instances[i].mr)
                                          : instances[i].utterance_text();
    Instance copy = instances[i];
    if (test_keys.count(key)) {
      copy.label = skeleton_constraint ? "unseen" : "test";
      result.test.push_back(std::move(copy));
    } else {
      copy.label = "train";
      result.train.push_back(std::move(copy));
    }
  }
  if (result.train.empty() || result.test.empty())
    throw SplitError("degenerate split");

  // Utterance disjointness must hold on both modes.
  std::set<std::string> train_utts;
  for (const auto& t : result.train) train_utts.insert(t.utterance_text());
  for (const auto& t : result.test) {
    if (train_utts.count(t.utterance_text()))
      throw SplitError("utterance appears on both sides: " + t.utterance_text());
  }
  return result;
}

}  // namespace segparse
