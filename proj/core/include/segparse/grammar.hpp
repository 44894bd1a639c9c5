#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "segparse/dataset.hpp"
#include "segparse/mr.hpp"

namespace segparse {

/// One production of the synthetic grammar. Clause rules carry exactly one
/// typed slot, marked by the slot type's placeholder token in the surface
/// and by a placeholder node in the MR template; entity rules carry none.
struct GrammarRule {
  std::vector<std::string> surface;
  MrNode mr_template;
  TypeTag result_type = TypeTag::Place;       // computed during validation
  std::optional<TypeTag> slot_type;           // nullopt for entity rules

  bool is_entity() const { return !slot_type.has_value(); }
};

/// The built-in GEO-shaped rule set: six entity types, ~25 predicates,
/// single-slot nesting clauses such as "how many <RIVER>" and
/// "rivers run through <STATE>".
std::vector<GrammarRule> default_rules();

/// Rules file: JSON array of {"surface": "...", "mr": "..."} objects.
std::vector<GrammarRule> load_rules(const std::string& path,
                                    const SignatureTable& table);
void save_rules(const std::vector<GrammarRule>& rules, const std::string& path);

/// Checks slot agreement and typechecks every template; fills result_type.
/// Throws GrammarError.
void validate_rules(std::vector<GrammarRule>& rules, const SignatureTable& table);

/// Samples n instances by recursive rule expansion. Depth (the number of
/// nested clause levels) is uniform over [1, max_depth]. Each instance
/// records the generator's decomposition in gold_spans: innermost first,
/// span k positioned within the utterance reduced k-1 times, the last span
/// covering the whole remaining utterance. Deterministic given seed; every
/// instance is verified at generation time (MR typechecks, composing the
/// gold partials reproduces the MR).
/// Throws GrammarError when no rule can produce a required slot type.
std::vector<Instance> generate(const std::vector<GrammarRule>& rule_set, int n,
                               int max_depth, std::uint64_t seed,
                               const SignatureTable& table);

/// MR shape with entity literals anonymized; the unit held out by
/// compositional splits.
std::string mr_skeleton(const MrNode& m);

struct SplitResult {
  std::vector<Instance> train;
  std::vector<Instance> test;
};

/// Splits so that every anonymized MR skeleton appears on exactly one side
/// and utterances are disjoint; test receives held_out_fraction of the
/// skeletons. With skeleton_constraint off, only utterance disjointness is
/// enforced (the standard-split setting). Throws SplitError when the
/// constraints are unsatisfiable.
SplitResult compositional_split(const std::vector<Instance>& instances,
                                double held_out_fraction, std::uint64_t seed,
                                bool skeleton_constraint = true);

}  // namespace segparse
