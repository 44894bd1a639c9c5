#pragma once

#include <stdexcept>
#include <string>

namespace segparse {

/// Base class for all segparse errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Unparseable FunQL text: unbalanced parentheses, unknown symbol, arity mismatch.
struct MalformedMr : Error {
  using Error::Error;
};

/// A child's denotation type does not fit the parent's argument type.
struct TypeError : Error {
  using Error::Error;
};

/// substitute_mr target does not occur in the whole tree.
struct TargetNotFound : Error {
  using Error::Error;
};

/// compose could not find a placeholder of the required tag.
struct CompositionError : Error {
  using Error::Error;
};

/// Synthetic grammar cannot produce a required slot type.
struct GrammarError : Error {
  using Error::Error;
};

/// Train/test split constraints unsatisfiable.
struct SplitError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

/// Marker token in an utterance has no entry in the entity map.
struct MarkerMismatch : Error {
  using Error::Error;
};

/// Training loss became non-finite.
struct DivergenceError : Error {
  using Error::Error;
};

/// Parallel prediction/gold lists differ in length.
struct LengthMismatch : Error {
  using Error::Error;
};

/// Checkpoint refuses to load (format or vocab hash mismatch).
struct CheckpointError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace segparse
