#pragma once

#include <string>

#include "segparse/pipeline.hpp"

namespace segparse {

/// Flat key=value config file. Blank lines and '#' comments are skipped.
/// Documented keys (all optional, defaults in parentheses):
///   emb_dim (300)            word embedding size, both models
///   parser_hidden (512)      encoder size per direction / decoder size
///   segmenter_hidden (300)   segmenter GRU size
///   pretrain_epochs (100)    stage-1 parser epochs
///   finetune_epochs (30)     stage-4 parser epochs
///   segmenter_epochs (100)   stage-3 epochs
///   learning_rate (0.001)    Adam step size, both models
///   dropout (0.5)            dropout rate, both models
///   batch_size (64)
///   beam (5)                 decode beam at evaluation time
///   max_iters (8)            inference iteration cap
///   length_cap (60)          decoder symbol cap
///   min_count (1)            input vocabulary frequency threshold
///   recurse (true)           multi-level pseudo-supervision derivation
///   copy (false)             restricted copy mechanism
///   anonymize_mr (false)     replace entity literals with typed markers
/// Unknown keys raise ConfigError. The random seed is not a config key; it
/// comes from the command line so one flag controls all randomness.
PipelineConfig load_config(const std::string& path);

PipelineConfig parse_config(const std::string& text);

std::string config_to_text(const PipelineConfig& config);

}  // namespace segparse
