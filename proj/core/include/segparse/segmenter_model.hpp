#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "segparse/dataset.hpp"
#include "segparse/nn.hpp"
#include "segparse/span.hpp"

namespace segparse {

struct SegmenterConfig {
  int emb_dim = 300;
  int hidden = 300;
  double learning_rate = 1e-3;
  double dropout = 0.5;
  int batch_size = 64;
  int epochs = 100;
  std::uint64_t seed = 1;
};

/// Span-prediction model p(x_hat | x): a unidirectional GRU encoder with
/// independent start- and end-position heads (one weight vector each,
/// softmax over token positions). "Stop" is the whole-utterance span.
class Segmenter {
 public:
  explicit Segmenter(VocabMap vocab, SegmenterConfig cfg);

  const SegmenterConfig& config() const { return cfg_; }
  const VocabMap& vocab() const { return vocab_; }

  /// Start- and end-position distributions over token positions; both are
  /// probability simplexes of the utterance length.
  std::pair<nn::Vec, nn::Vec> span_distributions(
      const std::vector<std::string>& tokens) const;

  /// Feasible-pair argmax of p_start(i) * p_end(j) subject to i < j; ties
  /// break toward smaller i, then smaller j. A single-token utterance yields
  /// the whole-utterance span.
  Span predict_span(const std::vector<std::string>& tokens) const;

  struct TrainStats {
    std::vector<double> epoch_losses;  // mean NLL per signal
  };

  /// Maximizes sum of log p_start(i) + log p_end(j) over the signals with
  /// mini-batch Adam. Throws DivergenceError on non-finite loss.
  TrainStats train(
      const std::vector<std::pair<std::vector<std::string>, Span>>& signals);

  /// Tape loss over a batch (mean per signal); accumulates gradients into
  /// the store when asked, for finite-difference oracles.
  double batch_loss(
      const std::vector<std::pair<std::vector<std::string>, Span>>& signals,
      bool accumulate_grads);

  nn::ParameterStore& params() { return store_; }
  const nn::ParameterStore& params() const { return store_; }

  void save(const std::string& dir) const;
  static Segmenter load(const std::string& dir, const VocabMap& vocab);

 private:
  nn::Tape::V signal_loss(nn::Tape& tape, const std::vector<int>& ids,
                          const Span& span, std::mt19937_64* dropout_rng);

  VocabMap vocab_;
  SegmenterConfig cfg_;
  nn::ParameterStore store_;
  int emb_;
  int wz_, uz_, bz_, wr_, ur_, br_, wh_, uh_, bh_;
  int w_start_, w_end_;
};

}  // namespace segparse
