#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "segparse/dataset.hpp"
#include "segparse/mr.hpp"
#include "segparse/nn.hpp"

namespace segparse {

struct ParserConfig {
  int emb_dim = 300;
  int hidden = 512;  // per encoder direction; decoder hidden equals this
  double learning_rate = 1e-3;
  double dropout = 0.5;
  int batch_size = 64;
  int epochs = 100;
  int length_cap = 60;
  bool copy_enabled = false;
  std::uint64_t seed = 1;
};

/// Regex-style value recognizer backing the restricted copy mechanism:
/// integers, decimals, ISO and m/d/y dates, cell references (F14, A1:D10),
/// and anonymized markers.
bool is_copyable_value(const std::string& token);

/// Result of decoding one token sequence.
struct DecodeResult {
  std::vector<std::string> symbols;   // without <s>/</s>
  double log_prob = 0.0;
  std::optional<MrNode> mr;           // absent => parse_failed
  bool parse_failed = false;
  nn::Mat attention;                  // steps x input length
};

struct TrainStats {
  std::vector<double> epoch_losses;  // mean NLL per target symbol
};

/// Sequence-to-sequence semantic parser: bidirectional GRU encoder,
/// unidirectional GRU decoder with bilinear attention and input feeding,
/// optional restricted copy. Training mutates parameters (single writer);
/// all inference entry points are const and safe to call concurrently.
class BaseParser {
 public:
  /// The signature table must outlive the parser; it backs MR parsing of
  /// decoded symbol sequences.
  explicit BaseParser(Vocabulary vocab, ParserConfig cfg,
                      const SignatureTable& table = SignatureTable::geo_default());

  const ParserConfig& config() const { return cfg_; }
  /// Updates training hyperparameters; dimensions and the copy setting are
  /// fixed at construction and must match.
  void set_config(const ParserConfig& cfg);
  const Vocabulary& vocab() const { return vocab_; }
  const SignatureTable& table() const { return *table_; }

  /// Encoder annotations and copy bookkeeping for one utterance.
  struct Encoded {
    nn::Mat annotations;             // 2*hidden x length
    nn::Vec summary;                 // [fwd last; bwd first]
    std::vector<int> token_ids;
    std::vector<std::string> tokens;
    std::vector<int> copyable;       // positions accepted by the recognizer
  };

  struct DecoderState {
    nn::Vec hidden;
    nn::Vec feed;  // previous attentional state (input feeding)
  };

  Encoded encode(const std::vector<std::string>& tokens) const;
  DecoderState initial_state(const Encoded& enc) const;

  /// One decoder step. The returned distribution has |V_out| + m entries:
  /// vocabulary symbols followed by copy positions. Copy entries are exactly
  /// zero at positions the value recognizer rejects, and the whole copy
  /// block is zero when the input has no value tokens.
  struct StepResult {
    nn::Vec distribution;
    nn::Vec attention;  // m
    DecoderState state;
  };
  StepResult decode_step(const std::string& prev_symbol,
                         const DecoderState& state, const Encoded& enc) const;

  /// Beam-search decode with length cap; beam >= 1. The candidate pool
  /// always contains the greedy rollout, so a wider beam never returns a
  /// lower-scoring hypothesis. MR parse failures are flagged, not thrown.
  DecodeResult parse(const std::vector<std::string>& tokens, int beam) const;

  /// Teacher-forced mean NLL per symbol of the gold sequence (no dropout).
  double sequence_nll(const std::vector<std::string>& tokens,
                      const std::vector<std::string>& symbols) const;

  /// Mini-batch Adam over token-level log-likelihood with teacher forcing.
  /// Throws DivergenceError when the loss becomes non-finite, and Error when
  /// a gold symbol falls outside the closed output vocabulary.
  TrainStats train(const std::vector<std::pair<std::vector<std::string>,
                                               MrNode>>& pairs);

  /// Tape loss of a batch at the current parameters; exposed so tests can
  /// run finite-difference oracles against the exact training objective.
  double batch_loss(const std::vector<std::pair<std::vector<std::string>,
                                                MrNode>>& pairs,
                    bool accumulate_grads);

  nn::ParameterStore& params() { return store_; }
  const nn::ParameterStore& params() const { return store_; }

  void save(const std::string& dir) const;
  static BaseParser load(const std::string& dir, const Vocabulary& vocab,
                         const SignatureTable& table = SignatureTable::geo_default());

 private:
  struct GruIds {
    int wz, uz, bz, wr, ur, br, wh, uh, bh;
  };
  GruIds add_gru(const std::string& prefix, int in_dim, int hidden);

  nn::Vec gru_step(const GruIds& g, const nn::Vec& x, const nn::Vec& h) const;
  nn::Tape::V gru_step_t(nn::Tape& t, const GruIds& g, nn::Tape::V x,
                         nn::Tape::V h) const;

  nn::Tape::V example_loss(nn::Tape& tape, const std::vector<int>& input_ids,
                           const std::vector<std::string>& input_tokens,
                           const std::vector<std::string>& symbols,
                           std::mt19937_64* dropout_rng);

  Vocabulary vocab_;
  ParserConfig cfg_;
  const SignatureTable* table_;
  nn::ParameterStore store_;
  int emb_in_, emb_out_;
  GruIds enc_f_, enc_b_, dec_;
  int w_init_, b_init_;
  int attn_w_;
  int comb_w_, comb_b_;
  int out_w_, out_b_;
  int gate_w_ = -1, gate_b_ = -1;
};

}  // namespace segparse
