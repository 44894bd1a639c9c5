#include "segparse/segmenter_model.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "json.hpp"

namespace segparse {

using nn::Mat;
using nn::Vec;
using nlohmann::json;

Segmenter::Segmenter(VocabMap vocab, SegmenterConfig cfg)
    : vocab_(std::move(vocab)), cfg_(cfg) {
  const int e = cfg_.emb_dim;
  const int u = cfg_.hidden;
  emb_ = store_.add("emb", vocab_.size(), e);
  wz_ = store_.add("Wz", u, e);
  uz_ = store_.add("Uz", u, u);
  bz_ = store_.add("bz", u, 1);
  wr_ = store_.add("Wr", u, e);
  ur_ = store_.add("Ur", u, u);
  br_ = store_.add("br", u, 1);
  wh_ = store_.add("Wh", u, e);
  uh_ = store_.add("Uh", u, u);
  bh_ = store_.add("bh", u, 1);
  w_start_ = store_.add("W_I", u, 1);
  w_end_ = store_.add("W_J", u, 1);
  nn::init_params(store_, 0.08, cfg_.seed);
}

namespace {
inline Vec sigmoid_v(const Vec& x) {
  return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}
}  // namespace

std::pair<Vec, Vec> Segmenter::span_distributions(
    const std::vector<std::string>& tokens) const {
  if (tokens.empty()) throw Error("span_distributions: empty token list");
  const int m = static_cast<int>(tokens.size());
  const int u = cfg_.hidden;
  const Mat& emb = store_.value(emb_);
  Vec h = Vec::Zero(u);
  Vec s_logits(m), e_logits(m);
  const Vec& wi = store_.value(w_start_).col(0);
  const Vec& wj = store_.value(w_end_).col(0);
  for (int i = 0; i < m; ++i) {
    const Vec x = emb.row(vocab_.index(tokens[static_cast<std::size_t>(i)])).transpose();
    const Vec z = sigmoid_v(store_.value(wz_) * x + store_.value(uz_) * h +
                            store_.value(bz_));
    const Vec r = sigmoid_v(store_.value(wr_) * x + store_.value(ur_) * h +
                            store_.value(br_));
    const Vec c = (store_.value(wh_) * x +
                   store_.value(uh_) * r.cwiseProduct(h) + store_.value(bh_))
                      .array()
                      .tanh()
                      .matrix();
    h = (1.0 - z.array()).matrix().cwiseProduct(h) + z.cwiseProduct(c);
    s_logits(i) = wi.dot(h);
    e_logits(i) = wj.dot(h);
  }
  auto softmax = [](const Vec& v) {
    Eigen::ArrayXd e = (v.array() - v.maxCoeff()).exp();
    return Vec((e / e.sum()).matrix());
  };
  return {softmax(s_logits), softmax(e_logits)};
}

Span Segmenter::predict_span(const std::vector<std::string>& tokens) const {
  const int m = static_cast<int>(tokens.size());
  if (m < 2) return Span::whole(tokens.size());
  auto [ps, pe] = span_distributions(tokens);
  // Log-space product; exhaustive scan over feasible pairs.
  double best = -std::numeric_limits<double>::infinity();
  Span best_span{1, m};
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      const double score = std::log(ps(i)) + std::log(pe(j));
      if (score > best) {
        best = score;
        best_span = Span{i + 1, j + 1};
      }
    }
  }
  return best_span;
}

nn::Tape::V Segmenter::signal_loss(nn::Tape& tape, const std::vector<int>& ids,
                                   const Span& span,
                                   std::mt19937_64* dropout_rng) {
  using V = nn::Tape::V;
  const int m = static_cast<int>(ids.size());
  const int u = cfg_.hidden;
  const double keep = 1.0 - cfg_.dropout;

  V h = tape.zeros(u, 1);
  std::vector<V> states(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    V x = tape.embed(emb_, ids[static_cast<std::size_t>(i)]);
    if (dropout_rng && cfg_.dropout > 0.0) {
      std::bernoulli_distribution coin(keep);
      Mat mask(tape.value(x).rows(), 1);
      for (Eigen::Index r = 0; r < mask.rows(); ++r)
        mask(r, 0) = coin(*dropout_rng) ? 1.0 / keep : 0.0;
      x = tape.mask(x, mask);
    }
    V z = tape.sigmoid_(tape.linear2(wz_, x, uz_, h, bz_));
    V r = tape.sigmoid_(tape.linear2(wr_, x, ur_, h, br_));
    V c = tape.tanh_(tape.linear2(wh_, x, uh_, tape.mul_elem(r, h), bh_));
    h = tape.add(tape.mul_elem(tape.one_minus(z), h), tape.mul_elem(z, c));
    states[static_cast<std::size_t>(i)] = h;
  }
  V states_mat = tape.concat_cols(states);                 // u x m
  V s_logits = tape.gemv_t(states_mat, tape.param(w_start_));  // m x 1
  V e_logits = tape.gemv_t(states_mat, tape.param(w_end_));
  V nll_s = tape.neg(tape.pick(tape.log_softmax(s_logits), span.start - 1));
  V nll_e = tape.neg(tape.pick(tape.log_softmax(e_logits), span.end - 1));
  return tape.add(nll_s, nll_e);
}

double Segmenter::batch_loss(
    const std::vector<std::pair<std::vector<std::string>, Span>>& signals,
    bool accumulate_grads) {
  double total = 0;
  for (const auto& [tokens, span] : signals) {
    nn::Tape tape(store_);
    nn::Tape::V loss =
        signal_loss(tape, vocab_.encode(tokens), span, nullptr);
    total += tape.value(loss)(0, 0);
    if (accumulate_grads) tape.backward(loss);
  }
  const double scale = 1.0 / static_cast<double>(signals.size());
  if (accumulate_grads) store_.scale_grad(scale);
  return total * scale;
}

Segmenter::TrainStats Segmenter::train(
    const std::vector<std::pair<std::vector<std::string>, Span>>& signals) {
  if (signals.empty()) throw Error("train: empty signal list");
  for (const auto& [tokens, span] : signals) {
    if (!span.valid_for(tokens.size()))
      throw Error("invalid span (" + std::to_string(span.start) + ", " +
                  std::to_string(span.end) + ") for utterance of length " +
                  std::to_string(tokens.size()));
  }
  std::mt19937_64 rng(cfg_.seed ^ 0x517cc1b727220a95ull);
  std::vector<std::size_t> order(signals.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<std::vector<int>> ids(signals.size());
  for (std::size_t i = 0; i < signals.size(); ++i)
    ids[i] = vocab_.encode(signals[i].first);

  TrainStats stats;
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_nll = 0;
    for (std::size_t b = 0; b < order.size();
         b += static_cast<std::size_t>(cfg_.batch_size)) {
      const std::size_t end =
          std::min(order.size(), b + static_cast<std::size_t>(cfg_.batch_size));
      store_.zero_grad();
      for (std::size_t k = b; k < end; ++k) {
        const std::size_t i = order[k];
        nn::Tape tape(store_);
        nn::Tape::V loss =
            signal_loss(tape, ids[i], signals[i].second, &rng);
        const double v = tape.value(loss)(0, 0);
        if (!std::isfinite(v))
          throw DivergenceError("segmenter loss is not finite");
        tape.backward(loss);
        epoch_nll += v;
      }
      store_.scale_grad(1.0 / static_cast<double>(end - b));
      store_.adam_step(cfg_.learning_rate);
    }
    stats.epoch_losses.push_back(epoch_nll /
                                 static_cast<double>(signals.size()));
  }
  return stats;
}

void Segmenter::save(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["format_version"] = 1;
  manifest["kind"] = "segmenter";
  // Hash of the input map alone; the segmenter has no output vocabulary.
  Vocabulary v;
  v.input = vocab_;
  manifest["vocab_hash"] = v.hash();
  manifest["dims"] = {{"emb", cfg_.emb_dim}, {"hidden", cfg_.hidden}};
  manifest["seed"] = cfg_.seed;
  manifest["copy_enabled"] = false;
  std::ofstream mf(dir + "/manifest.json");
  if (!mf) throw IoError("cannot write manifest: " + dir);
  mf << manifest.dump(2) << '\n';
  std::ofstream blob(dir + "/params.bin", std::ios::binary);
  if (!blob) throw IoError("cannot write parameter blob: " + dir);
  store_.save(blob);
}

Segmenter Segmenter::load(const std::string& dir, const VocabMap& vocab) {
  std::ifstream mf(dir + "/manifest.json");
  if (!mf) throw IoError("cannot open manifest: " + dir);
  json manifest;
  try {
    mf >> manifest;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("bad manifest: ") + e.what());
  }
  if (manifest.value("format_version", -1) != 1)
    throw CheckpointError("unsupported checkpoint format_version");
  if (manifest.value("kind", "") != "segmenter")
    throw CheckpointError("checkpoint is not a segmenter");
  Vocabulary v;
  v.input = vocab;
  if (manifest.at("vocab_hash").get<std::uint64_t>() != v.hash())
    throw CheckpointError("vocabulary hash mismatch; refusing to load");
  SegmenterConfig cfg;
  cfg.emb_dim = manifest.at("dims").at("emb").get<int>();
  cfg.hidden = manifest.at("dims").at("hidden").get<int>();
  cfg.seed = manifest.value("seed", 1ull);
  Segmenter seg(vocab, cfg);
  std::ifstream blob(dir + "/params.bin", std::ios::binary);
  if (!blob) throw IoError("cannot open parameter blob: " + dir);
  seg.store_.load(blob);
  return seg;
}

}  // namespace segparse
