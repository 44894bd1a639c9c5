#include "segparse/parser_model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "json.hpp"

namespace segparse {

using nn::Mat;
using nn::Vec;
using nlohmann::json;

namespace {

bool is_cell_ref(const std::string& s) {
  auto one_ref = [](const std::string& r) {
    std::size_t i = 0;
    while (i < r.size() && std::isupper(static_cast<unsigned char>(r[i]))) ++i;
    if (i == 0 || i >= r.size()) return false;
    for (std::size_t k = i; k < r.size(); ++k)
      if (!std::isdigit(static_cast<unsigned char>(r[k]))) return false;
    return true;
  };
  auto colon = s.find(':');
  if (colon == std::string::npos) return one_ref(s);
  return one_ref(s.substr(0, colon)) && one_ref(s.substr(colon + 1));
}

bool is_date(const std::string& s) {
  auto digits = [&](std::size_t from, std::size_t to) {
    if (to > s.size()) return false;
    for (std::size_t i = from; i < to; ++i)
      if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    return true;
  };
  // ISO yyyy-mm-dd.
  if (s.size() == 10 && s[4] == '-' && s[7] == '-')
    return digits(0, 4) && digits(5, 7) && digits(8, 10);
  // m/d/y with 1-2 digit day/month and 2 or 4 digit year.
  int slashes = 0;
  for (char c : s)
    if (c == '/') ++slashes;
  if (slashes != 2) return false;
  std::istringstream ss(s);
  std::string part;
  int idx = 0;
  while (std::getline(ss, part, '/')) {
    if (part.empty()) return false;
    for (char c : part)
      if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    if (idx < 2 && part.size() > 2) return false;
    if (idx == 2 && part.size() != 2 && part.size() != 4) return false;
    ++idx;
  }
  return idx == 3;
}

constexpr double kNegInf = -1e30;

}  // namespace

bool is_copyable_value(const std::string& token) {
  return is_number_token(token) || is_marker_token(token) || is_date(token) ||
         is_cell_ref(token);
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

BaseParser::GruIds BaseParser::add_gru(const std::string& prefix, int in_dim,
                                       int hidden) {
  GruIds g;
  g.wz = store_.add(prefix + "_Wz", hidden, in_dim);
  g.uz = store_.add(prefix + "_Uz", hidden, hidden);
  g.bz = store_.add(prefix + "_bz", hidden, 1);
  g.wr = store_.add(prefix + "_Wr", hidden, in_dim);
  g.ur = store_.add(prefix + "_Ur", hidden, hidden);
  g.br = store_.add(prefix + "_br", hidden, 1);
  g.wh = store_.add(prefix + "_Wh", hidden, in_dim);
  g.uh = store_.add(prefix + "_Uh", hidden, hidden);
  g.bh = store_.add(prefix + "_bh", hidden, 1);
  return g;
}

BaseParser::BaseParser(Vocabulary vocab, ParserConfig cfg,
                       const SignatureTable& table)
    : vocab_(std::move(vocab)), cfg_(cfg), table_(&table) {
  const int e = cfg_.emb_dim;
  const int h = cfg_.hidden;
  emb_in_ = store_.add("emb_in", vocab_.input.size(), e);
  emb_out_ = store_.add("emb_out", vocab_.output.size(), e);
  enc_f_ = add_gru("enc_f", e, h);
  enc_b_ = add_gru("enc_b", e, h);
  dec_ = add_gru("dec", e + h, h);
  w_init_ = store_.add("init_W", h, 2 * h);
  b_init_ = store_.add("init_b", h, 1);
  attn_w_ = store_.add("attn_W", 2 * h, h);
  comb_w_ = store_.add("comb_W", h, 3 * h);
  comb_b_ = store_.add("comb_b", h, 1);
  out_w_ = store_.add("out_W", vocab_.output.size(), h);
  out_b_ = store_.add("out_b", vocab_.output.size(), 1);
  if (cfg_.copy_enabled) {
    gate_w_ = store_.add("gate_w", 1, h);
    gate_b_ = store_.add("gate_b", 1, 1);
  }
  nn::init_params(store_, 0.08, cfg_.seed);
}

void BaseParser::set_config(const ParserConfig& cfg) {
  if (cfg.emb_dim != cfg_.emb_dim || cfg.hidden != cfg_.hidden ||
      cfg.copy_enabled != cfg_.copy_enabled)
    throw Error("set_config cannot change model dimensions or copy setting");
  cfg_ = cfg;
}

// ---------------------------------------------------------------------------
// Plain (tape-free) forward pass, used by all inference
// ---------------------------------------------------------------------------

namespace {
inline Vec sigmoid_v(const Vec& x) {
  return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}
}  // namespace

Vec BaseParser::gru_step(const GruIds& g, const Vec& x, const Vec& h) const {
  const Vec z = sigmoid_v(store_.value(g.wz) * x + store_.value(g.uz) * h +
                          store_.value(g.bz));
  const Vec r = sigmoid_v(store_.value(g.wr) * x + store_.value(g.ur) * h +
                          store_.value(g.br));
  const Vec c = (store_.value(g.wh) * x +
                 store_.value(g.uh) * r.cwiseProduct(h) + store_.value(g.bh))
                    .array()
                    .tanh()
                    .matrix();
  return (1.0 - z.array()).matrix().cwiseProduct(h) + z.cwiseProduct(c);
}

BaseParser::Encoded BaseParser::encode(
    const std::vector<std::string>& tokens) const {
  if (tokens.empty()) throw Error("encode: empty token list");
  const int h = cfg_.hidden;
  const int m = static_cast<int>(tokens.size());
  Encoded enc;
  enc.tokens = tokens;
  enc.token_ids = vocab_.input.encode(tokens);
  for (int i = 0; i < m; ++i)
    if (is_copyable_value(tokens[static_cast<std::size_t>(i)]))
      enc.copyable.push_back(i);

  const Mat& emb = store_.value(emb_in_);
  std::vector<Vec> fwd(static_cast<std::size_t>(m)), bwd(static_cast<std::size_t>(m));
  Vec hf = Vec::Zero(h);
  for (int i = 0; i < m; ++i) {
    hf = gru_step(enc_f_, emb.row(enc.token_ids[static_cast<std::size_t>(i)]).transpose(), hf);
    fwd[static_cast<std::size_t>(i)] = hf;
  }
  Vec hb = Vec::Zero(h);
  for (int i = m - 1; i >= 0; --i) {
    hb = gru_step(enc_b_, emb.row(enc.token_ids[static_cast<std::size_t>(i)]).transpose(), hb);
    bwd[static_cast<std::size_t>(i)] = hb;
  }
  enc.annotations.resize(2 * h, m);
  for (int i = 0; i < m; ++i) {
    enc.annotations.col(i).head(h) = fwd[static_cast<std::size_t>(i)];
    enc.annotations.col(i).tail(h) = bwd[static_cast<std::size_t>(i)];
  }
  enc.summary.resize(2 * h);
  enc.summary.head(h) = fwd.back();
  enc.summary.tail(h) = bwd.front();
  return enc;
}

BaseParser::DecoderState BaseParser::initial_state(const Encoded& enc) const {
  DecoderState s;
  s.hidden = (store_.value(w_init_) * enc.summary + store_.value(b_init_))
                 .array()
                 .tanh()
                 .matrix();
  s.feed = Vec::Zero(cfg_.hidden);
  return s;
}

BaseParser::StepResult BaseParser::decode_step(const std::string& prev_symbol,
                                               const DecoderState& state,
                                               const Encoded& enc) const {
  const int h = cfg_.hidden;
  const int vout = vocab_.output.size();
  const int m = static_cast<int>(enc.tokens.size());

  const int prev_id = vocab_.output.index(prev_symbol);
  Vec x(cfg_.emb_dim + h);
  x.head(cfg_.emb_dim) = store_.value(emb_out_).row(prev_id).transpose();
  x.tail(h) = state.feed;

  StepResult out;
  Vec hidden = gru_step(dec_, x, state.hidden);
  Vec scores = enc.annotations.transpose() * (store_.value(attn_w_) * hidden);
  Eigen::ArrayXd sa = (scores.array() - scores.maxCoeff()).exp();
  Vec alpha = (sa / sa.sum()).matrix();
  Vec ctx = enc.annotations * alpha;
  Vec hc(3 * h);
  hc.head(h) = hidden;
  hc.tail(2 * h) = ctx;
  Vec htilde =
      (store_.value(comb_w_) * hc + store_.value(comb_b_)).array().tanh().matrix();

  Vec logits = store_.value(out_w_) * htilde + store_.value(out_b_);
  logits(VocabMap::kPad) = kNegInf;
  logits(VocabMap::kUnk) = kNegInf;
  logits(VocabMap::kBos) = kNegInf;
  Eigen::ArrayXd la = (logits.array() - logits.maxCoeff()).exp();
  Vec pv = (la / la.sum()).matrix();

  out.distribution = Vec::Zero(vout + m);
  if (cfg_.copy_enabled && !enc.copyable.empty()) {
    const double g = 1.0 / (1.0 + std::exp(-(store_.value(gate_w_) * htilde +
                                             store_.value(gate_b_))(0, 0)));
    double z = 0;
    for (int pos : enc.copyable) z += alpha(pos);
    out.distribution.head(vout) = (1.0 - g) * pv;
    for (int pos : enc.copyable)
      out.distribution(vout + pos) = g * alpha(pos) / z;
  } else {
    out.distribution.head(vout) = pv;
  }
  out.attention = alpha;
  out.state.hidden = std::move(hidden);
  out.state.feed = std::move(htilde);
  return out;
}

// ---------------------------------------------------------------------------
// Beam search
// ---------------------------------------------------------------------------

namespace {

struct Hypothesis {
  std::vector<std::string> symbols;
  double log_prob = 0.0;
  BaseParser::DecoderState state;
  std::vector<nn::Vec> attentions;
  bool finished = false;
};

}  // namespace

DecodeResult BaseParser::parse(const std::vector<std::string>& tokens,
                               int beam) const {
  if (beam < 1) throw Error("parse: beam must be >= 1");
  const Encoded enc = encode(tokens);
  const int vout = vocab_.output.size();
  const std::string bos = vocab_.output.token(VocabMap::kBos);
  const std::string eos = vocab_.output.token(VocabMap::kEos);

  std::vector<Hypothesis> live(1);
  live[0].state = initial_state(enc);
  std::vector<Hypothesis> finished;

  for (int step = 0; step < cfg_.length_cap && !live.empty(); ++step) {
    struct Cand {
      double lp;
      std::size_t hyp;
      int idx;
    };
    std::vector<Cand> cands;
    std::vector<StepResult> steps(live.size());
    for (std::size_t hi = 0; hi < live.size(); ++hi) {
      const std::string& prev =
          live[hi].symbols.empty() ? bos : live[hi].symbols.back();
      steps[hi] = decode_step(prev, live[hi].state, enc);
      const Vec& dist = steps[hi].distribution;
      for (int k = 0; k < dist.size(); ++k) {
        if (dist(k) <= 0.0) continue;
        cands.push_back({live[hi].log_prob + std::log(dist(k)), hi, k});
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.lp != b.lp) return a.lp > b.lp;
      if (a.hyp != b.hyp) return a.hyp < b.hyp;
      return a.idx < b.idx;
    });
    std::vector<Hypothesis> next;
    for (const Cand& c : cands) {
      if (static_cast<int>(next.size()) + static_cast<int>(finished.size()) >=
              beam &&
          static_cast<int>(next.size()) >= beam)
        break;
      Hypothesis h = live[c.hyp];
      h.log_prob = c.lp;
      h.state = steps[c.hyp].state;
      h.attentions.push_back(steps[c.hyp].attention);
      std::string symbol = c.idx < vout
                               ? vocab_.output.token(c.idx)
                               : enc.tokens[static_cast<std::size_t>(c.idx - vout)];
      if (symbol == eos) {
        h.finished = true;
        finished.push_back(std::move(h));
      } else {
        h.symbols.push_back(std::move(symbol));
        if (static_cast<int>(next.size()) < beam) next.push_back(std::move(h));
      }
      if (static_cast<int>(next.size()) >= beam) break;
    }
    live = std::move(next);
  }

  // The pool always contains the greedy rollout so that widening the beam
  // cannot lose to beam 1.
  if (beam > 1) {
    DecodeResult greedy = parse(tokens, 1);
    Hypothesis h;
    h.symbols = greedy.symbols;
    h.log_prob = greedy.log_prob;
    h.finished = true;
    for (Eigen::Index r = 0; r < greedy.attention.rows(); ++r)
      h.attentions.push_back(greedy.attention.row(r).transpose());
    finished.push_back(std::move(h));
  }
  for (auto& h : live) finished.push_back(std::move(h));  // cap-truncated

  const Hypothesis* best = nullptr;
  for (const auto& h : finished) {
    if (!best || h.log_prob > best->log_prob ||
        (h.log_prob == best->log_prob && h.finished && !best->finished))
      best = &h;
  }

  DecodeResult result;
  if (!best) {
    result.parse_failed = true;
    return result;
  }
  result.symbols = best->symbols;
  result.log_prob = best->log_prob;
  result.attention.resize(static_cast<Eigen::Index>(best->attentions.size()),
                          static_cast<Eigen::Index>(tokens.size()));
  for (std::size_t r = 0; r < best->attentions.size(); ++r)
    result.attention.row(static_cast<Eigen::Index>(r)) =
        best->attentions[r].transpose();
  try {
    MrNode mr = symbols_to_mr(result.symbols, *table_);
    validate_mr(mr, *table_);
    result.mr = std::move(mr);
  } catch (const Error&) {
    result.parse_failed = true;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

nn::Tape::V BaseParser::gru_step_t(nn::Tape& t, const GruIds& g, nn::Tape::V x,
                                   nn::Tape::V h) const {
  auto z = t.sigmoid_(t.linear2(g.wz, x, g.uz, h, g.bz));
  auto r = t.sigmoid_(t.linear2(g.wr, x, g.ur, h, g.br));
  auto c = t.tanh_(t.linear2(g.wh, x, g.uh, t.mul_elem(r, h), g.bh));
  return t.add(t.mul_elem(t.one_minus(z), h), t.mul_elem(z, c));
}

nn::Tape::V BaseParser::example_loss(nn::Tape& tape,
                                     const std::vector<int>& input_ids,
                                     const std::vector<std::string>& input_tokens,
                                     const std::vector<std::string>& symbols,
                                     std::mt19937_64* dropout_rng) {
  using V = nn::Tape::V;
  const int h = cfg_.hidden;
  const int m = static_cast<int>(input_ids.size());
  const double keep = 1.0 - cfg_.dropout;

  auto dropped = [&](V v) -> V {
    if (!dropout_rng || cfg_.dropout <= 0.0) return v;
    std::bernoulli_distribution coin(keep);
    Mat mask(tape.value(v).rows(), 1);
    for (Eigen::Index r = 0; r < mask.rows(); ++r)
      mask(r, 0) = coin(*dropout_rng) ? 1.0 / keep : 0.0;
    return tape.mask(v, mask);
  };

  // Encoder.
  std::vector<V> fwd(static_cast<std::size_t>(m)), bwd(static_cast<std::size_t>(m));
  std::vector<V> embs(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i)
    embs[static_cast<std::size_t>(i)] =
        dropped(tape.embed(emb_in_, input_ids[static_cast<std::size_t>(i)]));
  V hf = tape.zeros(h, 1);
  for (int i = 0; i < m; ++i) {
    hf = gru_step_t(tape, enc_f_, embs[static_cast<std::size_t>(i)], hf);
    fwd[static_cast<std::size_t>(i)] = hf;
  }
  V hb = tape.zeros(h, 1);
  for (int i = m - 1; i >= 0; --i) {
    hb = gru_step_t(tape, enc_b_, embs[static_cast<std::size_t>(i)], hb);
    bwd[static_cast<std::size_t>(i)] = hb;
  }
  std::vector<V> ann_cols(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i)
    ann_cols[static_cast<std::size_t>(i)] = tape.concat(
        fwd[static_cast<std::size_t>(i)], bwd[static_cast<std::size_t>(i)]);
  V ann = tape.concat_cols(ann_cols);
  V state = tape.tanh_(tape.affine(
      w_init_, tape.concat(fwd[static_cast<std::size_t>(m - 1)], bwd[0]), b_init_));
  V feed = tape.zeros(h, 1);

  std::vector<int> copyable;
  if (cfg_.copy_enabled) {
    for (int i = 0; i < m; ++i)
      if (is_copyable_value(input_tokens[static_cast<std::size_t>(i)]))
        copyable.push_back(i);
  }

  // Teacher-forced decoder. Inputs are <s> + symbols, targets symbols + </s>.
  std::vector<std::string> targets = symbols;
  targets.push_back(vocab_.output.token(VocabMap::kEos));
  std::vector<V> losses;
  std::string prev = vocab_.output.token(VocabMap::kBos);
  Mat special_mask = Mat::Zero(vocab_.output.size(), 1);
  special_mask(VocabMap::kPad, 0) = kNegInf;
  special_mask(VocabMap::kUnk, 0) = kNegInf;
  special_mask(VocabMap::kBos, 0) = kNegInf;
  V special = tape.constant(special_mask);

  for (const std::string& target : targets) {
    const int target_id = vocab_.output.index(target);
    if (target_id == VocabMap::kUnk)
      throw Error("gold MR symbol outside the closed output vocabulary: " +
                  target);
    const int prev_id = vocab_.output.index(prev);
    V x = tape.concat(dropped(tape.embed(emb_out_, prev_id)), feed);
    state = gru_step_t(tape, dec_, x, state);
    V alpha = tape.softmax(tape.gemv_t(ann, tape.affine(attn_w_, state, -1)));
    V ctx = tape.gemv(ann, alpha);
    V htilde =
        tape.tanh_(tape.affine(comb_w_, tape.concat(state, ctx), comb_b_));
    V hdrop = dropped(htilde);
    V logits = tape.add(tape.affine(out_w_, hdrop, out_b_), special);

    if (cfg_.copy_enabled && !copyable.empty()) {
      V pv = tape.softmax(logits);
      V g = tape.sigmoid_(tape.affine(gate_w_, hdrop, gate_b_));
      Mat cmask = Mat::Zero(m, 1);
      for (int pos : copyable) cmask(pos, 0) = 1.0;
      V cu = tape.mask(alpha, cmask);
      V z = tape.pick_sum(cu, copyable);
      std::vector<int> hits;
      for (int pos : copyable)
        if (input_tokens[static_cast<std::size_t>(pos)] == target)
          hits.push_back(pos);
      V p_vocab = tape.scale_by(tape.pick(pv, target_id), tape.one_minus(g));
      V p = p_vocab;
      if (!hits.empty()) {
        V p_copy = tape.scale_by(tape.div_ss(tape.pick_sum(cu, hits), z), g);
        p = tape.add(p_vocab, p_copy);
      }
      losses.push_back(tape.neg(tape.log_(p)));
    } else {
      losses.push_back(tape.neg(tape.pick(tape.log_softmax(logits), target_id)));
    }
    feed = htilde;
    prev = target;
  }
  return tape.sum(losses);
}

double BaseParser::batch_loss(
    const std::vector<std::pair<std::vector<std::string>, MrNode>>& pairs,
    bool accumulate_grads) {
  double total = 0;
  std::size_t tokens = 0;
  for (const auto& [utt, mr] : pairs) {
    std::vector<std::string> symbols = mr_to_symbols(mr);
    tokens += symbols.size() + 1;
    nn::Tape tape(store_);
    nn::Tape::V loss =
        example_loss(tape, vocab_.input.encode(utt), utt, symbols, nullptr);
    total += tape.value(loss)(0, 0);
    if (accumulate_grads) tape.backward(loss);
  }
  const double scale = 1.0 / static_cast<double>(tokens);
  if (accumulate_grads) store_.scale_grad(scale);
  return total * scale;
}

double BaseParser::sequence_nll(const std::vector<std::string>& tokens,
                                const std::vector<std::string>& symbols) const {
  const Encoded enc = encode(tokens);
  DecoderState state = initial_state(enc);
  std::vector<std::string> targets = symbols;
  targets.push_back(vocab_.output.token(VocabMap::kEos));
  std::string prev = vocab_.output.token(VocabMap::kBos);
  const int vout = vocab_.output.size();
  double nll = 0;
  for (const std::string& target : targets) {
    StepResult step = decode_step(prev, state, enc);
    const int target_id = vocab_.output.index(target);
    double p = step.distribution(target_id);
    if (cfg_.copy_enabled) {
      for (int pos : enc.copyable)
        if (enc.tokens[static_cast<std::size_t>(pos)] == target)
          p += step.distribution(vout + pos);
    }
    nll -= std::log(p);
    state = step.state;
    prev = target;
  }
  return nll / static_cast<double>(targets.size());
}

TrainStats BaseParser::train(
    const std::vector<std::pair<std::vector<std::string>, MrNode>>& pairs) {
  if (pairs.empty()) throw Error("train: empty pair list");
  std::mt19937_64 rng(cfg_.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  // Pre-encode symbol sequences once.
  std::vector<std::vector<std::string>> symbol_seqs(pairs.size());
  std::vector<std::vector<int>> input_ids(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    symbol_seqs[i] = mr_to_symbols(pairs[i].second);
    input_ids[i] = vocab_.input.encode(pairs[i].first);
  }

  TrainStats stats;
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_nll = 0;
    std::size_t epoch_tokens = 0;
    for (std::size_t b = 0; b < order.size();
         b += static_cast<std::size_t>(cfg_.batch_size)) {
      const std::size_t end =
          std::min(order.size(), b + static_cast<std::size_t>(cfg_.batch_size));
      store_.zero_grad();
      std::size_t batch_tokens = 0;
      for (std::size_t k = b; k < end; ++k) {
        const std::size_t i = order[k];
        nn::Tape tape(store_);
        nn::Tape::V loss_node = example_loss(tape, input_ids[i], pairs[i].first,
                                             symbol_seqs[i], &rng);
        const double loss = tape.value(loss_node)(0, 0);
        if (!std::isfinite(loss))
          throw DivergenceError("base parser loss is not finite");
        tape.backward(loss_node);
        epoch_nll += loss;
        batch_tokens += symbol_seqs[i].size() + 1;
      }
      epoch_tokens += batch_tokens;
      store_.scale_grad(1.0 / static_cast<double>(batch_tokens));
      store_.adam_step(cfg_.learning_rate);
    }
    stats.epoch_losses.push_back(epoch_nll /
                                 static_cast<double>(epoch_tokens));
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Checkpointing
// ---------------------------------------------------------------------------

void BaseParser::save(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["format_version"] = 1;
  manifest["kind"] = "base_parser";
  manifest["vocab_hash"] = vocab_.hash();
  manifest["dims"] = {{"emb", cfg_.emb_dim}, {"hidden", cfg_.hidden}};
  manifest["seed"] = cfg_.seed;
  manifest["copy_enabled"] = cfg_.copy_enabled;
  manifest["length_cap"] = cfg_.length_cap;
  std::ofstream mf(dir + "/manifest.json");
  if (!mf) throw IoError("cannot write manifest: " + dir);
  mf << manifest.dump(2) << '\n';
  std::ofstream blob(dir + "/params.bin", std::ios::binary);
  if (!blob) throw IoError("cannot write parameter blob: " + dir);
  store_.save(blob);
}

BaseParser BaseParser::load(const std::string& dir, const Vocabulary& vocab,
                            const SignatureTable& table) {
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
  if (manifest.value("kind", "") != "base_parser")
    throw CheckpointError("checkpoint is not a base parser");
  if (manifest.at("vocab_hash").get<std::uint64_t>() != vocab.hash())
    throw CheckpointError("vocabulary hash mismatch; refusing to load");
  ParserConfig cfg;
  cfg.emb_dim = manifest.at("dims").at("emb").get<int>();
  cfg.hidden = manifest.at("dims").at("hidden").get<int>();
  cfg.copy_enabled = manifest.value("copy_enabled", false);
  cfg.seed = manifest.value("seed", 1ull);
  cfg.length_cap = manifest.value("length_cap", 60);
  BaseParser parser(vocab, cfg, table);
  std::ifstream blob(dir + "/params.bin", std::ios::binary);
  if (!blob) throw IoError("cannot open parameter blob: " + dir);
  parser.store_.load(blob);
  return parser;
}

}  // namespace segparse
