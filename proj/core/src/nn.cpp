#include "segparse/nn.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

namespace segparse::nn {

// ---------------------------------------------------------------------------
// ParameterStore
// ---------------------------------------------------------------------------

int ParameterStore::add(const std::string& name, int rows, int cols) {
  if (index_.count(name)) throw Error("duplicate parameter name: " + name);
  Param p;
  p.name = name;
  p.value = Mat::Zero(rows, cols);
  p.grad = Mat::Zero(rows, cols);
  p.adam_m = Mat::Zero(rows, cols);
  p.adam_v = Mat::Zero(rows, cols);
  int id = static_cast<int>(params_.size());
  params_.push_back(std::move(p));
  index_.emplace(name, id);
  return id;
}

int ParameterStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

void ParameterStore::init_uniform(double range, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-range, range);
  for (auto& p : params_) {
    for (Eigen::Index c = 0; c < p.value.cols(); ++c)
      for (Eigen::Index r = 0; r < p.value.rows(); ++r)
        p.value(r, c) = dist(rng);
  }
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.grad.setZero();
}

void ParameterStore::scale_grad(double factor) {
  for (auto& p : params_) p.grad *= factor;
}

void ParameterStore::adam_step(double lr, double beta1, double beta2,
                               double eps) {
  ++adam_t_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(adam_t_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(adam_t_));
  for (auto& p : params_) {
    p.adam_m = beta1 * p.adam_m + (1.0 - beta1) * p.grad;
    p.adam_v = beta2 * p.adam_v + (1.0 - beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= lr * (p.adam_m.array() / bc1) /
                       ((p.adam_v.array() / bc2).sqrt() + eps);
  }
}

void ParameterStore::reset_optimizer() {
  adam_t_ = 0;
  for (auto& p : params_) {
    p.adam_m.setZero();
    p.adam_v.setZero();
  }
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

namespace {

std::pair<int, Eigen::Index> locate(const std::vector<ParameterStore::Param>& ps,
                                    std::size_t flat) {
  for (std::size_t i = 0; i < ps.size(); ++i) {
    std::size_t n = static_cast<std::size_t>(ps[i].value.size());
    if (flat < n) return {static_cast<int>(i), static_cast<Eigen::Index>(flat)};
    flat -= n;
  }
  throw Error("flat parameter index out of range");
}

}  // namespace

double ParameterStore::get_scalar(std::size_t flat) const {
  auto [id, off] = locate(params_, flat);
  return params_[static_cast<std::size_t>(id)].value.data()[off];
}

void ParameterStore::set_scalar(std::size_t flat, double v) {
  auto [id, off] = locate(params_, flat);
  params_[static_cast<std::size_t>(id)].value.data()[off] = v;
}

double ParameterStore::grad_scalar(std::size_t flat) const {
  auto [id, off] = locate(params_, flat);
  return params_[static_cast<std::size_t>(id)].grad.data()[off];
}

namespace {
constexpr std::uint32_t kBlobMagic = 0x53504e4e;  // "SPNN"
constexpr std::uint32_t kBlobVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("truncated parameter blob");
  return v;
}
}  // namespace

void ParameterStore::save(std::ostream& out) const {
  write_pod(out, kBlobMagic);
  write_pod(out, kBlobVersion);
  write_pod(out, static_cast<std::uint32_t>(params_.size()));
  for (const auto& p : params_) {
    write_pod(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_pod(out, static_cast<std::uint32_t>(p.value.rows()));
    write_pod(out, static_cast<std::uint32_t>(p.value.cols()));
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(sizeof(double) * p.value.size()));
  }
}

void ParameterStore::load(std::istream& in) {
  if (read_pod<std::uint32_t>(in) != kBlobMagic)
    throw CheckpointError("not a parameter blob");
  if (read_pod<std::uint32_t>(in) != kBlobVersion)
    throw CheckpointError("unsupported parameter blob version");
  auto n = read_pod<std::uint32_t>(in);
  if (n != params_.size())
    throw CheckpointError("parameter count mismatch in blob");
  for (auto& p : params_) {
    auto len = read_pod<std::uint32_t>(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    auto rows = read_pod<std::uint32_t>(in);
    auto cols = read_pod<std::uint32_t>(in);
    if (name != p.name || rows != p.value.rows() || cols != p.value.cols())
      throw CheckpointError("parameter shape mismatch for " + p.name);
    in.read(reinterpret_cast<char*>(p.value.data()),
            static_cast<std::streamsize>(sizeof(double) * p.value.size()));
    if (!in) throw IoError("truncated parameter blob");
  }
}

void init_params(ParameterStore& store, double range, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  store.init_uniform(range, rng);
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

Tape::V Tape::push(Mat value, std::function<void(Tape&)> back) {
  Node n;
  n.value = std::move(value);
  n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return V{static_cast<int>(nodes_.size()) - 1};
}

Tape::V Tape::constant(Mat m) { return push(std::move(m), nullptr); }

Tape::V Tape::zeros(int rows, int cols) {
  return push(Mat::Zero(rows, cols), nullptr);
}

Tape::V Tape::embed(int w_id, int row) {
  const Mat& w = store_.value(w_id);
  V out{static_cast<int>(nodes_.size())};
  push(w.row(row).transpose(), [w_id, row, out](Tape& t) {
    t.store_.param(w_id).grad.row(row) += t.grad(out).transpose();
  });
  return out;
}

Tape::V Tape::param(int p_id) {
  V out{static_cast<int>(nodes_.size())};
  push(store_.value(p_id), [p_id, out](Tape& t) {
    t.store_.param(p_id).grad += t.grad(out);
  });
  return out;
}

Tape::V Tape::affine(int w_id, V x, int b_id) {
  const Mat& w = store_.value(w_id);
  Mat v = w * value(x);
  if (b_id >= 0) v += store_.value(b_id);
  V out{static_cast<int>(nodes_.size())};
  push(std::move(v), [w_id, x, b_id, out](Tape& t) {
    const Mat& g = t.grad(out);
    t.store_.param(w_id).grad.noalias() += g * t.value(x).transpose();
    t.grad(x).noalias() += t.store_.value(w_id).transpose() * g;
    if (b_id >= 0) t.store_.param(b_id).grad += g;
  });
  return out;
}

Tape::V Tape::linear2(int w_id, V x, int u_id, V h, int b_id) {
  Mat v = store_.value(w_id) * value(x) + store_.value(u_id) * value(h);
  if (b_id >= 0) v += store_.value(b_id);
  V out{static_cast<int>(nodes_.size())};
  push(std::move(v), [w_id, x, u_id, h, b_id, out](Tape& t) {
    const Mat& g = t.grad(out);
    t.store_.param(w_id).grad.noalias() += g * t.value(x).transpose();
    t.grad(x).noalias() += t.store_.value(w_id).transpose() * g;
    t.store_.param(u_id).grad.noalias() += g * t.value(h).transpose();
    t.grad(h).noalias() += t.store_.value(u_id).transpose() * g;
    if (b_id >= 0) t.store_.param(b_id).grad += g;
  });
  return out;
}

Tape::V Tape::add(V a, V b) {
  V out{static_cast<int>(nodes_.size())};
  push(value(a) + value(b), [a, b, out](Tape& t) {
    t.grad(a) += t.grad(out);
    t.grad(b) += t.grad(out);
  });
  return out;
}

Tape::V Tape::sub(V a, V b) {
  V out{static_cast<int>(nodes_.size())};
  push(value(a) - value(b), [a, b, out](Tape& t) {
    t.grad(a) += t.grad(out);
    t.grad(b) -= t.grad(out);
  });
  return out;
}

Tape::V Tape::mul_elem(V a, V b) {
  V out{static_cast<int>(nodes_.size())};
  push(value(a).cwiseProduct(value(b)), [a, b, out](Tape& t) {
    t.grad(a) += t.grad(out).cwiseProduct(t.value(b));
    t.grad(b) += t.grad(out).cwiseProduct(t.value(a));
  });
  return out;
}

Tape::V Tape::one_minus(V a) {
  V out{static_cast<int>(nodes_.size())};
  push(Mat::Ones(value(a).rows(), value(a).cols()) - value(a),
       [a, out](Tape& t) { t.grad(a) -= t.grad(out); });
  return out;
}

Tape::V Tape::scale(V a, double s) {
  V out{static_cast<int>(nodes_.size())};
  push(value(a) * s, [a, s, out](Tape& t) { t.grad(a) += s * t.grad(out); });
  return out;
}

Tape::V Tape::scale_by(V a, V s) {
  V out{static_cast<int>(nodes_.size())};
  push(value(a) * value(s)(0, 0), [a, s, out](Tape& t) {
    t.grad(a) += t.grad(out) * t.value(s)(0, 0);
    t.grad(s)(0, 0) += t.grad(out).cwiseProduct(t.value(a)).sum();
  });
  return out;
}

Tape::V Tape::tanh_(V a) {
  V out{static_cast<int>(nodes_.size())};
  push(value(a).array().tanh().matrix(), [a, out](Tape& t) {
    const Mat& y = t.value(out);
    t.grad(a).array() +=
        t.grad(out).array() * (1.0 - y.array() * y.array());
  });
  return out;
}

Tape::V Tape::sigmoid_(V a) {
  V out{static_cast<int>(nodes_.size())};
  push((1.0 / (1.0 + (-value(a).array()).exp())).matrix(), [a, out](Tape& t) {
    const Mat& y = t.value(out);
    t.grad(a).array() += t.grad(out).array() * y.array() * (1.0 - y.array());
  });
  return out;
}

Tape::V Tape::concat(V a, V b) {
  Mat v(value(a).rows() + value(b).rows(), value(a).cols());
  v << value(a), value(b);
  V out{static_cast<int>(nodes_.size())};
  push(std::move(v), [a, b, out](Tape& t) {
    const Mat& g = t.grad(out);
    t.grad(a) += g.topRows(t.value(a).rows());
    t.grad(b) += g.bottomRows(t.value(b).rows());
  });
  return out;
}

Tape::V Tape::concat_cols(const std::vector<V>& cols) {
  Mat v(value(cols.front()).rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) v.col(static_cast<Eigen::Index>(i)) = value(cols[i]);
  V out{static_cast<int>(nodes_.size())};
  std::vector<V> captured = cols;
  push(std::move(v), [captured, out](Tape& t) {
    for (std::size_t i = 0; i < captured.size(); ++i)
      t.grad(captured[i]) += t.grad(out).col(static_cast<Eigen::Index>(i));
  });
  return out;
}

Tape::V Tape::gemv(V A, V x) {
  V out{static_cast<int>(nodes_.size())};
  push(value(A) * value(x), [A, x, out](Tape& t) {
    const Mat& g = t.grad(out);
    t.grad(A).noalias() += g * t.value(x).transpose();
    t.grad(x).noalias() += t.value(A).transpose() * g;
  });
  return out;
}

Tape::V Tape::gemv_t(V A, V x) {
  V out{static_cast<int>(nodes_.size())};
  push(value(A).transpose() * value(x), [A, x, out](Tape& t) {
    const Mat& g = t.grad(out);
    t.grad(A).noalias() += t.value(x) * g.transpose();
    t.grad(x).noalias() += t.value(A) * g;
  });
  return out;
}

Tape::V Tape::dot(V a, V b) {
  Mat v(1, 1);
  v(0, 0) = value(a).cwiseProduct(value(b)).sum();
  V out{static_cast<int>(nodes_.size())};
  push(std::move(v), [a, b, out](Tape& t) {
    const double g = t.grad(out)(0, 0);
    t.grad(a) += g * t.value(b);
    t.grad(b) += g * t.value(a);
  });
  return out;
}

Tape::V Tape::softmax(V x) {
  const Mat& v = value(x);
  Eigen::ArrayXd e = (v.col(0).array() - v.col(0).maxCoeff()).exp();
  Mat p = (e / e.sum()).matrix();
  V out{static_cast<int>(nodes_.size())};
  push(std::move(p), [x, out](Tape& t) {
    const Mat& p = t.value(out);
    const Mat& g = t.grad(out);
    const double dotpg = p.cwiseProduct(g).sum();
    t.grad(x) += p.cwiseProduct(g - Mat::Constant(g.rows(), 1, dotpg));
  });
  return out;
}

Tape::V Tape::log_softmax(V x) {
  const Mat& v = value(x);
  const double m = v.col(0).maxCoeff();
  const double lse = m + std::log((v.col(0).array() - m).exp().sum());
  Mat out_v = v.array() - lse;
  V out{static_cast<int>(nodes_.size())};
  push(std::move(out_v), [x, out](Tape& t) {
    const Mat& y = t.value(out);
    const Mat& g = t.grad(out);
    const double gsum = g.sum();
    t.grad(x) += g - (y.array().exp() * gsum).matrix();
  });
  return out;
}

Tape::V Tape::pick(V x, int row) {
  Mat v(1, 1);
  v(0, 0) = value(x)(row, 0);
  V out{static_cast<int>(nodes_.size())};
  push(std::move(v), [x, row, out](Tape& t) {
    t.grad(x)(row, 0) += t.grad(out)(0, 0);
  });
  return out;
}

Tape::V Tape::pick_sum(V x, const std::vector<int>& rows) {
  Mat v(1, 1);
  double s = 0;
  for (int r : rows) s += value(x)(r, 0);
  v(0, 0) = s;
  V out{static_cast<int>(nodes_.size())};
  push(std::move(v), [x, rows, out](Tape& t) {
    const double g = t.grad(out)(0, 0);
    for (int r : rows) t.grad(x)(r, 0) += g;
  });
  return out;
}

Tape::V Tape::log_(V a) {
  V out{static_cast<int>(nodes_.size())};
  push(value(a).array().log().matrix(), [a, out](Tape& t) {
    t.grad(a).array() += t.grad(out).array() / t.value(a).array();
  });
  return out;
}

Tape::V Tape::neg(V a) {
  V out{static_cast<int>(nodes_.size())};
  push(-value(a), [a, out](Tape& t) { t.grad(a) -= t.grad(out); });
  return out;
}

Tape::V Tape::div_ss(V a, V b) {
  Mat v(1, 1);
  v(0, 0) = value(a)(0, 0) / value(b)(0, 0);
  V out{static_cast<int>(nodes_.size())};
  push(std::move(v), [a, b, out](Tape& t) {
    const double g = t.grad(out)(0, 0);
    const double bv = t.value(b)(0, 0);
    t.grad(a)(0, 0) += g / bv;
    t.grad(b)(0, 0) -= g * t.value(a)(0, 0) / (bv * bv);
  });
  return out;
}

Tape::V Tape::sum(const std::vector<V>& terms) {
  Mat v = value(terms.front());
  for (std::size_t i = 1; i < terms.size(); ++i) v += value(terms[i]);
  V out{static_cast<int>(nodes_.size())};
  std::vector<V> captured = terms;
  push(std::move(v), [captured, out](Tape& t) {
    for (V term : captured) t.grad(term) += t.grad(out);
  });
  return out;
}

Tape::V Tape::mask(V a, const Mat& m) {
  V out{static_cast<int>(nodes_.size())};
  Mat mcopy = m;
  push(value(a).cwiseProduct(m), [a, mcopy, out](Tape& t) {
    t.grad(a) += t.grad(out).cwiseProduct(mcopy);
  });
  return out;
}

void Tape::backward(V loss) {
  Node& top = nodes_[static_cast<std::size_t>(loss.i)];
  if (top.value.size() != 1) throw Error("backward expects a scalar loss");
  top.grad(0, 0) = 1.0;
  for (int i = loss.i; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.back) n.back(*this);
  }
}

}  // namespace segparse::nn
