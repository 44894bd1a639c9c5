#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "segparse/errors.hpp"

namespace segparse::nn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Named dense parameters with gradient and Adam state. All training math
/// runs in double precision.
class ParameterStore {
 public:
  struct Param {
    std::string name;
    Mat value;
    Mat grad;
    Mat adam_m;
    Mat adam_v;
  };

  /// Adds a zero-initialized (rows x cols) parameter; returns its id.
  int add(const std::string& name, int rows, int cols);
  int find(const std::string& name) const;  // -1 when absent

  Param& param(int id) { return params_[static_cast<std::size_t>(id)]; }
  const Param& param(int id) const { return params_[static_cast<std::size_t>(id)]; }
  const Mat& value(int id) const { return params_[static_cast<std::size_t>(id)].value; }
  int count() const { return static_cast<int>(params_.size()); }

  /// Uniform [-range, range] init of every parameter, in id order.
  void init_uniform(double range, std::mt19937_64& rng);

  void zero_grad();
  void scale_grad(double factor);
  /// One Adam update over all parameters; increments the shared step counter.
  void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999,
                 double eps = 1e-8);
  /// Drops optimizer state (fine-tuning warm-starts values only).
  void reset_optimizer();

  /// Flat scalar views across all parameters, for gradient checking.
  std::size_t scalar_count() const;
  double get_scalar(std::size_t flat) const;
  void set_scalar(std::size_t flat, double v);
  double grad_scalar(std::size_t flat) const;

  void save(std::ostream& out) const;
  /// Loads values only; shapes and names must match this store exactly.
  void load(std::istream& in);

 private:
  std::vector<Param> params_;
  std::map<std::string, int> index_;
  long long adam_t_ = 0;
};

/// Dynamic reverse-mode tape. Activations are tape nodes; parameters are
/// consumed directly from the store, with gradients accumulated into it by
/// backward(). Build a tape per training example, call backward once.
class Tape {
 public:
  struct V {
    int i = -1;
  };

  explicit Tape(ParameterStore& store) : store_(store) {}

  const Mat& value(V v) const { return nodes_[static_cast<std::size_t>(v.i)].value; }

  V constant(Mat m);
  V zeros(int rows, int cols);

  /// Row `row` of parameter W, as a column vector (embedding lookup).
  V embed(int w_id, int row);
  /// Whole parameter as a node value (for vector-shaped parameters).
  V param(int p_id);

  /// W*x + b (b_id < 0 omits the bias).
  V affine(int w_id, V x, int b_id);
  /// W*x + U*h + b, the fused GRU-gate preactivation.
  V linear2(int w_id, V x, int u_id, V h, int b_id);

  V add(V a, V b);
  V sub(V a, V b);
  V mul_elem(V a, V b);
  V one_minus(V a);
  V scale(V a, double s);
  /// a * s (s a 1x1 node), broadcast.
  V scale_by(V a, V s);
  V tanh_(V a);
  V sigmoid_(V a);
  V concat(V a, V b);                  // stack rows
  V concat_cols(const std::vector<V>& cols);
  V gemv(V A, V x);                    // A * x
  V gemv_t(V A, V x);                  // A^T * x
  V dot(V a, V b);                     // 1x1
  V softmax(V x);                      // column vector
  V log_softmax(V x);
  V pick(V x, int row);                // 1x1
  V pick_sum(V x, const std::vector<int>& rows);  // sum of entries, 1x1
  V log_(V a);
  V neg(V a);
  V div_ss(V a, V b);                  // 1x1 / 1x1
  V sum(const std::vector<V>& terms);  // elementwise sum
  /// Elementwise product with a fixed mask (dropout).
  V mask(V a, const Mat& m);

  /// Reverse sweep from scalar loss; accumulates parameter gradients into
  /// the store (existing gradient contents are kept, so per-example losses
  /// sum over a batch).
  void backward(V loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void(Tape&)> back;
  };

  V push(Mat value, std::function<void(Tape&)> back);
  Mat& grad(V v) { return nodes_[static_cast<std::size_t>(v.i)].grad; }

  ParameterStore& store_;
  std::vector<Node> nodes_;
};

/// Uniform Glorot-ish helper used by both models for embeddings and cells.
void init_params(ParameterStore& store, double range, std::uint64_t seed);

}  // namespace segparse::nn
