#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace deid {

// splitmix64 finalizer; derives independent stream seeds from (seed, index).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Portable deterministic generator. Distribution code is local so streams are
// identical across standard library implementations.
class Rng {
public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t below(std::size_t n);  // uniform on [0, n)
  bool coin() { return (next() >> 63) != 0; }
  bool coin(double p) { return uniform() < p; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

private:
  std::uint64_t s_[4];
};

struct ParamArray {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;
  // Embedding tables: gradients live only in columns listed in touched_.
  bool sparse_columns = false;

  std::size_t size() const { return value.size(); }
  std::size_t rows() const { return shape.empty() ? 1 : shape.front(); }
  std::size_t cols() const { return rows() == 0 ? 0 : size() / rows(); }

  Eigen::Map<Eigen::MatrixXd> mat() { return {value.data(), Eigen::Index(rows()), Eigen::Index(cols())}; }
  Eigen::Map<const Eigen::MatrixXd> mat() const {
    return {value.data(), Eigen::Index(rows()), Eigen::Index(cols())};
  }
  Eigen::Map<Eigen::MatrixXd> gmat() { return {grad.data(), Eigen::Index(rows()), Eigen::Index(cols())}; }
  Eigen::Map<Eigen::VectorXd> vec() { return {value.data(), Eigen::Index(size())}; }
  Eigen::Map<const Eigen::VectorXd> vec() const { return {value.data(), Eigen::Index(size())}; }
  Eigen::Map<Eigen::VectorXd> gvec() { return {grad.data(), Eigen::Index(size())}; }

  void touch(std::size_t col);
  void zero_grad();
  const std::vector<std::size_t>& touched() const { return touched_; }

private:
  std::vector<std::size_t> touched_;
  std::vector<char> touched_flag_;
};

using ParamSnapshot = std::vector<std::vector<double>>;

// Named parameter arrays in insertion order. Arrays never move once added,
// so callers may hold indices or references across later additions.
class ParameterStore {
public:
  std::size_t add(const std::string& name, std::vector<std::size_t> shape, bool sparse_columns = false);

  ParamArray& operator[](std::size_t i) { return arrays_[i]; }
  const ParamArray& operator[](std::size_t i) const { return arrays_[i]; }
  ParamArray& get(const std::string& name);
  const ParamArray& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t index_of(const std::string& name) const;

  std::size_t size() const { return arrays_.size(); }
  std::size_t num_scalars() const;
  auto begin() { return arrays_.begin(); }
  auto end() { return arrays_.end(); }
  auto begin() const { return arrays_.begin(); }
  auto end() const { return arrays_.end(); }

  void zero_grad();
  double grad_norm() const;
  // Rescales gradients so their global L2 norm is at most max_norm.
  double clip_grad_norm(double max_norm);

  ParamSnapshot snapshot() const;
  void restore(const ParamSnapshot& snap);

private:
  std::deque<ParamArray> arrays_;
  std::unordered_map<std::string, std::size_t> index_;
};

// v <- v - lr * g for every array, then zero gradients. Throws before
// touching anything if a gradient is non-finite.
void sgd_step(ParameterStore& store, double lr);

// Inverted dropout: entries are 0 with probability rate, else 1/(1-rate).
Eigen::VectorXd dropout_mask(std::size_t n, double rate, Rng& rng, bool training = true);

// Glorot-uniform fill for a matrix with the given fan sizes.
void glorot_uniform(ParamArray& p, std::size_t fan_in, std::size_t fan_out, Rng& rng);

// loss_fn(store, with_grad): returns the loss; when with_grad it must also
// accumulate the analytic gradient into the store.
using LossFn = std::function<double(ParameterStore&, bool)>;

// Max over scalars of |analytic - central difference| / max(1e-8, |a| + |n|).
double finite_diff_check(const LossFn& loss_fn, ParameterStore& store, double eps = 1e-5);

struct TrainingConfig {
  int char_emb_dim = 25;
  int word_emb_dim = 100;
  int char_hidden = 25;
  int token_hidden = 100;
  double dropout = 0.5;
  double lr = 0.005;
  int max_epochs = 100;
  int patience = 10;
  double dev_fraction = 0.1;
  double clip_norm = 5.0;
  // Probability of replacing a training-corpus singleton word with OOV.
  double unk_replace = 0.5;
  std::uint64_t seed = 42;

  void validate() const;
};

} // namespace deid
