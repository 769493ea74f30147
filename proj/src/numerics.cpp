#include "deid/numerics.hpp"

#include <cmath>
#include <limits>

#include "deid/error.hpp"

namespace deid {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed) {
  for (int i = 0; i < 4; ++i) s_[i] = derive_seed(seed, static_cast<std::uint64_t>(i));
}

// xoshiro256**
std::uint64_t Rng::next() {
  auto rotl = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
  std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::size_t Rng::below(std::size_t n) {
  if (n == 0) throw Error("Rng::below(0)");
  const std::uint64_t bound = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % static_cast<std::uint64_t>(n);
  std::uint64_t x;
  do x = next();
  while (x >= bound);
  return static_cast<std::size_t>(x % n);
}

void ParamArray::touch(std::size_t col) {
  if (!sparse_columns) return;
  if (touched_flag_.size() != cols()) touched_flag_.assign(cols(), 0);
  if (!touched_flag_[col]) {
    touched_flag_[col] = 1;
    touched_.push_back(col);
  }
}

void ParamArray::zero_grad() {
  if (!sparse_columns) {
    std::fill(grad.begin(), grad.end(), 0.0);
    return;
  }
  const std::size_t r = rows();
  for (auto c : touched_) {
    std::fill(grad.begin() + c * r, grad.begin() + (c + 1) * r, 0.0);
    touched_flag_[c] = 0;
  }
  touched_.clear();
}

std::size_t ParameterStore::add(const std::string& name, std::vector<std::size_t> shape, bool sparse_columns) {
  if (index_.count(name)) throw Error("duplicate parameter name " + name);
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  ParamArray p;
  p.name = name;
  p.shape = std::move(shape);
  p.value.assign(n, 0.0);
  p.grad.assign(n, 0.0);
  p.sparse_columns = sparse_columns;
  arrays_.push_back(std::move(p));
  index_[name] = arrays_.size() - 1;
  return arrays_.size() - 1;
}

std::size_t ParameterStore::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("no parameter named " + name);
  return it->second;
}

ParamArray& ParameterStore::get(const std::string& name) { return arrays_[index_of(name)]; }
const ParamArray& ParameterStore::get(const std::string& name) const { return arrays_[index_of(name)]; }

std::size_t ParameterStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& p : arrays_) n += p.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : arrays_) p.zero_grad();
}

double ParameterStore::grad_norm() const {
  double sq = 0.0;
  for (const auto& p : arrays_) {
    if (p.sparse_columns) {
      const std::size_t r = p.rows();
      for (auto c : p.touched())
        for (std::size_t i = 0; i < r; ++i) sq += p.grad[c * r + i] * p.grad[c * r + i];
    } else {
      for (double g : p.grad) sq += g * g;
    }
  }
  return std::sqrt(sq);
}

double ParameterStore::clip_grad_norm(double max_norm) {
  double norm = grad_norm();
  if (norm > max_norm && norm > 0.0) {
    double scale = max_norm / norm;
    for (auto& p : arrays_) {
      if (p.sparse_columns) {
        const std::size_t r = p.rows();
        for (auto c : p.touched())
          for (std::size_t i = 0; i < r; ++i) p.grad[c * r + i] *= scale;
      } else {
        for (double& g : p.grad) g *= scale;
      }
    }
  }
  return norm;
}

ParamSnapshot ParameterStore::snapshot() const {
  ParamSnapshot snap;
  snap.reserve(arrays_.size());
  for (const auto& p : arrays_) snap.push_back(p.value);
  return snap;
}

void ParameterStore::restore(const ParamSnapshot& snap) {
  if (snap.size() != arrays_.size()) throw Error("snapshot does not match parameter store");
  for (std::size_t i = 0; i < snap.size(); ++i) {
    if (snap[i].size() != arrays_[i].value.size()) throw Error("snapshot shape mismatch for " + arrays_[i].name);
    arrays_[i].value = snap[i];
  }
}

void sgd_step(ParameterStore& store, double lr) {
  for (const auto& p : store) {
    auto bad = [&](std::size_t from, std::size_t to) {
      for (std::size_t i = from; i < to; ++i)
        if (!std::isfinite(p.grad[i])) return true;
      return false;
    };
    bool nonfinite = false;
    if (p.sparse_columns) {
      for (auto c : p.touched()) nonfinite = nonfinite || bad(c * p.rows(), (c + 1) * p.rows());
    } else {
      nonfinite = bad(0, p.grad.size());
    }
    if (nonfinite) throw Error("non-finite gradient in " + p.name);
  }
  for (auto& p : store) {
    if (p.sparse_columns) {
      const std::size_t r = p.rows();
      for (auto c : p.touched())
        for (std::size_t i = 0; i < r; ++i) p.value[c * r + i] -= lr * p.grad[c * r + i];
    } else {
      for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] -= lr * p.grad[i];
    }
    p.zero_grad();
  }
}

Eigen::VectorXd dropout_mask(std::size_t n, double rate, Rng& rng, bool training) {
  Eigen::VectorXd mask = Eigen::VectorXd::Ones(Eigen::Index(n));
  if (!training || rate <= 0.0) return mask;
  const double keep = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < n; ++i) mask[Eigen::Index(i)] = rng.uniform() < rate ? 0.0 : keep;
  return mask;
}

void glorot_uniform(ParamArray& p, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : p.value) v = rng.uniform(-bound, bound);
}

double finite_diff_check(const LossFn& loss_fn, ParameterStore& store, double eps) {
  store.zero_grad();
  loss_fn(store, true);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(store.size());
  for (const auto& p : store) analytic.push_back(p.grad);
  store.zero_grad();

  double worst = 0.0;
  for (std::size_t k = 0; k < store.size(); ++k) {
    auto& p = store[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + eps;
      const double up = loss_fn(store, false);
      p.value[i] = saved - eps;
      const double down = loss_fn(store, false);
      p.value[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[k][i];
      const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

void TrainingConfig::validate() const {
  if (char_emb_dim <= 0 || word_emb_dim <= 0 || char_hidden <= 0 || token_hidden <= 0)
    throw Error("all model dimensions must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw Error("dropout must lie in [0, 1)");
  if (!(lr > 0.0)) throw Error("learning rate must be positive");
  if (max_epochs < 1) throw Error("max_epochs must be at least 1");
  if (patience < 0) throw Error("patience must be non-negative");
  if (dev_fraction <= 0.0 || dev_fraction >= 1.0) throw Error("dev_fraction must lie in (0, 1)");
  if (!(clip_norm > 0.0)) throw Error("clip_norm must be positive");
  if (unk_replace < 0.0 || unk_replace > 1.0) throw Error("unk_replace must lie in [0, 1]");
}

} // namespace deid
