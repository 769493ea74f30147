#include "deid/crf.hpp"

#include <cmath>
#include <limits>

#include "deid/error.hpp"

namespace deid::crf {

namespace {

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

void check_shapes(const Eigen::MatrixXd& emissions, const Eigen::MatrixXd& trans) {
  if (emissions.cols() < 1) throw Error("CRF needs at least one position");
  if (trans.rows() != emissions.rows() + 2 || trans.cols() != emissions.rows() + 2)
    throw Error("CRF transition matrix must be (K+2)x(K+2)");
}

// alpha(j, t): log-sum of all prefixes ending in tag j at position t.
Eigen::MatrixXd forward(const Eigen::MatrixXd& e, const Eigen::MatrixXd& trans) {
  const int K = static_cast<int>(e.rows());
  const int T = static_cast<int>(e.cols());
  const int S = start_state(K);
  Eigen::MatrixXd alpha(K, T);
  for (int j = 0; j < K; ++j) alpha(j, 0) = trans(S, j) + e(j, 0);
  Eigen::VectorXd tmp(K);
  for (int t = 1; t < T; ++t)
    for (int j = 0; j < K; ++j) {
      for (int i = 0; i < K; ++i) tmp[i] = alpha(i, t - 1) + trans(i, j);
      alpha(j, t) = log_sum_exp(tmp) + e(j, t);
    }
  return alpha;
}

Eigen::MatrixXd backward(const Eigen::MatrixXd& e, const Eigen::MatrixXd& trans) {
  const int K = static_cast<int>(e.rows());
  const int T = static_cast<int>(e.cols());
  const int E = end_state(K);
  Eigen::MatrixXd beta(K, T);
  for (int i = 0; i < K; ++i) beta(i, T - 1) = trans(i, E);
  Eigen::VectorXd tmp(K);
  for (int t = T - 2; t >= 0; --t)
    for (int i = 0; i < K; ++i) {
      for (int j = 0; j < K; ++j) tmp[j] = trans(i, j) + e(j, t + 1) + beta(j, t + 1);
      beta(i, t) = log_sum_exp(tmp);
    }
  return beta;
}

double final_log_z(const Eigen::MatrixXd& alpha, const Eigen::MatrixXd& trans) {
  const int K = static_cast<int>(alpha.rows());
  Eigen::VectorXd last = alpha.col(alpha.cols() - 1) + trans.col(end_state(K)).head(K);
  return log_sum_exp(last);
}

} // namespace

double sequence_score(const Eigen::MatrixXd& emissions, const std::vector<int>& tags,
                      const Eigen::MatrixXd& trans) {
  check_shapes(emissions, trans);
  const int K = static_cast<int>(emissions.rows());
  if (tags.size() != static_cast<std::size_t>(emissions.cols())) throw Error("CRF tag/emission length mismatch");
  double s = trans(start_state(K), tags.front());
  for (std::size_t t = 0; t < tags.size(); ++t) {
    s += emissions(tags[t], Eigen::Index(t));
    if (t > 0) s += trans(tags[t - 1], tags[t]);
  }
  return s + trans(tags.back(), end_state(K));
}

double log_partition(const Eigen::MatrixXd& emissions, const Eigen::MatrixXd& trans) {
  check_shapes(emissions, trans);
  return final_log_z(forward(emissions, trans), trans);
}

double neg_log_likelihood(const Eigen::MatrixXd& emissions, const std::vector<int>& tags,
                          const Eigen::MatrixXd& trans, Eigen::MatrixXd* d_emissions, Eigen::MatrixXd* d_trans,
                          double weight) {
  check_shapes(emissions, trans);
  if (tags.size() != static_cast<std::size_t>(emissions.cols())) throw Error("CRF tag/emission length mismatch");
  const int K = static_cast<int>(emissions.rows());
  const int T = static_cast<int>(emissions.cols());
  for (int tag : tags)
    if (tag < 0 || tag >= K) throw Error("CRF tag out of range");

  Eigen::MatrixXd alpha = forward(emissions, trans);
  const double log_z = final_log_z(alpha, trans);
  const double loss = log_z - sequence_score(emissions, tags, trans);
  if (!d_emissions && !d_trans) return loss;

  Eigen::MatrixXd beta = backward(emissions, trans);
  const int S = start_state(K), E = end_state(K);
  // Node marginals minus observed indicators.
  if (d_emissions) {
    for (int t = 0; t < T; ++t) {
      for (int j = 0; j < K; ++j) (*d_emissions)(j, t) += weight * std::exp(alpha(j, t) + beta(j, t) - log_z);
      (*d_emissions)(tags[t], t) -= weight;
    }
  }
  if (d_trans) {
    for (int j = 0; j < K; ++j) {
      (*d_trans)(S, j) += weight * std::exp(alpha(j, 0) + beta(j, 0) - log_z);
      (*d_trans)(j, E) += weight * std::exp(alpha(j, T - 1) + beta(j, T - 1) - log_z);
    }
    for (int t = 1; t < T; ++t)
      for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j)
          (*d_trans)(i, j) +=
              weight * std::exp(alpha(i, t - 1) + trans(i, j) + emissions(j, t) + beta(j, t) - log_z);
    (*d_trans)(S, tags.front()) -= weight;
    (*d_trans)(tags.back(), E) -= weight;
    for (int t = 1; t < T; ++t) (*d_trans)(tags[t - 1], tags[t]) -= weight;
  }
  return loss;
}

std::pair<std::vector<int>, double> viterbi(const Eigen::MatrixXd& emissions, const Eigen::MatrixXd& trans) {
  check_shapes(emissions, trans);
  const int K = static_cast<int>(emissions.rows());
  const int T = static_cast<int>(emissions.cols());
  const int S = start_state(K), E = end_state(K);
  Eigen::MatrixXd delta(K, T);
  Eigen::MatrixXi back(K, T);
  for (int j = 0; j < K; ++j) delta(j, 0) = trans(S, j) + emissions(j, 0);
  for (int t = 1; t < T; ++t)
    for (int j = 0; j < K; ++j) {
      int best = 0;
      double best_score = delta(0, t - 1) + trans(0, j);
      for (int i = 1; i < K; ++i) {
        double s = delta(i, t - 1) + trans(i, j);
        if (s > best_score) {
          best_score = s;
          best = i;
        }
      }
      delta(j, t) = best_score + emissions(j, t);
      back(j, t) = best;
    }
  int last = 0;
  double best_score = delta(0, T - 1) + trans(0, E);
  for (int j = 1; j < K; ++j) {
    double s = delta(j, T - 1) + trans(j, E);
    if (s > best_score) {
      best_score = s;
      last = j;
    }
  }
  std::vector<int> path(static_cast<std::size_t>(T));
  path[static_cast<std::size_t>(T - 1)] = last;
  for (int t = T - 1; t > 0; --t) path[static_cast<std::size_t>(t - 1)] = back(path[static_cast<std::size_t>(t)], t);
  return {path, best_score};
}

} // namespace deid::crf
