#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace deid::crf {

// Linear-chain CRF over K tags with virtual start/end states folded into a
// (K+2)x(K+2) transition matrix: trans(i, j) scores i -> j, row K is the
// start state and column K+1 the end state. Emissions are K x T.

inline constexpr double kForbidden = -1.0e4;

inline int start_state(int num_tags) { return num_tags; }
inline int end_state(int num_tags) { return num_tags + 1; }

double sequence_score(const Eigen::MatrixXd& emissions, const std::vector<int>& tags,
                      const Eigen::MatrixXd& trans);

// Forward algorithm in log space.
double log_partition(const Eigen::MatrixXd& emissions, const Eigen::MatrixXd& trans);

// -(score(tags) - logZ). When given, d_emissions (K x T) and d_trans receive
// the loss gradient scaled by weight (added, not assigned).
double neg_log_likelihood(const Eigen::MatrixXd& emissions, const std::vector<int>& tags,
                          const Eigen::MatrixXd& trans, Eigen::MatrixXd* d_emissions = nullptr,
                          Eigen::MatrixXd* d_trans = nullptr, double weight = 1.0);

// Best path and its score. Ties go to the lowest tag index.
std::pair<std::vector<int>, double> viterbi(const Eigen::MatrixXd& emissions, const Eigen::MatrixXd& trans);

} // namespace deid::crf
