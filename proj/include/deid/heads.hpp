#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace deid {

enum class HeadKind { plain, csd, jdl };

std::string to_string(HeadKind kind);
HeadKind parse_head(const std::string& name);

struct HeadConfig {
  HeadKind kind = HeadKind::plain;
  int csd_rank = 1;          // k, number of specific components
  double csd_alpha = 0.5;    // weight of the domain-specific NLL
  double csd_lambda = 0.25;  // weight of the orthogonality penalty
  double jdl_rho = 0.85;     // share of the label loss

  void validate(int n_domains) const;
};

// ||K^T K - I||_F^2 where the columns of K are the unit-normalized,
// flattened components. grads (same shapes) receive weight * d penalty.
double orth_penalty(const std::vector<const Eigen::MatrixXd*>& components,
                    std::vector<Eigen::MatrixXd>* grads = nullptr, double weight = 1.0);

double csd_loss(double common_nll, double specific_nll, double penalty, const HeadConfig& head);

double jdl_combined_loss(double label_loss, double domain_loss, double rho = 0.85);

// -log softmax(logits)[target]; d_logits receives weight * gradient.
double softmax_cross_entropy(const Eigen::VectorXd& logits, int target, Eigen::VectorXd* d_logits = nullptr,
                             double weight = 1.0);

} // namespace deid
