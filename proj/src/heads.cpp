#include "deid/heads.hpp"

#include <cmath>

#include "deid/crf.hpp"
#include "deid/error.hpp"
#include "deid/network.hpp"

namespace deid {

std::string to_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::plain: return "plain";
    case HeadKind::csd: return "csd";
    case HeadKind::jdl: return "jdl";
  }
  return "plain";
}

HeadKind parse_head(const std::string& name) {
  if (name == "plain") return HeadKind::plain;
  if (name == "csd") return HeadKind::csd;
  if (name == "jdl") return HeadKind::jdl;
  throw Error("unknown head '" + name + "' (expected plain, csd or jdl)");
}

void HeadConfig::validate(int n_domains) const {
  if (kind == HeadKind::csd) {
    if (csd_rank < 1) throw Error("CSD rank must be at least 1");
    if (n_domains < 2) throw Error("CSD head requires at least two domains");
    if (csd_alpha < 0.0 || csd_alpha > 1.0) throw Error("CSD alpha must lie in [0, 1]");
    if (csd_lambda < 0.0) throw Error("CSD lambda must be non-negative");
  }
  if (kind == HeadKind::jdl) {
    if (n_domains < 2) throw Error("JDL head requires at least two domains");
    if (!(jdl_rho > 0.0 && jdl_rho <= 1.0)) throw Error("JDL rho must lie in (0, 1]");
  }
}

double orth_penalty(const std::vector<const Eigen::MatrixXd*>& components, std::vector<Eigen::MatrixXd>* grads,
                    double weight) {
  const auto n = Eigen::Index(components.size());
  if (n == 0) return 0.0;
  const auto dim = components.front()->size();
  Eigen::MatrixXd K(dim, n);
  Eigen::VectorXd norms(n);
  for (Eigen::Index a = 0; a < n; ++a) {
    const auto& w = *components[std::size_t(a)];
    if (w.size() != dim) throw Error("orthogonality penalty components differ in size");
    norms[a] = w.norm();
    if (norms[a] == 0.0) throw Error("zero-norm component in orthogonality penalty");
    K.col(a) = Eigen::Map<const Eigen::VectorXd>(w.data(), dim) / norms[a];
  }
  Eigen::MatrixXd D = K.transpose() * K - Eigen::MatrixXd::Identity(n, n);
  const double penalty = D.squaredNorm();
  if (grads) {
    if (grads->size() != std::size_t(n)) {
      grads->clear();
      for (const auto* c : components) grads->push_back(Eigen::MatrixXd::Zero(c->rows(), c->cols()));
    }
    Eigen::MatrixXd G = 4.0 * K * D;  // column a: d penalty / d k_a
    for (Eigen::Index a = 0; a < n; ++a) {
      Eigen::VectorXd g = G.col(a);
      Eigen::VectorXd dw = (g - K.col(a) * K.col(a).dot(g)) / norms[a];
      auto& out = (*grads)[std::size_t(a)];
      Eigen::Map<Eigen::VectorXd>(out.data(), dim) += weight * dw;
    }
  }
  return penalty;
}

double csd_loss(double common_nll, double specific_nll, double penalty, const HeadConfig& head) {
  return (1.0 - head.csd_alpha) * common_nll + head.csd_alpha * specific_nll + head.csd_lambda * penalty;
}

double jdl_combined_loss(double label_loss, double domain_loss, double rho) {
  return rho * label_loss + (1.0 - rho) * domain_loss;
}

double softmax_cross_entropy(const Eigen::VectorXd& logits, int target, Eigen::VectorXd* d_logits, double weight) {
  if (target < 0 || target >= logits.size()) throw Error("cross-entropy target out of range");
  const double m = logits.maxCoeff();
  Eigen::VectorXd ex = (logits.array() - m).exp();
  const double z = ex.sum();
  const double loss = std::log(z) + m - logits[target];
  if (d_logits) {
    Eigen::VectorXd p = ex / z;
    p[target] -= 1.0;
    *d_logits += weight * p;
  }
  return loss;
}

// Tagger members specific to the output heads.

Eigen::MatrixXd Tagger::csd_domain_weights(int domain_id) const {
  if (head_.kind != HeadKind::csd) throw Error("model has no CSD head");
  if (domain_id < 0 || domain_id >= shape_.n_domains)
    throw Error("invalid domain id " + std::to_string(domain_id) + " for CSD training");
  Eigen::MatrixXd w = store_[lay_.emit_W].mat();
  auto gamma = store_[lay_.csd_gamma].mat();
  for (std::size_t r = 0; r < lay_.csd_spec.size(); ++r)
    w += gamma(domain_id, Eigen::Index(r)) * store_[lay_.csd_spec[r]].mat();
  return w;
}

std::vector<Eigen::MatrixXd> Tagger::csd_emissions(const Eigen::MatrixXd& hidden, int domain_id, bool training) const {
  if (head_.kind != HeadKind::csd) throw Error("model has no CSD head");
  std::vector<Eigen::MatrixXd> out{emissions(hidden)};
  if (training) {
    Eigen::MatrixXd e = csd_domain_weights(domain_id) * hidden;
    e.colwise() += store_[lay_.emit_b].vec();
    out.push_back(std::move(e));
  }
  return out;
}

double Tagger::csd_penalty() const {
  if (head_.kind != HeadKind::csd) throw Error("model has no CSD head");
  std::vector<Eigen::MatrixXd> comps{store_[lay_.emit_W].mat()};
  for (auto idx : lay_.csd_spec) comps.push_back(store_[idx].mat());
  std::vector<const Eigen::MatrixXd*> ptrs;
  for (const auto& c : comps) ptrs.push_back(&c);
  return orth_penalty(ptrs);
}

Eigen::VectorXd Tagger::jdl_domain_logits(const Eigen::MatrixXd& hidden) const {
  if (head_.kind != HeadKind::jdl) throw Error("model has no JDL head");
  if (hidden.cols() < 1) throw Error("sentence has no tokens");
  Eigen::VectorXd pooled = hidden.rowwise().mean();
  return store_[lay_.jdl_V].mat() * pooled + store_[lay_.jdl_c].vec();
}

double Tagger::head_loss(const EncodedSentence& s, const Eigen::MatrixXd& hidden, bool with_grad,
                         Eigen::MatrixXd* d_hidden) {
  const Eigen::MatrixXd trans = transitions();
  const auto K = trans.rows() - 2;
  const auto T = hidden.cols();
  Eigen::MatrixXd d_trans;
  if (with_grad) d_trans = Eigen::MatrixXd::Zero(trans.rows(), trans.cols());

  auto& W = store_[lay_.emit_W];
  auto& b = store_[lay_.emit_b];
  double total = 0.0;

  // Backpropagates emission gradient dE through the affine layer `w`.
  auto through_affine = [&](const Eigen::MatrixXd& dE, const Eigen::MatrixXd& w) {
    W.gmat().noalias() += dE * hidden.transpose();
    b.gvec() += dE.rowwise().sum();
    d_hidden->noalias() += w.transpose() * dE;
  };

  switch (head_.kind) {
    case HeadKind::plain: {
      Eigen::MatrixXd e = emissions(hidden);
      Eigen::MatrixXd dE = Eigen::MatrixXd::Zero(K, T);
      total = crf::neg_log_likelihood(e, s.tags, trans, with_grad ? &dE : nullptr, with_grad ? &d_trans : nullptr);
      if (with_grad) through_affine(dE, W.mat());
      break;
    }
    case HeadKind::jdl: {
      const double rho = head_.jdl_rho;
      Eigen::MatrixXd e = emissions(hidden);
      Eigen::MatrixXd dE = Eigen::MatrixXd::Zero(K, T);
      const double label = crf::neg_log_likelihood(e, s.tags, trans, with_grad ? &dE : nullptr,
                                                   with_grad ? &d_trans : nullptr, rho);
      if (s.domain < 0 || s.domain >= shape_.n_domains)
        throw Error("invalid domain id " + std::to_string(s.domain) + " for JDL training");
      Eigen::VectorXd logits = jdl_domain_logits(hidden);
      Eigen::VectorXd dlogits = Eigen::VectorXd::Zero(logits.size());
      const double domain = softmax_cross_entropy(logits, s.domain, with_grad ? &dlogits : nullptr, 1.0 - rho);
      total = jdl_combined_loss(label, domain, rho);
      if (with_grad) {
        through_affine(dE, W.mat());
        Eigen::VectorXd pooled = hidden.rowwise().mean();
        store_[lay_.jdl_V].gmat().noalias() += dlogits * pooled.transpose();
        store_[lay_.jdl_c].gvec() += dlogits;
        Eigen::VectorXd d_pooled = store_[lay_.jdl_V].mat().transpose() * dlogits / double(T);
        d_hidden->colwise() += d_pooled;
      }
      break;
    }
    case HeadKind::csd: {
      const double alpha = head_.csd_alpha;
      auto es = csd_emissions(hidden, s.domain, true);
      Eigen::MatrixXd dEc = Eigen::MatrixXd::Zero(K, T);
      Eigen::MatrixXd dEd = Eigen::MatrixXd::Zero(K, T);
      const double common = crf::neg_log_likelihood(es[0], s.tags, trans, with_grad ? &dEc : nullptr,
                                                    with_grad ? &d_trans : nullptr, 1.0 - alpha);
      const double specific = crf::neg_log_likelihood(es[1], s.tags, trans, with_grad ? &dEd : nullptr,
                                                      with_grad ? &d_trans : nullptr, alpha);

      std::vector<Eigen::MatrixXd> comps{W.mat()};
      for (auto idx : lay_.csd_spec) comps.push_back(store_[idx].mat());
      std::vector<const Eigen::MatrixXd*> ptrs;
      for (const auto& c : comps) ptrs.push_back(&c);
      std::vector<Eigen::MatrixXd> pgrads;
      const double penalty = orth_penalty(ptrs, with_grad ? &pgrads : nullptr, head_.csd_lambda);
      total = csd_loss(common, specific, penalty, head_);

      if (with_grad) {
        through_affine(dEc, W.mat());
        through_affine(dEd, csd_domain_weights(s.domain));
        Eigen::MatrixXd outer = dEd * hidden.transpose();
        auto gamma = store_[lay_.csd_gamma].mat();
        auto dgamma = store_[lay_.csd_gamma].gmat();
        W.gmat() += pgrads[0];
        for (std::size_t r = 0; r < lay_.csd_spec.size(); ++r) {
          auto& spec = store_[lay_.csd_spec[r]];
          spec.gmat() += gamma(s.domain, Eigen::Index(r)) * outer + pgrads[r + 1];
          dgamma(s.domain, Eigen::Index(r)) += (outer.array() * spec.mat().array()).sum();
        }
      }
      break;
    }
  }
  if (with_grad) store_[lay_.trans].gmat() += d_trans;
  return total;
}

} // namespace deid
