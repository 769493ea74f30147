#include "deid/lstm.hpp"

namespace deid {

namespace {

Eigen::ArrayXd sigmoid(const Eigen::ArrayXd& z) { return 1.0 / (1.0 + (-z).exp()); }

} // namespace

LstmLayer LstmLayer::create(ParameterStore& store, const std::string& prefix, int input, int hidden) {
  LstmLayer l;
  l.input = input;
  l.hidden = hidden;
  const auto H4 = static_cast<std::size_t>(4 * hidden);
  l.W = store.add(prefix + ".W", {H4, static_cast<std::size_t>(input)});
  l.U = store.add(prefix + ".U", {H4, static_cast<std::size_t>(hidden)});
  l.b = store.add(prefix + ".b", {H4});
  return l;
}

void LstmLayer::initialize(ParameterStore& store, Rng& rng) const {
  glorot_uniform(store[W], static_cast<std::size_t>(input), static_cast<std::size_t>(4 * hidden), rng);
  glorot_uniform(store[U], static_cast<std::size_t>(hidden), static_cast<std::size_t>(4 * hidden), rng);
  auto bias = store[b].vec();
  bias.setZero();
  bias.segment(hidden, hidden).setOnes();  // forget gate
}

LstmTrace lstm_forward(const ParameterStore& store, const LstmLayer& layer, const Eigen::MatrixXd& x) {
  const int H = layer.hidden;
  const Eigen::Index T = x.cols();
  auto W = store[layer.W].mat();
  auto U = store[layer.U].mat();
  auto b = store[layer.b].vec();

  LstmTrace tr;
  tr.x = x;
  tr.gates.resize(4 * H, T);
  tr.c.resize(H, T);
  tr.tanh_c.resize(H, T);
  tr.h.resize(H, T);

  Eigen::MatrixXd zx = W * x;
  zx.colwise() += b;
  Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd c_prev = Eigen::VectorXd::Zero(H);
  for (Eigen::Index t = 0; t < T; ++t) {
    Eigen::VectorXd z = zx.col(t);
    if (t > 0) z.noalias() += U * h_prev;
    Eigen::ArrayXd i = sigmoid(z.segment(0, H).array());
    Eigen::ArrayXd f = sigmoid(z.segment(H, H).array());
    Eigen::ArrayXd o = sigmoid(z.segment(2 * H, H).array());
    Eigen::ArrayXd g = z.segment(3 * H, H).array().tanh();
    Eigen::ArrayXd c = f * c_prev.array() + i * g;
    Eigen::ArrayXd tc = c.tanh();
    tr.gates.col(t) << i.matrix(), f.matrix(), o.matrix(), g.matrix();
    tr.c.col(t) = c.matrix();
    tr.tanh_c.col(t) = tc.matrix();
    tr.h.col(t) = (o * tc).matrix();
    h_prev = tr.h.col(t);
    c_prev = tr.c.col(t);
  }
  return tr;
}

Eigen::MatrixXd lstm_backward(ParameterStore& store, const LstmLayer& layer, const LstmTrace& tr,
                              const Eigen::MatrixXd& dh) {
  const int H = layer.hidden;
  const Eigen::Index T = tr.x.cols();
  auto W = store[layer.W].mat();
  auto U = store[layer.U].mat();

  Eigen::MatrixXd dz(4 * H, T);
  Eigen::ArrayXd dh_next = Eigen::ArrayXd::Zero(H);
  Eigen::ArrayXd dc_next = Eigen::ArrayXd::Zero(H);
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    Eigen::ArrayXd i = tr.gates.col(t).segment(0, H).array();
    Eigen::ArrayXd f = tr.gates.col(t).segment(H, H).array();
    Eigen::ArrayXd o = tr.gates.col(t).segment(2 * H, H).array();
    Eigen::ArrayXd g = tr.gates.col(t).segment(3 * H, H).array();
    Eigen::ArrayXd tc = tr.tanh_c.col(t).array();
    Eigen::ArrayXd c_prev = t > 0 ? Eigen::ArrayXd(tr.c.col(t - 1).array()) : Eigen::ArrayXd::Zero(H);

    Eigen::ArrayXd dht = dh.col(t).array() + dh_next;
    Eigen::ArrayXd d_o = dht * tc;
    Eigen::ArrayXd dc = dht * o * (1.0 - tc * tc) + dc_next;
    Eigen::ArrayXd d_i = dc * g;
    Eigen::ArrayXd d_g = dc * i;
    Eigen::ArrayXd d_f = dc * c_prev;
    dc_next = dc * f;

    dz.col(t) << (d_i * i * (1.0 - i)).matrix(), (d_f * f * (1.0 - f)).matrix(), (d_o * o * (1.0 - o)).matrix(),
        (d_g * (1.0 - g * g)).matrix();
    dh_next = (U.transpose() * dz.col(t)).array();
  }

  store[layer.W].gmat().noalias() += dz * tr.x.transpose();
  if (T > 1) store[layer.U].gmat().noalias() += dz.rightCols(T - 1) * tr.h.leftCols(T - 1).transpose();
  store[layer.b].gvec() += dz.rowwise().sum();
  return W.transpose() * dz;
}

} // namespace deid
