#pragma once

#include <string>

#include <Eigen/Dense>

#include "deid/numerics.hpp"

namespace deid {

// One direction of a standard LSTM. Gate rows are stacked as
// [input; forget; output; candidate], each `hidden` tall:
//   z_t = W x_t + U h_{t-1} + b
//   c_t = f * c_{t-1} + i * g,   h_t = o * tanh(c_t)
struct LstmLayer {
  std::size_t W = 0, U = 0, b = 0;  // indices into the owning store
  int input = 0;
  int hidden = 0;

  static LstmLayer create(ParameterStore& store, const std::string& prefix, int input, int hidden);
  void initialize(ParameterStore& store, Rng& rng) const;
};

struct LstmTrace {
  Eigen::MatrixXd x;      // input x T
  Eigen::MatrixXd gates;  // 4H x T, post-activation
  Eigen::MatrixXd c;      // H x T
  Eigen::MatrixXd tanh_c; // H x T
  Eigen::MatrixXd h;      // H x T
};

// Runs the recurrence left to right over the columns of x.
LstmTrace lstm_forward(const ParameterStore& store, const LstmLayer& layer, const Eigen::MatrixXd& x);

// Backpropagates dh (H x T) through the trace, accumulating into the
// store's gradients; returns d x (input x T).
Eigen::MatrixXd lstm_backward(ParameterStore& store, const LstmLayer& layer, const LstmTrace& trace,
                              const Eigen::MatrixXd& dh);

} // namespace deid
