#pragma once

// Single-layer LSTM returning the last hidden state.
//
// Gate blocks inside W (4H x F), U (4H x H) and b (4H) are ordered
// (input, forget, candidate, output). Initial hidden and cell states are zero.

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "kshape/layers/common.hpp"

namespace kshape {

class LSTMLayer {
 public:
  /// Per-step activations kept for backpropagation through time. Matrices are
  /// batch x width.
  struct Trace {
    std::vector<Eigen::MatrixXd> inputs;  // B x F per step
    std::vector<Eigen::MatrixXd> gates;   // B x 4H activated (sigmoid / tanh)
    std::vector<Eigen::MatrixXd> cells;   // B x H, cells[t + 1] after step t
    std::vector<Eigen::MatrixXd> hidden;  // B x H, hidden[t + 1] after step t

    const Eigen::MatrixXd& final_hidden() const { return hidden.back(); }
  };

  struct Gradients {
    Batch input;
    Eigen::MatrixXd w;
    Eigen::MatrixXd u;
    Eigen::MatrixXd bias;
  };

  LSTMLayer(int input_size, int hidden_size)
      : input_(input_size), hidden_(hidden_size),
        w_(Eigen::MatrixXd::Zero(4 * hidden_size, input_size)),
        u_(Eigen::MatrixXd::Zero(4 * hidden_size, hidden_size)),
        bias_(Eigen::MatrixXd::Zero(4 * hidden_size, 1)) {
    if (input_size < 1 || hidden_size < 1) throw DimensionError("LSTMLayer: sizes must be positive");
  }

  int input_size() const { return input_; }
  int hidden_size() const { return hidden_; }
  Eigen::MatrixXd& w() { return w_; }
  const Eigen::MatrixXd& w() const { return w_; }
  Eigen::MatrixXd& u() { return u_; }
  const Eigen::MatrixXd& u() const { return u_; }
  Eigen::MatrixXd& bias() { return bias_; }
  const Eigen::MatrixXd& bias() const { return bias_; }

  void init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_));
    rng.fill_uniform(w_, bound);
    rng.fill_uniform(u_, bound);
    rng.fill_uniform(bias_, bound);
  }

  /// B x H final hidden states.
  Eigen::MatrixXd forward(const Batch& x) const { return forward_trace(x).final_hidden(); }

  Trace forward_trace(const Batch& x) const {
    if (x.empty()) throw DimensionError("LSTMLayer: empty batch");
    const auto batch = static_cast<Eigen::Index>(x.size());
    const Eigen::Index steps = x.front().rows();
    for (const auto& s : x) require_shape(s, steps, input_, "LSTMLayer::forward");
    const int h = hidden_;

    Trace tr;
    tr.cells.push_back(Eigen::MatrixXd::Zero(batch, h));
    tr.hidden.push_back(Eigen::MatrixXd::Zero(batch, h));
    for (Eigen::Index t = 0; t < steps; ++t) {
      Eigen::MatrixXd xt(batch, input_);
      for (Eigen::Index b = 0; b < batch; ++b) xt.row(b) = x[b].row(t);
      Eigen::MatrixXd z = xt * w_.transpose();
      z.noalias() += tr.hidden.back() * u_.transpose();
      z.rowwise() += bias_.col(0).transpose();

      auto sigmoid = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
      z.leftCols(2 * h) = z.leftCols(2 * h).unaryExpr(sigmoid);
      z.middleCols(2 * h, h) = z.middleCols(2 * h, h).array().tanh();
      z.rightCols(h) = z.rightCols(h).unaryExpr(sigmoid);

      const auto in = z.leftCols(h).array();
      const auto forget = z.middleCols(h, h).array();
      const auto cand = z.middleCols(2 * h, h).array();
      const auto out = z.rightCols(h).array();
      Eigen::MatrixXd c = (forget * tr.cells.back().array() + in * cand).matrix();
      Eigen::MatrixXd hid = (out * c.array().tanh()).matrix();

      tr.inputs.push_back(std::move(xt));
      tr.gates.push_back(std::move(z));
      tr.cells.push_back(std::move(c));
      tr.hidden.push_back(std::move(hid));
    }
    return tr;
  }

  /// `upstream` is dL/d(final hidden), B x H.
  Gradients backward(const Trace& tr, const Eigen::MatrixXd& upstream) const {
    const Eigen::Index steps = static_cast<Eigen::Index>(tr.gates.size());
    const Eigen::Index batch = tr.hidden.back().rows();
    require_shape(upstream, batch, hidden_, "LSTMLayer::backward");
    const int h = hidden_;

    Gradients g{Batch(batch, Eigen::MatrixXd(steps, input_)), Eigen::MatrixXd::Zero(w_.rows(), w_.cols()),
                Eigen::MatrixXd::Zero(u_.rows(), u_.cols()), Eigen::MatrixXd::Zero(4 * h, 1)};
    Eigen::MatrixXd dh = upstream;
    Eigen::MatrixXd dc = Eigen::MatrixXd::Zero(batch, h);
    Eigen::MatrixXd dz(batch, 4 * h);
    for (Eigen::Index t = steps - 1; t >= 0; --t) {
      const Eigen::MatrixXd& z = tr.gates[t];
      const auto in = z.leftCols(h).array();
      const auto forget = z.middleCols(h, h).array();
      const auto cand = z.middleCols(2 * h, h).array();
      const auto out = z.rightCols(h).array();
      const Eigen::ArrayXXd tanh_c = tr.cells[t + 1].array().tanh();

      dc.array() += dh.array() * out * (1.0 - tanh_c * tanh_c);
      dz.leftCols(h) = (dc.array() * cand * in * (1.0 - in)).matrix();
      dz.middleCols(h, h) = (dc.array() * tr.cells[t].array() * forget * (1.0 - forget)).matrix();
      dz.middleCols(2 * h, h) = (dc.array() * in * (1.0 - cand * cand)).matrix();
      dz.rightCols(h) = (dh.array() * tanh_c * out * (1.0 - out)).matrix();

      g.w.noalias() += dz.transpose() * tr.inputs[t];
      g.u.noalias() += dz.transpose() * tr.hidden[t];
      g.bias.col(0) += dz.colwise().sum().transpose();
      const Eigen::MatrixXd dx = dz * w_;
      for (Eigen::Index b = 0; b < batch; ++b) g.input[b].row(t) = dx.row(b);

      dh = dz * u_;
      dc = (dc.array() * forget).matrix();
    }
    return g;
  }

 private:
  int input_, hidden_;
  Eigen::MatrixXd w_;
  Eigen::MatrixXd u_;
  Eigen::MatrixXd bias_;
};

}  // namespace kshape
