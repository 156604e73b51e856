#pragma once

#include <vector>

#include <Eigen/Dense>

#include "uarl/rng.hpp"

namespace uarl {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

enum class OutputActivation { identity, tanh };

/// Fully connected ReLU network over column batches (features x batch).
///
/// Parameters live in one flat vector, layer by layer: weight matrix
/// (out x in, column-major) followed by the bias.
class Mlp {
 public:
  struct Tape {
    std::vector<Mat> inputs;  // input to each layer
    std::vector<Mat> pre;     // pre-activation of each layer
    Mat output;
  };

  Mlp() = default;
  Mlp(std::vector<int> sizes, OutputActivation out = OutputActivation::identity);

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  void init(Rng& rng);

  int in_dim() const { return sizes_.front(); }
  int out_dim() const { return sizes_.back(); }
  int n_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  Eigen::Index n_params() const { return params_.size(); }
  const std::vector<int>& sizes() const { return sizes_; }
  OutputActivation output_activation() const { return out_; }

  Vec& params() { return params_; }
  const Vec& params() const { return params_; }

  Mat forward(const Mat& x) const;
  Mat forward(const Mat& x, Tape& tape) const;

  /// Accumulates dL/dparams into `grad` given dL/doutput; returns dL/dinput.
  Mat backward(const Tape& tape, const Mat& dout, Vec& grad) const;

 private:
  Eigen::Index weight_offset(int layer) const { return offsets_[layer]; }
  Eigen::Index bias_offset(int layer) const {
    return offsets_[layer] + static_cast<Eigen::Index>(sizes_[layer + 1]) * sizes_[layer];
  }

  std::vector<int> sizes_;
  std::vector<Eigen::Index> offsets_;
  OutputActivation out_ = OutputActivation::identity;
  Vec params_;
};

/// Adaptive per-parameter step (Adam).
struct Adam {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  Vec m;
  Vec v;
  long t = 0;

  void reset(Eigen::Index n);
  void step(Vec& params, const Vec& grad);
};

}  // namespace uarl
