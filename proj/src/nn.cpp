#include "uarl/nn.hpp"

#include <cmath>

#include "uarl/error.hpp"

namespace uarl {

Mlp::Mlp(std::vector<int> sizes, OutputActivation out) : sizes_(std::move(sizes)), out_(out) {
  if (sizes_.size() < 2) throw InvalidArgument("Mlp needs at least an input and an output size");
  Eigen::Index total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] < 1 || sizes_[l + 1] < 1) throw InvalidArgument("Mlp layer sizes must be positive");
    offsets_.push_back(total);
    total += static_cast<Eigen::Index>(sizes_[l + 1]) * (sizes_[l] + 1);
  }
  params_ = Vec::Zero(total);
}

void Mlp::init(Rng& rng) {
  for (int l = 0; l < n_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    std::uniform_real_distribution<double> u(-bound, bound);
    const Eigen::Index begin = weight_offset(l);
    const Eigen::Index end = bias_offset(l) + sizes_[l + 1];
    for (Eigen::Index i = begin; i < end; ++i) params_[i] = u(rng);
  }
}

Mat Mlp::forward(const Mat& x) const {
  Mat h = x;
  for (int l = 0; l < n_layers(); ++l) {
    Eigen::Map<const Mat> w(params_.data() + weight_offset(l), sizes_[l + 1], sizes_[l]);
    Eigen::Map<const Vec> b(params_.data() + bias_offset(l), sizes_[l + 1]);
    Mat z = w * h;
    z.colwise() += b;
    if (l + 1 < n_layers()) {
      h = z.cwiseMax(0.0);
    } else {
      h = out_ == OutputActivation::tanh ? Mat(z.array().tanh()) : z;
    }
  }
  return h;
}

Mat Mlp::forward(const Mat& x, Tape& tape) const {
  tape.inputs.resize(n_layers());
  tape.pre.resize(n_layers());
  Mat h = x;
  for (int l = 0; l < n_layers(); ++l) {
    Eigen::Map<const Mat> w(params_.data() + weight_offset(l), sizes_[l + 1], sizes_[l]);
    Eigen::Map<const Vec> b(params_.data() + bias_offset(l), sizes_[l + 1]);
    tape.inputs[l] = h;
    Mat z = w * h;
    z.colwise() += b;
    tape.pre[l] = z;
    if (l + 1 < n_layers()) {
      h = z.cwiseMax(0.0);
    } else {
      h = out_ == OutputActivation::tanh ? Mat(z.array().tanh()) : z;
    }
  }
  tape.output = h;
  return h;
}

Mat Mlp::backward(const Tape& tape, const Mat& dout, Vec& grad) const {
  if (grad.size() != n_params()) grad = Vec::Zero(n_params());
  Mat delta;
  if (out_ == OutputActivation::tanh) {
    delta = dout.array() * (1.0 - tape.output.array().square());
  } else {
    delta = dout;
  }
  for (int l = n_layers() - 1; l >= 0; --l) {
    Eigen::Map<const Mat> w(params_.data() + weight_offset(l), sizes_[l + 1], sizes_[l]);
    Eigen::Map<Mat> gw(grad.data() + weight_offset(l), sizes_[l + 1], sizes_[l]);
    Eigen::Map<Vec> gb(grad.data() + bias_offset(l), sizes_[l + 1]);
    gw.noalias() += delta * tape.inputs[l].transpose();
    gb += delta.rowwise().sum();
    Mat dx = w.transpose() * delta;
    if (l > 0) {
      delta = dx.array() * (tape.pre[l - 1].array() > 0.0).cast<double>();
    } else {
      return dx;
    }
  }
  return delta;
}

void Adam::reset(Eigen::Index n) {
  m = Vec::Zero(n);
  v = Vec::Zero(n);
  t = 0;
}

void Adam::step(Vec& params, const Vec& grad) {
  if (m.size() != params.size()) reset(params.size());
  ++t;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  params.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

}  // namespace uarl
