#include "uarl/buffer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "uarl/error.hpp"
#include "uarl/kernels.hpp"

namespace uarl {

double sample_weight(double sigma2, Role role) {
  switch (role) {
    case Role::nominal:
      return std::max(sigma2, kVarianceFloor);
    case Role::repulsive:
      return 1.0 / std::max(sigma2, kVarianceFloor);
    case Role::target_proxy:
      break;
  }
  throw RoleError("sample_weight: role '" + std::string(to_string(role)) +
                  "' has no weighting rule");
}

WeightedSamples compute_weights(const CriticEnsemble& ensemble,
                                std::span<const Transition* const> transitions,
                                std::span<const Role> roles) {
  if (roles.size() != 1 && roles.size() != transitions.size()) {
    throw InvalidArgument("compute_weights: need one role per transition or a single role");
  }
  WeightedSamples out;
  if (transitions.empty()) return out;
  const Batch b = make_batch(transitions, Role::nominal);
  const Vec s2 = kernels::ensemble_variance(ensemble, b.s, b.a);
  out.sigma2.assign(s2.data(), s2.data() + s2.size());
  out.weights.resize(transitions.size());
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    out.weights[i] = sample_weight(out.sigma2[i], roles.size() == 1 ? roles[0] : roles[i]);
  }
  return out;
}

BalancedBuffer::BalancedBuffer(std::vector<Dataset> datasets, std::vector<double> sigma2,
                               std::vector<double> weights)
    : datasets_(std::move(datasets)), sigma2_(std::move(sigma2)), weights_(std::move(weights)) {
  for (std::size_t d = 0; d < datasets_.size(); ++d) {
    for (std::size_t i = 0; i < datasets_[d].size(); ++i) index_.emplace_back(d, i);
  }
  if (index_.empty()) throw InvalidArgument("BalancedBuffer: no transitions");
  if (weights_.size() != index_.size() || sigma2_.size() != index_.size()) {
    throw InvalidArgument("BalancedBuffer: weight count does not match transition count");
  }
  double total = 0.0;
  for (double w : weights_) {
    if (!(w > 0) || !std::isfinite(w)) {
      throw InvalidArgument("BalancedBuffer: weights must be positive and finite");
    }
    total += w;
  }
  probs_.resize(weights_.size());
  for (std::size_t i = 0; i < weights_.size(); ++i) probs_[i] = weights_[i] / total;
  uniform_ = std::all_of(weights_.begin(), weights_.end(),
                         [&](double w) { return w == weights_.front(); });
}

BalancedBuffer BalancedBuffer::uniform(std::vector<Dataset> datasets) {
  std::size_t n = 0;
  for (const auto& d : datasets) n += d.size();
  return BalancedBuffer(std::move(datasets), std::vector<double>(n, 0.0),
                        std::vector<double>(n, 1.0));
}

std::vector<std::size_t> BalancedBuffer::sample_indices(std::size_t n, Rng& rng) const {
  std::vector<std::size_t> out(n);
  if (uniform_) {
    std::uniform_int_distribution<std::size_t> pick(0, size() - 1);
    for (auto& i : out) i = pick(rng);
  } else {
    std::discrete_distribution<std::size_t> pick(weights_.begin(), weights_.end());
    for (auto& i : out) i = pick(rng);
  }
  return out;
}

Batch BalancedBuffer::sample_batch(std::size_t n, Rng& rng) const {
  const auto idx = sample_indices(n, rng);
  std::vector<const Transition*> ptrs;
  ptrs.reserve(n);
  for (auto i : idx) ptrs.push_back(&at(i));
  return make_batch(ptrs, Role::nominal);
}

void BalancedBuffer::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.precision(17);
  out << "index,sigma2,weight\n";
  for (std::size_t i = 0; i < size(); ++i) out << i << ',' << sigma2_[i] << ',' << weights_[i] << '\n';
}

BalancedBuffer merge_balanced(const std::vector<Dataset>& datasets, const CriticEnsemble& ensemble) {
  if (datasets.empty()) throw InvalidArgument("merge_balanced: empty dataset list");
  std::vector<const Transition*> ptrs;
  for (const auto& d : datasets) {
    if (d.role() != Role::nominal) {
      throw RoleError("merge_balanced: dataset with role '" + std::string(to_string(d.role())) +
                      "' must be promoted to nominal before pooling");
    }
    for (std::size_t i = 0; i < d.size(); ++i) ptrs.push_back(&d[i]);
  }
  const Role nominal = Role::nominal;
  auto w = compute_weights(ensemble, ptrs, std::span<const Role>(&nominal, 1));
  return BalancedBuffer(datasets, std::move(w.sigma2), std::move(w.weights));
}

}  // namespace uarl
