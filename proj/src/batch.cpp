#include "uarl/batch.hpp"

#include <cmath>

#include "uarl/error.hpp"

namespace uarl {

Batch make_batch(std::span<const Transition* const> transitions, Role role) {
  Batch b;
  b.role = role;
  const auto n = static_cast<Eigen::Index>(transitions.size());
  if (n == 0) {
    b.s.resize(0, 0);
    b.a.resize(0, 0);
    b.s2.resize(0, 0);
    b.r.resize(0);
    b.not_done.resize(0);
    return b;
  }
  const auto& first = *transitions.front();
  b.s.resize(first.state.size(), n);
  b.a.resize(first.action.size(), n);
  b.s2.resize(first.next_state.size(), n);
  b.r.resize(n);
  b.not_done.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = *transitions[static_cast<std::size_t>(i)];
    b.s.col(i) = t.state;
    b.a.col(i) = t.action;
    b.s2.col(i) = t.next_state;
    b.r[i] = t.reward;
    b.not_done[i] = t.done ? 0.0 : 1.0;
  }
  return b;
}

Batch make_batch(const Dataset& dataset, std::span<const std::size_t> indices) {
  std::vector<const Transition*> ptrs;
  ptrs.reserve(indices.size());
  for (auto i : indices) ptrs.push_back(&dataset[i]);
  return make_batch(ptrs, dataset.role());
}

Batch full_batch(const Dataset& dataset) {
  std::vector<const Transition*> ptrs;
  ptrs.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) ptrs.push_back(&dataset[i]);
  return make_batch(ptrs, dataset.role());
}

StateNormalizer StateNormalizer::identity(int dim) {
  return {Vec::Zero(dim), Vec::Ones(dim)};
}

StateNormalizer StateNormalizer::fit(const Dataset& dataset) {
  if (dataset.empty()) throw InvalidArgument("StateNormalizer::fit on an empty dataset");
  const auto dim = dataset[0].state.size();
  Vec mean = Vec::Zero(dim);
  for (std::size_t i = 0; i < dataset.size(); ++i) mean += dataset[i].state;
  mean /= static_cast<double>(dataset.size());
  Vec var = Vec::Zero(dim);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    var += (dataset[i].state - mean).cwiseAbs2();
  }
  var /= static_cast<double>(dataset.size());
  Vec inv = var.cwiseSqrt().cwiseMax(1e-3).cwiseInverse();
  return {mean, inv};
}

Mat StateNormalizer::apply(const Mat& states) const {
  return (states.colwise() - mean).array().colwise() * inv_std.array();
}

}  // namespace uarl
