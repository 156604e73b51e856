#pragma once

#include <span>
#include <vector>

#include "uarl/data.hpp"
#include "uarl/nn.hpp"

namespace uarl {

/// Column-major minibatch: one transition per column.
struct Batch {
  Mat s;
  Mat a;
  Vec r;
  Mat s2;
  Vec not_done;
  Role role = Role::nominal;

  Eigen::Index size() const { return r.size(); }
};

Batch make_batch(std::span<const Transition* const> transitions, Role role);
Batch make_batch(const Dataset& dataset, std::span<const std::size_t> indices);
/// Every transition of the dataset, in order.
Batch full_batch(const Dataset& dataset);

/// Per-feature affine state normalization, frozen once fitted.
struct StateNormalizer {
  Vec mean;
  Vec inv_std;

  static StateNormalizer identity(int dim);
  /// Mean/std over all states of the dataset; std floored at 1e-3.
  static StateNormalizer fit(const Dataset& dataset);

  Mat apply(const Mat& states) const;
  bool operator==(const StateNormalizer&) const = default;
};

}  // namespace uarl
