#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "uarl/batch.hpp"
#include "uarl/data.hpp"
#include "uarl/ensemble.hpp"

namespace uarl {

inline constexpr double kVarianceFloor = 1e-8;

/// max(sigma^2, floor) for nominal samples, 1 / max(sigma^2, floor) for repulsive ones.
double sample_weight(double sigma2, Role role);

struct WeightedSamples {
  std::vector<double> sigma2;
  std::vector<double> weights;
};

/// Ensemble variance and sampling weight of each transition. `roles` is either one
/// role per transition or a single role for all of them.
WeightedSamples compute_weights(const CriticEnsemble& ensemble,
                                std::span<const Transition* const> transitions,
                                std::span<const Role> roles);

/// Fine-tuning replay: transitions of several nominal datasets drawn with probability
/// proportional to their weights, with replacement. Immutable once built.
class BalancedBuffer {
 public:
  BalancedBuffer(std::vector<Dataset> datasets, std::vector<double> sigma2,
                 std::vector<double> weights);

  /// Equal weights; sampling then matches uniform index draws.
  static BalancedBuffer uniform(std::vector<Dataset> datasets);

  std::size_t size() const { return index_.size(); }
  const Transition& at(std::size_t i) const {
    return datasets_[index_[i].first][index_[i].second];
  }
  const std::vector<Dataset>& datasets() const { return datasets_; }
  const std::vector<double>& sigma2() const { return sigma2_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& probabilities() const { return probs_; }
  bool is_uniform() const { return uniform_; }

  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const;
  Batch sample_batch(std::size_t n, Rng& rng) const;

  /// CSV: index,sigma2,weight.
  void write_csv(const std::filesystem::path& path) const;

 private:
  std::vector<Dataset> datasets_;
  std::vector<std::pair<std::size_t, std::size_t>> index_;
  std::vector<double> sigma2_;
  std::vector<double> weights_;
  std::vector<double> probs_;
  bool uniform_ = false;
};

/// Buffer over D_0..D_k, all weighted on the nominal branch. Throws RoleError if any
/// dataset is not nominal (promote with Dataset::retagged first).
BalancedBuffer merge_balanced(const std::vector<Dataset>& datasets, const CriticEnsemble& ensemble);

}  // namespace uarl
