#pragma once

#include <memory>
#include <string>

#include "uarl/batch.hpp"
#include "uarl/data.hpp"
#include "uarl/nn.hpp"

namespace uarl {

/// Deterministic actor: bound * tanh(MLP(normalized state)), with a Polyak target copy.
class Actor {
 public:
  Actor() = default;
  Actor(int obs_dim, int act_dim, double action_bound, StateNormalizer norm, std::uint64_t seed,
        int hidden = 64);
  /// Restores a saved actor; optimizer state starts fresh.
  Actor(Mlp net, Mlp target, double action_bound, StateNormalizer norm);

  Mat act(const Mat& states) const;
  Mat act_target(const Mat& states) const;
  Vec act(const Vec& state) const;

  /// Forward with tape, for gradients w.r.t. actor parameters.
  Mat act(const Mat& states, Mlp::Tape& tape) const;
  /// dL/dparams given dL/daction for the taped forward.
  void backward(const Mlp::Tape& tape, const Mat& daction, Vec& grad) const;

  int obs_dim() const { return net_.in_dim(); }
  int act_dim() const { return net_.out_dim(); }
  double bound() const { return bound_; }
  const StateNormalizer& normalizer() const { return norm_; }

  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }
  Mlp& target() { return target_; }
  const Mlp& target() const { return target_; }
  Adam& optimizer() { return opt_; }

 private:
  Mlp net_;
  Mlp target_;
  Adam opt_;
  double bound_ = 1.0;
  StateNormalizer norm_;
};

/// Rollout adapter: actor output plus Gaussian exploration noise, clipped to the box.
class ActorRolloutPolicy final : public RolloutPolicy {
 public:
  ActorRolloutPolicy(std::shared_ptr<const Actor> actor, double sigma, std::string id)
      : actor_(std::move(actor)), sigma_(sigma), id_(std::move(id)) {}

  Vec act(const Vec& obs, Rng& rng) const override;
  std::string id() const override { return id_; }

 private:
  std::shared_ptr<const Actor> actor_;
  double sigma_;
  std::string id_;
};

}  // namespace uarl
