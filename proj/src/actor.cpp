#include "uarl/actor.hpp"

namespace uarl {

Actor::Actor(int obs_dim, int act_dim, double action_bound, StateNormalizer norm,
             std::uint64_t seed, int hidden)
    : net_({obs_dim, hidden, hidden, act_dim}, OutputActivation::tanh),
      bound_(action_bound),
      norm_(std::move(norm)) {
  Rng rng(seed);
  net_.init(rng);
  target_ = net_;
  opt_.reset(net_.n_params());
}

Actor::Actor(Mlp net, Mlp target, double action_bound, StateNormalizer norm)
    : net_(std::move(net)), target_(std::move(target)), bound_(action_bound), norm_(std::move(norm)) {
  opt_.reset(net_.n_params());
}

Mat Actor::act(const Mat& states) const { return bound_ * net_.forward(norm_.apply(states)); }

Mat Actor::act_target(const Mat& states) const {
  return bound_ * target_.forward(norm_.apply(states));
}

Vec Actor::act(const Vec& state) const {
  Mat s = state;
  return act(s).col(0);
}

Mat Actor::act(const Mat& states, Mlp::Tape& tape) const {
  return bound_ * net_.forward(norm_.apply(states), tape);
}

void Actor::backward(const Mlp::Tape& tape, const Mat& daction, Vec& grad) const {
  net_.backward(tape, bound_ * daction, grad);
}

Vec ActorRolloutPolicy::act(const Vec& obs, Rng& rng) const {
  Vec a = actor_->act(obs);
  if (sigma_ > 0) {
    std::normal_distribution<double> n(0.0, sigma_ * actor_->bound());
    for (Eigen::Index i = 0; i < a.size(); ++i) a[i] += n(rng);
  }
  return a.cwiseMax(-actor_->bound()).cwiseMin(actor_->bound());
}

}  // namespace uarl
