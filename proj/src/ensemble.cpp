#include "uarl/ensemble.hpp"

#include <cmath>
#include <fstream>

#include "uarl/error.hpp"
#include "uarl/log.hpp"

namespace uarl {

VarianceStats mean_var(std::span<const double> values) {
  if (values.size() < 2) throw InvalidArgument("mean_var needs at least two values");
  const double n = static_cast<double>(values.size());
  double mu = 0.0;
  for (double v : values) mu += v;
  mu /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mu) * (v - mu);
  return {mu, ss / n};
}

CriticEnsemble init_ensemble(int n, int obs_dim, int act_dim, std::uint64_t seed,
                             StateNormalizer norm, int hidden) {
  if (n < 2) throw InvalidArgument("init_ensemble: ensemble size must be >= 2");
  if (norm.mean.size() != obs_dim) throw InvalidArgument("init_ensemble: normalizer dimension mismatch");
  CriticEnsemble e;
  e.obs_dim_ = obs_dim;
  e.act_dim_ = act_dim;
  e.norm_ = std::move(norm);
  e.members_.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, stream::kInit, static_cast<std::uint64_t>(i)));
    Critic c{Mlp({obs_dim + act_dim, hidden, hidden, 1}), {}, {}};
    c.online.init(rng);
    c.target = c.online;
    c.opt.reset(c.online.n_params());
    e.members_.push_back(std::move(c));
  }
  return e;
}

Mat CriticEnsemble::input(const Mat& states, const Mat& actions) const {
  Mat x(obs_dim_ + act_dim_, states.cols());
  x.topRows(obs_dim_) = norm_.apply(states);
  x.bottomRows(act_dim_) = actions;
  return x;
}

namespace {

void check_finite(const Vec& v, const char* what) {
  if (!v.allFinite()) throw InvalidArgument(std::string("predict: ") + what + " contains NaN or Inf");
}

}  // namespace

Vec CriticEnsemble::predict(const Vec& state, const Vec& action) const {
  check_finite(state, "state");
  check_finite(action, "action");
  if (state.size() != obs_dim_ || action.size() != act_dim_) {
    throw InvalidArgument("predict: state/action dimensions do not match the ensemble");
  }
  return predict(Mat(state), Mat(action)).col(0);
}

Vec CriticEnsemble::predict_target(const Vec& state, const Vec& action) const {
  check_finite(state, "state");
  check_finite(action, "action");
  return predict_target(Mat(state), Mat(action)).col(0);
}

Mat CriticEnsemble::predict(const Mat& states, const Mat& actions) const {
  const Mat x = input(states, actions);
  Mat out(size(), states.cols());
  for (int i = 0; i < size(); ++i) out.row(i) = members_[i].online.forward(x);
  return out;
}

Mat CriticEnsemble::predict_target(const Mat& states, const Mat& actions) const {
  const Mat x = input(states, actions);
  Mat out(size(), states.cols());
  for (int i = 0; i < size(); ++i) out.row(i) = members_[i].target.forward(x);
  return out;
}

void CriticEnsemble::set_learning_rate(double lr) {
  for (auto& m : members_) m.opt.lr = lr;
}

void CriticEnsemble::reset_optimizers() {
  for (auto& m : members_) m.opt.reset(m.online.n_params());
}

namespace {

struct DiversityParts {
  double sum = 0.0;
  Vec grad;
};

/// Sum of exp terms and its gradient scaled by `scale`.
DiversityParts diversity_parts(const CriticEnsemble& e, int member, const Batch& rep,
                               const Mat& next_actions, double delta, double gamma, double scale,
                               Vec& grad) {
  const auto& net = e.member(member).online;
  Mlp::Tape tape_sa;
  Mlp::Tape tape_next;
  const Mat q = net.forward(e.input(rep.s, rep.a), tape_sa);
  const Mat q_next = net.forward(e.input(rep.s2, next_actions), tape_next);
  const auto n = rep.size();
  const double inv_two_d2 = 1.0 / (2.0 * delta * delta);
  Mat dq(1, n);
  Mat dq_next(1, n);
  double sum = 0.0;
  for (Eigen::Index b = 0; b < n; ++b) {
    const double discount = gamma * rep.not_done[b];
    const double res = q(0, b) - (rep.r[b] + discount * q_next(0, b));
    const double term = std::exp(-res * res * inv_two_d2);
    sum += term;
    const double dres = scale * term * (-res / (delta * delta));
    dq(0, b) = dres;
    dq_next(0, b) = -discount * dres;
  }
  net.backward(tape_sa, dq, grad);
  net.backward(tape_next, dq_next, grad);
  return {sum, {}};
}

}  // namespace

LossAndGrad diversity_loss(const CriticEnsemble& ensemble, int member, const Batch& repulsive,
                           const Mat& next_actions, double delta, double gamma) {
  if (repulsive.role != Role::repulsive) {
    throw RoleError("diversity_loss: batch role is '" + std::string(to_string(repulsive.role)) +
                    "', the diversity term only applies to repulsive data");
  }
  if (!(delta > 0)) throw InvalidArgument("diversity_loss: delta must be > 0");
  LossAndGrad out;
  out.grad = Vec::Zero(ensemble.member(member).online.n_params());
  out.value =
      diversity_parts(ensemble, member, repulsive, next_actions, delta, gamma, 1.0, out.grad).sum;
  return out;
}

CriticLoss critic_loss(const CriticEnsemble& ensemble, int member, const CriticLossInputs& in) {
  if (in.nominal == nullptr || in.td_targets == nullptr || in.nominal->size() == 0) {
    throw InvalidArgument("critic_loss: empty nominal batch");
  }
  if (in.nominal->role != Role::nominal) {
    throw RoleError("critic_loss: the TD term needs a nominal batch");
  }
  if (!(in.lambda >= 0)) throw InvalidArgument("critic_loss: lambda must be >= 0");
  const auto& net = ensemble.member(member).online;
  const Batch& nom = *in.nominal;
  const auto n = nom.size();

  CriticLoss out;
  Vec g_rl = Vec::Zero(net.n_params());
  Mlp::Tape tape;
  const Mat q = net.forward(ensemble.input(nom.s, nom.a), tape);
  const Eigen::RowVectorXd err = q.row(0) - in.td_targets->transpose();
  out.rl = err.squaredNorm() / static_cast<double>(n);
  net.backward(tape, (2.0 / static_cast<double>(n)) * err, g_rl);

  Vec g_div = Vec::Zero(net.n_params());
  if (in.repulsive != nullptr) {
    if (in.repulsive->size() == 0) throw InvalidArgument("critic_loss: empty repulsive batch");
    if (in.repulsive->role != Role::repulsive) {
      throw RoleError("critic_loss: the diversity term needs a repulsive batch");
    }
    if (!(in.delta > 0)) throw InvalidArgument("critic_loss: delta must be > 0");
    const double m = static_cast<double>(in.repulsive->size());
    const auto parts = diversity_parts(ensemble, member, *in.repulsive, *in.repulsive_next_actions,
                                       in.delta, in.gamma, 1.0 / m, g_div);
    out.diversity = parts.sum / m;
  }
  out.total = out.rl + in.lambda * out.diversity;
  out.grad = g_rl + in.lambda * g_div;
  return out;
}

double adaptive_lambda(double rl_loss, double div_loss, double target_fraction, double previous) {
  if (!std::isfinite(rl_loss) || !std::isfinite(div_loss) || !(div_loss > 0)) return previous;
  if (!(target_fraction >= 0 && target_fraction < 1)) {
    throw InvalidArgument("adaptive_lambda: target fraction must lie in [0,1)");
  }
  if (rl_loss == 0.0) {
    log(LogLevel::info, "adaptive_lambda: zero RL loss, lambda set to 0");
    return 0.0;
  }
  return target_fraction * rl_loss / ((1.0 - target_fraction) * div_loss);
}

void to_json(nlohmann::json& j, const StateNormalizer& n) {
  j = {{"mean", std::vector<double>(n.mean.data(), n.mean.data() + n.mean.size())},
       {"inv_std", std::vector<double>(n.inv_std.data(), n.inv_std.data() + n.inv_std.size())}};
}

void from_json(const nlohmann::json& j, StateNormalizer& n) {
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto inv = j.at("inv_std").get<std::vector<double>>();
  n.mean = Eigen::Map<const Vec>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  n.inv_std = Eigen::Map<const Vec>(inv.data(), static_cast<Eigen::Index>(inv.size()));
}

void to_json(nlohmann::json& j, const Mlp& m) {
  j = {{"sizes", m.sizes()},
       {"output", m.output_activation() == OutputActivation::tanh ? "tanh" : "identity"},
       {"params", std::vector<double>(m.params().data(), m.params().data() + m.n_params())}};
}

void from_json(const nlohmann::json& j, Mlp& m) {
  const auto act = j.value("output", std::string("identity"));
  m = Mlp(j.at("sizes").get<std::vector<int>>(),
          act == "tanh" ? OutputActivation::tanh : OutputActivation::identity);
  const auto p = j.at("params").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(p.size()) != m.n_params()) {
    throw ParseError("parameter vector length does not match layer shapes", 0);
  }
  m.params() = Eigen::Map<const Vec>(p.data(), static_cast<Eigen::Index>(p.size()));
}

void to_json(nlohmann::json& j, const CriticEnsemble& e) {
  nlohmann::json members = nlohmann::json::array();
  for (int i = 0; i < e.size(); ++i) {
    members.push_back({{"online", e.member(i).online}, {"target", e.member(i).target}});
  }
  j = {{"obs_dim", e.obs_dim()},
       {"act_dim", e.act_dim()},
       {"normalizer", e.normalizer()},
       {"members", members}};
}

void from_json(const nlohmann::json& j, CriticEnsemble& e) {
  e.obs_dim_ = j.at("obs_dim").get<int>();
  e.act_dim_ = j.at("act_dim").get<int>();
  e.norm_ = j.at("normalizer").get<StateNormalizer>();
  e.members_.clear();
  for (const auto& m : j.at("members")) {
    Critic c{m.at("online").get<Mlp>(), m.at("target").get<Mlp>(), {}};
    c.opt.reset(c.online.n_params());
    e.members_.push_back(std::move(c));
  }
}

void save_ensemble(const CriticEnsemble& e, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << nlohmann::json(e).dump() << '\n';
}

CriticEnsemble load_ensemble(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in).get<CriticEnsemble>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid ensemble checkpoint: ") + e.what(), 1);
  }
}

}  // namespace uarl
