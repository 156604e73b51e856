#include "uarl/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <map>
#include <random>

#include "uarl/buffer.hpp"
#include "uarl/error.hpp"
#include "uarl/kernels.hpp"

namespace uarl {

namespace {

constexpr double kTol = 1e-12;
constexpr long kMaxSweeps = 1000000;

void check_policy(const TabularMDP& mdp, const TabularPolicy& policy) {
  if (static_cast<int>(policy.size()) != mdp.n_states) {
    throw InvalidArgument("policy length does not match the state count");
  }
  for (int a : policy) {
    if (a < 0 || a >= mdp.n_actions) throw InvalidArgument("policy action out of range");
  }
}

template <typename Backup>
Vec iterate_to_fixed_point(const TabularMDP& mdp, Backup backup) {
  Vec q = Vec::Zero(mdp.n_pairs());
  Vec next;
  for (long sweep = 0; sweep < kMaxSweeps; ++sweep) {
    backup(q, next);
    const double change = (next - q).cwiseAbs().maxCoeff();
    q.swap(next);
    if (change < kTol) return q;
  }
  throw Error("value iteration did not converge within 1e6 sweeps");
}

std::string hex_digest(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct Digest {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void add(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  }
  void add(double x) { add(&x, sizeof x); }
  void add(const std::vector<double>& v) { add(v.data(), v.size() * sizeof(double)); }
  void add(const Vec& v) { add(v.data(), static_cast<std::size_t>(v.size()) * sizeof(double)); }
  void add(const TabularPolicy& p) { add(p.data(), p.size() * sizeof(int)); }
  void add(const TabularMDP& m) {
    add(m.transition);
    add(m.reward);
    add(m.metric);
    add(m.gamma);
  }
  std::string str() const { return hex_digest(h); }
};

nlohmann::json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

QTable exact_q(const TabularMDP& mdp, const TabularPolicy& policy, bool parallel) {
  mdp.validate();
  check_policy(mdp, policy);
  QTable out;
  out.n_states = mdp.n_states;
  out.n_actions = mdp.n_actions;
  out.gamma = mdp.gamma;
  out.q = iterate_to_fixed_point(mdp, [&](const Vec& q, Vec& next) {
    if (parallel) {
      kernels::bellman_backup(mdp, policy, q, next);
    } else {
      kernels::reference::bellman_backup(mdp, policy, q, next);
    }
  });
  Digest d;
  d.add(mdp);
  out.mdp_id = d.str();
  Digest dp;
  dp.add(policy);
  out.policy_id = dp.str();
  return out;
}

QTable optimal_q(const TabularMDP& mdp, bool parallel) {
  mdp.validate();
  QTable out;
  out.n_states = mdp.n_states;
  out.n_actions = mdp.n_actions;
  out.gamma = mdp.gamma;
  out.q = iterate_to_fixed_point(mdp, [&](const Vec& q, Vec& next) {
    if (parallel) {
      kernels::optimality_backup(mdp, q, next);
    } else {
      kernels::reference::optimality_backup(mdp, q, next);
    }
  });
  Digest d;
  d.add(mdp);
  out.mdp_id = d.str();
  out.policy_id = "greedy";
  return out;
}

Vec state_values(const QTable& q, const TabularPolicy& policy) {
  Vec v(q.n_states);
  for (int s = 0; s < q.n_states; ++s) v[s] = q(s, policy[static_cast<std::size_t>(s)]);
  return v;
}

TabularPolicy greedy_policy(const QTable& q) {
  TabularPolicy p(static_cast<std::size_t>(q.n_states));
  for (int s = 0; s < q.n_states; ++s) {
    Eigen::Index best = 0;
    q.q.segment(s * q.n_actions, q.n_actions).maxCoeff(&best);
    p[static_cast<std::size_t>(s)] = static_cast<int>(best);
  }
  return p;
}

Vec bellman_apply(const TabularMDP& mdp, const TabularPolicy& policy, const Vec& q) {
  check_policy(mdp, policy);
  Vec out;
  kernels::reference::bellman_backup(mdp, policy, q, out);
  return out;
}

double w1_discrete(std::span<const double> p, std::span<const double> q, const Mat& ground) {
  const auto n = p.size();
  if (q.size() != n || static_cast<std::size_t>(ground.rows()) != n ||
      static_cast<std::size_t>(ground.cols()) != n) {
    throw InvalidArgument("w1_discrete: distributions and ground metric must share one support");
  }
  if (n > 64) throw InvalidArgument("w1_discrete: support larger than 64 points");
  double sp = 0.0;
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (p[i] < 0 || q[i] < 0) throw InvalidArgument("w1_discrete: negative probability");
    sp += p[i];
    sq += q[i];
  }
  if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9) {
    throw InvalidArgument("w1_discrete: inputs must be probability vectors");
  }

  // Transport network: source -> supply i -> demand j -> sink, solved by successive
  // shortest augmenting paths (Bellman-Ford on the residual graph).
  struct Edge {
    int to;
    double cap;
    double cost;
  };
  const int nn = static_cast<int>(n);
  const int src = 2 * nn;
  const int sink = 2 * nn + 1;
  std::vector<Edge> edges;
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(2 * nn + 2));
  auto add_edge = [&](int u, int v, double cap, double cost) {
    adj[static_cast<std::size_t>(u)].push_back(static_cast<int>(edges.size()));
    edges.push_back({v, cap, cost});
    adj[static_cast<std::size_t>(v)].push_back(static_cast<int>(edges.size()));
    edges.push_back({u, 0.0, -cost});
  };
  for (int i = 0; i < nn; ++i) add_edge(src, i, p[static_cast<std::size_t>(i)], 0.0);
  for (int j = 0; j < nn; ++j) add_edge(nn + j, sink, q[static_cast<std::size_t>(j)], 0.0);
  for (int i = 0; i < nn; ++i) {
    for (int j = 0; j < nn; ++j) add_edge(i, nn + j, 2.0, ground(i, j));
  }

  constexpr double kEps = 1e-15;
  const int nodes = 2 * nn + 2;
  double cost = 0.0;
  double moved = 0.0;
  while (moved < std::min(sp, sq) - 1e-14) {
    std::vector<double> dist(static_cast<std::size_t>(nodes), std::numeric_limits<double>::infinity());
    std::vector<int> via(static_cast<std::size_t>(nodes), -1);
    dist[static_cast<std::size_t>(src)] = 0.0;
    for (int round = 0; round < nodes; ++round) {
      bool changed = false;
      for (int u = 0; u < nodes; ++u) {
        const double du = dist[static_cast<std::size_t>(u)];
        if (!std::isfinite(du)) continue;
        for (int e : adj[static_cast<std::size_t>(u)]) {
          const auto& ed = edges[static_cast<std::size_t>(e)];
          if (ed.cap <= kEps) continue;
          const double nd = du + ed.cost;
          if (nd < dist[static_cast<std::size_t>(ed.to)] - 1e-15) {
            dist[static_cast<std::size_t>(ed.to)] = nd;
            via[static_cast<std::size_t>(ed.to)] = e;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    if (via[static_cast<std::size_t>(sink)] < 0) break;
    double push = std::numeric_limits<double>::infinity();
    for (int v = sink; v != src;) {
      const int e = via[static_cast<std::size_t>(v)];
      push = std::min(push, edges[static_cast<std::size_t>(e)].cap);
      v = edges[static_cast<std::size_t>(e ^ 1)].to;
    }
    for (int v = sink; v != src;) {
      const int e = via[static_cast<std::size_t>(v)];
      edges[static_cast<std::size_t>(e)].cap -= push;
      edges[static_cast<std::size_t>(e ^ 1)].cap += push;
      cost += push * edges[static_cast<std::size_t>(e)].cost;
      v = edges[static_cast<std::size_t>(e ^ 1)].to;
    }
    moved += push;
  }
  return cost;
}

double lipschitz_seminorm(const TabularMDP& mdp, const Vec& values) {
  double best = 0.0;
  const int n = mdp.n_pairs();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double d = mdp.metric[static_cast<std::size_t>(i) * n + j];
      best = std::max(best, std::abs(values[i] - values[j]) / d);
    }
  }
  return best;
}

namespace {

Mat state_metric(const TabularMDP& mdp) {
  Mat g(mdp.n_states, mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int s2 = 0; s2 < mdp.n_states; ++s2) g(s, s2) = mdp.state_distance(s, s2);
  }
  return g;
}

Mat policy_metric(const TabularMDP& mdp, const TabularPolicy& policy) {
  Mat g(mdp.n_states, mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int s2 = 0; s2 < mdp.n_states; ++s2) {
      g(s, s2) = mdp.d(s, policy[static_cast<std::size_t>(s)], s2, policy[static_cast<std::size_t>(s2)]);
    }
  }
  return g;
}

std::span<const double> row(const TabularMDP& mdp, int s, int a) {
  return {&mdp.transition[(static_cast<std::size_t>(s) * mdp.n_actions + a) * mdp.n_states],
          static_cast<std::size_t>(mdp.n_states)};
}

}  // namespace

LipschitzReport lipschitz_constants(const TabularMDP& mdp, const QTable* q) {
  mdp.validate();
  LipschitzReport r;
  r.L_R = lipschitz_seminorm(mdp, Eigen::Map<const Vec>(mdp.reward.data(), mdp.n_pairs()));
  const Mat ground = state_metric(mdp);
  const int n = mdp.n_pairs();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double d = mdp.metric[static_cast<std::size_t>(i) * n + j];
      const double w = w1_discrete(row(mdp, i / mdp.n_actions, i % mdp.n_actions),
                                   row(mdp, j / mdp.n_actions, j % mdp.n_actions), ground);
      r.L_T = std::max(r.L_T, w / d);
    }
  }
  if (q != nullptr) r.Q_lip = lipschitz_seminorm(mdp, q->q);
  return r;
}

double parametric_transition_lipschitz(const TabularMDP& m1, const TabularMDP& m2,
                                       const TabularPolicy& policy, double phi1, double phi2) {
  if (m1.n_states != m2.n_states || m1.n_actions != m2.n_actions) {
    throw InvalidArgument("MDPs do not share a state-action space");
  }
  const double dphi = std::abs(phi1 - phi2);
  if (dphi == 0.0) return 0.0;
  const Mat ground = policy_metric(m2, policy);
  double best = 0.0;
  for (int s = 0; s < m1.n_states; ++s) {
    for (int a = 0; a < m1.n_actions; ++a) {
      best = std::max(best, w1_discrete(row(m1, s, a), row(m2, s, a), ground));
    }
  }
  return best / dphi;
}

void to_json(nlohmann::json& j, const Certificate& c) {
  j = {{"check", c.check},
       {"inputs_digest", c.inputs_digest},
       {"lhs", c.lhs},
       {"rhs", c.rhs},
       {"holds", c.holds},
       {"skipped", c.skipped},
       {"details", c.details}};
  if (c.counterexample) j["counterexample"] = *c.counterexample;
}

namespace {

struct PairAnalysis {
  TabularMDP m;
  TabularMDP mt;
  QTable q;
  QTable qt;
  LipschitzReport lip_t;
  double lt_param = 0.0;
  double gap = 0.0;
  std::string digest;
};

PairAnalysis analyze_pair(const MdpFamily& family, const TabularPolicy& policy, double phi,
                          double phi_t) {
  PairAnalysis a{family(phi), family(phi_t), {}, {}, {}, 0.0, 0.0, {}};
  if (a.m.n_states != a.mt.n_states || a.m.n_actions != a.mt.n_actions ||
      a.m.metric != a.mt.metric) {
    throw InvalidArgument("MDP pair does not share its state-action space and metric");
  }
  a.q = exact_q(a.m, policy);
  a.qt = exact_q(a.mt, policy);
  a.lip_t = lipschitz_constants(a.mt, &a.qt);
  a.lt_param = parametric_transition_lipschitz(a.m, a.mt, policy, phi, phi_t);
  a.gap = (a.q.q - a.qt.q).cwiseAbs().maxCoeff();
  Digest d;
  d.add(a.m);
  d.add(a.mt);
  d.add(policy);
  d.add(phi);
  d.add(phi_t);
  a.digest = d.str();
  return a;
}

nlohmann::json pair_details(const PairAnalysis& a, double phi, double phi_t) {
  return {{"phi", phi},
          {"phi_t", phi_t},
          {"gap", a.gap},
          {"gamma", a.mt.gamma},
          {"L_R", a.lip_t.L_R},
          {"L_T_parametric", a.lt_param},
          {"L_T_state_action", a.lip_t.L_T},
          {"Q_lip", a.lip_t.Q_lip}};
}

void finish(Certificate& c, const nlohmann::json& inputs) {
  if (!c.holds) c.counterexample = inputs;
}

}  // namespace

Certificate check_critic_gap(const MdpFamily& family, const TabularPolicy& policy, double phi,
                             double phi_t) {
  const auto a = analyze_pair(family, policy, phi, phi_t);
  const double g = a.mt.gamma;
  const double dphi = std::abs(phi_t - phi);
  Certificate c;
  c.check = "critic_gap";
  c.inputs_digest = a.digest;
  c.lhs = a.gap;
  c.rhs = g * (a.lip_t.L_R + a.lt_param * a.lip_t.Q_lip) / (1.0 + g) * dphi;
  c.holds = c.lhs >= c.rhs - kCertificateTolerance;
  c.details = pair_details(a, phi, phi_t);
  c.details["rhs_state_action"] = g * (a.lip_t.L_R + a.lip_t.L_T * a.lip_t.Q_lip) / (1.0 + g) * dphi;
  const Vec residual = bellman_apply(a.m, policy, a.qt.q) - a.qt.q;
  const double residual_bound = residual.cwiseAbs().maxCoeff() / (1.0 + g);
  c.details["residual_lower_bound"] = residual_bound;
  c.details["residual_bound_holds"] = a.gap >= residual_bound - kCertificateTolerance;
  finish(c, {{"phi", phi}, {"phi_t", phi_t}, {"policy", policy}, {"gap", a.gap}, {"bound", c.rhs},
             {"Q_phi", vec_json(a.q.q)}, {"Q_phi_t", vec_json(a.qt.q)}});
  return c;
}

Certificate check_value_error_bound(const MdpFamily& family, const TabularPolicy& policy,
                                    double phi, double phi_t) {
  const auto a = analyze_pair(family, policy, phi, phi_t);
  const double g = a.mt.gamma;
  const double dphi = std::abs(phi_t - phi);
  Certificate c;
  c.check = "value_error_bound";
  c.inputs_digest = a.digest;
  c.lhs = a.gap;
  c.rhs = g / (1.0 - g) * (a.lip_t.L_R + a.lt_param * a.lip_t.Q_lip) * dphi;
  c.holds = c.lhs <= c.rhs + kCertificateTolerance;
  c.details = pair_details(a, phi, phi_t);
  c.details["rhs_state_action"] = g / (1.0 - g) * (a.lip_t.L_R + a.lip_t.L_T * a.lip_t.Q_lip) * dphi;
  finish(c, {{"phi", phi}, {"phi_t", phi_t}, {"policy", policy}, {"gap", a.gap}, {"bound", c.rhs}});
  return c;
}

Certificate check_operator_perturbation(const MdpFamily& family, const TabularPolicy& policy,
                                        double phi1, double phi2, const Vec& q) {
  const TabularMDP m1 = family(phi1);
  const TabularMDP m2 = family(phi2);
  if (q.size() != m1.n_pairs()) throw InvalidArgument("Q table size does not match the MDP");
  const Vec t1 = bellman_apply(m1, policy, q);
  const Vec t2 = bellman_apply(m2, policy, q);
  const double g = m2.gamma;
  const double lr = lipschitz_seminorm(m2, Eigen::Map<const Vec>(m2.reward.data(), m2.n_pairs()));
  const double qlip = lipschitz_seminorm(m2, q);
  const double lt = parametric_transition_lipschitz(m1, m2, policy, phi1, phi2);
  Certificate c;
  c.check = "operator_perturbation";
  Digest d;
  d.add(m1);
  d.add(m2);
  d.add(policy);
  d.add(q);
  c.inputs_digest = d.str();
  c.lhs = (t1 - t2).cwiseAbs().maxCoeff();
  c.rhs = g * (lr + lt * qlip) * std::abs(phi1 - phi2);
  c.holds = c.lhs <= c.rhs + kCertificateTolerance;
  const double lt_sa = lipschitz_constants(m2).L_T;
  c.details = {{"phi1", phi1}, {"phi2", phi2}, {"gamma", g}, {"L_R", lr}, {"L_T_parametric", lt},
               {"L_T_state_action", lt_sa}, {"Q_lip", qlip},
               {"rhs_state_action", g * (lr + lt_sa * qlip) * std::abs(phi1 - phi2)}};
  finish(c, {{"phi1", phi1}, {"phi2", phi2}, {"policy", policy}, {"Q", vec_json(q)}});
  return c;
}

Vec weighted_bellman_apply(const MdpFamily& family, std::span<const TaggedSample> samples,
                           std::span<const double> weights, const Vec& q,
                           const TabularPolicy& policy) {
  if (samples.size() != weights.size()) {
    throw InvalidArgument("weighted_bellman_apply: one weight per sample required");
  }
  if (samples.empty()) throw InvalidArgument("weighted_bellman_apply: no samples");
  std::map<double, TabularMDP> cache;
  auto mdp_at = [&](double phi) -> const TabularMDP& {
    auto it = cache.find(phi);
    if (it == cache.end()) it = cache.emplace(phi, family(phi)).first;
    return it->second;
  };
  const TabularMDP& first = mdp_at(samples.front().phi);
  const int na = first.n_actions;
  const int ns = first.n_states;
  if (q.size() != first.n_pairs()) throw InvalidArgument("weighted_bellman_apply: Q size mismatch");
  if (!policy.empty()) check_policy(first, policy);
  Vec next_v(ns);
  for (int s = 0; s < ns; ++s) {
    next_v[s] = policy.empty() ? q.segment(s * na, na).maxCoeff()
                               : q[s * na + policy[static_cast<std::size_t>(s)]];
  }
  Vec num = Vec::Zero(first.n_pairs());
  Vec den = Vec::Zero(first.n_pairs());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& smp = samples[i];
    if (!(weights[i] > 0)) throw InvalidArgument("weighted_bellman_apply: weights must be positive");
    if (smp.s < 0 || smp.s >= ns || smp.a < 0 || smp.a >= na) {
      throw InvalidArgument("weighted_bellman_apply: sample outside the state-action space");
    }
    const TabularMDP& m = mdp_at(smp.phi);
    double ev = 0.0;
    for (int s2 = 0; s2 < ns; ++s2) ev += m.T(smp.s, smp.a, s2) * next_v[s2];
    const int sa = smp.s * na + smp.a;
    num[sa] += weights[i] * (m.R(smp.s, smp.a) + m.gamma * ev);
    den[sa] += weights[i];
  }
  for (int sa = 0; sa < first.n_pairs(); ++sa) {
    if (den[sa] == 0.0) {
      throw InvalidArgument("weighted_bellman_apply: no sample covers state " +
                            std::to_string(sa / na) + " action " + std::to_string(sa % na));
    }
  }
  return num.cwiseQuotient(den);
}

Certificate check_bias_reduction(std::span<const double> phi, std::span<const double> sigma2,
                                 std::span<const Role> roles, double phi_t) {
  const auto n = phi.size();
  if (n < 2 || sigma2.size() != n || roles.size() != n) {
    throw InvalidArgument("check_bias_reduction: need >= 2 samples with one sigma2 and role each");
  }
  std::vector<double> dist(n);
  std::vector<double> w(n);
  Digest dg;
  for (std::size_t i = 0; i < n; ++i) {
    dist[i] = std::abs(phi[i] - phi_t);
    w[i] = sample_weight(sigma2[i], roles[i]);
    dg.add(phi[i]);
    dg.add(sigma2[i]);
    dg.add(static_cast<double>(static_cast<int>(roles[i])));
  }
  dg.add(phi_t);
  const double nn = static_cast<double>(n);
  double ms = 0.0, md = 0.0, mw = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ms += sigma2[i];
    md += dist[i];
    mw += w[i];
  }
  ms /= nn;
  md /= nn;
  mw /= nn;
  double cov_sd = 0.0, cov_wd = 0.0, wd = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cov_sd += (sigma2[i] - ms) * (dist[i] - md);
    cov_wd += (w[i] - mw) * (dist[i] - md);
    wd += w[i] * dist[i];
  }
  cov_sd /= nn;
  cov_wd /= nn;
  const double weighted = wd / (mw * nn);

  Certificate c;
  c.check = "bias_reduction";
  c.inputs_digest = dg.str();
  c.lhs = weighted;
  c.rhs = md - cov_sd / mw;
  c.details = {{"rho_hat", cov_sd},
               {"weighted_mean_distance", weighted},
               {"uniform_mean_distance", md},
               {"mean_weight", mw},
               {"cov_weight_distance", cov_wd},
               {"identity_rhs", md + cov_wd / mw}};
  if (!(cov_sd > 0)) {
    c.skipped = true;
    c.holds = true;
    c.details["status"] = "assumption unmet";
    return c;
  }
  c.holds = c.lhs <= c.rhs + kCertificateTolerance;
  if (!c.holds) {
    c.counterexample = {{"phi", std::vector<double>(phi.begin(), phi.end())},
                        {"sigma2", std::vector<double>(sigma2.begin(), sigma2.end())},
                        {"phi_t", phi_t}};
  }
  return c;
}

FittedQResult weighted_fitted_q(const MdpFamily& family, std::span<const TaggedSample> samples,
                                std::span<const double> weights, int k, const TabularMDP& target) {
  if (k < 0) throw InvalidArgument("weighted_fitted_q: K must be >= 0");
  FittedQResult out;
  out.q.n_states = target.n_states;
  out.q.n_actions = target.n_actions;
  out.q.gamma = target.gamma;
  out.q.q = Vec::Zero(target.n_pairs());
  for (int it = 0; it < k; ++it) {
    out.q.q = weighted_bellman_apply(family, samples, weights, out.q.q, {});
  }
  out.policy = greedy_policy(out.q);
  const QTable star = optimal_q(target);
  const QTable achieved = exact_q(target, out.policy);
  const Vec v_star = star.q.reshaped(target.n_actions, target.n_states).colwise().maxCoeff().transpose();
  out.suboptimality = (v_star - state_values(achieved, out.policy)).maxCoeff();
  return out;
}

MdpFamily random_mixture_family(int n_states, int n_actions, double gamma, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::gamma_distribution<double> dir(1.0, 1.0);
  TabularMDP base;
  base.n_states = n_states;
  base.n_actions = n_actions;
  base.gamma = gamma;
  const int nsa = base.n_pairs();
  base.reward.resize(static_cast<std::size_t>(nsa));
  for (auto& r : base.reward) r = u(rng);
  base.metric.resize(static_cast<std::size_t>(nsa) * nsa);
  for (int i = 0; i < nsa; ++i) {
    for (int j = 0; j < nsa; ++j) {
      base.metric[static_cast<std::size_t>(i) * nsa + j] =
          std::abs(i / n_actions - j / n_actions) + (i % n_actions != j % n_actions ? 1.0 : 0.0);
    }
  }
  base.absorbing.assign(static_cast<std::size_t>(n_states), false);
  auto draw_kernel = [&]() {
    std::vector<double> t(static_cast<std::size_t>(nsa) * n_states);
    for (int sa = 0; sa < nsa; ++sa) {
      double sum = 0.0;
      for (int s2 = 0; s2 < n_states; ++s2) sum += t[static_cast<std::size_t>(sa) * n_states + s2] = dir(rng);
      for (int s2 = 0; s2 < n_states; ++s2) t[static_cast<std::size_t>(sa) * n_states + s2] /= sum;
    }
    return t;
  };
  const auto p0 = draw_kernel();
  const auto p1 = draw_kernel();
  return [base, p0, p1](double phi) {
    if (!(phi >= 0 && phi <= 1)) throw InvalidArgument("mixture parameter must lie in [0,1]");
    TabularMDP m = base;
    m.transition.resize(p0.size());
    for (std::size_t i = 0; i < p0.size(); ++i) m.transition[i] = (1.0 - phi) * p0[i] + phi * p1[i];
    return m;
  };
}

TabularMDP build_cliffgrid(int width, int height, double slip_prob, double gamma) {
  if (width < 3 || height < 2) throw InvalidArgument("build_cliffgrid: grid must be at least 3x2");
  TabularMDP m = build_slipgrid(width, height, slip_prob, gamma);
  const int goal = width - 1;
  std::fill(m.reward.begin(), m.reward.end(), 0.0);
  std::fill(m.absorbing.begin(), m.absorbing.end(), false);
  for (int x = 1; x < width; ++x) {
    const int s = x;
    m.absorbing[static_cast<std::size_t>(s)] = true;
    for (int a = 0; a < m.n_actions; ++a) {
      for (int s2 = 0; s2 < m.n_states; ++s2) m.T(s, a, s2) = s2 == s ? 1.0 : 0.0;
      m.R(s, a) = s == goal ? 1.0 : -1.0;
    }
  }
  // the slipgrid goal corner is an ordinary cell here
  const int corner = m.n_states - 1;
  const int cx = corner % width;
  const int cy = corner / width;
  const std::array<std::array<int, 2>, 4> dirs = {{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
  auto move = [&](int x, int y, std::array<int, 2> d) {
    const int nx = x + d[0];
    const int ny = y + d[1];
    if (nx < 0 || nx >= width || ny < 0 || ny >= height) return y * width + x;
    return ny * width + nx;
  };
  for (int a = 0; a < 4; ++a) {
    for (int s2 = 0; s2 < m.n_states; ++s2) m.T(corner, a, s2) = 0.0;
    const auto d = dirs[static_cast<std::size_t>(a)];
    m.T(corner, a, move(cx, cy, d)) += 1.0 - slip_prob;
    m.T(corner, a, move(cx, cy, {d[1], d[0]})) += 0.5 * slip_prob;
    m.T(corner, a, move(cx, cy, {-d[1], -d[0]})) += 0.5 * slip_prob;
  }
  m.absorbing[static_cast<std::size_t>(corner)] = false;
  return m;
}

FittedQScenario bundled_fitted_q_scenario() {
  FittedQScenario sc;
  constexpr int kWidth = 5;
  constexpr int kHeight = 3;
  constexpr double kGamma = 0.9;
  sc.family = [](double slip) { return build_cliffgrid(kWidth, kHeight, slip, kGamma); };
  sc.phi_t = 0.4;
  // Nominal slip dominates the data; the randomized stages add fewer, farther samples.
  const std::vector<std::pair<double, int>> stages = {{0.0, 4}, {0.1, 2}, {0.2, 1}, {0.3, 1}, {0.4, 1}};
  const int ns = kWidth * kHeight;
  for (const auto& [slip, copies] : stages) {
    for (int c = 0; c < copies; ++c) {
      for (int s = 0; s < ns; ++s) {
        for (int a = 0; a < 4; ++a) {
          sc.samples.push_back({s, a, slip});
          sc.sigma2.push_back(0.5 * slip + 1e-3);
        }
      }
    }
  }
  return sc;
}

}  // namespace uarl

namespace uarl {

std::vector<Certificate> check_fitted_q(int k) {
  const auto sc = bundled_fitted_q_scenario();
  const TabularMDP target = sc.family(sc.phi_t);
  std::vector<double> weighted(sc.sigma2.size());
  for (std::size_t i = 0; i < weighted.size(); ++i) weighted[i] = sample_weight(sc.sigma2[i], Role::nominal);
  const std::vector<double> uniform(sc.samples.size(), 1.0);
  const auto rw = weighted_fitted_q(sc.family, sc.samples, weighted, k, target);
  const auto ru = weighted_fitted_q(sc.family, sc.samples, uniform, k, target);

  double md = 0.0, ms = 0.0;
  for (std::size_t i = 0; i < sc.samples.size(); ++i) {
    md += std::abs(sc.samples[i].phi - sc.phi_t);
    ms += sc.sigma2[i];
  }
  md /= static_cast<double>(sc.samples.size());
  ms /= static_cast<double>(sc.samples.size());
  double rho = 0.0;
  for (std::size_t i = 0; i < sc.samples.size(); ++i) {
    rho += (sc.sigma2[i] - ms) * (std::abs(sc.samples[i].phi - sc.phi_t) - md);
  }
  rho /= static_cast<double>(sc.samples.size());

  Certificate cmp;
  cmp.check = "fitted_q_weighted_vs_uniform";
  cmp.inputs_digest = "bundled_cliff_scenario";
  cmp.lhs = rw.suboptimality;
  cmp.rhs = ru.suboptimality;
  cmp.holds = cmp.lhs <= cmp.rhs + kCertificateTolerance;
  cmp.details = {{"K", k}, {"phi_t", sc.phi_t}, {"rho_hat", rho},
                 {"weighted_policy", rw.policy}, {"uniform_policy", ru.policy}};
  if (!cmp.holds) cmp.counterexample = cmp.details;

  std::vector<TaggedSample> own;
  for (int s = 0; s < target.n_states; ++s) {
    for (int a = 0; a < target.n_actions; ++a) own.push_back({s, a, sc.phi_t});
  }
  const std::vector<double> ones(own.size(), 1.0);
  const auto ro = weighted_fitted_q(sc.family, own, ones, k, target);
  Certificate self;
  self.check = "fitted_q_own_data";
  self.inputs_digest = "bundled_cliff_scenario";
  self.lhs = ro.suboptimality;
  self.rhs = 1e-8;
  self.holds = self.lhs < self.rhs;
  self.details = {{"K", k}, {"phi_t", sc.phi_t}};
  if (!self.holds) self.counterexample = self.details;
  return {cmp, self};
}

BiasConstruction random_bias_construction(Rng& rng, int n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  BiasConstruction b;
  b.phi_t = u(rng);
  const double boundary = 0.3 + 0.4 * u(rng);
  const double slope = 0.5 + 1.5 * u(rng);
  for (int i = 0; i < n; ++i) {
    const double phi = u(rng);
    b.phi.push_back(phi);
    b.roles.push_back(phi <= boundary ? Role::nominal : Role::repulsive);
    b.sigma2.push_back(0.05 + slope * std::abs(phi - b.phi_t) + 0.05 * u(rng));
  }
  return b;
}

std::vector<Certificate> run_certificate_sweep(std::string_view check, int trials, std::uint64_t seed) {
  if (trials < 1) throw InvalidArgument("certificate sweep needs at least one trial");
  std::vector<Certificate> out;
  if (check == "fitted_q") return check_fitted_q();
  if (std::find(kCertificateChecks.begin(), kCertificateChecks.end(), check) == kCertificateChecks.end()) {
    throw InvalidArgument("unknown certificate check '" + std::string(check) + "'");
  }
  std::vector<Certificate> results(static_cast<std::size_t>(trials));
#pragma omp parallel for schedule(dynamic)
  for (int t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, stream::kCurriculum, static_cast<std::uint64_t>(t)));
    auto& slot = results[static_cast<std::size_t>(t)];
    if (check == "bias_reduction") {
      const auto b = random_bias_construction(rng);
      slot = check_bias_reduction(b.phi, b.sigma2, b.roles, b.phi_t);
      continue;
    }
    constexpr int kStates = 4;
    constexpr int kActions = 2;
    const auto family = random_mixture_family(kStates, kActions, 0.9, rng);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> act(0, kActions - 1);
    const double phi = u(rng);
    const double phi_t = u(rng);
    TabularPolicy policy(kStates);
    for (auto& a : policy) a = act(rng);
    if (check == "critic_gap") {
      slot = check_critic_gap(family, policy, phi, phi_t);
    } else if (check == "value_error_bound") {
      slot = check_value_error_bound(family, policy, phi, phi_t);
    } else {
      std::uniform_real_distribution<double> qv(-5.0, 5.0);
      Vec q(kStates * kActions);
      for (auto& x : q) x = qv(rng);
      slot = check_operator_perturbation(family, policy, phi, phi_t, q);
    }
  }
  return results;
}

}  // namespace uarl
