#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uarl/data.hpp"
#include "uarl/envs.hpp"
#include "uarl/nn.hpp"

namespace uarl {

using TabularPolicy = std::vector<int>;  // action per state

struct QTable {
  int n_states = 0;
  int n_actions = 0;
  double gamma = 0.0;
  Vec q;  // index s * n_actions + a
  std::string mdp_id;
  std::string policy_id;

  double operator()(int s, int a) const { return q[s * n_actions + a]; }
};

/// Fixed point of the policy-evaluation operator by value iteration to a sup-norm
/// change below 1e-12.
QTable exact_q(const TabularMDP& mdp, const TabularPolicy& policy, bool parallel = true);

/// Fixed point of the optimality operator.
QTable optimal_q(const TabularMDP& mdp, bool parallel = true);

/// V(s) = Q(s, policy(s)).
Vec state_values(const QTable& q, const TabularPolicy& policy);
TabularPolicy greedy_policy(const QTable& q);

/// (T^pi Q)(s,a) = R(s,a) + gamma * sum_s' T(s'|s,a) Q(s', pi(s')).
Vec bellman_apply(const TabularMDP& mdp, const TabularPolicy& policy, const Vec& q);

/// Exact 1-Wasserstein distance between two distributions on the same finite support,
/// by min-cost flow on the transport graph.
double w1_discrete(std::span<const double> p, std::span<const double> q, const Mat& ground);

struct LipschitzReport {
  double L_R = 0.0;
  double L_T = 0.0;    // transition kernel across state-action pairs of one MDP
  double Q_lip = 0.0;  // zero unless a Q table was given
};

/// Exact maxima of the difference quotients over all distinct state-action pairs.
LipschitzReport lipschitz_constants(const TabularMDP& mdp, const QTable* q = nullptr);

/// Lipschitz seminorm of a table of values over state-action pairs.
double lipschitz_seminorm(const TabularMDP& mdp, const Vec& values);

/// max over (s,a) of W1(T_1(.|s,a), T_2(.|s,a)) / |phi_1 - phi_2|, with next states
/// compared through d((s1, pi(s1)), (s2, pi(s2))). Zero when phi_1 == phi_2.
double parametric_transition_lipschitz(const TabularMDP& m1, const TabularMDP& m2,
                                       const TabularPolicy& policy, double phi1, double phi2);

using MdpFamily = std::function<TabularMDP(double phi)>;

struct Certificate {
  std::string check;
  std::string inputs_digest;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = true;
  bool skipped = false;  // the check's precondition was unmet
  nlohmann::json details = nlohmann::json::object();
  std::optional<nlohmann::json> counterexample;
};

void to_json(nlohmann::json& j, const Certificate& c);

inline constexpr double kCertificateTolerance = 1e-10;

/// gap = |Q_phi_t - Q_phi|_inf against gamma (L_R + L_T |Q_phi_t|_Lip) / (1 + gamma) |phi_t - phi|.
/// Holds iff gap >= rhs. Also records the bound with the state-action L_T and the
/// residual bound |T_phi Q_phi_t - Q_phi_t|_inf / (1 + gamma).
Certificate check_critic_gap(const MdpFamily& family, const TabularPolicy& policy, double phi,
                             double phi_t);

/// gap <= gamma / (1 - gamma) (L_R + L_T |Q_phi_t|_Lip) |phi - phi_t|.
Certificate check_value_error_bound(const MdpFamily& family, const TabularPolicy& policy,
                                    double phi, double phi_t);

/// |T_phi1 Q - T_phi2 Q|_inf <= gamma (L_R + L_T |Q|_Lip) |phi1 - phi2|.
Certificate check_operator_perturbation(const MdpFamily& family, const TabularPolicy& policy,
                                        double phi1, double phi2, const Vec& q);

struct TaggedSample {
  int s = 0;
  int a = 0;
  double phi = 0.0;
};

/// Weight-normalized average over the samples at each (s,a) of
/// R(s,a) + gamma E_{s' ~ T_phi_i(.|s,a)} Q(s', pi(s')). An empty policy uses max_a' Q(s',a').
/// Throws if any state-action pair has no sample.
Vec weighted_bellman_apply(const MdpFamily& family, std::span<const TaggedSample> samples,
                           std::span<const double> weights, const Vec& q,
                           const TabularPolicy& policy);

/// Weighted against uniform mean of |phi - phi_t|, with weights from the role rule.
/// Skipped when Cov(sigma^2, |phi - phi_t|) <= 0.
Certificate check_bias_reduction(std::span<const double> phi, std::span<const double> sigma2,
                                 std::span<const Role> roles, double phi_t);

struct FittedQResult {
  TabularPolicy policy;
  double suboptimality = 0.0;  // max_s V*(s) - V^policy(s) on the target MDP
  QTable q;
};

/// K rounds of weighted empirical optimality backups from Q = 0, then greedy.
FittedQResult weighted_fitted_q(const MdpFamily& family, std::span<const TaggedSample> samples,
                                std::span<const double> weights, int k, const TabularMDP& target);

/// Random transition family phi -> (1 - phi) P0 + phi P1 with shared rewards and
/// metric |s - s'| + [a != a'].
MdpFamily random_mixture_family(int n_states, int n_actions, double gamma, Rng& rng);

/// Grid with a cliff along the bottom edge between start and goal: slip pushes the
/// walker sideways, so the best route depends on the slip probability.
TabularMDP build_cliffgrid(int width, int height, double slip_prob, double gamma);

/// Mixed-slip samples with synthetic variances that grow with distance from the nominal
/// slip, and the far-end target slip.
struct FittedQScenario {
  MdpFamily family;
  std::vector<TaggedSample> samples;
  std::vector<double> sigma2;
  double phi_t = 0.0;
};

FittedQScenario bundled_fitted_q_scenario();

/// Suboptimality of the sigma^2-weighted and uniform variants on the bundled scenario,
/// plus own-data convergence at the target slip. Two certificates.
std::vector<Certificate> check_fitted_q(int k = 200);

/// Random datasets over D and D' with variances increasing in |phi - phi_t|.
struct BiasConstruction {
  std::vector<double> phi;
  std::vector<double> sigma2;
  std::vector<Role> roles;
  double phi_t = 0.0;
};

BiasConstruction random_bias_construction(Rng& rng, int n = 200);

inline constexpr std::array<std::string_view, 5> kCertificateChecks = {
    "critic_gap", "value_error_bound", "operator_perturbation", "bias_reduction", "fitted_q"};

/// `trials` randomized instances of one check (fitted_q ignores `trials`).
std::vector<Certificate> run_certificate_sweep(std::string_view check, int trials, std::uint64_t seed);

}  // namespace uarl
