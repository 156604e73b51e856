#pragma once

#include <vector>

#include "uarl/ensemble.hpp"
#include "uarl/envs.hpp"

/// Data-parallel kernels. Each has a serial reference in `kernels::reference`
/// that tests compare against and the benchmark target times.
namespace uarl::kernels {

/// Population variance of each column of an N x B prediction matrix.
Vec column_variance(const Mat& predictions);

/// sigma^2 of the ensemble at every (s, a) column, evaluated in parallel chunks.
Vec ensemble_variance(const CriticEnsemble& ensemble, const Mat& states, const Mat& actions,
                      Eigen::Index chunk = 2048);

/// One synchronous policy-evaluation backup:
/// out(s,a) = R(s,a) + gamma * sum_s' T(s'|s,a) q(s', policy(s')).
void bellman_backup(const TabularMDP& mdp, const std::vector<int>& policy, const Vec& q, Vec& out);

/// One synchronous optimality backup: out(s,a) = R + gamma * sum_s' T max_a' q(s', a').
void optimality_backup(const TabularMDP& mdp, const Vec& q, Vec& out);

namespace reference {

Vec column_variance(const Mat& predictions);
/// Per-transition predict() followed by mean_var().
Vec ensemble_variance(const CriticEnsemble& ensemble, const Mat& states, const Mat& actions);
void bellman_backup(const TabularMDP& mdp, const std::vector<int>& policy, const Vec& q, Vec& out);
void optimality_backup(const TabularMDP& mdp, const Vec& q, Vec& out);

}  // namespace reference

}  // namespace uarl::kernels
