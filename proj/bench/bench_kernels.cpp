// Parallel kernels against their serial references.

#include <benchmark/benchmark.h>

#include "uarl/agent.hpp"
#include "uarl/data.hpp"
#include "uarl/ensemble.hpp"
#include "uarl/kernels.hpp"
#include "uarl/oracle.hpp"

namespace {

struct Inputs {
  uarl::CriticEnsemble ensemble;
  Eigen::MatrixXd s;
  Eigen::MatrixXd a;
};

const Inputs& inputs() {
  static const Inputs in = [] {
    Inputs x;
    x.ensemble = uarl::init_ensemble(4, 4, 2, 11);
    uarl::Rng rng(5);
    std::normal_distribution<double> g;
    x.s = Eigen::MatrixXd::NullaryExpr(4, 20000, [&] { return g(rng); });
    x.a = Eigen::MatrixXd::NullaryExpr(2, 20000, [&] { return std::tanh(g(rng)); });
    return x;
  }();
  return in;
}

void BM_EnsembleVariance(benchmark::State& state) {
  const auto& in = inputs();
  for (auto _ : state) benchmark::DoNotOptimize(uarl::kernels::ensemble_variance(in.ensemble, in.s, in.a));
  state.SetItemsProcessed(state.iterations() * in.s.cols());
}
BENCHMARK(BM_EnsembleVariance)->Unit(benchmark::kMillisecond);

void BM_EnsembleVarianceReference(benchmark::State& state) {
  const auto& in = inputs();
  for (auto _ : state) {
    benchmark::DoNotOptimize(uarl::kernels::reference::ensemble_variance(in.ensemble, in.s, in.a));
  }
  state.SetItemsProcessed(state.iterations() * in.s.cols());
}
BENCHMARK(BM_EnsembleVarianceReference)->Unit(benchmark::kMillisecond);

void BM_ColumnVariance(benchmark::State& state) {
  uarl::Rng rng(3);
  std::normal_distribution<double> g;
  const Eigen::MatrixXd p = Eigen::MatrixXd::NullaryExpr(8, 100000, [&] { return g(rng); });
  for (auto _ : state) {
    if (state.range(0) == 0) {
      benchmark::DoNotOptimize(uarl::kernels::column_variance(p));
    } else {
      benchmark::DoNotOptimize(uarl::kernels::reference::column_variance(p));
    }
  }
}
BENCHMARK(BM_ColumnVariance)->Arg(0)->Arg(1)->ArgNames({"reference"});

void BM_BellmanBackup(benchmark::State& state) {
  const auto mdp = uarl::build_slipgrid(8, 8, 0.2, 0.95);
  const uarl::TabularPolicy pi(static_cast<std::size_t>(mdp.n_states), 0);
  const Eigen::VectorXd q = Eigen::VectorXd::LinSpaced(mdp.n_pairs(), -1.0, 1.0);
  Eigen::VectorXd out;
  for (auto _ : state) {
    if (state.range(0) == 0) {
      uarl::kernels::bellman_backup(mdp, pi, q, out);
    } else {
      uarl::kernels::reference::bellman_backup(mdp, pi, q, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_BellmanBackup)->Arg(0)->Arg(1)->ArgNames({"reference"});

void BM_OptimalityBackup(benchmark::State& state) {
  const auto mdp = uarl::build_slipgrid(8, 8, 0.2, 0.95);
  const Eigen::VectorXd q = Eigen::VectorXd::LinSpaced(mdp.n_pairs(), -1.0, 1.0);
  Eigen::VectorXd out;
  for (auto _ : state) {
    if (state.range(0) == 0) {
      uarl::kernels::optimality_backup(mdp, q, out);
    } else {
      uarl::kernels::reference::optimality_backup(mdp, q, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_OptimalityBackup)->Arg(0)->Arg(1)->ArgNames({"reference"});

void BM_CollectRollouts(benchmark::State& state) {
  const auto spec = uarl::EnvSpec::point_mass();
  const auto range = uarl::ParamRange::around(spec.nominal_params, uarl::Param::mass_mult);
  const auto policy = uarl::scripted_behavior_policy(spec);
  for (auto _ : state) {
    benchmark::DoNotOptimize(uarl::collect_rollouts(spec, range, *policy, 50, 1, uarl::Role::nominal,
                                                    {.parallel = state.range(0) == 0}));
  }
}
BENCHMARK(BM_CollectRollouts)->Arg(0)->Arg(1)->ArgNames({"reference"})->Unit(benchmark::kMillisecond);

void BM_CriticStep(benchmark::State& state) {
  const auto spec = uarl::EnvSpec::point_mass();
  const auto range = uarl::ParamRange::around(spec.nominal_params, uarl::Param::mass_mult);
  const auto policy = uarl::scripted_behavior_policy(spec);
  const auto data = uarl::collect_rollouts(spec, range, *policy, 10, 1, uarl::Role::nominal);
  uarl::TrainConfig cfg;
  cfg.parallel = state.range(0) == 0;
  auto models = uarl::init_models(data, spec, cfg);
  std::vector<std::size_t> idx(256);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i * 7 % data.size();
  const auto batch = uarl::make_batch(data, idx);
  auto rep = batch;
  rep.role = uarl::Role::repulsive;
  uarl::Rng r1(1), r2(2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(uarl::update_critics(models.ensemble, *models.actor, batch, &rep, cfg, 0.1, r1, r2));
  }
}
BENCHMARK(BM_CriticStep)->Arg(0)->Arg(1)->ArgNames({"reference"})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
