#include "uarl/gate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include <boost/math/distributions/normal.hpp>

#include "uarl/error.hpp"
#include "uarl/kernels.hpp"
#include "uarl/log.hpp"

namespace uarl {

std::string_view to_string(ThresholdMode m) {
  return m == ThresholdMode::percentile ? "percentile" : "gaussian";
}

ThresholdMode threshold_mode_from_string(std::string_view name) {
  if (name == "percentile") return ThresholdMode::percentile;
  if (name == "gaussian") return ThresholdMode::gaussian;
  throw InvalidArgument("unknown threshold mode '" + std::string(name) + "'");
}

std::string_view to_string(Decision d) { return d == Decision::deploy ? "deploy" : "continue"; }

void GateConfig::validate() const {
  if (!(percentile > 0 && percentile <= 100)) {
    throw InvalidArgument("gate.percentile: must lie in (0,100]");
  }
  if (!(alpha > 0 && alpha < 1)) throw InvalidArgument("gate.alpha: must lie in (0,1)");
  if (!(tau_kl >= 0)) throw InvalidArgument("gate.tau_kl: must be >= 0");
  if (id_episodes < 20) throw InvalidArgument("gate.id_episodes: must be >= 20");
}

void to_json(nlohmann::json& j, const GateConfig& c) {
  j = {{"percentile", c.percentile},
       {"alpha", c.alpha},
       {"mode", to_string(c.mode)},
       {"tau_kl", c.tau_kl},
       {"id_episodes", c.id_episodes}};
}

void from_json(const nlohmann::json& j, GateConfig& c) {
  static const std::set<std::string> known = {"percentile", "alpha", "mode", "tau_kl",
                                              "id_episodes"};
  if (!j.is_object()) throw InvalidArgument("gate: expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw InvalidArgument("gate." + key + ": unknown field");
  }
  c = GateConfig{};
  try {
    if (j.contains("percentile")) j.at("percentile").get_to(c.percentile);
    if (j.contains("alpha")) j.at("alpha").get_to(c.alpha);
    if (j.contains("mode")) c.mode = threshold_mode_from_string(j.at("mode").get<std::string>());
    if (j.contains("tau_kl")) j.at("tau_kl").get_to(c.tau_kl);
    if (j.contains("id_episodes")) j.at("id_episodes").get_to(c.id_episodes);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("gate: wrong field type: ") + e.what());
  }
}

void to_json(nlohmann::json& j, const GateReport& r) {
  std::vector<double> means;
  means.reserve(r.traces.size());
  for (const auto& t : r.traces) {
    double s = 0.0;
    for (double v : t) s += v;
    means.push_back(t.empty() ? 0.0 : s / static_cast<double>(t.size()));
  }
  j = {{"sigma2_mean", r.sigma2_mean},
       {"tau", r.tau},
       {"decision", to_string(r.decision)},
       {"mode", to_string(r.mode)},
       {"id_variances", r.id_variances},
       {"episode_means", means}};
}

Vec variance_trace(const CriticEnsemble& ensemble, const Dataset& dataset) {
  if (dataset.empty()) throw InvalidArgument("variance_trace: empty dataset");
  const Batch b = full_batch(dataset);
  return kernels::ensemble_variance(ensemble, b.s, b.a);
}

std::vector<double> episode_mean_variances(const CriticEnsemble& ensemble, const Dataset& dataset) {
  const Vec trace = variance_trace(ensemble, dataset);
  std::vector<double> out;
  out.reserve(dataset.episodes().size());
  Eigen::Index pos = 0;
  for (const auto& ep : dataset.episodes()) {
    const auto len = static_cast<Eigen::Index>(ep.size());
    out.push_back(trace.segment(pos, len).mean());
    pos += len;
  }
  return out;
}

double threshold_percentile(std::span<const double> id_variances, double percentile) {
  if (id_variances.size() < 20) {
    throw InvalidArgument("threshold_percentile: need at least 20 ID variance samples, got " +
                          std::to_string(id_variances.size()));
  }
  if (!(percentile > 0 && percentile <= 100)) {
    throw InvalidArgument("threshold_percentile: percentile must lie in (0,100]");
  }
  std::vector<double> x(id_variances.begin(), id_variances.end());
  std::sort(x.begin(), x.end());
  const double h = (static_cast<double>(x.size()) - 1.0) * percentile / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= x.size()) return x.back();
  return x[lo] + (h - static_cast<double>(lo)) * (x[lo + 1] - x[lo]);
}

double threshold_gaussian(double sigma_in2, int n, double alpha) {
  if (!(sigma_in2 > 0)) throw InvalidArgument("threshold_gaussian: sigma_in2 must be > 0");
  if (n < 2) throw InvalidArgument("threshold_gaussian: n must be >= 2");
  if (!(alpha > 0 && alpha < 1)) throw InvalidArgument("threshold_gaussian: alpha must lie in (0,1)");
  const boost::math::normal_distribution<double> standard;
  const double z = boost::math::quantile(standard, 1.0 - alpha);
  return sigma_in2 + z * std::sqrt(sigma_in2) / std::sqrt(static_cast<double>(n));
}

double gate_threshold(std::span<const double> id_variances, int ensemble_size,
                      const GateConfig& config) {
  if (config.mode == ThresholdMode::percentile) {
    return threshold_percentile(id_variances, config.percentile);
  }
  if (id_variances.empty()) throw InvalidArgument("gate_threshold: no ID variances");
  double mean = 0.0;
  for (double v : id_variances) mean += v;
  mean /= static_cast<double>(id_variances.size());
  return threshold_gaussian(mean, ensemble_size, config.alpha);
}

GateReport gate_decision(const CriticEnsemble& ensemble, const Dataset& target_proxy,
                         const GateConfig& config, std::span<const double> id_variances) {
  if (target_proxy.empty()) throw InvalidArgument("gate_decision: empty target-proxy dataset");
  GateReport r;
  r.mode = config.mode;
  r.id_variances.assign(id_variances.begin(), id_variances.end());
  r.tau = gate_threshold(id_variances, ensemble.size(), config);
  const Vec trace = variance_trace(ensemble, target_proxy);
  r.sigma2_mean = trace.mean();
  Eigen::Index pos = 0;
  for (const auto& ep : target_proxy.episodes()) {
    r.traces.emplace_back(trace.data() + pos, trace.data() + pos + static_cast<Eigen::Index>(ep.size()));
    pos += static_cast<Eigen::Index>(ep.size());
  }
  r.decision = r.sigma2_mean <= r.tau ? Decision::deploy : Decision::proceed;
  return r;
}

void write_trace_csv(const GateReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.precision(17);
  out << "episode,t,sigma2\n";
  for (std::size_t e = 0; e < report.traces.size(); ++e) {
    for (std::size_t t = 0; t < report.traces[e].size(); ++t) {
      out << e << ',' << t << ',' << report.traces[e][t] << '\n';
    }
  }
}

Coverage kl_coverage(std::span<const double> phi_samples, const Interval& range, double tau_kl) {
  constexpr int kBins = 16;
  if (phi_samples.size() < 50) {
    throw InvalidArgument("kl_coverage: need at least 50 parameter samples");
  }
  if (range.hi < range.lo) throw InvalidArgument("kl_coverage: inverted range");
  Coverage c;
  c.counts.assign(kBins, 0);
  const double width = range.hi - range.lo;
  for (double phi : phi_samples) {
    if (!range.contains(phi)) ++c.out_of_range;
    int bin = 0;
    if (width > 0) {
      bin = static_cast<int>(std::floor((phi - range.lo) / width * kBins));
      bin = std::clamp(bin, 0, kBins - 1);
    }
    ++c.counts[static_cast<std::size_t>(bin)];
  }
  if (c.out_of_range > 0) {
    log(LogLevel::warn, "kl_coverage: " + std::to_string(c.out_of_range) +
                            " samples outside the range counted in boundary bins");
  }
  if (width > 0) {
    const double n = static_cast<double>(phi_samples.size());
    for (int k : c.counts) {
      if (k == 0) continue;
      const double p = k / n;
      c.kl += p * std::log(p * kBins);
    }
  }
  c.covered = c.kl <= tau_kl;
  return c;
}

}  // namespace uarl
