#include "bps/config.hpp"

#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "bps/ingest.hpp"
#include "bps/parallel.hpp"

namespace bps::cli {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& field, const std::string& what) {
  throw std::invalid_argument("config field '" + field + "': " + what);
}

agents::Var parse_var(const std::string& name) {
  if (name == "y") return agents::Var::Y;
  if (name == "u") return agents::Var::U;
  if (name == "r") return agents::Var::R;
  config_error("agents.predictors", "unknown variable id '" + name + "' (expected y, u or r)");
}

std::vector<agents::AgentSpec> parse_agents(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "standard4") return agents::default_macro_agents();
    config_error("agents", "unknown preset '" + j.get<std::string>() + "'");
  }
  std::vector<agents::AgentSpec> specs;
  for (const auto& a : j) {
    std::vector<std::pair<agents::Var, int>> preds;
    for (const auto& p : a.at("predictors"))
      preds.emplace_back(parse_var(p.at(0).get<std::string>()), p.at(1).get<int>());
    const auto dim = static_cast<Eigen::Index>(preds.size()) + 1;
    const double m0 = a.value("m0_fill", 0.0);
    const double c0 = a.value("C0_scale", 1.0);
    specs.emplace_back(std::move(preds),
                       dlm::Momentsd(Eigen::VectorXd::Constant(dim, m0),
                                     c0 * Eigen::MatrixXd::Identity(dim, dim),
                                     a.value("n0", 2.0), a.value("s0", 0.01)),
                       dlm::DiscountConfigd(a.value("beta", 0.99), a.value("delta", 0.95)));
  }
  if (specs.empty()) config_error("agents", "no agents configured");
  return specs;
}

}  // namespace

void RunConfig::validate(Eigen::Index series_length) const {
  if (periods.learn1_end >= periods.learn2_end)
    config_error("periods.learn1_end", "must be < learn2_end");
  if (periods.learn2_end >= periods.eval_end)
    config_error("periods.learn2_end", "must be < eval_end");
  if (periods.eval_end > series_length)
    config_error("periods.eval_end", "exceeds the series length " + std::to_string(series_length));
  if (smc.particles < 2) config_error("smc.particles", "must be >= 2");
  if (!(smc.ess_threshold >= 1.0 && smc.ess_threshold <= static_cast<double>(smc.particles)))
    config_error("smc.ess_threshold", "must lie in [1, particles]");
  if (smc.chain < 1) config_error("smc.chain", "must be >= 1");
  if (gibbs.chain < 1) config_error("gibbs.chain", "must be >= 1");
  if (gibbs.stride < 1) config_error("gibbs.stride", "must be >= 1");
  if (!(ldf.gamma > 0.0 && ldf.gamma <= 1.0)) config_error("ldf.gamma", "must lie in (0, 1]");
  if (!(ldf.gamma2 > 0.0 && ldf.gamma2 <= 1.0)) config_error("ldf.gamma2", "must lie in (0, 1]");
  if (smc.resampling != "multinomial" && smc.resampling != "systematic")
    config_error("smc.resampling", "must be 'multinomial' or 'systematic'");
  for (const auto* w : {&ldf.weight, &ldf.first_weight, &ldf.second_weight})
    if (*w != "softmax" && *w != "argmax")
      config_error("ldf weight", "must be 'softmax' or 'argmax'");
  if (ldf.variant != "grid" && ldf.variant != "two-layer")
    config_error("ldf.variant", "must be 'grid' or 'two-layer'");
  const int lag = [this] {
    int m = 0;
    for (const auto& spec : agent_specs) m = std::max(m, spec.max_lag());
    return m;
  }();
  if (periods.learn1_end <= lag)
    config_error("periods.learn1_end", "agent warm-up needs more than max-lag observations");
}

synthesis::Config RunConfig::make_synthesis() const {
  const auto k = static_cast<Eigen::Index>(agent_specs.size());
  const double coef = synthesis.m0_coef ? *synthesis.m0_coef : 1.0 / static_cast<double>(k);
  Eigen::VectorXd m0 = Eigen::VectorXd::Constant(k + 1, coef);
  m0[0] = synthesis.m0_intercept;
  return synthesis::Config(
      dlm::Momentsd(m0, synthesis.c0_scale * Eigen::MatrixXd::Identity(k + 1, k + 1), synthesis.n0,
                    synthesis.s0),
      dlm::DiscountConfigd(synthesis.beta, synthesis.delta));
}

smc::Config RunConfig::make_smc() const {
  smc::Config cfg;
  cfg.particles = smc.particles;
  cfg.ess_threshold = smc.ess_threshold;
  cfg.chain_size = smc.chain;
  cfg.chain_burn = smc.chain_burn;
  cfg.resampling = smc.resampling == "systematic" ? smc::Resampling::kSystematic
                                                  : smc::Resampling::kMultinomial;
  cfg.adaptive_resampling = smc.adaptive;
  cfg.retain_history = false;
  cfg.threads = effective_threads();
  return cfg;
}

ldf::DiscountGrid RunConfig::make_grid() const {
  if (ldf.grid == "s35") return ldf::DiscountGrid::s35();
  if (ldf.grid == "singleton")
    return ldf::DiscountGrid::singleton(ldf.singleton_beta, ldf.singleton_delta);
  config_error("ldf.grid", "unknown preset '" + ldf.grid + "' (expected s35 or singleton)");
}

int RunConfig::effective_threads() const { return threads > 0 ? threads : default_threads(); }

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config parse failure in " + path + ": " + e.what());
  }

  RunConfig cfg;
  if (j.contains("data")) {
    const auto& d = j["data"];
    if (d.is_string()) {
      cfg.data.quarterly = d.get<std::string>();
    } else {
      cfg.data.quarterly = d.value("quarterly", "");
      cfg.data.y_quarterly = d.value("y_quarterly", "");
      cfg.data.u_monthly = d.value("u_monthly", "");
      cfg.data.r_monthly = d.value("r_monthly", "");
    }
  }
  if (j.contains("periods")) {
    const auto& p = j["periods"];
    cfg.periods.learn1_end = p.value("learn1_end", cfg.periods.learn1_end);
    cfg.periods.learn2_end = p.value("learn2_end", cfg.periods.learn2_end);
    cfg.periods.eval_end = p.value("eval_end", cfg.periods.eval_end);
  }
  if (j.contains("agents")) cfg.agent_specs = parse_agents(j["agents"]);
  if (j.contains("synthesis")) {
    const auto& s = j["synthesis"];
    cfg.synthesis.n0 = s.value("n0", cfg.synthesis.n0);
    cfg.synthesis.s0 = s.value("s0", cfg.synthesis.s0);
    cfg.synthesis.beta = s.value("beta", cfg.synthesis.beta);
    cfg.synthesis.delta = s.value("delta", cfg.synthesis.delta);
    cfg.synthesis.m0_intercept = s.value("m0_intercept", cfg.synthesis.m0_intercept);
    if (s.contains("m0_coef")) cfg.synthesis.m0_coef = s["m0_coef"].get<double>();
    cfg.synthesis.c0_scale = s.value("C0_scale", cfg.synthesis.c0_scale);
  }
  if (j.contains("smc")) {
    const auto& s = j["smc"];
    cfg.smc.particles = s.value("particles", cfg.smc.particles);
    cfg.smc.ess_threshold = s.value("ess_threshold", cfg.smc.ess_threshold);
    cfg.smc.chain = s.value("chain", cfg.smc.chain);
    cfg.smc.chain_burn = s.value("chain_burn", cfg.smc.chain_burn);
    cfg.smc.resampling = s.value("resampling", cfg.smc.resampling);
    cfg.smc.adaptive = s.value("adaptive", cfg.smc.adaptive);
  }
  if (j.contains("gibbs")) {
    const auto& g = j["gibbs"];
    cfg.gibbs.chain = g.value("chain", cfg.gibbs.chain);
    cfg.gibbs.burn_in = g.value("burn_in", cfg.gibbs.burn_in);
    cfg.gibbs.stride = g.value("stride", cfg.gibbs.stride);
  }
  if (j.contains("ldf")) {
    const auto& l = j["ldf"];
    cfg.ldf.grid = l.value("grid", cfg.ldf.grid);
    cfg.ldf.singleton_beta = l.value("singleton_beta", cfg.ldf.singleton_beta);
    cfg.ldf.singleton_delta = l.value("singleton_delta", cfg.ldf.singleton_delta);
    cfg.ldf.gamma = l.value("gamma", cfg.ldf.gamma);
    cfg.ldf.weight = l.value("weight", cfg.ldf.weight);
    cfg.ldf.gamma2 = l.value("gamma2", cfg.ldf.gamma2);
    cfg.ldf.first_weight = l.value("first_weight", cfg.ldf.first_weight);
    cfg.ldf.second_weight = l.value("second_weight", cfg.ldf.second_weight);
    cfg.ldf.variant = l.value("variant", cfg.ldf.variant);
  }
  cfg.seed = j.value("seed", cfg.seed);
  cfg.threads = j.value("threads", cfg.threads);
  cfg.out = j.value("out", cfg.out);
  cfg.quantiles = j.value("quantiles", cfg.quantiles);
  return cfg;
}

void apply_overrides(RunConfig& config, const FlagOverrides& flags) {
  if (flags.seed) config.seed = *flags.seed;
  if (flags.particles) config.smc.particles = *flags.particles;
  if (flags.chain) {
    config.smc.chain = *flags.chain;
    config.gibbs.chain = *flags.chain;
  }
  if (flags.ess_threshold) config.smc.ess_threshold = *flags.ess_threshold;
  if (flags.grid) config.ldf.grid = *flags.grid;
  if (flags.gamma) config.ldf.gamma = *flags.gamma;
  if (flags.out) config.out = *flags.out;
  if (flags.threads) config.threads = *flags.threads;
}

agents::MacroSeries load_data(const RunConfig& config) {
  if (config.data.combined()) return io::ingest_quarterly_csv(config.data.quarterly);
  if (config.data.y_quarterly.empty() || config.data.u_monthly.empty() ||
      config.data.r_monthly.empty())
    config_error("data", "need either 'quarterly' or all of y_quarterly/u_monthly/r_monthly");
  return io::compose(config.data.y_quarterly, config.data.u_monthly, config.data.r_monthly);
}

}  // namespace bps::cli
