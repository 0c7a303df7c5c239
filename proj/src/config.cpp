#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "enkpf/harness.hpp"

namespace enkpf {

namespace {

using nlohmann::json;

const std::vector<std::string>& conjugate_keys() {
  static const std::vector<std::string> keys{
      "dims", "k", "radius_l", "taper_factor", "transition", "support_points", "gamma_policy", "algorithms",
      "n_replicates", "master_seed"};
  return keys;
}

const std::vector<std::string>& lorenz_keys() {
  static const std::vector<std::string> keys{
      "model", "k", "radius_l", "taper_factor", "transition", "gamma_policy", "gamma_ess_bounds", "algorithms",
      "n_cycles", "burn_in", "n_repeats", "climatology_size", "master_seed"};
  return keys;
}

void reject_unknown(const json& j, const std::vector<std::string>& allowed,
                    const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

json parse_json(std::string_view text) {
  try {
    json j = json::parse(text.begin(), text.end());
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

// A scalar or a list of integers.
std::vector<Index> index_list(const json& j) {
  if (j.is_number_integer()) return {j.get<Index>()};
  if (!j.is_array()) throw ConfigError("expected an integer or a list of integers");
  std::vector<Index> out;
  for (const json& v : j) {
    if (!v.is_number_integer()) throw ConfigError("expected integers in list");
    out.push_back(v.get<Index>());
  }
  return out;
}

// A positive number, or "inf" for no tapering.
double taper_factor(const json& j) {
  if (j.is_string() && j.get<std::string>() == "inf") {
    return std::numeric_limits<double>::infinity();
  }
  if (!j.is_number()) throw ConfigError("taper_factor must be a number or \"inf\"");
  return j.get<double>();
}

GammaPolicy gamma_policy(const json& j) {
  if (j.is_number()) return GammaPolicy::fixed(j.get<double>());
  reject_unknown(j, {"mode", "value", "ess_lo", "ess_hi"}, "gamma_policy");
  const std::string mode = j.at("mode").get<std::string>();
  if (mode == "fixed") return GammaPolicy::fixed(j.at("value").get<double>());
  if (mode == "adaptive") {
    return GammaPolicy::adaptive(j.value("ess_lo", 0.25), j.value("ess_hi", 0.5));
  }
  throw ConfigError("gamma_policy.mode must be 'fixed' or 'adaptive'");
}

std::vector<Algorithm> algorithms(const json& j) {
  std::vector<Algorithm> out;
  for (const json& v : j) out.push_back(parse_algorithm(v.get<std::string>()));
  return out;
}

template <typename Fn>
auto guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

ConjugateExperimentConfig parse_conjugate_config(std::string_view text) {
  return guarded([&] {
    const json j = parse_json(text);
    reject_unknown(j, conjugate_keys(), "conjugate config");
    ConjugateExperimentConfig cfg;
    if (j.contains("dims")) cfg.dims = index_list(j.at("dims"));
    if (j.contains("k")) cfg.k = j.at("k").get<Index>();
    if (j.contains("radius_l")) cfg.radii = index_list(j.at("radius_l"));
    if (j.contains("taper_factor")) cfg.taper_factor = taper_factor(j.at("taper_factor"));
    if (j.contains("transition")) {
      cfg.transition = parse_transition(j.at("transition").get<std::string>());
    }
    if (j.contains("support_points")) cfg.support_points = j.at("support_points").get<Index>();
    if (j.contains("gamma_policy")) cfg.gamma_policy = gamma_policy(j.at("gamma_policy"));
    if (j.contains("algorithms")) cfg.algorithms = algorithms(j.at("algorithms"));
    if (j.contains("n_replicates")) cfg.n_replicates = j.at("n_replicates").get<Index>();
    if (j.contains("master_seed")) cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
    cfg.validate();
    return cfg;
  });
}

LorenzExperimentConfig parse_lorenz_config(std::string_view text) {
  return guarded([&] {
    const json j = parse_json(text);
    reject_unknown(j, lorenz_keys(), "lorenz96 config");
    LorenzExperimentConfig cfg;
    if (j.contains("model")) {
      const json& m = j.at("model");
      reject_unknown(m, {"dim", "forcing", "dt", "assim_interval", "obs_stride",
                         "obs_noise_var"},
                     "model");
      cfg.model.dim = m.value("dim", cfg.model.dim);
      cfg.model.forcing = m.value("forcing", cfg.model.forcing);
      cfg.model.dt = m.value("dt", cfg.model.dt);
      cfg.model.assim_interval = m.value("assim_interval", cfg.model.assim_interval);
      cfg.model.obs_stride = m.value("obs_stride", cfg.model.obs_stride);
      cfg.model.obs_noise_var = m.value("obs_noise_var", cfg.model.obs_noise_var);
    }
    if (j.contains("k")) cfg.ensemble_sizes = index_list(j.at("k"));
    if (j.contains("radius_l")) cfg.radii = index_list(j.at("radius_l"));
    if (j.contains("gamma_policy")) cfg.gamma_policy = gamma_policy(j.at("gamma_policy"));
    if (j.contains("taper_factor")) cfg.taper_factor = taper_factor(j.at("taper_factor"));
    if (j.contains("transition")) {
      cfg.transition = parse_transition(j.at("transition").get<std::string>());
    }
    if (j.contains("gamma_ess_bounds")) {
      const json& b = j.at("gamma_ess_bounds");
      if (!b.is_array() || b.size() != 2) {
        throw ConfigError("gamma_ess_bounds must be [lo, hi]");
      }
      cfg.gamma_policy = GammaPolicy::adaptive(b[0].get<double>(), b[1].get<double>());
    }
    if (j.contains("algorithms")) cfg.algorithms = algorithms(j.at("algorithms"));
    if (j.contains("n_cycles")) cfg.n_cycles = j.at("n_cycles").get<Index>();
    if (j.contains("burn_in")) cfg.burn_in = j.at("burn_in").get<Index>();
    if (j.contains("n_repeats")) cfg.n_repeats = j.at("n_repeats").get<Index>();
    if (j.contains("climatology_size")) {
      cfg.climatology_size = j.at("climatology_size").get<Index>();
    }
    if (j.contains("master_seed")) cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
    cfg.validate();
    return cfg;
  });
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open file", path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace enkpf
