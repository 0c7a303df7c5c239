#include "enkpf/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cctype>
#include <functional>
#include <thread>

#include "enkpf/core.hpp"
#include "enkpf/local_filters.hpp"
#include "enkpf/metrics.hpp"
#include "enkpf/oracle.hpp"

namespace enkpf {

namespace {

struct AlgorithmName {
  Algorithm algorithm;
  std::string_view name;
};

constexpr AlgorithmName kAlgorithmNames[] = {
    {Algorithm::none, "none"},
    {Algorithm::pf, "PF"},
    {Algorithm::enkf, "EnKF"},
    {Algorithm::enkpf, "EnKPF"},
    {Algorithm::lenkf, "LEnKF"},
    {Algorithm::lpf, "LPF"},
    {Algorithm::naive_lenkpf, "naive-LEnKPF"},
    {Algorithm::block_lenkpf, "block-LEnKPF"},
};

// Stream tags keep the conjugate and Lorenz key spaces apart.
constexpr std::uint64_t kConjugateTag = 0xC0;
constexpr std::uint64_t kLorenzTag = 0x96;
constexpr std::uint64_t kDataStream = 1;
constexpr std::uint64_t kFilterStream = 2;
constexpr std::uint64_t kClimatologyStream = 3;
constexpr std::uint64_t kInitialEnsembleStream = 4;

std::uint64_t as_key(Index v) { return static_cast<std::uint64_t>(v); }
std::uint64_t as_key(Algorithm a) { return static_cast<std::uint64_t>(a); }
// Global algorithms have no radius; give them a key no radius can take.
std::uint64_t radius_key(std::optional<Index> l) {
  return l ? static_cast<std::uint64_t>(*l) : ~std::uint64_t{0};
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

/// Runs body(i) for i in [0, n) on `threads` workers. Every index is
/// processed exactly once; bodies must not throw.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body) {
  const std::size_t workers =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) body(i);
    });
  }
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

/// One filter step for any algorithm. Returns the gamma summary, if any.
std::optional<double> assimilate(Algorithm algorithm, Ensemble& e,
                                 const LinearGaussianObs& obs, const RingGrid& grid,
                                 std::optional<Index> l, double taper_factor,
                                 TransitionMode transition, const GammaPolicy& policy,
                                 Rng& rng) {
  const double u = uniform01(rng);
  LocalizationConfig cfg;
  if (l) {
    cfg = LocalizationConfig::with_radius(*l, taper_factor);
    cfg.transition = transition;
  }
  switch (algorithm) {
    case Algorithm::none:
      return std::nullopt;
    case Algorithm::pf:
      e = pf_update(e, obs, u).ensemble;
      return std::nullopt;
    case Algorithm::enkf:
      e = enkf_update(e, obs, rng);
      return std::nullopt;
    case Algorithm::enkpf: {
      const double gamma = select_gamma(e, obs, policy);
      e = enkpf_update(e, obs, gamma, u, rng).ensemble;
      return gamma;
    }
    case Algorithm::lenkf:
      e = lenkf_update(e, obs, grid, cfg, rng);
      return std::nullopt;
    case Algorithm::lpf:
      e = lpf_update(e, obs, grid, cfg, u).ensemble;
      return std::nullopt;
    case Algorithm::naive_lenkpf: {
      LocalEnkpfResult r = naive_lenkpf_update(e, obs, grid, cfg, policy, u, rng);
      e = std::move(r.ensemble);
      return r.gamma.size() > 0 ? std::optional<double>(r.gamma.mean()) : std::nullopt;
    }
    case Algorithm::block_lenkpf: {
      LocalEnkpfResult r = block_lenkpf_update(e, obs, grid, cfg, policy, u, rng);
      e = std::move(r.ensemble);
      return r.gamma.size() > 0 ? std::optional<double>(r.gamma.mean()) : std::nullopt;
    }
  }
  return std::nullopt;
}

/// (algorithm, radius) pairs in config order; global algorithms once.
std::vector<std::pair<Algorithm, std::optional<Index>>> expand_runs(
    const std::vector<Algorithm>& algorithms, const std::vector<Index>& radii) {
  std::vector<std::pair<Algorithm, std::optional<Index>>> runs;
  for (Algorithm a : algorithms) {
    if (is_local(a)) {
      for (Index l : radii) runs.emplace_back(a, l);
    } else {
      runs.emplace_back(a, std::nullopt);
    }
  }
  return runs;
}

ExperimentRecord base_record(Algorithm a, Index n, Index k, std::optional<Index> l,
                             Index replicate) {
  ExperimentRecord rec;
  rec.algorithm = std::string(algorithm_name(a));
  rec.N = n;
  rec.k = k;
  rec.l = l;
  rec.replicate = replicate;
  return rec;
}

}  // namespace

std::string_view algorithm_name(Algorithm a) {
  for (const auto& entry : kAlgorithmNames) {
    if (entry.algorithm == a) return entry.name;
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
  for (const auto& entry : kAlgorithmNames) {
    if (iequals(entry.name, name)) return entry.algorithm;
  }
  throw ConfigError("unknown algorithm: " + std::string(name));
}

TransitionMode parse_transition(std::string_view name) {
  if (iequals(name, "conditional")) return TransitionMode::conditional;
  if (iequals(name, "blend")) return TransitionMode::blend;
  if (iequals(name, "hard")) return TransitionMode::hard;
  throw ConfigError("unknown transition mode: " + std::string(name));
}

bool is_local(Algorithm a) {
  return a == Algorithm::lenkf || a == Algorithm::lpf || a == Algorithm::naive_lenkpf ||
         a == Algorithm::block_lenkpf;
}

bool uses_gamma(Algorithm a) {
  return a == Algorithm::enkpf || a == Algorithm::naive_lenkpf ||
         a == Algorithm::block_lenkpf;
}

void ConjugateExperimentConfig::validate() const {
  if (dims.empty()) throw ConfigError("dims must be nonempty");
  if (!(taper_factor > 0.0)) throw ConfigError("taper_factor must be positive");
  if (n_replicates < 1) throw ConfigError("n_replicates must be >= 1");
  if (k < 2) throw ConfigError("k must be >= 2");
  if (algorithms.empty()) throw ConfigError("algorithms must be nonempty");
  for (Index n : dims) {
    if (n < support_points) {
      throw ConfigError("every dimension must be at least the prior support");
    }
    try {
      build_gc_covariance(n, support_points);
    } catch (const ArgumentError& e) {
      throw ConfigError(e.what());
    }
  }
  const bool any_local = std::any_of(algorithms.begin(), algorithms.end(), is_local);
  if (any_local) {
    if (radii.empty()) throw ConfigError("local algorithms need radius_l");
    for (Index l : radii) {
      for (Index n : dims) {
        if (l < 0 || l > n / 2) throw ConfigError("radius_l must lie in [0, N/2]");
      }
    }
  }
  try {
    gamma_policy.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
}

void LorenzExperimentConfig::validate() const {
  try {
    model.validate();
    gamma_policy.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  if (ensemble_sizes.empty()) throw ConfigError("k values must be nonempty");
  if (!(taper_factor > 0.0)) throw ConfigError("taper_factor must be positive");
  for (Index k : ensemble_sizes) {
    if (k < 2) throw ConfigError("ensemble sizes must be >= 2");
  }
  if (algorithms.empty()) throw ConfigError("algorithms must be nonempty");
  if (n_cycles < 1 || burn_in < 0 || burn_in >= n_cycles) {
    throw ConfigError("need 0 <= burn_in < n_cycles");
  }
  if (n_repeats < 1) throw ConfigError("n_repeats must be >= 1");
  if (climatology_size < 1) throw ConfigError("climatology_size must be >= 1");
  const bool any_local = std::any_of(algorithms.begin(), algorithms.end(), is_local);
  if (any_local) {
    if (radii.empty()) throw ConfigError("local algorithms need radius_l");
    for (Index l : radii) {
      if (l < 0 || l > model.dim / 2) throw ConfigError("radius_l must lie in [0, dim/2]");
    }
  }
}

// ---------------------------------------------------------------------------
// Conjugate study

std::vector<ExperimentRecord> run_conjugate_experiment(
    const ConjugateExperimentConfig& cfg, const RunOptions& options) {
  cfg.validate();
  const auto runs = expand_runs(cfg.algorithms, cfg.radii);
  const std::size_t n_dims = cfg.dims.size();
  const std::size_t n_reps = static_cast<std::size_t>(cfg.n_replicates);

  struct DimContext {
    RingGrid grid{1};
    std::optional<GaussianSampler> sampler;
    ObsSpec obs_spec;
    double ref_x = 0.0;
    double ref_dx = 0.0;
  };
  std::vector<DimContext> dims(n_dims);
  for (std::size_t d = 0; d < n_dims; ++d) {
    const Index n = cfg.dims[d];
    const ConjugateSetup setup = ConjugateSetup::make(n, cfg.support_points);
    dims[d].grid = RingGrid(n);
    dims[d].sampler.emplace(setup.sigma_p);
    dims[d].obs_spec = ObsSpec::strided(n, 1, 1.0);
    const GaussianPosterior post = conjugate_posterior(
        setup.sigma_p, dims[d].obs_spec.H, dims[d].obs_spec.R, Eigen::VectorXd::Zero(n));
    dims[d].ref_x = optimal_mse_x(post.covariance);
    dims[d].ref_dx = optimal_mse_dx(post.covariance);
  }

  // records[(d * runs + j) * reps + r]
  std::vector<ExperimentRecord> records(n_dims * runs.size() * n_reps);
  parallel_for(n_dims * n_reps, options.threads, [&](std::size_t task) {
    const std::size_t d = task / n_reps;
    const std::size_t r = task % n_reps;
    const DimContext& ctx = dims[d];
    const Index n = cfg.dims[d];

    Rng data = make_stream(cfg.master_seed, {kConjugateTag, kDataStream, as_key(n),
                                             static_cast<std::uint64_t>(r)});
    const Eigen::VectorXd truth = ctx.sampler->sample(Eigen::VectorXd::Zero(n), 1, data).col(0);
    const LinearGaussianObs obs = observe(truth, ctx.obs_spec, data);
    const Ensemble prior = ctx.sampler->sample(Eigen::VectorXd::Zero(n), cfg.k, data);

    for (std::size_t j = 0; j < runs.size(); ++j) {
      const auto [algorithm, l] = runs[j];
      ExperimentRecord rec = base_record(algorithm, n, cfg.k, l, static_cast<Index>(r));
      rec.ref_mse_x = ctx.ref_x;
      rec.ref_mse_dx = ctx.ref_dx;
      Rng rng = make_stream(cfg.master_seed,
                            {kConjugateTag, kFilterStream, as_key(n), as_key(algorithm),
                             radius_key(l), static_cast<std::uint64_t>(r)});
      const auto start = std::chrono::steady_clock::now();
      try {
        Ensemble e = prior;
        rec.gamma = assimilate(algorithm, e, obs, ctx.grid, l, cfg.taper_factor,
                                cfg.transition, cfg.gamma_policy, rng);
        rec.mse_x = mse_x(e, truth);
        rec.mse_dx = mse_dx(e, truth);
        rec.rel_mse_x = relative_mse(*rec.mse_x, ctx.ref_x);
        rec.rel_mse_dx = relative_mse(*rec.mse_dx, ctx.ref_dx);
      } catch (const std::exception& ex) {
        rec.failed = true;
        rec.error = ex.what();
        rec.mse_x.reset();
        rec.mse_dx.reset();
      }
      if (options.record_timing) rec.wall_time_s = seconds_since(start);
      records[(d * runs.size() + j) * n_reps + r] = std::move(rec);
    }
  });
  return records;
}

// ---------------------------------------------------------------------------
// Lorenz96 study

std::vector<ExperimentRecord> run_lorenz_experiment(const LorenzExperimentConfig& cfg,
                                                    const RunOptions& options) {
  cfg.validate();
  const Lorenz96Config& model = cfg.model;
  const Index n = model.dim;
  const RingGrid grid(n);
  const ObsSpec spec = model.obs_spec();
  const std::size_t n_cycles = static_cast<std::size_t>(cfg.n_cycles);
  const std::size_t n_reps = static_cast<std::size_t>(cfg.n_repeats);
  const std::size_t n_sizes = cfg.ensemble_sizes.size();
  const double interval = model.assim_interval;

  Rng clim_rng = make_stream(cfg.master_seed, {kLorenzTag, kClimatologyStream});
  const Eigen::MatrixXd pool = lorenz96_climatology(model, cfg.climatology_size, clim_rng);

  // Truth and observations per repeat; cycle c is at time (c + 1) * interval.
  struct Trajectory {
    Eigen::VectorXd start;
    std::vector<Eigen::VectorXd> truth;
    std::vector<LinearGaussianObs> obs;
  };
  std::vector<Trajectory> trajectories(n_reps);
  parallel_for(n_reps, options.threads, [&](std::size_t r) {
    Rng rng = make_stream(cfg.master_seed,
                          {kLorenzTag, kDataStream, static_cast<std::uint64_t>(r)});
    Trajectory& t = trajectories[r];
    t.start = lorenz96_spinup(model, rng);
    Eigen::MatrixXd x = t.start;
    t.truth.reserve(n_cycles);
    t.obs.reserve(n_cycles);
    for (std::size_t c = 0; c < n_cycles; ++c) {
      x = propagate(x, interval, model.dt, model.forcing);
      t.truth.push_back(x.col(0));
      t.obs.push_back(observe(x.col(0), spec, rng));
    }
  });

  auto initial_ensemble = [&](Index k, std::size_t r) {
    Rng rng = make_stream(cfg.master_seed, {kLorenzTag, kInitialEnsembleStream, as_key(k),
                                            static_cast<std::uint64_t>(r)});
    return draw_from_pool(pool, k, rng);
  };

  // Free-running reference per (k, repeat).
  std::vector<double> baseline(n_sizes * n_reps, 0.0);
  std::vector<std::string> baseline_error(n_sizes * n_reps);
  parallel_for(n_sizes * n_reps, options.threads, [&](std::size_t task) {
    const std::size_t s = task / n_reps;
    const std::size_t r = task % n_reps;
    try {
      Ensemble e = initial_ensemble(cfg.ensemble_sizes[s], r);
      double total = 0.0;
      for (std::size_t c = 0; c < n_cycles; ++c) {
        e = propagate(e, interval, model.dt, model.forcing);
        if (c >= static_cast<std::size_t>(cfg.burn_in)) {
          total += mse_x(e, trajectories[r].truth[c]);
        }
      }
      baseline[task] = total / static_cast<double>(cfg.n_cycles - cfg.burn_in);
    } catch (const std::exception& ex) {
      baseline_error[task] = ex.what();
    }
  });

  const auto runs = expand_runs(cfg.algorithms, cfg.radii);
  // records[((s * runs) + j) * reps + r]
  std::vector<ExperimentRecord> records(n_sizes * runs.size() * n_reps);
  parallel_for(records.size(), options.threads, [&](std::size_t task) {
    const std::size_t r = task % n_reps;
    const std::size_t j = (task / n_reps) % runs.size();
    const std::size_t s = task / n_reps / runs.size();
    const Index k = cfg.ensemble_sizes[s];
    const auto [algorithm, l] = runs[j];
    ExperimentRecord rec = base_record(algorithm, n, k, l, static_cast<Index>(r));
    const std::size_t base_index = s * n_reps + r;
    const auto start = std::chrono::steady_clock::now();

    if (!baseline_error[base_index].empty()) {
      rec.failed = true;
      rec.error = "baseline failed: " + baseline_error[base_index];
    } else {
      const double ref = baseline[base_index];
      rec.ref_mse_x = ref;
      if (algorithm == Algorithm::none) {
        rec.mse_x = ref;
        rec.rel_mse_x = relative_mse(ref, ref);
      } else {
        Rng rng = make_stream(cfg.master_seed,
                              {kLorenzTag, kFilterStream, as_key(algorithm), as_key(k),
                               radius_key(l), static_cast<std::uint64_t>(r)});
        Ensemble e = initial_ensemble(k, r);
        double total = 0.0;
        double gamma_total = 0.0;
        Index gamma_count = 0;
        std::size_t c = 0;
        try {
          for (; c < n_cycles; ++c) {
            e = propagate(e, interval, model.dt, model.forcing);
            const std::optional<double> gamma =
                assimilate(algorithm, e, trajectories[r].obs[c], grid, l,
                           cfg.taper_factor, cfg.transition, cfg.gamma_policy, rng);
            if (!e.allFinite()) {
              throw DivergenceError("filter produced non-finite state", c);
            }
            if (gamma) {
              gamma_total += *gamma;
              ++gamma_count;
            }
            if (c >= static_cast<std::size_t>(cfg.burn_in)) {
              total += mse_x(e, trajectories[r].truth[c]);
            }
          }
          rec.mse_x = total / static_cast<double>(cfg.n_cycles - cfg.burn_in);
          rec.rel_mse_x = relative_mse(*rec.mse_x, ref);
          if (gamma_count > 0) {
            rec.gamma = gamma_total / static_cast<double>(gamma_count);
          }
        } catch (const std::exception& ex) {
          rec.failed = true;
          rec.error = ex.what();
          rec.failed_cycle = static_cast<Index>(c);
        }
      }
    }
    if (options.record_timing) rec.wall_time_s = seconds_since(start);
    records[task] = std::move(rec);
  });
  return records;
}

}  // namespace enkpf
