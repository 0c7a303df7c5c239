#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "enkpf/global_filters.hpp"
#include "enkpf/local_filters.hpp"
#include "enkpf/models.hpp"
#include "enkpf/types.hpp"

namespace enkpf {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Algorithm {
  none,  // free-running ensemble, no assimilation
  pf,
  enkf,
  enkpf,
  lenkf,
  lpf,
  naive_lenkpf,
  block_lenkpf,
};

std::string_view algorithm_name(Algorithm a);
/// Accepts the names printed by algorithm_name, case-insensitively.
Algorithm parse_algorithm(std::string_view name);
/// "conditional", "blend" or "hard".
TransitionMode parse_transition(std::string_view name);
bool is_local(Algorithm a);
bool uses_gamma(Algorithm a);

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct ConjugateExperimentConfig {
  std::vector<Index> dims{100};
  Index k = 100;
  std::vector<Index> radii{5};
  // Taper half-width as a multiple of the radius; infinity disables it.
  // The prior's correlation reaches well past 2l, so the radius alone
  // localizes here.
  double taper_factor = std::numeric_limits<double>::infinity();
  TransitionMode transition = TransitionMode::conditional;
  Index support_points = 20;
  GammaPolicy gamma_policy = GammaPolicy::fixed(0.25);
  std::vector<Algorithm> algorithms{Algorithm::pf, Algorithm::enkf, Algorithm::enkpf};
  Index n_replicates = 1000;
  std::uint64_t master_seed = 1;

  void validate() const;
};

struct LorenzExperimentConfig {
  Lorenz96Config model;
  std::vector<Index> ensemble_sizes{20};
  std::vector<Index> radii{5};
  double taper_factor = 1.0;
  // Small ensembles give regressions too noisy for the conditional
  // transition.
  TransitionMode transition = TransitionMode::blend;
  GammaPolicy gamma_policy = GammaPolicy::adaptive(0.25, 0.5);
  std::vector<Algorithm> algorithms{Algorithm::none, Algorithm::lenkf,
                                    Algorithm::naive_lenkpf, Algorithm::block_lenkpf};
  Index n_cycles = 1000;
  Index burn_in = 100;
  Index n_repeats = 20;
  Index climatology_size = 1000;
  std::uint64_t master_seed = 1;

  void validate() const;
};

/// Structured text (JSON) configuration files. Throw ConfigError.
ConjugateExperimentConfig parse_conjugate_config(std::string_view text);
LorenzExperimentConfig parse_lorenz_config(std::string_view text);
std::string read_text_file(const std::string& path);

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

struct ExperimentRecord {
  std::string algorithm;
  Index N = 0;
  Index k = 0;
  std::optional<Index> l;
  std::optional<double> gamma;  // fixed value, or mean of the adaptive choices
  Index replicate = 0;
  std::optional<double> mse_x;
  std::optional<double> mse_dx;
  std::optional<double> rel_mse_x;
  std::optional<double> rel_mse_dx;
  std::optional<double> ref_mse_x;
  std::optional<double> ref_mse_dx;
  std::optional<double> wall_time_s;
  bool failed = false;
  std::string error;
  std::optional<Index> failed_cycle;

  bool operator==(const ExperimentRecord&) const = default;
};

enum class RecordFormat { csv, jsonl };

RecordFormat parse_record_format(std::string_view name);

inline constexpr std::string_view kCsvHeader =
    "algorithm,N,k,l,gamma,replicate,mse_x,mse_dx,rel_mse_x,rel_mse_dx,"
    "ref_mse_x,ref_mse_dx,wall_time_s";

void write_records(const std::vector<ExperimentRecord>& records, std::ostream& out,
                   RecordFormat format);
/// Throws FileError naming the path when it cannot be written.
void write_records(const std::vector<ExperimentRecord>& records,
                   const std::string& path, RecordFormat format);

std::vector<ExperimentRecord> read_records_jsonl(std::istream& in);

/// Means over replicates of one (algorithm, N, k, l) cell.
struct RecordSummary {
  std::string algorithm;
  Index N = 0;
  Index k = 0;
  std::optional<Index> l;
  Index n_records = 0;
  Index n_failed = 0;
  // Failed replicates have unbounded error, so the inclusive mean is +inf
  // whenever any replicate failed.
  double mean_rel_mse_x_inclusive = 0.0;
  double mean_rel_mse_x = 0.0;  // successful replicates only
  double se_rel_mse_x = 0.0;
  std::optional<double> mean_rel_mse_dx;
  std::optional<double> se_rel_mse_dx;
};

std::vector<RecordSummary> summarize(const std::vector<ExperimentRecord>& records);
void print_summary(const std::vector<RecordSummary>& summary, std::ostream& out);

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

struct RunOptions {
  int threads = 1;
  // Wall-clock timings make output files differ between runs, so they are
  // only recorded on request.
  bool record_timing = false;
};

/// One-step conjugate Gaussian study. Replicate r of dimension N draws its
/// truth, observation and prior ensemble from a stream keyed by (seed, N, r)
/// shared by every algorithm and radius; filter randomness comes from a
/// stream that also includes the algorithm and radius.
std::vector<ExperimentRecord> run_conjugate_experiment(
    const ConjugateExperimentConfig& cfg, const RunOptions& options = {});

/// Cycled Lorenz96 twin experiment; relative errors are against a free
/// ensemble of the same size started from the same initial particles.
std::vector<ExperimentRecord> run_lorenz_experiment(const LorenzExperimentConfig& cfg,
                                                    const RunOptions& options = {});

}  // namespace enkpf
