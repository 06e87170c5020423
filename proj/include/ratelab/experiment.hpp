#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ratelab/calibration.hpp"
#include "ratelab/fixed_model.hpp"
#include "ratelab/metrics.hpp"
#include "ratelab/responsive_model.hpp"

namespace ratelab {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kOutputRootEnv = "RATELAB_OUTPUT_ROOT";

struct SplitConfig {
    double fraction = 0.40;
    std::uint64_t seed = 2024;
};

struct FixedSweepConfig {
    std::uint32_t horizon = 50;
    std::vector<double> etas{0.0, 1.0, 10.0, 1000.0};
    std::string mode = "replay";  // replay | synthetic
    std::uint32_t replications = 200;
    std::uint64_t seed = 1;
};

struct ResponsiveSweepConfig {
    std::vector<double> percentile_grid;  // default 0,4,...,96 (25 items)
    std::uint32_t market_size = 5;
    std::optional<std::uint64_t> horizon;  // resolved from profile when unset
    double rho = 0.01;
    std::vector<double> etas{0.001, 1.0, 10.0, 50.0, 100.0, 500.0, 1000.0};
    std::vector<std::uint64_t> master_seeds{1};
    std::uint32_t early_k = 4;
    std::string events = "none";  // none | ndjson | binary
};

struct ExperimentConfig {
    std::string dataset;
    double threshold = 0.40;
    SplitConfig split;
    std::optional<BetaPrior> prior_override;  // absent = fit from the train split
    FixedSweepConfig fixed;
    ResponsiveSweepConfig responsive;
    std::string output_dir = "out";
    std::string profile = "full";  // full: responsive horizon 5e6; desk: 5e5
    unsigned jobs = 1;
};

std::vector<double> default_percentile_grid();

// Fills profile-dependent defaults and applies the output-root env override;
// a resolved config re-resolves to itself.
ExperimentConfig resolve_config(ExperimentConfig config);

std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Named rng streams for one responsive run, derived from a master seed. The
// market seed does not depend on eta, which is what pins M(t) across the
// prior-strength grid.
ResponsiveSeeds responsive_seeds(std::uint64_t master_seed);

// --- calibration command -----------------------------------------------------

struct CalibrationArtifacts {
    Universe train;
    Universe test;
    BetaPrior prior;
    bool fitted = false;  // false when a prior override was supplied
    FitResult fit;        // valid when fitted
    std::uint64_t dataset_hash = 0;
    std::size_t duplicates_dropped = 0;
    std::vector<std::string> warnings;
};

// Ingest, split, fit (or take the override): the pipeline every sweep
// builds on.
CalibrationArtifacts run_calibration(const ExperimentConfig& config);
void write_calibration(const CalibrationArtifacts& artifacts,
                       const std::filesystem::path& dir);
CalibrationArtifacts load_calibration(const std::filesystem::path& dir);

// --- synthetic dataset command -------------------------------------------------

struct SynthConfig {
    BetaPrior population{1.0, 1.0};
    std::size_t n_items = 100;
    std::size_t ratings_per_item = 100;
    std::uint64_t seed = 1;
};

// Writes a KuaiRec-format dense interaction file whose item qualities are
// drawn from the population beta and whose binarized per-item means converge
// to them.
void write_synthetic_dataset(const SynthConfig& synth, const std::filesystem::path& path);

// --- sweeps --------------------------------------------------------------------

struct SweepOutcome {
    std::filesystem::path dir;
    std::vector<std::string> artifacts;  // file names, manifest excluded
};

// Fixed-model sweep: trajectory + fig2/fig3/fig4 (+ biasvar for synthetic
// mode) + manifest. dry_run prints the plan and writes nothing.
SweepOutcome sweep_fixed(const ExperimentConfig& config,
                         const CalibrationArtifacts& calibration, bool dry_run = false);

// Responsive sweep over (eta x master_seed) cells, parallel up to config.jobs:
// per-cell registry (+ optional event stream), fig5/fig6/fig7, manifest.
SweepOutcome sweep_responsive(const ExperimentConfig& config,
                              const CalibrationArtifacts& calibration, bool dry_run = false);

// Recomputes figure tables from the persisted artifacts of a sweep directory
// (no re-simulation). Fixed sweeps rebuild fig2-4 from the trajectory table;
// responsive sweeps rebuild fig6/fig7 from registries and fig5 when event
// streams were kept.
std::vector<std::string> report_sweep(const std::filesystem::path& sweep_dir);

}  // namespace ratelab
