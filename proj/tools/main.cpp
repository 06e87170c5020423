// ratelab: calibrate a beta prior from interaction data, sweep fixed and
// responsive marketplace simulations over prior strengths, and emit the
// figure tables and run manifests.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ratelab/experiment.hpp"
#include "ratelab/io_util.hpp"

namespace fs = std::filesystem;
using namespace ratelab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct ConfigFlags {
    std::optional<std::string> config_path;
    std::optional<std::string> dataset;
    std::optional<double> threshold;
    std::optional<double> split_fraction;
    std::optional<std::uint64_t> split_seed;
    std::optional<std::vector<double>> prior;  // alpha beta
    std::optional<std::string> output_dir;
    std::optional<std::string> profile;
    std::optional<unsigned> jobs;

    std::optional<std::uint32_t> fixed_horizon;
    std::optional<std::vector<double>> fixed_etas;
    std::optional<std::string> fixed_mode;
    std::optional<std::uint32_t> fixed_replications;
    std::optional<std::uint64_t> fixed_seed;

    std::optional<std::vector<double>> grid;
    std::optional<std::uint32_t> market_size;
    std::optional<std::uint64_t> resp_horizon;
    std::optional<double> rho;
    std::optional<std::vector<double>> resp_etas;
    std::optional<std::vector<std::uint64_t>> master_seeds;
    std::optional<std::uint32_t> early_k;
    std::optional<std::string> events;
};

void add_common_flags(CLI::App* cmd, ConfigFlags& f) {
    cmd->add_option("--config", f.config_path, "experiment config JSON; flags override it");
    cmd->add_option("--dataset", f.dataset, "interaction matrix file (csv or tsv)");
    cmd->add_option("--threshold", f.threshold, "binarization threshold (default 0.40)");
    cmd->add_option("--split-fraction", f.split_fraction, "test fraction (default 0.40)");
    cmd->add_option("--split-seed", f.split_seed, "train/test split seed");
    cmd->add_option("--prior", f.prior, "prior override alpha beta (default: fit)")
        ->expected(2);
    cmd->add_option("--output-dir", f.output_dir, "output directory (default out)");
    cmd->add_option("--profile", f.profile, "full|desk (responsive horizon 5e6 / 5e5)");
    cmd->add_option("--jobs", f.jobs, "parallel cells/items (default 1)");
}

void add_fixed_flags(CLI::App* cmd, ConfigFlags& f) {
    cmd->add_option("--horizon", f.fixed_horizon, "fixed-model horizon T (default 50)");
    cmd->add_option("--etas", f.fixed_etas, "prior strengths (default 0 1 10 1000)");
    cmd->add_option("--mode", f.fixed_mode, "replay|synthetic (default replay)");
    cmd->add_option("--replications", f.fixed_replications,
                    "synthetic-mode replications (default 200)");
    cmd->add_option("--seed", f.fixed_seed, "synthetic rating seed");
}

void add_responsive_flags(CLI::App* cmd, ConfigFlags& f) {
    cmd->add_option("--grid", f.grid, "percentile grid (default 0 4 ... 96)");
    cmd->add_option("--market-size", f.market_size, "slots in the market (default 5)");
    cmd->add_option("--horizon", f.resp_horizon, "timesteps per run (profile default)");
    cmd->add_option("--rho", f.rho, "exogenous exit probability (default 0.01)");
    cmd->add_option("--etas", f.resp_etas,
                    "prior strengths (default 0.001 1 10 50 100 500 1000)");
    cmd->add_option("--master-seeds", f.master_seeds, "one run per seed (default 1)");
    cmd->add_option("--early-k", f.early_k, "first-k plays tracked (default 4)");
    cmd->add_option("--events", f.events, "persist per-step log: none|ndjson|binary");
}

ExperimentConfig build_config(const ConfigFlags& f) {
    ExperimentConfig c;
    if (f.config_path) c = load_config(*f.config_path);
    if (f.dataset) c.dataset = *f.dataset;
    if (f.threshold) c.threshold = *f.threshold;
    if (f.split_fraction) c.split.fraction = *f.split_fraction;
    if (f.split_seed) c.split.seed = *f.split_seed;
    if (f.prior) c.prior_override = BetaPrior{(*f.prior)[0], (*f.prior)[1]};
    if (f.output_dir) c.output_dir = *f.output_dir;
    if (f.profile) c.profile = *f.profile;
    if (f.jobs) c.jobs = *f.jobs;
    if (f.fixed_horizon) c.fixed.horizon = *f.fixed_horizon;
    if (f.fixed_etas) c.fixed.etas = *f.fixed_etas;
    if (f.fixed_mode) c.fixed.mode = *f.fixed_mode;
    if (f.fixed_replications) c.fixed.replications = *f.fixed_replications;
    if (f.fixed_seed) c.fixed.seed = *f.fixed_seed;
    if (f.grid) c.responsive.percentile_grid = *f.grid;
    if (f.market_size) c.responsive.market_size = *f.market_size;
    if (f.resp_horizon) c.responsive.horizon = *f.resp_horizon;
    if (f.rho) c.responsive.rho = *f.rho;
    if (f.resp_etas) c.responsive.etas = *f.resp_etas;
    if (f.master_seeds) c.responsive.master_seeds = *f.master_seeds;
    if (f.early_k) c.responsive.early_k = *f.early_k;
    if (f.events) c.responsive.events = *f.events;
    return resolve_config(std::move(c));
}

CalibrationArtifacts calibration_for_sweep(const ExperimentConfig& config,
                                           const std::optional<std::string>& calibration_dir) {
    if (calibration_dir) return load_calibration(*calibration_dir);
    const fs::path default_dir = fs::path(config.output_dir) / "calibration";
    if (fs::exists(default_dir / "prior.json")) return load_calibration(default_dir);
    if (config.dataset.empty())
        throw std::runtime_error(
            "no calibration artifacts found and no dataset configured; run `ratelab "
            "calibrate` first or pass --dataset/--calibration");
    auto artifacts = run_calibration(config);
    write_calibration(artifacts, default_dir);
    return artifacts;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian rating system laboratory: empirical-Bayes prior calibration "
                 "and fixed/responsive marketplace sweeps"};
    app.require_subcommand(1);

    ConfigFlags flags;
    bool dry_run = false;
    std::optional<std::string> calibration_dir;

    auto* calibrate = app.add_subcommand(
        "calibrate", "ingest a dataset, split it, and fit the empirical-Bayes prior");
    add_common_flags(calibrate, flags);

    auto* sweep_fixed_cmd = app.add_subcommand(
        "sweep-fixed", "run the fixed model over the eta grid and emit fig2-fig4 tables");
    add_common_flags(sweep_fixed_cmd, flags);
    add_fixed_flags(sweep_fixed_cmd, flags);
    sweep_fixed_cmd->add_option("--calibration", calibration_dir,
                                "directory with prior.json/train.json/test.json");
    sweep_fixed_cmd->add_flag("--dry-run", dry_run, "print the plan, write nothing");

    auto* sweep_resp_cmd = app.add_subcommand(
        "sweep-responsive",
        "run the responsive market over (eta x seed) cells and emit fig5-fig7 tables");
    add_common_flags(sweep_resp_cmd, flags);
    add_responsive_flags(sweep_resp_cmd, flags);
    sweep_resp_cmd->add_option("--calibration", calibration_dir,
                               "directory with prior.json/train.json/test.json");
    sweep_resp_cmd->add_flag("--dry-run", dry_run, "print the plan, write nothing");

    auto* synth = app.add_subcommand(
        "synth", "generate a KuaiRec-format dataset from a beta population model");
    double synth_alpha = 1.0, synth_beta = 1.0;
    std::size_t synth_items = 100, synth_ratings = 100;
    std::uint64_t synth_seed = 1;
    std::string synth_out = "synthetic.csv";
    synth->add_option("--alpha", synth_alpha, "population alpha")->required();
    synth->add_option("--beta", synth_beta, "population beta")->required();
    synth->add_option("--items", synth_items, "number of items");
    synth->add_option("--ratings-per-item", synth_ratings, "interactions per item");
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--out", synth_out, "output file");

    auto* report = app.add_subcommand(
        "report", "recompute figure tables from a sweep's persisted artifacts");
    std::string report_dir;
    report->add_option("--sweep", report_dir, "sweep directory with manifest.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (calibrate->parsed()) {
            const auto config = build_config(flags);
            const auto artifacts = run_calibration(config);
            const fs::path dir = fs::path(config.output_dir) / "calibration";
            write_calibration(artifacts, dir);
            for (const auto& warning : artifacts.warnings)
                std::cerr << "warning: " << warning << "\n";
            std::cout << "prior: alpha=" << format_double(artifacts.prior.alpha)
                      << " beta=" << format_double(artifacts.prior.beta)
                      << (artifacts.fitted ? " (fitted)" : " (override)") << "\n"
                      << "train items: " << artifacts.train.items.size()
                      << ", test items: " << artifacts.test.items.size() << "\n"
                      << "artifacts: " << dir.string() << "\n";
        } else if (sweep_fixed_cmd->parsed()) {
            const auto config = build_config(flags);
            const auto calibration = calibration_for_sweep(config, calibration_dir);
            const auto outcome = sweep_fixed(config, calibration, dry_run);
            if (!dry_run)
                std::cout << "sweep-fixed: " << outcome.artifacts.size()
                          << " artifact(s) in " << outcome.dir.string() << "\n";
        } else if (sweep_resp_cmd->parsed()) {
            const auto config = build_config(flags);
            const auto calibration = calibration_for_sweep(config, calibration_dir);
            const auto outcome = sweep_responsive(config, calibration, dry_run);
            if (!dry_run)
                std::cout << "sweep-responsive: " << outcome.artifacts.size()
                          << " artifact(s) in " << outcome.dir.string() << "\n";
        } else if (synth->parsed()) {
            SynthConfig sc;
            sc.population = {synth_alpha, synth_beta};
            sc.n_items = synth_items;
            sc.ratings_per_item = synth_ratings;
            sc.seed = synth_seed;
            write_synthetic_dataset(sc, synth_out);
            std::cout << "wrote " << synth_out << " (" << synth_items << " items x "
                      << synth_ratings << " ratings)\n";
        } else if (report->parsed()) {
            const auto written = report_sweep(report_dir);
            std::cout << "report: rebuilt";
            for (const auto& name : written) std::cout << ' ' << name;
            std::cout << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
