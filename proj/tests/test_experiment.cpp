#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "ratelab/experiment.hpp"
#include "ratelab/io_util.hpp"
#include "ratelab/metrics.hpp"

using namespace ratelab;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name)
        : path(fs::temp_directory_path() / ("ratelab_exp_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

int run_cli(const std::string& args) {
    const std::string cmd = std::string(RATELAB_CLI_PATH) + " " + args;
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("config defaults mirror the experiment grids") {
    const auto config = resolve_config(ExperimentConfig{});
    CHECK(config.threshold == 0.40);
    CHECK(config.split.fraction == 0.40);
    CHECK(config.fixed.horizon == 50);
    CHECK(config.fixed.etas == std::vector<double>{0, 1, 10, 1000});
    CHECK(config.responsive.etas ==
          std::vector<double>{0.001, 1, 10, 50, 100, 500, 1000});
    CHECK(config.responsive.market_size == 5);
    CHECK(config.responsive.rho == 0.01);
    CHECK(config.responsive.percentile_grid.size() == 25);
    CHECK(*config.responsive.horizon == 5'000'000ULL);

    ExperimentConfig desk;
    desk.profile = "desk";
    CHECK(*resolve_config(desk).responsive.horizon == 500'000ULL);
}

TEST_CASE("config json round-trip is a fixed point") {
    ExperimentConfig config;
    config.dataset = "data.csv";
    config.prior_override = BetaPrior{2.5, 1.5};
    config.responsive.master_seeds = {3, 5};
    config.fixed.mode = "synthetic";
    const auto resolved = resolve_config(config);
    const auto text = config_to_json(resolved);
    const auto reparsed = resolve_config(config_from_json(text));
    CHECK(config_to_json(reparsed) == text);
}

TEST_CASE("responsive seeds derive from the master without eta") {
    const auto s1 = responsive_seeds(42);
    const auto s2 = responsive_seeds(42);
    CHECK(s1.market == s2.market);
    CHECK(s1.choice == s2.choice);
    CHECK(s1.feedback == s2.feedback);
    CHECK(s1.market != s1.choice);
    CHECK(s1.market != responsive_seeds(43).market);
}

TEST_CASE("synthetic dataset generation is deterministic and well-formed") {
    TempDir tmp("synth");
    SynthConfig synth;
    synth.population = {2.0, 2.0};
    synth.n_items = 50;
    synth.ratings_per_item = 40;
    synth.seed = 5;
    const auto path_a = tmp.path / "a.csv";
    const auto path_b = tmp.path / "b.csv";
    write_synthetic_dataset(synth, path_a);
    write_synthetic_dataset(synth, path_b);
    CHECK(hash_file(path_a) == hash_file(path_b));

    const auto result = ingest(path_a, 0.40);
    CHECK(result.items.size() == 50);
    for (const auto& item : result.items) CHECK(item.total == 40);
    CHECK_THROWS_AS(write_synthetic_dataset({{0.0, 1.0}, 5, 5, 1}, path_a),
                    std::invalid_argument);
}

TEST_CASE("synthetic item qualities track the population (uniform KS)") {
    TempDir tmp("synth_ks");
    SynthConfig synth;
    synth.population = {1.0, 1.0};
    synth.n_items = 10000;
    synth.ratings_per_item = 200;
    synth.seed = 11;
    const auto path = tmp.path / "uniform.csv";
    write_synthetic_dataset(synth, path);
    auto result = ingest(path, 0.40);
    std::vector<double> qualities;
    for (const auto& item : result.items) qualities.push_back(item.true_quality);
    std::sort(qualities.begin(), qualities.end());
    double ks = 0.0;
    const double n = static_cast<double>(qualities.size());
    for (std::size_t i = 0; i < qualities.size(); ++i) {
        const double lo = static_cast<double>(i) / n;
        const double hi = static_cast<double>(i + 1) / n;
        ks = std::max({ks, std::abs(qualities[i] - lo), std::abs(qualities[i] - hi)});
    }
    CHECK(ks < 0.02);
}

TEST_CASE("calibration pipeline on a synthetic dataset") {
    TempDir tmp("calib");
    SynthConfig synth;
    synth.population = {2.0, 2.0};
    synth.n_items = 600;
    synth.ratings_per_item = 300;
    synth.seed = 77;
    const auto dataset = tmp.path / "synth.csv";
    write_synthetic_dataset(synth, dataset);

    ExperimentConfig config;
    config.dataset = dataset.string();
    config.output_dir = (tmp.path / "out").string();
    config = resolve_config(config);
    const auto artifacts = run_calibration(config);
    CHECK(artifacts.fitted);
    CHECK(artifacts.train.items.size() == 360);
    CHECK(artifacts.test.items.size() == 240);
    // Population recovery through the full pipeline (finite ratings add a
    // touch of binomial widening, hence the loose band).
    CHECK(std::abs(artifacts.prior.alpha - 2.0) < 0.3);
    CHECK(std::abs(artifacts.prior.beta - 2.0) < 0.3);

    write_calibration(artifacts, fs::path(config.output_dir) / "calibration");
    const auto loaded = load_calibration(fs::path(config.output_dir) / "calibration");
    CHECK(loaded.prior.alpha == artifacts.prior.alpha);
    CHECK(loaded.prior.beta == artifacts.prior.beta);
    CHECK(loaded.test.items.size() == artifacts.test.items.size());
}

TEST_CASE("fixed and responsive sweeps write deterministic artifacts") {
    TempDir tmp("sweeps");
    SynthConfig synth;
    synth.population = {1.427, 0.592};
    synth.n_items = 260;
    synth.ratings_per_item = 80;
    synth.seed = 99;
    const auto dataset = tmp.path / "synth.csv";
    write_synthetic_dataset(synth, dataset);

    ExperimentConfig config;
    config.dataset = dataset.string();
    config.output_dir = (tmp.path / "out_a").string();
    config.fixed.horizon = 20;
    config.fixed.etas = {0, 1, 10};
    config.responsive.horizon = 4000;
    config.responsive.etas = {0.001, 10.0};
    config.responsive.master_seeds = {1};
    config.responsive.events = "ndjson";
    config.jobs = 2;
    config = resolve_config(config);

    const auto calibration = run_calibration(config);
    const auto fixed_a = sweep_fixed(config, calibration);
    const auto resp_a = sweep_responsive(config, calibration);
    CHECK(fs::exists(fixed_a.dir / "manifest.json"));
    CHECK(fs::exists(fixed_a.dir / "fig2.csv"));
    CHECK(fs::exists(fixed_a.dir / "fig3.csv"));
    CHECK(fs::exists(fixed_a.dir / "fig4.csv"));
    CHECK(fs::exists(resp_a.dir / "fig5.csv"));
    CHECK(fs::exists(resp_a.dir / "fig6.csv"));
    CHECK(fs::exists(resp_a.dir / "fig7.csv"));

    // fig5: one row per (eta, seed) plus header.
    std::ifstream fig5(resp_a.dir / "fig5.csv");
    std::string line;
    int rows = 0;
    while (std::getline(fig5, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 3);

    // fig2: one row per (eta, t) plus header.
    std::ifstream fig2(fixed_a.dir / "fig2.csv");
    rows = 0;
    while (std::getline(fig2, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 1 + 3 * 20);

    // Same config to a second directory: artifact checksums identical.
    config.output_dir = (tmp.path / "out_b").string();
    const auto fixed_b = sweep_fixed(config, calibration);
    const auto resp_b = sweep_responsive(config, calibration);
    for (const auto& name : fixed_a.artifacts)
        CHECK(hash_file(fixed_a.dir / name) == hash_file(fixed_b.dir / name));
    for (const auto& name : resp_a.artifacts)
        CHECK(hash_file(resp_a.dir / name) == hash_file(resp_b.dir / name));

    // report recomputes the same tables from persisted artifacts.
    const auto fig5_hash = hash_file(resp_a.dir / "fig5.csv");
    const auto fig6_hash = hash_file(resp_a.dir / "fig6.csv");
    const auto fig7_hash = hash_file(resp_a.dir / "fig7.csv");
    const auto fig2_hash = hash_file(fixed_a.dir / "fig2.csv");
    report_sweep(resp_a.dir);
    report_sweep(fixed_a.dir);
    CHECK(hash_file(resp_a.dir / "fig5.csv") == fig5_hash);
    CHECK(hash_file(resp_a.dir / "fig6.csv") == fig6_hash);
    CHECK(hash_file(resp_a.dir / "fig7.csv") == fig7_hash);
    CHECK(hash_file(fixed_a.dir / "fig2.csv") == fig2_hash);
}

TEST_CASE("synthetic-mode sweep emits and recomputes the decomposition table") {
    TempDir tmp("biasvar");
    SynthConfig synth;
    synth.population = {1.427, 0.592};
    synth.n_items = 120;
    synth.ratings_per_item = 60;
    synth.seed = 13;
    const auto dataset = tmp.path / "synth.csv";
    write_synthetic_dataset(synth, dataset);

    ExperimentConfig config;
    config.dataset = dataset.string();
    config.output_dir = (tmp.path / "out").string();
    config.fixed.horizon = 12;
    config.fixed.etas = {0, 1, 1000};
    config.fixed.mode = "synthetic";
    config.fixed.replications = 20;
    config = resolve_config(config);

    const auto calibration = run_calibration(config);
    const auto outcome = sweep_fixed(config, calibration);
    REQUIRE(fs::exists(outcome.dir / "biasvar.csv"));

    // Decomposition identity holds row by row in the emitted table.
    std::ifstream in(outcome.dir / "biasvar.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "eta,t,item_id,bias_sq,variance,mse");
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        const auto last = line.rfind(',');
        const auto mid = line.rfind(',', last - 1);
        const auto first = line.rfind(',', mid - 1);
        const double bias_sq = std::stod(line.substr(first + 1, mid - first - 1));
        const double variance = std::stod(line.substr(mid + 1, last - mid - 1));
        const double mse_val = std::stod(line.substr(last + 1));
        CHECK(std::abs(mse_val - (bias_sq + variance)) < 1e-10);
        ++rows;
    }
    CHECK(rows == 3 * 12 * calibration.test.items.size());

    // report regenerates the same bytes from trajectory.csv alone.
    const auto before = hash_file(outcome.dir / "biasvar.csv");
    report_sweep(outcome.dir);
    CHECK(hash_file(outcome.dir / "biasvar.csv") == before);
}

TEST_CASE("cli end-to-end: synth, calibrate, sweeps, report, dry-run") {
    TempDir tmp("cli");
    const auto dataset = (tmp.path / "data.csv").string();
    const auto out = (tmp.path / "out").string();

    CHECK(run_cli("synth --alpha 1.427 --beta 0.592 --items 220 --ratings-per-item 70 "
                  "--seed 4 --out " + dataset) == 0);
    CHECK(run_cli("calibrate --dataset " + dataset + " --output-dir " + out) == 0);
    CHECK(fs::exists(fs::path(out) / "calibration" / "prior.json"));

    // Dry run prints the plan and writes nothing.
    CHECK(run_cli("sweep-fixed --output-dir " + out +
                  " --horizon 10 --dry-run > /dev/null") == 0);
    CHECK(!fs::exists(fs::path(out) / "sweep-fixed"));

    CHECK(run_cli("sweep-fixed --output-dir " + out + " --horizon 10 > /dev/null") == 0);
    CHECK(fs::exists(fs::path(out) / "sweep-fixed" / "fig2.csv"));

    CHECK(run_cli("sweep-responsive --output-dir " + out +
                  " --horizon 2000 --etas 0.001 10 --master-seeds 1 > /dev/null") == 0);
    CHECK(fs::exists(fs::path(out) / "sweep-responsive" / "fig5.csv"));

    CHECK(run_cli("report --sweep " + out + "/sweep-responsive > /dev/null") == 0);

    // Exit codes: usage = 1, runtime = 2.
    CHECK(run_cli("no-such-verb 2> /dev/null") == 1);
    CHECK(run_cli("sweep-fixed --no-such-flag 2> /dev/null") == 1);
    const int missing = run_cli("calibrate --dataset " + (tmp.path / "absent.csv").string() +
                                " --output-dir " + out + " 2> " + (tmp.path / "err.txt").string());
    CHECK(missing == 2);
    std::ifstream err(tmp.path / "err.txt");
    std::string err_text((std::istreambuf_iterator<char>(err)),
                         std::istreambuf_iterator<char>());
    CHECK(err_text.find("absent.csv") != std::string::npos);  // diagnostic names the path
}

TEST_CASE("output root env var relocates relative output dirs") {
    TempDir tmp("envroot");
    setenv(kOutputRootEnv, tmp.path.c_str(), 1);
    ExperimentConfig config;
    config.output_dir = "nested/out";
    const auto resolved = resolve_config(config);
    unsetenv(kOutputRootEnv);
    CHECK(resolved.output_dir == (tmp.path / "nested/out").string());

    ExperimentConfig absolute;
    absolute.output_dir = "/tmp/absolute_out";
    setenv(kOutputRootEnv, tmp.path.c_str(), 1);
    CHECK(resolve_config(absolute).output_dir == "/tmp/absolute_out");
    unsetenv(kOutputRootEnv);
}
