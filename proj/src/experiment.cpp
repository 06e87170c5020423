#include "ratelab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "ratelab/io_util.hpp"

namespace ratelab {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<double> default_percentile_grid() {
    std::vector<double> grid;
    for (int p = 0; p < 100; p += 4) grid.push_back(p);
    return grid;
}

ExperimentConfig resolve_config(ExperimentConfig config) {
    if (config.profile != "full" && config.profile != "desk")
        throw std::invalid_argument("resolve_config: unknown profile " + config.profile);
    if (!config.responsive.horizon)
        config.responsive.horizon = config.profile == "desk" ? 500'000ULL : 5'000'000ULL;
    if (config.responsive.percentile_grid.empty())
        config.responsive.percentile_grid = default_percentile_grid();
    if (config.fixed.mode != "replay" && config.fixed.mode != "synthetic")
        throw std::invalid_argument("resolve_config: fixed.mode must be replay or synthetic");
    if (config.responsive.events != "none" && config.responsive.events != "ndjson" &&
        config.responsive.events != "binary")
        throw std::invalid_argument("resolve_config: responsive.events must be none|ndjson|binary");
    if (config.jobs == 0) config.jobs = 1;

    if (const char* root = std::getenv(kOutputRootEnv);
        root && *root && fs::path(config.output_dir).is_relative())
        config.output_dir = (fs::path(root) / config.output_dir).string();
    return config;
}

std::string config_to_json(const ExperimentConfig& c) {
    json j;
    j["dataset"] = c.dataset;
    j["threshold"] = c.threshold;
    j["split"] = {{"fraction", c.split.fraction}, {"seed", c.split.seed}};
    if (c.prior_override)
        j["prior"] = {{"alpha", c.prior_override->alpha}, {"beta", c.prior_override->beta}};
    else
        j["prior"] = "fit";
    j["fixed"] = {{"horizon", c.fixed.horizon},
                  {"etas", c.fixed.etas},
                  {"mode", c.fixed.mode},
                  {"replications", c.fixed.replications},
                  {"seed", c.fixed.seed}};
    json r;
    r["percentile_grid"] = c.responsive.percentile_grid;
    r["market_size"] = c.responsive.market_size;
    if (c.responsive.horizon) r["horizon"] = *c.responsive.horizon;
    r["rho"] = c.responsive.rho;
    r["etas"] = c.responsive.etas;
    r["master_seeds"] = c.responsive.master_seeds;
    r["early_k"] = c.responsive.early_k;
    r["events"] = c.responsive.events;
    j["responsive"] = std::move(r);
    j["output_dir"] = c.output_dir;
    j["profile"] = c.profile;
    j["jobs"] = c.jobs;
    return j.dump(2);
}

ExperimentConfig config_from_json(const std::string& text) {
    const auto j = json::parse(text);
    ExperimentConfig c;
    c.dataset = j.value("dataset", c.dataset);
    c.threshold = j.value("threshold", c.threshold);
    if (j.contains("split")) {
        c.split.fraction = j["split"].value("fraction", c.split.fraction);
        c.split.seed = j["split"].value("seed", c.split.seed);
    }
    if (j.contains("prior") && j["prior"].is_object())
        c.prior_override = BetaPrior{j["prior"].at("alpha").get<double>(),
                                     j["prior"].at("beta").get<double>()};
    if (j.contains("fixed")) {
        const auto& f = j["fixed"];
        c.fixed.horizon = f.value("horizon", c.fixed.horizon);
        if (f.contains("etas")) c.fixed.etas = f["etas"].get<std::vector<double>>();
        c.fixed.mode = f.value("mode", c.fixed.mode);
        c.fixed.replications = f.value("replications", c.fixed.replications);
        c.fixed.seed = f.value("seed", c.fixed.seed);
    }
    if (j.contains("responsive")) {
        const auto& r = j["responsive"];
        if (r.contains("percentile_grid"))
            c.responsive.percentile_grid = r["percentile_grid"].get<std::vector<double>>();
        c.responsive.market_size = r.value("market_size", c.responsive.market_size);
        if (r.contains("horizon")) c.responsive.horizon = r["horizon"].get<std::uint64_t>();
        c.responsive.rho = r.value("rho", c.responsive.rho);
        if (r.contains("etas")) c.responsive.etas = r["etas"].get<std::vector<double>>();
        if (r.contains("master_seeds"))
            c.responsive.master_seeds = r["master_seeds"].get<std::vector<std::uint64_t>>();
        c.responsive.early_k = r.value("early_k", c.responsive.early_k);
        c.responsive.events = r.value("events", c.responsive.events);
    }
    c.output_dir = j.value("output_dir", c.output_dir);
    c.profile = j.value("profile", c.profile);
    c.jobs = j.value("jobs", c.jobs);
    return c;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_config: cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return config_from_json(text);
}

ResponsiveSeeds responsive_seeds(std::uint64_t master_seed) {
    return {derive_seed(master_seed, "responsive-market"),
            derive_seed(master_seed, "responsive-choice"),
            derive_seed(master_seed, "responsive-feedback")};
}

// --- calibration ---------------------------------------------------------------

CalibrationArtifacts run_calibration(const ExperimentConfig& config) {
    if (config.dataset.empty())
        throw std::invalid_argument("run_calibration: no dataset configured");
    auto ingested = ingest(config.dataset, config.threshold);
    CalibrationArtifacts artifacts;
    artifacts.dataset_hash = ingested.dataset_hash;
    artifacts.duplicates_dropped = ingested.duplicates_dropped;
    artifacts.warnings = std::move(ingested.warnings);

    auto [train, test] =
        train_test_split(ingested.items, config.split.fraction, config.split.seed);
    train.provenance.dataset_hash = ingested.dataset_hash;
    train.provenance.threshold = config.threshold;
    test.provenance.dataset_hash = ingested.dataset_hash;
    test.provenance.threshold = config.threshold;
    artifacts.train = std::move(train);
    artifacts.test = std::move(test);

    if (config.prior_override) {
        artifacts.prior = *config.prior_override;
        artifacts.fitted = false;
    } else {
        std::vector<double> values;
        values.reserve(artifacts.train.items.size());
        for (const auto& item : artifacts.train.items) values.push_back(item.true_quality);
        const auto corrected = inflation_correct(values, values.size());
        artifacts.fit = fit_beta_mle(corrected);
        artifacts.prior = artifacts.fit.prior;
        artifacts.fitted = true;
    }
    return artifacts;
}

namespace {

json prior_json(const CalibrationArtifacts& a) {
    json j;
    j["alpha"] = a.prior.alpha;
    j["beta"] = a.prior.beta;
    j["fitted"] = a.fitted;
    if (a.fitted) {
        j["fit"] = {{"iterations", a.fit.iterations},
                    {"loglik", a.fit.loglik},
                    {"init_loglik", a.fit.init_loglik},
                    {"init_alpha", a.fit.init.alpha},
                    {"init_beta", a.fit.init.beta},
                    {"used_fallback", a.fit.used_fallback}};
    }
    j["provenance"] = {{"dataset_hash", hex64(a.dataset_hash)},
                       {"threshold", a.train.provenance.threshold},
                       {"split_seed", a.train.provenance.split_seed},
                       {"split_fraction", a.train.provenance.split_fraction},
                       {"n_train_items", a.train.items.size()},
                       {"duplicates_dropped", a.duplicates_dropped}};
    return j;
}

}  // namespace

void write_calibration(const CalibrationArtifacts& artifacts, const fs::path& dir) {
    fs::create_directories(dir);
    save_universe(artifacts.train, dir / "train.json");
    save_universe(artifacts.test, dir / "test.json");
    atomic_write_file(dir / "prior.json", prior_json(artifacts).dump(2) + "\n");
}

CalibrationArtifacts load_calibration(const fs::path& dir) {
    CalibrationArtifacts artifacts;
    artifacts.train = load_universe(dir / "train.json");
    artifacts.test = load_universe(dir / "test.json");
    std::ifstream in(dir / "prior.json", std::ios::binary);
    if (!in) throw std::runtime_error("load_calibration: cannot open " + (dir / "prior.json").string());
    const auto j = json::parse(in);
    artifacts.prior = {j.at("alpha").get<double>(), j.at("beta").get<double>()};
    artifacts.fitted = j.value("fitted", false);
    artifacts.dataset_hash = artifacts.train.provenance.dataset_hash;
    return artifacts;
}

// --- synthetic dataset -----------------------------------------------------------

void write_synthetic_dataset(const SynthConfig& synth, const fs::path& path) {
    if (!synth.population.positive())
        throw std::invalid_argument("write_synthetic_dataset: population parameters must be positive");
    if (synth.n_items == 0 || synth.ratings_per_item == 0)
        throw std::invalid_argument("write_synthetic_dataset: counts must be positive");

    RngStream quality_rng(derive_seed(synth.seed, "synth-quality"));
    std::vector<double> quality(synth.n_items);
    for (auto& q : quality)
        q = quality_rng.beta(synth.population.alpha, synth.population.beta);

    RngStream rating_rng(derive_seed(synth.seed, "synth-ratings"));
    const int width = static_cast<int>(std::to_string(synth.n_items - 1).size());
    const int uwidth = static_cast<int>(std::to_string(synth.ratings_per_item - 1).size());
    std::vector<std::string> item_ids(synth.n_items);
    for (std::size_t i = 0; i < synth.n_items; ++i) {
        std::string id = std::to_string(i);
        item_ids[i] = "item_" + std::string(static_cast<std::size_t>(width) - id.size(), '0') + id;
    }

    std::string out;
    out.reserve(1 << 20);
    out += "user_id,item_id,watch_ratio,timestamp\n";

    fs::path tmp = path;
    tmp += ".tmp";
    std::ofstream file(tmp, std::ios::binary | std::ios::trunc);
    if (!file) throw std::runtime_error("write_synthetic_dataset: cannot write " + tmp.string());

    std::uint64_t timestamp = 0;
    for (std::size_t u = 0; u < synth.ratings_per_item; ++u) {
        std::string uid = std::to_string(u);
        const std::string user = "user_" + std::string(static_cast<std::size_t>(uwidth) - uid.size(), '0') + uid;
        for (std::size_t i = 0; i < synth.n_items; ++i) {
            const bool like = rating_rng.bernoulli(quality[i]);
            // Watch ratios land on the right side of the 0.40 cutoff; likes
            // may exceed 1 the way replayed videos do.
            const double ratio = like ? 0.4 + 1.6 * rating_rng.uniform01()
                                      : 0.4 * rating_rng.uniform01();
            out += user;
            out += ',';
            out += item_ids[i];
            out += ',';
            append_double(out, ratio);
            out += ',';
            out += std::to_string(timestamp++);
            out += '\n';
            if (out.size() > (1 << 20)) {
                file.write(out.data(), static_cast<std::streamsize>(out.size()));
                out.clear();
            }
        }
    }
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    file.flush();
    if (!file) throw std::runtime_error("write_synthetic_dataset: write failed for " + tmp.string());
    file.close();
    fs::rename(tmp, path);
}

// --- sweeps ----------------------------------------------------------------------

namespace {

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const auto t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json manifest_base(const std::string& kind, const ExperimentConfig& config,
                   const CalibrationArtifacts& calibration) {
    json m;
    m["kind"] = kind;
    m["version"] = kVersion;
    m["config"] = json::parse(config_to_json(config));
    m["dataset_hash"] = hex64(calibration.dataset_hash);
    m["prior"] = {{"alpha", calibration.prior.alpha}, {"beta", calibration.prior.beta}};
    return m;
}

void finish_manifest(json& manifest, const fs::path& dir,
                     const std::vector<std::string>& artifacts, double wall_seconds) {
    json checks;
    for (const auto& name : artifacts) checks[name] = hex64(hash_file(dir / name));
    manifest["artifacts"] = std::move(checks);
    manifest["wall_clock_seconds"] = wall_seconds;
    manifest["written_at"] = timestamp_utc();
    atomic_write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

std::string eta_label(double eta) {
    std::string s = format_double(eta);
    for (auto& ch : s)
        if (ch == '.') ch = 'p';
    return s;
}

}  // namespace

SweepOutcome sweep_fixed(const ExperimentConfig& config,
                         const CalibrationArtifacts& calibration, bool dry_run) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir = fs::path(config.output_dir) / "sweep-fixed";

    FixedRunConfig run;
    run.horizon = config.fixed.horizon;
    run.eta_grid = config.fixed.etas;
    run.source = config.fixed.mode == "replay" ? RatingSource::replay : RatingSource::synthetic;
    run.replications = config.fixed.mode == "replay" ? 1 : config.fixed.replications;
    run.seed = config.fixed.seed;
    run.threads = config.jobs;

    Universe universe = calibration.test;
    std::size_t excluded = 0;
    if (run.source == RatingSource::replay) {
        auto filtered = filter_replay_universe(universe, run.horizon);
        excluded = filtered.excluded;
        universe = std::move(filtered.universe);
    }

    if (dry_run) {
        std::cout << "sweep-fixed plan: " << universe.items.size() << " items, horizon "
                  << run.horizon << ", mode " << config.fixed.mode << ", "
                  << run.eta_grid.size() << " etas, " << run.replications
                  << " replication(s); " << excluded << " item(s) short of the horizon\n";
        std::cout << config_to_json(config) << "\n";
        return {dir, {}};
    }
    if (excluded > 0)
        std::cerr << "sweep-fixed: excluded " << excluded
                  << " item(s) with fewer than " << run.horizon << " ratings\n";

    fs::create_directories(dir);
    try {
        const auto traj = run_fixed(universe, calibration.prior, run);

        std::vector<std::string> artifacts;
        auto write_table = [&](const std::string& name, auto&& writer) {
            std::ostringstream os;
            writer(os);
            atomic_write_file(dir / name, os.str());
            artifacts.push_back(name);
        };
        write_table("trajectory.csv", [&](std::ostream& os) { write_trajectory_csv(traj, os); });
        write_table("fig2.csv", [&](std::ostream& os) { write_fig2_csv(traj, os); });
        if (universe.items.size() >= 10)
            write_table("fig3.csv", [&](std::ostream& os) { write_fig3_csv(traj, os); });
        write_table("fig4.csv", [&](std::ostream& os) { write_fig4_csv(traj, os); });
        if (run.source == RatingSource::synthetic && run.replications >= 2)
            write_table("biasvar.csv", [&](std::ostream& os) { write_biasvar_csv(traj, os); });

        auto manifest = manifest_base("sweep-fixed", config, calibration);
        manifest["excluded_replay_items"] = excluded;
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        finish_manifest(manifest, dir, artifacts, wall);
        return {dir, artifacts};
    } catch (...) {
        fs::remove_all(dir);
        throw;
    }
}

namespace {

struct ResponsiveCell {
    double eta;
    std::uint64_t master_seed;
    std::string label;
};

struct CellResult {
    ResponsiveSummaryRow summary;
    std::vector<QuartileSummaryRow> quartiles;
    std::vector<EarlyPerformanceCell> early_cells;
};

}  // namespace

SweepOutcome sweep_responsive(const ExperimentConfig& config,
                              const CalibrationArtifacts& calibration, bool dry_run) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir = fs::path(config.output_dir) / "sweep-responsive";
    if (!config.responsive.horizon)
        throw std::invalid_argument("sweep_responsive: config not resolved (no horizon)");

    const Universe universe =
        percentile_resample(calibration.test, config.responsive.percentile_grid);

    std::vector<ResponsiveCell> cells;
    for (std::uint64_t seed : config.responsive.master_seeds)
        for (double eta : config.responsive.etas)
            cells.push_back({eta, seed,
                             "eta_" + eta_label(eta) + "_seed_" + std::to_string(seed)});

    if (dry_run) {
        std::cout << "sweep-responsive plan: universe " << universe.items.size()
                  << " items, market " << config.responsive.market_size << ", horizon "
                  << *config.responsive.horizon << ", rho " << config.responsive.rho
                  << ", cells:\n";
        for (const auto& cell : cells) std::cout << "  " << cell.label << "\n";
        std::cout << config_to_json(config) << "\n";
        return {dir, {}};
    }

    fs::create_directories(dir);
    try {
        std::vector<std::string> artifacts;
        save_universe(universe, dir / "universe.json");
        artifacts.push_back("universe.json");

        std::vector<CellResult> results(cells.size());
        std::vector<std::vector<std::string>> cell_artifacts(cells.size());
        std::atomic<std::size_t> next{0};
        std::mutex failure_mutex;
        std::string failure;

        auto run_cell = [&](std::size_t index) {
            const auto& cell = cells[index];
            ResponsiveRunConfig rc;
            rc.market_size = config.responsive.market_size;
            rc.horizon = *config.responsive.horizon;
            rc.exit_prob = config.responsive.rho;
            rc.eta = cell.eta;
            rc.seeds = responsive_seeds(cell.master_seed);
            rc.early_k = config.responsive.early_k;
            rc.keep_entries = false;

            const fs::path cell_dir = dir / "cells" / cell.label;
            fs::create_directories(cell_dir);

            RegretAccumulator regret;
            std::unique_ptr<EventLogWriter> writer;
            StepObserver observer;
            if (config.responsive.events == "none") {
                observer = [&regret](const LogEntry& e) { regret.add(e); };
            } else {
                const bool ndjson = config.responsive.events == "ndjson";
                writer = std::make_unique<EventLogWriter>(
                    cell_dir / (ndjson ? "events.ndjson" : "events.bin"),
                    ndjson ? LogFormat::ndjson : LogFormat::binary);
                observer = [&regret, &writer](const LogEntry& e) {
                    regret.add(e);
                    writer->write(e);
                };
            }

            EventLog log = run_responsive(universe, calibration.prior, rc, observer);
            if (writer) writer->close();
            save_registry_csv(log, cell_dir / "registry.csv");

            json cell_meta;
            cell_meta["eta"] = cell.eta;
            cell_meta["master_seed"] = cell.master_seed;
            cell_meta["seeds"] = {{"market", rc.seeds.market},
                                  {"choice", rc.seeds.choice},
                                  {"feedback", rc.seeds.feedback}};
            cell_meta["horizon"] = rc.horizon;
            cell_meta["market_size"] = rc.market_size;
            cell_meta["rho"] = rc.exit_prob;
            cell_meta["early_k"] = rc.early_k;
            cell_meta["events"] = config.responsive.events;
            cell_meta["effective_prior"] = {{"alpha", log.effective_prior.alpha},
                                            {"beta", log.effective_prior.beta}};
            atomic_write_file(cell_dir / "cell.json", cell_meta.dump(2) + "\n");

            const auto fairness = fairness_std(log.registry, log.items, FairnessGrouping::by_item);
            CellResult result;
            result.summary = {cell.eta, cell.master_seed, regret.total(),
                              fairness.marketplace_avg_std};
            result.quartiles = quartile_summary(log.registry, log.items, cell.eta, cell.master_seed);
            result.early_cells =
                early_performance_effect(log.registry, log.items, config.responsive.early_k);
            results[index] = std::move(result);

            auto& named = cell_artifacts[index];
            named.push_back("cells/" + cell.label + "/registry.csv");
            named.push_back("cells/" + cell.label + "/cell.json");
            if (config.responsive.events == "ndjson")
                named.push_back("cells/" + cell.label + "/events.ndjson");
            else if (config.responsive.events == "binary")
                named.push_back("cells/" + cell.label + "/events.bin");
        };

        auto worker = [&] {
            for (;;) {
                const std::size_t index = next.fetch_add(1);
                if (index >= cells.size()) return;
                {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure.empty()) return;
                }
                try {
                    run_cell(index);
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (failure.empty())
                        failure = "cell " + cells[index].label + " failed: " + e.what();
                }
            }
        };

        const unsigned n_threads =
            std::min<unsigned>(std::max(1u, config.jobs), static_cast<unsigned>(cells.size()));
        if (n_threads == 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            pool.reserve(n_threads);
            for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
            for (auto& th : pool) th.join();
        }
        if (!failure.empty()) throw std::runtime_error("sweep_responsive: " + failure);

        for (const auto& named : cell_artifacts)
            artifacts.insert(artifacts.end(), named.begin(), named.end());

        // Figure tables, cell order (seed-major, eta ascending within seed).
        std::vector<ResponsiveSummaryRow> fig5_rows;
        std::vector<QuartileSummaryRow> fig6_rows;
        std::vector<EarlyPerformanceRow> fig7_rows;
        for (const auto& result : results) {
            fig5_rows.push_back(result.summary);
            fig6_rows.insert(fig6_rows.end(), result.quartiles.begin(), result.quartiles.end());
            for (const auto& cell : result.early_cells)
                fig7_rows.push_back({result.summary.eta, cell.likes,
                                     cell.mean_subsequent_play_ratio, cell.count});
        }
        auto write_table = [&](const std::string& name, auto&& writer) {
            std::ostringstream os;
            writer(os);
            atomic_write_file(dir / name, os.str());
            artifacts.push_back(name);
        };
        write_table("fig5.csv", [&](std::ostream& os) { write_fig5_csv(fig5_rows, os); });
        write_table("fig6.csv", [&](std::ostream& os) { write_fig6_csv(fig6_rows, os); });
        write_table("fig7.csv", [&](std::ostream& os) { write_fig7_csv(fig7_rows, os); });

        auto manifest = manifest_base("sweep-responsive", config, calibration);
        json seed_block = json::array();
        for (const auto& cell : cells) {
            const auto seeds = responsive_seeds(cell.master_seed);
            seed_block.push_back({{"cell", cell.label},
                                  {"market", seeds.market},
                                  {"choice", seeds.choice},
                                  {"feedback", seeds.feedback}});
        }
        manifest["cell_seeds"] = std::move(seed_block);
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        finish_manifest(manifest, dir, artifacts, wall);
        return {dir, artifacts};
    } catch (...) {
        fs::remove_all(dir);
        throw;
    }
}

// --- report ----------------------------------------------------------------------

std::vector<std::string> report_sweep(const fs::path& sweep_dir) {
    std::ifstream in(sweep_dir / "manifest.json", std::ios::binary);
    if (!in)
        throw std::runtime_error("report_sweep: no manifest in " + sweep_dir.string());
    const auto manifest = json::parse(in);
    const std::string kind = manifest.at("kind").get<std::string>();
    std::vector<std::string> written;

    auto write_table = [&](const std::string& name, auto&& writer) {
        std::ostringstream os;
        writer(os);
        atomic_write_file(sweep_dir / name, os.str());
        written.push_back(name);
    };

    if (kind == "sweep-fixed") {
        const auto traj = load_trajectory_csv(sweep_dir / "trajectory.csv");
        write_table("fig2.csv", [&](std::ostream& os) { write_fig2_csv(traj, os); });
        if (traj.item_ids.size() >= 10)
            write_table("fig3.csv", [&](std::ostream& os) { write_fig3_csv(traj, os); });
        write_table("fig4.csv", [&](std::ostream& os) { write_fig4_csv(traj, os); });
        if (traj.replications >= 2)
            write_table("biasvar.csv", [&](std::ostream& os) { write_biasvar_csv(traj, os); });
        return written;
    }
    if (kind != "sweep-responsive")
        throw std::runtime_error("report_sweep: unknown sweep kind " + kind);

    const Universe universe = load_universe(sweep_dir / "universe.json");
    ItemTable items;
    for (const auto& item : universe.items) {
        items.ids.push_back(item.item_id);
        items.quality.push_back(item.true_quality);
    }
    const std::uint32_t early_k =
        manifest.at("config").at("responsive").value("early_k", 4u);

    std::vector<ResponsiveSummaryRow> fig5_rows;
    std::vector<QuartileSummaryRow> fig6_rows;
    std::vector<EarlyPerformanceRow> fig7_rows;
    bool have_events = true;

    const auto& cfg = manifest.at("config").at("responsive");
    for (const auto& seed_json : cfg.at("master_seeds")) {
        const auto master_seed = seed_json.get<std::uint64_t>();
        for (const auto& eta_json : cfg.at("etas")) {
            const double eta = eta_json.get<double>();
            const std::string label = "eta_" + eta_label(eta) + "_seed_" + std::to_string(master_seed);
            const fs::path cell_dir = sweep_dir / "cells" / label;
            const auto registry = load_registry_csv(cell_dir / "registry.csv", items);

            const auto fairness = fairness_std(registry, items, FairnessGrouping::by_item);
            double regret = 0.0;
            if (fs::exists(cell_dir / "events.ndjson"))
                regret = total_regret(read_event_entries(cell_dir / "events.ndjson", LogFormat::ndjson));
            else if (fs::exists(cell_dir / "events.bin"))
                regret = total_regret(read_event_entries(cell_dir / "events.bin", LogFormat::binary));
            else
                have_events = false;
            fig5_rows.push_back({eta, master_seed, regret, fairness.marketplace_avg_std});

            const auto quartiles = quartile_summary(registry, items, eta, master_seed);
            fig6_rows.insert(fig6_rows.end(), quartiles.begin(), quartiles.end());
            for (const auto& cell : early_performance_effect(registry, items, early_k))
                fig7_rows.push_back({eta, cell.likes, cell.mean_subsequent_play_ratio, cell.count});
        }
    }
    if (have_events)
        write_table("fig5.csv", [&](std::ostream& os) { write_fig5_csv(fig5_rows, os); });
    else
        std::cerr << "report: event streams absent; fig5 regret not recomputable, skipping\n";
    write_table("fig6.csv", [&](std::ostream& os) { write_fig6_csv(fig6_rows, os); });
    write_table("fig7.csv", [&](std::ostream& os) { write_fig7_csv(fig7_rows, os); });
    return written;
}

}  // namespace ratelab
