#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "ratelab/experiment.hpp"
#include "ratelab/metrics.hpp"

using namespace ratelab;

namespace {

Universe quality_universe(const std::vector<double>& qualities) {
    Universe u;
    for (std::size_t i = 0; i < qualities.size(); ++i) {
        ItemProfile item;
        item.item_id = "item_" + std::to_string(i);
        item.true_quality = qualities[i];
        item.likes = static_cast<std::uint64_t>(qualities[i] * 1000.0);
        item.total = 1000;
        u.items.push_back(std::move(item));
    }
    return u;
}

InstanceRecord make_record(std::uint64_t id, std::uint32_t item, double q,
                           std::uint64_t birth, std::uint64_t death, std::uint64_t likes,
                           std::uint64_t total, std::uint32_t first_k_likes = 0,
                           std::uint64_t kth_t = 0) {
    InstanceRecord rec;
    rec.instance_id = id;
    rec.item_index = item;
    rec.quality = q;
    rec.birth_t = birth;
    rec.death_t = death;
    rec.likes = likes;
    rec.total = total;
    rec.likes_in_first_k = first_k_likes;
    rec.kth_rating_t = kth_t;
    return rec;
}

}  // namespace

TEST_CASE("mse basics") {
    EstimateTrajectory traj;
    traj.etas = {0.0};
    traj.item_ids = {"a", "b"};
    traj.true_quality = {0.0, 1.0};
    traj.horizon = 1;
    traj.replications = 1;

    traj.estimates = {0.0, 1.0};  // perfect
    CHECK(mse(traj, 1, 0.0) == 0.0);

    traj.estimates = {0.5, 0.5};  // constant 0.5 against {0,1}
    CHECK(mse(traj, 1, 0.0) == doctest::Approx(0.25));

    CHECK_THROWS_AS(mse(traj, 2, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(mse(traj, 1, 3.0), std::invalid_argument);
}

TEST_CASE("replay mse at t=1 against a brute-force recomputation") {
    std::vector<double> qualities{0.1, 0.35, 0.6, 0.92};
    Universe universe = quality_universe(qualities);
    // Hand-build replay ratings: first rating per item 1,0,1,0.
    const std::vector<std::uint8_t> first{1, 0, 1, 0};
    for (std::size_t i = 0; i < universe.items.size(); ++i)
        universe.items[i].ordered_ratings.assign(5, first[i]);

    FixedRunConfig config;
    config.horizon = 1;
    config.eta_grid = {0.0};
    const auto traj = run_fixed(universe, {1.427, 0.592}, config);

    double expected = 0.0;  // independent loop, sample-mean estimator at t=1
    for (std::size_t i = 0; i < qualities.size(); ++i) {
        const double est = static_cast<double>(first[i]);
        expected += (est - qualities[i]) * (est - qualities[i]);
    }
    expected /= static_cast<double>(qualities.size());
    CHECK(mse(traj, 1, 0.0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("bias_variance decomposition identity and known limits") {
    const auto universe = quality_universe({0.5, 0.707, 0.9});
    const BetaPrior base{1.427, 0.592};
    FixedRunConfig config;
    config.horizon = 50;
    config.eta_grid = {0.0, 1.0, 1000.0};
    config.source = RatingSource::synthetic;
    config.replications = 200;
    config.seed = 17;
    const auto traj = run_fixed(universe, base, config);

    for (double eta : config.eta_grid) {
        for (std::size_t item = 0; item < universe.items.size(); ++item) {
            for (std::uint32_t t = 1; t <= 50; t += 7) {
                const auto cell = bias_variance(traj, item, t, eta);
                CHECK(std::abs(cell.mse - (cell.bias_sq + cell.variance)) < 1e-10);
            }
        }
    }

    // eta = 1000: variance pinned near zero for every cell.
    for (std::size_t item = 0; item < universe.items.size(); ++item)
        for (std::uint32_t t = 1; t <= 50; ++t)
            CHECK(bias_variance(traj, item, t, 1000.0).variance <= 1e-4);

    // eta = 0, t = 1, q = 0.5: variance of a single Bernoulli ~ 0.25.
    const auto bernoulli = bias_variance(traj, 0, 1, 0.0);
    // 3 SE of a Bernoulli(0.5) sample variance over 200 replications.
    CHECK(std::abs(bernoulli.variance - 0.25) < 3.0 * 0.0018);

    // q at the prior mean: bias_sq small at eta = 1.
    const auto unbiased = bias_variance(traj, 1, 50, 1.0);
    CHECK(unbiased.bias_sq < 1e-3);

    CHECK_THROWS_AS(bias_variance(EstimateTrajectory{}, 0, 1, 0.0), std::invalid_argument);
}

TEST_CASE("total_regret basics and accumulator equivalence") {
    std::vector<LogEntry> entries;
    for (int t = 0; t < 10; ++t) {
        LogEntry e;
        e.t = static_cast<std::uint64_t>(t + 1);
        e.best_market_quality = 0.9;
        e.chosen_quality = (t % 2 == 0) ? 0.9 : 0.5;
        entries.push_back(e);
    }
    CHECK(total_regret(entries) == doctest::Approx(5 * 0.4));

    for (auto& e : entries) e.chosen_quality = e.best_market_quality;
    CHECK(total_regret(entries) == 0.0);

    RegretAccumulator acc;
    for (const auto& e : entries) acc.add(e);
    CHECK(acc.total() == total_regret(entries));
}

TEST_CASE("regret survives a serialization round-trip bit-exactly") {
    const auto universe = quality_universe({0.1, 0.4, 0.55, 0.72, 0.81, 0.93, 0.97});
    ResponsiveRunConfig config;
    config.market_size = 3;
    config.horizon = 5000;
    config.exit_prob = 0.02;
    config.eta = 1.0;
    config.seeds = responsive_seeds(404);
    config.keep_entries = true;
    const auto log = run_responsive(universe, {1.427, 0.592}, config);
    const double direct = total_regret(log);

    for (const auto format : {LogFormat::ndjson, LogFormat::binary}) {
        const auto path = std::filesystem::temp_directory_path() / "ratelab_regret_log";
        {
            EventLogWriter writer(path, format);
            for (const auto& e : log.entries) writer.write(e);
            writer.close();
        }
        const auto loaded = read_event_entries(path, format);
        CHECK(total_regret(loaded) == direct);
        std::filesystem::remove(path);
    }
}

TEST_CASE("play_ratio") {
    CHECK(play_ratio(make_record(0, 0, 0.5, 1, 101, 50, 100)) == doctest::Approx(1.0));
    CHECK(play_ratio(make_record(0, 0, 0.5, 1, 101, 0, 0)) == 0.0);
    CHECK(play_ratio(make_record(0, 0, 0.5, 1, 101, 10, 25)) == doctest::Approx(0.25));
    CHECK(play_ratio(make_record(0, 0, 0.5, 5, 105, 100, 100)) == doctest::Approx(1.0));
}

TEST_CASE("fairness_std by item") {
    ItemTable items;
    items.ids = {"a", "b"};
    items.quality = {0.3, 0.8};
    std::vector<InstanceRecord> registry{
        // item a: play ratios 0.2 and 0.4 -> std 0.1414, mean 0.3
        make_record(0, 0, 0.3, 1, 11, 1, 2),
        make_record(1, 0, 0.3, 11, 21, 2, 4),
        // item b: identical ratios -> std 0
        make_record(2, 1, 0.8, 1, 11, 5, 5),
        make_record(3, 1, 0.8, 11, 21, 5, 5),
    };
    const auto report = fairness_std(registry, items, FairnessGrouping::by_item);
    REQUIRE(report.groups.size() == 2);
    CHECK(report.groups[0].label == "a");
    CHECK(report.groups[0].mean == doctest::Approx(0.3));
    CHECK(*report.groups[0].std == doctest::Approx(std::sqrt(0.02)));  // 0.14142...
    CHECK(*report.groups[1].std == 0.0);
    CHECK(report.marketplace_avg_std ==
          doctest::Approx((std::sqrt(0.02) + 0.0) / 2.0));
    CHECK(report.groups_without_std == 0);
}

TEST_CASE("fairness_std skips singleton groups and reports counts") {
    ItemTable items;
    items.ids = {"a", "b"};
    items.quality = {0.3, 0.8};
    std::vector<InstanceRecord> registry{
        make_record(0, 0, 0.3, 1, 11, 1, 2),
        make_record(1, 0, 0.3, 11, 21, 2, 4),
        make_record(2, 1, 0.8, 1, 11, 5, 5),  // singleton: no std
    };
    const auto report = fairness_std(registry, items, FairnessGrouping::by_item);
    CHECK(report.groups_without_std == 1);
    CHECK(report.marketplace_avg_std == doctest::Approx(std::sqrt(0.02)));
    CHECK_THROWS_AS(fairness_std({}, items, FairnessGrouping::by_item), std::invalid_argument);
}

TEST_CASE("fairness_std is permutation-invariant") {
    ItemTable items;
    items.ids = {"a", "b", "c", "d"};
    items.quality = {0.2, 0.4, 0.6, 0.8};
    std::vector<InstanceRecord> registry;
    RngStream rng(541);
    std::uint64_t id = 0;
    for (std::uint32_t item = 0; item < 4; ++item)
        for (int i = 0; i < 20; ++i) {
            const std::uint64_t life = 10 + rng.uniform_index(90);
            const auto total = static_cast<std::uint64_t>(rng.uniform_index(life + 1));
            registry.push_back(
                make_record(id++, item, items.quality[item], 1, 1 + life, total / 2, total));
        }
    const auto base = fairness_std(registry, items, FairnessGrouping::by_item);
    auto shuffled = registry;
    for (std::size_t i = shuffled.size() - 1; i > 0; --i)
        std::swap(shuffled[i], shuffled[rng.uniform_index(i + 1)]);
    const auto permuted = fairness_std(shuffled, items, FairnessGrouping::by_item);
    CHECK(base.marketplace_avg_std == doctest::Approx(permuted.marketplace_avg_std).epsilon(1e-12));
    for (std::size_t g = 0; g < base.groups.size(); ++g) {
        CHECK(base.groups[g].label == permuted.groups[g].label);
        CHECK(base.groups[g].mean == doctest::Approx(permuted.groups[g].mean).epsilon(1e-12));
    }
}

TEST_CASE("quartile grouping ranks by quality with id tie-break") {
    ItemTable items;
    items.ids = {"d", "c", "b", "a"};
    items.quality = {0.9, 0.1, 0.5, 0.5};
    const auto quartile = quality_quartiles(items);
    CHECK(quartile[1] == 0);  // c lowest
    CHECK(quartile[3] == 1);  // a before b on ties
    CHECK(quartile[2] == 2);
    CHECK(quartile[0] == 3);  // d highest
}

TEST_CASE("ratings conservation: registry totals sum to the horizon") {
    const auto universe = quality_universe({0.2, 0.5, 0.62, 0.74, 0.81, 0.88, 0.94});
    ResponsiveRunConfig config;
    config.market_size = 4;
    config.horizon = 20000;
    config.exit_prob = 0.02;
    config.eta = 1.0;
    config.seeds = responsive_seeds(1009);
    const auto log = run_responsive(universe, {1.427, 0.592}, config);
    std::uint64_t total = 0;
    for (const auto& rec : log.registry) total += rec.total;
    CHECK(total == config.horizon);  // exactly one rating per timestep
}

TEST_CASE("early performance cells from hand-built registry") {
    ItemTable items;
    items.ids = {"low", "mid", "high", "top"};
    items.quality = {0.1, 0.4, 0.7, 0.95};
    std::vector<InstanceRecord> registry;
    // Top-quartile item 3. First 4 plays all likes at t=30, then 10 ratings
    // over the remaining 20 alive-steps (death 51 => last alive 50).
    registry.push_back(make_record(0, 3, 0.95, 1, 51, 14, 14, 4, 30));
    // 2 likes in first 4, k-th rating at t=40, death 46: 5 remaining steps, 5 ratings.
    registry.push_back(make_record(1, 3, 0.95, 1, 46, 6, 9, 2, 40));
    // k-th rating on the final alive step: skipped (no remaining lifespan).
    registry.push_back(make_record(2, 3, 0.95, 1, 31, 4, 4, 4, 30));
    // Not top quartile: ignored even with extras.
    registry.push_back(make_record(3, 0, 0.1, 1, 51, 4, 10, 4, 10));
    // Fewer than 4 ratings: ignored.
    registry.push_back(make_record(4, 3, 0.95, 1, 51, 2, 3, 2, 0));

    const auto cells = early_performance_effect(registry, items, 4);
    REQUIRE(cells.size() == 2);
    CHECK(cells[0].likes == 2);
    CHECK(cells[0].count == 1);
    CHECK(cells[0].mean_subsequent_play_ratio == doctest::Approx(1.0));  // 5/5
    CHECK(cells[1].likes == 4);
    CHECK(cells[1].count == 1);
    CHECK(cells[1].mean_subsequent_play_ratio == doctest::Approx(0.5));  // 10/20
}

TEST_CASE("early performance from registry extras matches the log recomputation") {
    const auto universe = quality_universe({0.15, 0.32, 0.48, 0.61, 0.72, 0.83, 0.91, 0.97});
    ResponsiveRunConfig config;
    config.market_size = 4;
    config.horizon = 30000;
    config.exit_prob = 0.01;
    config.eta = 0.001;
    config.seeds = responsive_seeds(2027);
    config.early_k = 4;
    config.keep_entries = true;
    const auto log = run_responsive(universe, {1.427, 0.592}, config);

    const auto from_registry = early_performance_effect(log.registry, log.items, 4);
    const auto from_entries =
        early_performance_from_entries(log.entries, log.registry, log.items, 4);
    REQUIRE(from_registry.size() == from_entries.size());
    for (std::size_t i = 0; i < from_registry.size(); ++i) {
        CHECK(from_registry[i].likes == from_entries[i].likes);
        CHECK(from_registry[i].count == from_entries[i].count);
        CHECK(from_registry[i].mean_subsequent_play_ratio ==
              doctest::Approx(from_entries[i].mean_subsequent_play_ratio).epsilon(1e-12));
    }
}

TEST_CASE("figure table headers") {
    EstimateTrajectory traj;
    traj.etas = {0.0};
    traj.item_ids = {"a"};
    traj.true_quality = {0.5};
    traj.horizon = 1;
    traj.replications = 1;
    traj.estimates = {0.5};

    std::ostringstream fig2;
    write_fig2_csv(traj, fig2);
    CHECK(fig2.str() == "eta,t,mse\n0,1,0\n");

    std::ostringstream fig5;
    write_fig5_csv(std::vector<ResponsiveSummaryRow>{{0.001, 7, 123.5, 0.25}}, fig5);
    CHECK(fig5.str() == "eta,regret,avg_std,seed\n0.001,123.5,0.25,7\n");

    std::ostringstream fig7;
    write_fig7_csv(std::vector<EarlyPerformanceRow>{{0.001, 4, 0.5, 12}}, fig7);
    CHECK(fig7.str() == "eta,likes_in_first_4,mean_subsequent_pr,count\n0.001,4,0.5,12\n");
}
