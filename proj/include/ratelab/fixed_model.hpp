#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ratelab/calibration.hpp"
#include "ratelab/rating.hpp"

namespace ratelab {

enum class RatingSource { replay, synthetic };

struct FixedRunConfig {
    std::uint32_t horizon = 50;
    std::vector<double> eta_grid{0.0, 1.0, 10.0, 1000.0};
    RatingSource source = RatingSource::replay;
    std::uint32_t replications = 1;  // synthetic mode only; replay runs one pass
    std::uint64_t seed = 0;          // synthetic mode rating streams
    unsigned threads = 1;
};

// Estimates for every (eta, replication, item, t); ratings are shared across
// etas, so the grid differs only in how the same evidence is shrunk.
struct EstimateTrajectory {
    std::vector<double> etas;
    std::vector<std::string> item_ids;
    std::vector<double> true_quality;
    std::uint32_t horizon = 0;
    std::uint32_t replications = 1;
    std::vector<double> estimates;       // [eta][rep][item][t]
    std::vector<std::uint8_t> ratings;   // [rep][item][t], identical for all etas

    std::size_t index(std::size_t eta, std::size_t rep, std::size_t item,
                      std::uint32_t t) const {
        return ((eta * replications + rep) * item_ids.size() + item) * horizon + (t - 1);
    }
    double at(std::size_t eta, std::size_t rep, std::size_t item, std::uint32_t t) const {
        return estimates[index(eta, rep, item, t)];
    }
    std::size_t eta_index(double eta) const;
};

// Runs the fixed marketplace: every item accrues exactly one rating per
// timestep, replayed from the dataset or drawn Bernoulli(q_v).
EstimateTrajectory run_fixed(const Universe& universe, const BetaPrior& base_prior,
                             const FixedRunConfig& config);

// Ranks items by (true_quality, item_id) and cuts them into 10 equal-count
// groups; returns the decile (0 = lowest) per item, aligned to the
// trajectory's item order.
std::vector<int> stratify_by_decile(const EstimateTrajectory& traj);

struct ReplayFilter {
    Universe universe;
    std::size_t excluded = 0;  // items with fewer than `horizon` ratings
};

// Drops items that cannot replay a full horizon.
ReplayFilter filter_replay_universe(const Universe& universe, std::uint32_t horizon);

// Long-format table {eta, t, item_id, true_quality, estimate, replication},
// ordered by (eta, replication, t, item).
void write_trajectory_csv(const EstimateTrajectory& traj, std::ostream& out);
void save_trajectory_csv(const EstimateTrajectory& traj, const std::filesystem::path& path);
EstimateTrajectory load_trajectory_csv(const std::filesystem::path& path);

}  // namespace ratelab
