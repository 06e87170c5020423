#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ratelab/fixed_model.hpp"
#include "ratelab/responsive_model.hpp"

namespace ratelab {

// --- fixed-model metrics -----------------------------------------------------

// Mean-squared error of the quality estimates against true quality at (t, eta),
// averaged over items (and replications when present).
double mse(const EstimateTrajectory& traj, std::uint32_t t, double eta);

struct BiasVarianceCell {
    double bias_sq = 0.0;
    double variance = 0.0;  // population convention, so mse == bias_sq + variance
    double mse = 0.0;
};

// Decomposes the replication ensemble at one (item, t, eta) cell. Requires a
// synthetic-mode trajectory with at least 2 replications.
BiasVarianceCell bias_variance(const EstimateTrajectory& traj, std::size_t item,
                               std::uint32_t t, double eta);

// --- responsive-model metrics ------------------------------------------------

// Sum over timesteps of (best available quality - chosen quality).
double total_regret(std::span<const LogEntry> entries);
double total_regret(const EventLog& log);

// Streaming twin of total_regret for metrics-only runs; accumulates in
// timestep order so the result is bit-identical to the batch computation.
class RegretAccumulator {
public:
    void add(const LogEntry& e) { total_ += e.best_market_quality - e.chosen_quality; }
    double total() const { return total_; }

private:
    double total_ = 0.0;
};

// Ratings received per alive-step of one closed instance.
double play_ratio(const InstanceRecord& instance);

enum class FairnessGrouping { by_item, by_quartile };

struct FairnessGroup {
    std::string label;          // item id, or "q1".."q4"
    std::size_t count = 0;      // instances in the group
    double mean = 0.0;          // mean play ratio
    std::optional<double> std;  // sample std (n-1); absent when count < 2
};

struct FairnessReport {
    std::vector<FairnessGroup> groups;
    double marketplace_avg_std = 0.0;  // unweighted mean over groups with a std
    std::size_t groups_without_std = 0;
};

// Play-ratio dispersion conditioned on true quality: by_item groups instances
// of the same item (equal q_v by construction); by_quartile pools instances
// over universe quality quartiles.
FairnessReport fairness_std(const std::vector<InstanceRecord>& registry,
                            const ItemTable& items, FairnessGrouping grouping);

// Quartile (0 = lowest) per universe item, ranked by (quality, id).
std::vector<int> quality_quartiles(const ItemTable& items);

struct EarlyPerformanceCell {
    std::uint32_t likes = 0;  // likes among the first k ratings
    std::size_t count = 0;
    double mean_subsequent_play_ratio = 0.0;
};

// Fig-7 statistic: over top-quartile instances that survived >= k ratings,
// the mean play ratio over the remaining lifespan (ratings after the k-th per
// alive-step after the k-th rating's timestep), grouped by likes among the
// first k. Empty cells are absent; instances whose k-th rating fell in their
// final alive-step carry no remaining lifespan and are skipped.
std::vector<EarlyPerformanceCell> early_performance_effect(
    const std::vector<InstanceRecord>& registry, const ItemTable& items,
    std::uint32_t k_plays);

// Same statistic recomputed from a full per-step log (any k), used as the
// independent route against the registry-extras path.
std::vector<EarlyPerformanceCell> early_performance_from_entries(
    std::span<const LogEntry> entries, const std::vector<InstanceRecord>& registry,
    const ItemTable& items, std::uint32_t k_plays);

// --- figure tables -----------------------------------------------------------

void write_fig2_csv(const EstimateTrajectory& traj, std::ostream& out);
void write_fig3_csv(const EstimateTrajectory& traj, std::ostream& out);
void write_fig4_csv(const EstimateTrajectory& traj, std::ostream& out);
// Per-cell decomposition table for synthetic-mode runs.
void write_biasvar_csv(const EstimateTrajectory& traj, std::ostream& out);

struct ResponsiveSummaryRow {
    double eta = 0.0;
    std::uint64_t master_seed = 0;
    double regret = 0.0;
    double avg_std_play_ratio = 0.0;
};
void write_fig5_csv(std::span<const ResponsiveSummaryRow> rows, std::ostream& out);

struct QuartileSummaryRow {
    double eta = 0.0;
    std::uint64_t master_seed = 0;
    int quartile = 0;  // 1..4 in output
    std::size_t count = 0;
    double mean = 0.0;
    double std = 0.0;
    double min = 0.0, q25 = 0.0, median = 0.0, q75 = 0.0, max = 0.0;
};
void write_fig6_csv(std::span<const QuartileSummaryRow> rows, std::ostream& out);
std::vector<QuartileSummaryRow> quartile_summary(const std::vector<InstanceRecord>& registry,
                                                 const ItemTable& items, double eta,
                                                 std::uint64_t master_seed);

struct EarlyPerformanceRow {
    double eta = 0.0;
    std::uint32_t likes = 0;
    double mean_subsequent_pr = 0.0;
    std::size_t count = 0;
};
void write_fig7_csv(std::span<const EarlyPerformanceRow> rows, std::ostream& out);

}  // namespace ratelab
