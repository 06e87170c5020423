#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "ratelab/calibration.hpp"
#include "ratelab/rating.hpp"

namespace ratelab {

// One lifetime of a product in the market. A replacement entering for an
// item seen before is a fresh instance: same true quality, empty history.
struct ProductInstance {
    std::uint64_t instance_id = 0;
    std::uint32_t item_index = 0;
    double quality = 0.0;
    std::uint64_t birth_t = 0;
    RatingHistory history;
    std::uint32_t likes_in_first_k = 0;
    std::uint64_t kth_rating_t = 0;  // timestep of the k-th rating, 0 until reached
};

// Closed-instance registry row; lifespan = death_t - birth_t alive-steps.
struct InstanceRecord {
    std::uint64_t instance_id = 0;
    std::uint32_t item_index = 0;
    double quality = 0.0;
    std::uint64_t birth_t = 0;
    std::uint64_t death_t = 0;
    std::uint64_t likes = 0;
    std::uint64_t total = 0;
    bool censored = false;  // still alive at the horizon, closed at T+1
    std::uint32_t likes_in_first_k = 0;
    std::uint64_t kth_rating_t = 0;

    std::uint64_t lifespan() const { return death_t - birth_t; }
};

struct LogEntry {
    std::uint64_t t = 0;
    std::uint64_t chosen_instance = 0;
    std::uint32_t chosen_item = 0;
    int rating = 0;
    double chosen_quality = 0.0;
    double best_market_quality = 0.0;
    std::vector<std::uint64_t> exits;    // instances closed at the end of t
    std::vector<std::uint64_t> entries;  // instances entering with birth t+1
};

struct MarketState {
    std::uint64_t t = 0;  // timesteps completed
    std::vector<ProductInstance> slots;
    std::vector<std::uint32_t> pool;  // item indices currently out of market
};

struct ResponsiveSeeds {
    std::uint64_t market = 0;
    std::uint64_t choice = 0;
    std::uint64_t feedback = 0;
};

struct ResponsiveRunConfig {
    std::uint32_t market_size = 5;
    std::uint64_t horizon = 5'000'000;
    double exit_prob = 0.01;
    double eta = 1.0;  // must be positive; 0.001 stands in for the sample mean
    ResponsiveSeeds seeds;
    std::uint32_t early_k = 4;  // first-k tracking for the early-performance metric
    bool keep_entries = false;  // retain per-step entries in the returned log
};

struct ItemTable {
    std::vector<std::string> ids;
    std::vector<double> quality;
};

struct EventLog {
    ItemTable items;
    std::vector<LogEntry> entries;          // empty unless keep_entries
    std::vector<InstanceRecord> registry;   // closure order; censored rows last
    ResponsiveRunConfig config;
    BetaPrior effective_prior;              // scale_prior(base, eta)
};

// The responsive market as a stepwise engine. Per timestep: Thompson choice
// over the slot posteriors (choice stream), Bernoulli feedback in the true
// quality of the chosen product (feedback stream), then exogenous exits and
// uniform-without-replacement replacements (market stream).
//
// The market stream consumes a fixed 2*|M| draws per step (|M| exit flips
// plus a replacement block padded to worst case), so the market composition
// M(t) is a function of the market seed alone and is identical across eta.
class ResponsiveEngine {
public:
    ResponsiveEngine(const Universe& universe, const BetaPrior& base_prior,
                     const ResponsiveRunConfig& config);

    // Advances one timestep and returns the log entry (valid until next call).
    const LogEntry& step();

    const MarketState& state() const { return state_; }
    std::uint64_t timestep() const { return state_.t; }
    const std::vector<InstanceRecord>& registry() const { return registry_; }

    // Closes instances still alive (death_t = horizon+1, censored) and moves
    // the accumulated registry out.
    std::vector<InstanceRecord> finish(std::uint64_t horizon);

private:
    void close_instance(const ProductInstance& inst, std::uint64_t death_t, bool censored);
    ProductInstance make_instance(std::uint32_t item_index, std::uint64_t birth_t);

    BetaPrior prior_;
    std::uint32_t market_size_;
    double exit_prob_;
    std::uint32_t early_k_;
    RngStream market_rng_;
    RngStream choice_rng_;
    RngStream feedback_rng_;
    MarketState state_;
    std::vector<InstanceRecord> registry_;
    std::vector<double> item_quality_;
    std::uint64_t next_instance_id_ = 0;
    LogEntry entry_;
    std::vector<BetaPrior> posteriors_;   // scratch
    std::vector<double> exit_draws_;      // scratch
    std::vector<std::uint32_t> leavers_;  // scratch
};

using StepObserver = std::function<void(const LogEntry&)>;

// Drives the engine for t = 1..horizon. The observer (if any) sees every log
// entry as it streams, which is how metrics-only runs stay O(registry) in
// memory for the 5e6-step profile.
EventLog run_responsive(const Universe& universe, const BetaPrior& base_prior,
                        const ResponsiveRunConfig& config,
                        const StepObserver& observer = {});

// --- persistence ------------------------------------------------------------

enum class LogFormat { ndjson, binary };

// Streams log entries to disk. NDJSON for auditability, a fixed-layout
// little-endian binary for the long-horizon profile.
class EventLogWriter {
public:
    EventLogWriter(const std::filesystem::path& path, LogFormat format);
    ~EventLogWriter();
    void write(const LogEntry& entry);
    void close();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::vector<LogEntry> read_event_entries(const std::filesystem::path& path, LogFormat format);

void save_registry_csv(const EventLog& log, const std::filesystem::path& path);
// Reads a registry back; items must describe the same universe the run used.
std::vector<InstanceRecord> load_registry_csv(const std::filesystem::path& path,
                                              const ItemTable& items);

}  // namespace ratelab
