#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ratelab/rating.hpp"

namespace ratelab {

// One raw row of the interaction matrix: a user watched some fraction of an
// item (may exceed 1 for replays).
struct InteractionRecord {
    std::string user_id;
    std::string item_id;
    double watch_ratio = 0.0;
    std::optional<double> timestamp;
};

// Per-item view of the dataset after binarization. true_quality is the like
// fraction over every user who interacted with the item; ordered_ratings is
// oldest-first.
struct ItemProfile {
    std::string item_id;
    std::uint64_t likes = 0;
    std::uint64_t total = 0;
    double true_quality = 0.0;
    std::vector<std::uint8_t> ordered_ratings;
};

struct UniverseProvenance {
    std::uint64_t dataset_hash = 0;
    double threshold = 0.0;
    std::uint64_t split_seed = 0;
    double split_fraction = 0.0;
    std::string role;                     // "train" | "test" | "resampled"
    std::vector<double> percentile_grid;  // empty = "all"
};

struct Universe {
    std::vector<ItemProfile> items;
    UniverseProvenance provenance;
};

struct IngestResult {
    std::vector<ItemProfile> items;  // first-appearance order
    std::uint64_t dataset_hash = 0;  // FNV-1a over the raw file bytes
    std::size_t rows = 0;
    std::size_t duplicates_dropped = 0;
    std::vector<std::string> warnings;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, std::size_t line)
        : std::runtime_error(msg), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// Reads a delimiter-separated interaction file (delimiter auto-detected from
// comma/tab) with header columns user_id, item_id (or video_id), watch_ratio
// and optional timestamp. Ratings are binarized at `threshold` (>= threshold
// maps to 1); duplicate (user, item) pairs keep the first occurrence; each
// item's ratings are ordered by timestamp when present, file order otherwise.
IngestResult ingest(const std::filesystem::path& path, double threshold);

// Deterministic partition of items given a seed: floor((1 - test_fraction)*N)
// items in train, the rest in test. Items keep their input order within each
// split.
std::pair<Universe, Universe> train_test_split(const std::vector<ItemProfile>& items,
                                               double test_fraction,
                                               std::uint64_t seed);

// Zero/one-inflation squeeze: x -> (x*(n-1) + 0.5)/n, mapping proportions
// into the open interval before beta fitting.
std::vector<double> inflation_correct(const std::vector<double>& values, std::size_t n);

struct FitResult {
    BetaPrior prior;
    int iterations = 0;
    double loglik = 0.0;       // mean log-likelihood at the optimum
    double init_loglik = 0.0;  // at the method-of-moments initializer
    BetaPrior init;
    bool used_fallback = false;
};

class FitError : public std::runtime_error {
public:
    FitError(const std::string& msg, BetaPrior last, int iterations)
        : std::runtime_error(msg), last_iterate(last), iterations(iterations) {}
    BetaPrior last_iterate;
    int iterations;
};

// Maximum-likelihood beta fit on values in the open interval (0,1): damped
// Newton on the digamma stationarity conditions, method-of-moments start,
// bounded coordinate ascent as fallback. Converged when the gradient of the
// mean log-likelihood drops below tol.
FitResult fit_beta_mle(const std::vector<double>& values, double tol = 1e-8,
                       int max_iter = 500);

// Picks one item per grid point: the item whose true quality sits at that
// percentile of the test set (nearest-rank: index floor(p*N/100) into items
// sorted by (true_quality, item_id)).
Universe percentile_resample(const Universe& test, const std::vector<double>& percentile_grid);

// JSON artifact round-trip (provenance block included, so simulations are
// rerunnable without the raw dataset).
std::string universe_to_json(const Universe& u);
Universe universe_from_json(const std::string& text);
void save_universe(const Universe& u, const std::filesystem::path& path);
Universe load_universe(const std::filesystem::path& path);

namespace detail {

double digamma(double x);
double trigamma(double x);

// Mean log-likelihood of Beta(a, b) given sufficient statistics
// mean(log x) and mean(log(1-x)).
double beta_loglik(double a, double b, double mean_log, double mean_log1m);

// Maximizes the likelihood over the first parameter with the second held
// fixed: root of mean_log - digamma(a) + digamma(a + b_fixed) = 0, solved by
// bracketing bisection (the derivative is strictly decreasing in a).
double beta_mle_coordinate(double a_start, double b_fixed, double mean_log);

}  // namespace detail

}  // namespace ratelab
