#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "ratelab/rng.hpp"

namespace ratelab {

// Pseudo-counts of a beta prior. (0, 0) is representable: it denotes the
// sample-mean estimator: but cannot be drawn from as a distribution.
struct BetaPrior {
    double alpha = 0.0;
    double beta = 0.0;

    double strength() const { return alpha + beta; }
    double mean() const { return alpha / (alpha + beta); }
    bool positive() const { return alpha > 0.0 && beta > 0.0; }
};

// Sufficient statistic of a product's rating history: like count and total
// count. Append-only.
struct RatingHistory {
    std::uint64_t likes = 0;
    std::uint64_t total = 0;

    void add_rating(int rating) {
        if (rating != 0 && rating != 1)
            throw std::invalid_argument("RatingHistory: rating must be 0 or 1");
        likes += static_cast<std::uint64_t>(rating);
        total += 1;
    }

    std::uint64_t dislikes() const { return total - likes; }
};

struct QualityEstimate {
    double value = 0.0;
};

// Scales prior pseudo-counts by a common strength factor; the prior mean is
// unchanged for eta > 0, and eta = 0 yields the sample-mean estimator.
inline BetaPrior scale_prior(const BetaPrior& base, double eta) {
    if (!(eta >= 0.0) || !std::isfinite(eta))
        throw std::invalid_argument("scale_prior: eta must be finite and >= 0");
    return {eta * base.alpha, eta * base.beta};
}

// Conjugate update: likes add to alpha, dislikes to beta.
inline BetaPrior posterior(const BetaPrior& prior, const RatingHistory& history) {
    return {prior.alpha + static_cast<double>(history.likes),
            prior.beta + static_cast<double>(history.dislikes())};
}

// Posterior mean estimated quality. The fully degenerate case: (0, 0)
// prior with an empty history: returns 0.5, the symmetric pre-data value.
inline QualityEstimate posterior_mean(const BetaPrior& prior,
                                      const RatingHistory& history) {
    const double num = prior.alpha + static_cast<double>(history.likes);
    const double den = prior.alpha + prior.beta + static_cast<double>(history.total);
    if (den == 0.0) return {0.5};
    return {num / den};
}

// One variate from Beta(alpha, beta). Requires strictly positive parameters
// (Thompson sampling with eta = 0 is forbidden; use the eta = 0.001 floor).
inline double beta_draw(const BetaPrior& params, RngStream& rng) {
    if (!params.positive())
        throw std::invalid_argument("beta_draw: parameters must be positive");
    return rng.beta(params.alpha, params.beta);
}

// Thompson choice: draws one sample per posterior in list order and returns
// the index of the maximum. Exact ties are broken uniformly at random over
// the argmax set (reservoir rule, so no allocation on the hot path).
inline std::size_t thompson_choose(std::span<const BetaPrior> posteriors,
                                   RngStream& rng) {
    if (posteriors.empty())
        throw std::invalid_argument("thompson_choose: empty posterior list");
    double best = -1.0;
    std::size_t best_index = 0;
    std::size_t tie_count = 0;
    for (std::size_t i = 0; i < posteriors.size(); ++i) {
        const double x = beta_draw(posteriors[i], rng);
        if (x > best) {
            best = x;
            best_index = i;
            tie_count = 1;
        } else if (x == best) {
            ++tie_count;
            if (rng.uniform01() < 1.0 / static_cast<double>(tie_count)) best_index = i;
        }
    }
    return best_index;
}

inline std::size_t thompson_choose(const std::vector<BetaPrior>& posteriors,
                                   RngStream& rng) {
    return thompson_choose(std::span<const BetaPrior>(posteriors), rng);
}

}  // namespace ratelab
