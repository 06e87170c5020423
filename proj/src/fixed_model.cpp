#include "ratelab/fixed_model.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include "ratelab/io_util.hpp"

namespace ratelab {

std::size_t EstimateTrajectory::eta_index(double eta) const {
    for (std::size_t i = 0; i < etas.size(); ++i)
        if (etas[i] == eta) return i;
    throw std::invalid_argument("EstimateTrajectory: eta not in grid");
}

ReplayFilter filter_replay_universe(const Universe& universe, std::uint32_t horizon) {
    ReplayFilter out;
    out.universe.provenance = universe.provenance;
    for (const auto& item : universe.items) {
        if (item.ordered_ratings.size() >= horizon)
            out.universe.items.push_back(item);
        else
            ++out.excluded;
    }
    return out;
}

EstimateTrajectory run_fixed(const Universe& universe, const BetaPrior& base_prior,
                             const FixedRunConfig& config) {
    if (config.horizon < 1) throw std::invalid_argument("run_fixed: horizon must be >= 1");
    if (config.eta_grid.empty()) throw std::invalid_argument("run_fixed: empty eta grid");
    if (universe.items.empty()) throw std::invalid_argument("run_fixed: empty universe");
    const bool replay = config.source == RatingSource::replay;
    const std::uint32_t reps = replay ? 1 : std::max<std::uint32_t>(1, config.replications);
    if (replay) {
        for (const auto& item : universe.items)
            if (item.ordered_ratings.size() < config.horizon)
                throw std::invalid_argument("run_fixed: item " + item.item_id +
                    " has fewer ratings than the replay horizon");
    }

    EstimateTrajectory traj;
    traj.etas = config.eta_grid;
    traj.horizon = config.horizon;
    traj.replications = reps;
    traj.item_ids.reserve(universe.items.size());
    traj.true_quality.reserve(universe.items.size());
    for (const auto& item : universe.items) {
        traj.item_ids.push_back(item.item_id);
        traj.true_quality.push_back(item.true_quality);
    }

    const std::size_t n_items = universe.items.size();
    const std::size_t n_etas = traj.etas.size();
    const std::uint32_t T = config.horizon;
    traj.estimates.assign(n_etas * reps * n_items * T, 0.0);
    traj.ratings.assign(static_cast<std::size_t>(reps) * n_items * T, 0);

    std::vector<BetaPrior> priors;
    priors.reserve(n_etas);
    for (double eta : config.eta_grid) priors.push_back(scale_prior(base_prior, eta));

    auto run_item = [&](std::size_t item) {
        for (std::uint32_t rep = 0; rep < reps; ++rep) {
            // One rating sequence per (item, replication), shared by every eta.
            std::uint8_t* seq = traj.ratings.data() +
                (static_cast<std::size_t>(rep) * n_items + item) * T;
            if (replay) {
                const auto& src = universe.items[item].ordered_ratings;
                std::copy_n(src.begin(), T, seq);
            } else {
                RngStream rng(derive_seed(derive_seed(config.seed, "fixed-item", item),
                                          "fixed-rep", rep));
                const double q = universe.items[item].true_quality;
                for (std::uint32_t t = 0; t < T; ++t) seq[t] = rng.bernoulli(q) ? 1 : 0;
            }
            for (std::size_t e = 0; e < n_etas; ++e) {
                RatingHistory history;
                double* dst = traj.estimates.data() + traj.index(e, rep, item, 1);
                for (std::uint32_t t = 0; t < T; ++t) {
                    history.add_rating(seq[t]);
                    dst[t] = posterior_mean(priors[e], history).value;
                }
            }
        }
    };

    const unsigned threads = std::max(1u, config.threads);
    if (threads == 1 || n_items < 2) {
        for (std::size_t i = 0; i < n_items; ++i) run_item(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        const unsigned count = std::min<unsigned>(threads, static_cast<unsigned>(n_items));
        pool.reserve(count);
        for (unsigned w = 0; w < count; ++w) {
            pool.emplace_back([&] {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= n_items) return;
                    run_item(i);
                }
            });
        }
        for (auto& th : pool) th.join();
    }
    return traj;
}

std::vector<int> stratify_by_decile(const EstimateTrajectory& traj) {
    const std::size_t n = traj.item_ids.size();
    if (n < 10) throw std::invalid_argument("stratify_by_decile: need at least 10 items");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (traj.true_quality[a] != traj.true_quality[b])
            return traj.true_quality[a] < traj.true_quality[b];
        return traj.item_ids[a] < traj.item_ids[b];
    });
    std::vector<int> decile(n, 0);
    for (std::size_t rank = 0; rank < n; ++rank)
        decile[order[rank]] = static_cast<int>(rank * 10 / n);
    return decile;
}

void write_trajectory_csv(const EstimateTrajectory& traj, std::ostream& out) {
    out << "eta,t,item_id,true_quality,estimate,replication\n";
    std::string line;
    for (std::size_t e = 0; e < traj.etas.size(); ++e) {
        for (std::uint32_t rep = 0; rep < traj.replications; ++rep) {
            for (std::uint32_t t = 1; t <= traj.horizon; ++t) {
                for (std::size_t item = 0; item < traj.item_ids.size(); ++item) {
                    line.clear();
                    append_double(line, traj.etas[e]);
                    line += ',';
                    line += std::to_string(t);
                    line += ',';
                    line += traj.item_ids[item];
                    line += ',';
                    append_double(line, traj.true_quality[item]);
                    line += ',';
                    append_double(line, traj.at(e, rep, item, t));
                    line += ',';
                    line += std::to_string(rep);
                    line += '\n';
                    out << line;
                }
            }
        }
    }
}

void save_trajectory_csv(const EstimateTrajectory& traj, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_trajectory_csv: cannot write " + path.string());
    write_trajectory_csv(traj, out);
}

EstimateTrajectory load_trajectory_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_trajectory_csv: cannot open " + path.string());
    std::string header;
    if (!std::getline(in, header) ||
        header != "eta,t,item_id,true_quality,estimate,replication")
        throw std::runtime_error("load_trajectory_csv: unexpected header in " + path.string());

    struct Row {
        double eta;
        std::uint32_t t;
        std::string item;
        double quality;
        double estimate;
        std::uint32_t rep;
    };
    std::vector<Row> rows;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        Row r;
        std::string field;
        auto next = [&](const char* what) -> std::string {
            if (!std::getline(ss, field, ','))
                throw std::runtime_error("load_trajectory_csv: missing " + std::string(what) +
                                         " at line " + std::to_string(line_no));
            return field;
        };
        r.eta = std::stod(next("eta"));
        r.t = static_cast<std::uint32_t>(std::stoul(next("t")));
        r.item = next("item_id");
        r.quality = std::stod(next("true_quality"));
        r.estimate = std::stod(next("estimate"));
        r.rep = static_cast<std::uint32_t>(std::stoul(next("replication")));
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw std::runtime_error("load_trajectory_csv: no data rows");

    EstimateTrajectory traj;
    std::unordered_map<double, std::size_t> eta_of;
    std::unordered_map<std::string, std::size_t> item_of;
    for (const auto& r : rows) {
        if (eta_of.emplace(r.eta, traj.etas.size()).second) traj.etas.push_back(r.eta);
        if (item_of.emplace(r.item, traj.item_ids.size()).second) {
            traj.item_ids.push_back(r.item);
            traj.true_quality.push_back(r.quality);
        }
        traj.horizon = std::max(traj.horizon, r.t);
        traj.replications = std::max(traj.replications, r.rep + 1);
    }
    traj.estimates.assign(traj.etas.size() * traj.replications * traj.item_ids.size() *
                              traj.horizon, std::numeric_limits<double>::quiet_NaN());
    for (const auto& r : rows)
        traj.estimates[traj.index(eta_of.at(r.eta), r.rep, item_of.at(r.item), r.t)] = r.estimate;
    return traj;
}

}  // namespace ratelab
