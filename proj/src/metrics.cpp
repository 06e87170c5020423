#include "ratelab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

#include "ratelab/io_util.hpp"

namespace ratelab {

double mse(const EstimateTrajectory& traj, std::uint32_t t, double eta) {
    if (t < 1 || t > traj.horizon) throw std::invalid_argument("mse: t outside trajectory");
    const std::size_t e = traj.eta_index(eta);
    double sum = 0.0;
    for (std::uint32_t rep = 0; rep < traj.replications; ++rep) {
        for (std::size_t item = 0; item < traj.item_ids.size(); ++item) {
            const double d = traj.at(e, rep, item, t) - traj.true_quality[item];
            sum += d * d;
        }
    }
    return sum / (static_cast<double>(traj.replications) *
                  static_cast<double>(traj.item_ids.size()));
}

BiasVarianceCell bias_variance(const EstimateTrajectory& traj, std::size_t item,
                               std::uint32_t t, double eta) {
    if (traj.replications < 2)
        throw std::invalid_argument("bias_variance: needs at least 2 replications");
    const std::size_t e = traj.eta_index(eta);
    const double q = traj.true_quality[item];
    const double n = static_cast<double>(traj.replications);

    double mean = 0.0;
    for (std::uint32_t rep = 0; rep < traj.replications; ++rep)
        mean += traj.at(e, rep, item, t);
    mean /= n;

    double var = 0.0, err = 0.0;
    for (std::uint32_t rep = 0; rep < traj.replications; ++rep) {
        const double x = traj.at(e, rep, item, t);
        var += (x - mean) * (x - mean);
        err += (x - q) * (x - q);
    }
    BiasVarianceCell cell;
    cell.bias_sq = (mean - q) * (mean - q);
    cell.variance = var / n;
    cell.mse = err / n;
    return cell;
}

double total_regret(std::span<const LogEntry> entries) {
    double total = 0.0;
    for (const auto& e : entries) total += e.best_market_quality - e.chosen_quality;
    return total;
}

double total_regret(const EventLog& log) { return total_regret(std::span(log.entries)); }

double play_ratio(const InstanceRecord& instance) {
    const std::uint64_t lifespan = instance.lifespan();
    if (lifespan == 0) throw std::invalid_argument("play_ratio: zero lifespan");
    return static_cast<double>(instance.total) / static_cast<double>(lifespan);
}

std::vector<int> quality_quartiles(const ItemTable& items) {
    const std::size_t n = items.ids.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (items.quality[a] != items.quality[b]) return items.quality[a] < items.quality[b];
        return items.ids[a] < items.ids[b];
    });
    std::vector<int> quartile(n, 0);
    for (std::size_t rank = 0; rank < n; ++rank)
        quartile[order[rank]] = static_cast<int>(rank * 4 / n);
    return quartile;
}

namespace {

struct Moments {
    std::size_t count = 0;
    double sum = 0.0;
    double sum_sq = 0.0;

    void add(double x) {
        ++count;
        sum += x;
        sum_sq += x * x;
    }
    double mean() const { return sum / static_cast<double>(count); }
    std::optional<double> sample_std() const {
        if (count < 2) return std::nullopt;
        const double n = static_cast<double>(count);
        const double var = (sum_sq - sum * sum / n) / (n - 1.0);
        return std::sqrt(std::max(0.0, var));
    }
};

}  // namespace

FairnessReport fairness_std(const std::vector<InstanceRecord>& registry,
                            const ItemTable& items, FairnessGrouping grouping) {
    if (registry.empty()) throw std::invalid_argument("fairness_std: empty registry");
    const std::size_t n_groups =
        grouping == FairnessGrouping::by_item ? items.ids.size() : 4;
    std::vector<Moments> groups(n_groups);
    std::vector<int> quartile;
    if (grouping == FairnessGrouping::by_quartile) quartile = quality_quartiles(items);

    for (const auto& rec : registry) {
        const std::size_t g = grouping == FairnessGrouping::by_item
                                  ? rec.item_index
                                  : static_cast<std::size_t>(quartile[rec.item_index]);
        groups[g].add(play_ratio(rec));
    }

    FairnessReport report;
    double std_sum = 0.0;
    std::size_t std_count = 0;
    for (std::size_t g = 0; g < n_groups; ++g) {
        if (groups[g].count == 0) continue;
        FairnessGroup out;
        out.label = grouping == FairnessGrouping::by_item ? items.ids[g]
                                                          : "q" + std::to_string(g + 1);
        out.count = groups[g].count;
        out.mean = groups[g].mean();
        out.std = groups[g].sample_std();
        if (out.std) {
            std_sum += *out.std;
            ++std_count;
        } else {
            ++report.groups_without_std;
        }
        report.groups.push_back(std::move(out));
    }
    report.marketplace_avg_std = std_count ? std_sum / static_cast<double>(std_count) : 0.0;
    return report;
}

namespace {

std::vector<EarlyPerformanceCell> cells_from_samples(
    const std::map<std::uint32_t, Moments>& cells) {
    std::vector<EarlyPerformanceCell> out;
    for (const auto& [likes, m] : cells) {
        EarlyPerformanceCell cell;
        cell.likes = likes;
        cell.count = m.count;
        cell.mean_subsequent_play_ratio = m.mean();
        out.push_back(cell);
    }
    return out;
}

}  // namespace

std::vector<EarlyPerformanceCell> early_performance_effect(
    const std::vector<InstanceRecord>& registry, const ItemTable& items,
    std::uint32_t k_plays) {
    if (k_plays < 1) throw std::invalid_argument("early_performance_effect: k_plays must be >= 1");
    const auto quartile = quality_quartiles(items);
    std::map<std::uint32_t, Moments> cells;
    for (const auto& rec : registry) {
        if (quartile[rec.item_index] != 3) continue;
        if (rec.total < k_plays || rec.kth_rating_t == 0) continue;
        const std::uint64_t last_alive = rec.death_t - 1;
        if (last_alive <= rec.kth_rating_t) continue;  // no remaining lifespan
        const double remaining_steps = static_cast<double>(last_alive - rec.kth_rating_t);
        const double later_ratings = static_cast<double>(rec.total - k_plays);
        cells[rec.likes_in_first_k].add(later_ratings / remaining_steps);
    }
    return cells_from_samples(cells);
}

std::vector<EarlyPerformanceCell> early_performance_from_entries(
    std::span<const LogEntry> entries, const std::vector<InstanceRecord>& registry,
    const ItemTable& items, std::uint32_t k_plays) {
    if (k_plays < 1) throw std::invalid_argument("early_performance_from_entries: k_plays must be >= 1");
    struct Tally {
        std::uint32_t ratings = 0;
        std::uint32_t likes_first_k = 0;
        std::uint64_t kth_t = 0;
    };
    std::unordered_map<std::uint64_t, Tally> tallies;
    for (const auto& e : entries) {
        auto& tally = tallies[e.chosen_instance];
        ++tally.ratings;
        if (tally.ratings <= k_plays) {
            tally.likes_first_k += static_cast<std::uint32_t>(e.rating);
            if (tally.ratings == k_plays) tally.kth_t = e.t;
        }
    }
    const auto quartile = quality_quartiles(items);
    std::map<std::uint32_t, Moments> cells;
    for (const auto& rec : registry) {
        if (quartile[rec.item_index] != 3) continue;
        const auto it = tallies.find(rec.instance_id);
        if (it == tallies.end() || it->second.ratings < k_plays) continue;
        const std::uint64_t last_alive = rec.death_t - 1;
        if (last_alive <= it->second.kth_t) continue;
        const double remaining_steps = static_cast<double>(last_alive - it->second.kth_t);
        const double later_ratings = static_cast<double>(it->second.ratings - k_plays);
        cells[it->second.likes_first_k].add(later_ratings / remaining_steps);
    }
    return cells_from_samples(cells);
}

// --- figure tables -----------------------------------------------------------

void write_fig2_csv(const EstimateTrajectory& traj, std::ostream& out) {
    out << "eta,t,mse\n";
    std::string line;
    for (double eta : traj.etas) {
        for (std::uint32_t t = 1; t <= traj.horizon; ++t) {
            line.clear();
            append_double(line, eta);
            line += ',';
            line += std::to_string(t);
            line += ',';
            append_double(line, mse(traj, t, eta));
            line += '\n';
            out << line;
        }
    }
}

void write_fig3_csv(const EstimateTrajectory& traj, std::ostream& out) {
    const auto decile = stratify_by_decile(traj);
    out << "eta,t,decile,mse\n";
    std::string line;
    const double reps = traj.replications;
    for (std::size_t e = 0; e < traj.etas.size(); ++e) {
        for (std::uint32_t t = 1; t <= traj.horizon; ++t) {
            double sum[10] = {};
            std::size_t count[10] = {};
            for (std::size_t item = 0; item < traj.item_ids.size(); ++item) {
                const int d = decile[item];
                for (std::uint32_t rep = 0; rep < traj.replications; ++rep) {
                    const double diff = traj.at(e, rep, item, t) - traj.true_quality[item];
                    sum[d] += diff * diff;
                }
                count[d] += 1;
            }
            for (int d = 0; d < 10; ++d) {
                if (count[d] == 0) continue;
                line.clear();
                append_double(line, traj.etas[e]);
                line += ',';
                line += std::to_string(t);
                line += ',';
                line += std::to_string(d);
                line += ',';
                append_double(line, sum[d] / (static_cast<double>(count[d]) * reps));
                line += '\n';
                out << line;
            }
        }
    }
}

void write_fig4_csv(const EstimateTrajectory& traj, std::ostream& out) {
    out << "eta,t,item_id,true_quality,estimate\n";
    std::string line;
    for (std::size_t e = 0; e < traj.etas.size(); ++e) {
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
                append_double(line, traj.at(e, 0, item, t));
                line += '\n';
                out << line;
            }
        }
    }
}

void write_biasvar_csv(const EstimateTrajectory& traj, std::ostream& out) {
    out << "eta,t,item_id,bias_sq,variance,mse\n";
    std::string line;
    for (std::size_t e = 0; e < traj.etas.size(); ++e) {
        for (std::uint32_t t = 1; t <= traj.horizon; ++t) {
            for (std::size_t item = 0; item < traj.item_ids.size(); ++item) {
                const auto cell = bias_variance(traj, item, t, traj.etas[e]);
                line.clear();
                append_double(line, traj.etas[e]);
                line += ',';
                line += std::to_string(t);
                line += ',';
                line += traj.item_ids[item];
                line += ',';
                append_double(line, cell.bias_sq);
                line += ',';
                append_double(line, cell.variance);
                line += ',';
                append_double(line, cell.mse);
                line += '\n';
                out << line;
            }
        }
    }
}

void write_fig5_csv(std::span<const ResponsiveSummaryRow> rows, std::ostream& out) {
    out << "eta,regret,avg_std,seed\n";
    std::string line;
    for (const auto& r : rows) {
        line.clear();
        append_double(line, r.eta);
        line += ',';
        append_double(line, r.regret);
        line += ',';
        append_double(line, r.avg_std_play_ratio);
        line += ',';
        line += std::to_string(r.master_seed);
        line += '\n';
        out << line;
    }
}

std::vector<QuartileSummaryRow> quartile_summary(const std::vector<InstanceRecord>& registry,
                                                 const ItemTable& items, double eta,
                                                 std::uint64_t master_seed) {
    const auto quartile = quality_quartiles(items);
    std::vector<std::vector<double>> ratios(4);
    for (const auto& rec : registry)
        ratios[static_cast<std::size_t>(quartile[rec.item_index])].push_back(play_ratio(rec));

    std::vector<QuartileSummaryRow> rows;
    for (int q = 0; q < 4; ++q) {
        auto& values = ratios[static_cast<std::size_t>(q)];
        if (values.empty()) continue;
        std::sort(values.begin(), values.end());
        const auto n = values.size();
        auto quantile = [&](double p) {
            const auto idx = static_cast<std::size_t>(p * static_cast<double>(n - 1));
            return values[idx];
        };
        Moments m;
        for (double v : values) m.add(v);
        QuartileSummaryRow row;
        row.eta = eta;
        row.master_seed = master_seed;
        row.quartile = q + 1;
        row.count = n;
        row.mean = m.mean();
        row.std = m.sample_std().value_or(0.0);
        row.min = values.front();
        row.q25 = quantile(0.25);
        row.median = quantile(0.5);
        row.q75 = quantile(0.75);
        row.max = values.back();
        rows.push_back(row);
    }
    return rows;
}

void write_fig6_csv(std::span<const QuartileSummaryRow> rows, std::ostream& out) {
    out << "eta,quartile,count,mean_pr,std_pr,min,q25,median,q75,max,seed\n";
    std::string line;
    for (const auto& r : rows) {
        line.clear();
        append_double(line, r.eta);
        line += ',';
        line += std::to_string(r.quartile);
        line += ',';
        line += std::to_string(r.count);
        line += ',';
        append_double(line, r.mean);
        line += ',';
        append_double(line, r.std);
        line += ',';
        append_double(line, r.min);
        line += ',';
        append_double(line, r.q25);
        line += ',';
        append_double(line, r.median);
        line += ',';
        append_double(line, r.q75);
        line += ',';
        append_double(line, r.max);
        line += ',';
        line += std::to_string(r.master_seed);
        line += '\n';
        out << line;
    }
}

void write_fig7_csv(std::span<const EarlyPerformanceRow> rows, std::ostream& out) {
    out << "eta,likes_in_first_4,mean_subsequent_pr,count\n";
    std::string line;
    for (const auto& r : rows) {
        line.clear();
        append_double(line, r.eta);
        line += ',';
        line += std::to_string(r.likes);
        line += ',';
        append_double(line, r.mean_subsequent_pr);
        line += ',';
        line += std::to_string(r.count);
        line += '\n';
        out << line;
    }
}

}  // namespace ratelab
