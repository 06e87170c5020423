#include "ratelab/calibration.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "ratelab/io_util.hpp"

namespace ratelab {

namespace detail {

double digamma(double x) {
    // Shift into the asymptotic regime, then the standard Bernoulli series.
    double result = 0.0;
    while (x < 10.0) {
        result -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    result += std::log(x) - 0.5 * inv;
    result -= inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
    return result;
}

double trigamma(double x) {
    double result = 0.0;
    while (x < 10.0) {
        result += 1.0 / (x * x);
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    result += inv * (1.0 + 0.5 * inv + inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0)))));
    return result;
}

double beta_loglik(double a, double b, double mean_log, double mean_log1m) {
    return (a - 1.0) * mean_log + (b - 1.0) * mean_log1m -
           (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
}

double beta_mle_coordinate(double a_start, double b_fixed, double mean_log) {
    const auto grad = [&](double a) {
        return mean_log - digamma(a) + digamma(a + b_fixed);
    };
    // The gradient is strictly decreasing in a; bracket the root, then bisect.
    double lo = a_start, hi = a_start;
    if (grad(a_start) > 0.0) {
        do {
            lo = hi;
            hi *= 2.0;
            if (hi > 1e12) return hi;
        } while (grad(hi) > 0.0);
    } else {
        do {
            hi = lo;
            lo *= 0.5;
            if (lo < 1e-12) return lo;
        } while (grad(lo) <= 0.0);
    }
    for (int i = 0; i < 200 && (hi - lo) > 1e-14 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (grad(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

std::vector<double> inflation_correct(const std::vector<double>& values, std::size_t n) {
    if (n < 2) throw std::invalid_argument("inflation_correct: n must be at least 2");
    std::vector<double> out;
    out.reserve(values.size());
    const double nn = static_cast<double>(n);
    for (double x : values) out.push_back((x * (nn - 1.0) + 0.5) / nn);
    return out;
}

FitResult fit_beta_mle(const std::vector<double>& values, double tol, int max_iter) {
    if (values.size() < 2)
        throw std::invalid_argument("fit_beta_mle: need at least 2 values");
    double sum = 0.0, sum_sq = 0.0, sum_log = 0.0, sum_log1m = 0.0;
    for (double x : values) {
        if (!(x > 0.0) || !(x < 1.0))
            throw std::invalid_argument("fit_beta_mle: values must lie strictly inside (0,1)");
        sum += x;
        sum_sq += x * x;
        sum_log += std::log(x);
        sum_log1m += std::log1p(-x);
    }
    const double n = static_cast<double>(values.size());
    const double mean = sum / n;
    const double var = sum_sq / n - mean * mean;
    if (!(var > 0.0))
        throw std::invalid_argument("fit_beta_mle: degenerate input (all values equal)");
    const double mean_log = sum_log / n;
    const double mean_log1m = sum_log1m / n;

    // Method-of-moments start. var < mean(1-mean) holds for data in (0,1).
    double common = mean * (1.0 - mean) / var - 1.0;
    if (!(common > 0.0)) common = 1.0;
    double a = mean * common;
    double b = (1.0 - mean) * common;

    FitResult result;
    result.init = {a, b};
    result.init_loglik = detail::beta_loglik(a, b, mean_log, mean_log1m);

    double ll = result.init_loglik;
    for (int iter = 1; iter <= max_iter; ++iter) {
        const double psi_ab = detail::digamma(a + b);
        const double g1 = mean_log - detail::digamma(a) + psi_ab;
        const double g2 = mean_log1m - detail::digamma(b) + psi_ab;
        const double gnorm = std::hypot(g1, g2);
        if (gnorm < tol) {
            result.prior = {a, b};
            result.iterations = iter - 1;
            result.loglik = ll;
            return result;
        }

        const double tri_ab = detail::trigamma(a + b);
        const double haa = tri_ab - detail::trigamma(a);
        const double hbb = tri_ab - detail::trigamma(b);
        const double det = haa * hbb - tri_ab * tri_ab;
        double da = 0.0, db = 0.0;
        if (det > 0.0) {
            da = -(hbb * g1 - tri_ab * g2) / det;
            db = -(haa * g2 - tri_ab * g1) / det;
        }

        // Backtrack until the step stays in the positive orthant and the
        // likelihood does not decrease.
        bool stepped = false;
        if (da != 0.0 || db != 0.0) {
            double lambda = 1.0;
            while (lambda >= 1e-12) {
                const double na = a + lambda * da;
                const double nb = b + lambda * db;
                if (na > 0.0 && nb > 0.0) {
                    const double nll = detail::beta_loglik(na, nb, mean_log, mean_log1m);
                    if (nll >= ll) {
                        a = na;
                        b = nb;
                        ll = nll;
                        stepped = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
        }
        if (!stepped) {
            a = detail::beta_mle_coordinate(a, b, mean_log);
            b = detail::beta_mle_coordinate(b, a, mean_log1m);
            const double nll = detail::beta_loglik(a, b, mean_log, mean_log1m);
            result.used_fallback = true;
            ll = nll;
        }
        if (ll < result.init_loglik - 1e-9)
            throw std::logic_error("fit_beta_mle: log-likelihood decreased");
    }
    throw FitError("fit_beta_mle: no convergence within max_iter", {a, b}, max_iter);
}

namespace {

struct RawRating {
    double order_key;  // timestamp when present, else row index
    std::size_t row;
    std::uint8_t rating;
};

std::vector<std::string_view> split_line(std::string_view line, char delim) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

double parse_double(std::string_view s, std::size_t line_no, const char* what) {
    double v = 0.0;
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last)
        throw ParseError("ingest: malformed " + std::string(what) + " at line " +
                             std::to_string(line_no),
                         line_no);
    return v;
}

}  // namespace

IngestResult ingest(const std::filesystem::path& path, double threshold) {
    if (!(threshold > 0.0) || !(threshold < 1.0))
        throw std::invalid_argument("ingest: threshold must lie in (0,1)");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("ingest: cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    IngestResult result;
    result.dataset_hash = fnv1a64(text.data(), text.size());

    std::size_t pos = 0, line_no = 0;
    auto next_line = [&](std::string_view& out) {
        if (pos >= text.size()) return false;
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        out = std::string_view(text).substr(pos, end - pos);
        if (!out.empty() && out.back() == '\r') out.remove_suffix(1);
        pos = end + 1;
        ++line_no;
        return true;
    };

    std::string_view header;
    if (!next_line(header) || header.empty())
        throw ParseError("ingest: missing header row", 1);
    const char delim = header.find('\t') != std::string_view::npos ? '\t' : ',';
    const auto columns = split_line(header, delim);
    int col_user = -1, col_item = -1, col_ratio = -1, col_time = -1;
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i] == "user_id") col_user = static_cast<int>(i);
        else if (columns[i] == "item_id" || columns[i] == "video_id") col_item = static_cast<int>(i);
        else if (columns[i] == "watch_ratio") col_ratio = static_cast<int>(i);
        else if (columns[i] == "timestamp") col_time = static_cast<int>(i);
    }
    if (col_user < 0 || col_item < 0 || col_ratio < 0)
        throw ParseError("ingest: header must name user_id, item_id (or video_id), watch_ratio", 1);

    std::unordered_map<std::string, std::uint32_t> user_index;
    std::unordered_map<std::string, std::uint32_t> item_index;
    std::vector<std::string> item_ids;
    std::vector<std::vector<RawRating>> per_item;
    std::unordered_set<std::uint64_t> seen_pairs;

    std::string_view line;
    while (next_line(line)) {
        if (line.empty()) continue;
        const auto fields = split_line(line, delim);
        const auto max_col = static_cast<std::size_t>(
            std::max({col_user, col_item, col_ratio, col_time}));
        if (fields.size() <= max_col)
            throw ParseError("ingest: too few fields at line " + std::to_string(line_no), line_no);
        const double ratio = parse_double(fields[static_cast<std::size_t>(col_ratio)], line_no, "watch_ratio");
        if (ratio < 0.0)
            throw ParseError("ingest: negative watch_ratio at line " + std::to_string(line_no), line_no);
        double order_key = static_cast<double>(line_no);
        if (col_time >= 0)
            order_key = parse_double(fields[static_cast<std::size_t>(col_time)], line_no, "timestamp");

        const auto uit = user_index.emplace(std::string(fields[static_cast<std::size_t>(col_user)]),
                                            static_cast<std::uint32_t>(user_index.size()));
        const auto iit = item_index.emplace(std::string(fields[static_cast<std::size_t>(col_item)]),
                                            static_cast<std::uint32_t>(item_index.size()));
        if (iit.second) {
            item_ids.push_back(iit.first->first);
            per_item.emplace_back();
        }
        const std::uint64_t pair_key =
            (static_cast<std::uint64_t>(uit.first->second) << 32) | iit.first->second;
        if (!seen_pairs.insert(pair_key).second) {
            ++result.duplicates_dropped;
            continue;
        }
        per_item[iit.first->second].push_back(
            {order_key, line_no, static_cast<std::uint8_t>(ratio >= threshold ? 1 : 0)});
        ++result.rows;
    }

    for (std::size_t i = 0; i < item_ids.size(); ++i) {
        auto& ratings = per_item[i];
        if (ratings.empty()) {
            result.warnings.push_back("item " + item_ids[i] + " has no interactions; excluded");
            continue;
        }
        std::sort(ratings.begin(), ratings.end(), [](const RawRating& a, const RawRating& b) {
            if (a.order_key != b.order_key) return a.order_key < b.order_key;
            return a.row < b.row;
        });
        ItemProfile item;
        item.item_id = item_ids[i];
        item.ordered_ratings.reserve(ratings.size());
        for (const auto& r : ratings) {
            item.ordered_ratings.push_back(r.rating);
            item.likes += r.rating;
        }
        item.total = ratings.size();
        item.true_quality = static_cast<double>(item.likes) / static_cast<double>(item.total);
        result.items.push_back(std::move(item));
    }
    return result;
}

std::pair<Universe, Universe> train_test_split(const std::vector<ItemProfile>& items,
                                               double test_fraction, std::uint64_t seed) {
    if (items.size() < 2)
        throw std::invalid_argument("train_test_split: need at least 2 items");
    if (!(test_fraction > 0.0) || !(test_fraction < 1.0))
        throw std::invalid_argument("train_test_split: test_fraction must lie in (0,1)");

    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), 0);
    RngStream rng(derive_seed(seed, "train-test-split"));
    for (std::size_t i = order.size() - 1; i > 0; --i)
        std::swap(order[i], order[rng.uniform_index(i + 1)]);

    // Nudge before flooring: 1 - 0.4 is not exactly 0.6 in binary.
    const auto train_n = static_cast<std::size_t>(
        (1.0 - test_fraction) * static_cast<double>(items.size()) + 1e-9);
    std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train_n));
    std::vector<std::size_t> test_idx(order.begin() + static_cast<std::ptrdiff_t>(train_n), order.end());
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());

    Universe train, test;
    train.provenance.split_seed = seed;
    train.provenance.split_fraction = test_fraction;
    train.provenance.role = "train";
    test.provenance = train.provenance;
    test.provenance.role = "test";
    for (std::size_t i : train_idx) train.items.push_back(items[i]);
    for (std::size_t i : test_idx) test.items.push_back(items[i]);
    return {std::move(train), std::move(test)};
}

Universe percentile_resample(const Universe& test, const std::vector<double>& percentile_grid) {
    if (percentile_grid.empty())
        throw std::invalid_argument("percentile_resample: empty grid");
    if (test.items.empty())
        throw std::invalid_argument("percentile_resample: empty test universe");
    for (double p : percentile_grid)
        if (!(p >= 0.0) || !(p < 100.0))
            throw std::invalid_argument("percentile_resample: grid values must lie in [0,100)");

    std::vector<std::size_t> order(test.items.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (test.items[a].true_quality != test.items[b].true_quality)
            return test.items[a].true_quality < test.items[b].true_quality;
        return test.items[a].item_id < test.items[b].item_id;
    });

    const auto n = static_cast<double>(test.items.size());
    Universe out;
    out.provenance = test.provenance;
    out.provenance.role = "resampled";
    out.provenance.percentile_grid = percentile_grid;
    std::unordered_set<std::size_t> taken;
    for (double p : percentile_grid) {
        const auto rank = static_cast<std::size_t>(p * n / 100.0 + 1e-9);
        const std::size_t idx = order[std::min(rank, order.size() - 1)];
        if (!taken.insert(idx).second)
            throw std::invalid_argument(
                "percentile_resample: grid points collide on the same item (test set too small)");
        out.items.push_back(test.items[idx]);
    }
    return out;
}

namespace {

std::string ratings_to_string(const std::vector<std::uint8_t>& ratings) {
    std::string s;
    s.reserve(ratings.size());
    for (auto r : ratings) s.push_back(r ? '1' : '0');
    return s;
}

std::vector<std::uint8_t> ratings_from_string(const std::string& s) {
    std::vector<std::uint8_t> out;
    out.reserve(s.size());
    for (char c : s) {
        if (c != '0' && c != '1')
            throw std::runtime_error("universe_from_json: bad ratings string");
        out.push_back(c == '1' ? 1 : 0);
    }
    return out;
}

std::uint64_t hex_to_hash(const std::string& s) {
    return std::stoull(s, nullptr, 16);
}

}  // namespace

std::string universe_to_json(const Universe& u) {
    nlohmann::json j;
    j["provenance"] = {
        {"dataset_hash", hex64(u.provenance.dataset_hash)},
        {"threshold", u.provenance.threshold},
        {"split_seed", u.provenance.split_seed},
        {"split_fraction", u.provenance.split_fraction},
        {"role", u.provenance.role},
    };
    if (u.provenance.percentile_grid.empty())
        j["provenance"]["percentile_grid"] = "all";
    else
        j["provenance"]["percentile_grid"] = u.provenance.percentile_grid;
    auto& items = j["items"];
    items = nlohmann::json::array();
    for (const auto& item : u.items) {
        items.push_back({{"item_id", item.item_id},
                         {"likes", item.likes},
                         {"total", item.total},
                         {"true_quality", item.true_quality},
                         {"ordered_ratings", ratings_to_string(item.ordered_ratings)}});
    }
    return j.dump(2);
}

Universe universe_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    Universe u;
    const auto& p = j.at("provenance");
    u.provenance.dataset_hash = hex_to_hash(p.at("dataset_hash").get<std::string>());
    u.provenance.threshold = p.at("threshold").get<double>();
    u.provenance.split_seed = p.at("split_seed").get<std::uint64_t>();
    u.provenance.split_fraction = p.at("split_fraction").get<double>();
    u.provenance.role = p.at("role").get<std::string>();
    if (p.at("percentile_grid").is_array())
        u.provenance.percentile_grid = p.at("percentile_grid").get<std::vector<double>>();
    for (const auto& item_json : j.at("items")) {
        ItemProfile item;
        item.item_id = item_json.at("item_id").get<std::string>();
        item.likes = item_json.at("likes").get<std::uint64_t>();
        item.total = item_json.at("total").get<std::uint64_t>();
        item.true_quality = item_json.at("true_quality").get<double>();
        item.ordered_ratings = ratings_from_string(item_json.at("ordered_ratings").get<std::string>());
        u.items.push_back(std::move(item));
    }
    return u;
}

void save_universe(const Universe& u, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_universe: cannot write " + path.string());
    out << universe_to_json(u) << '\n';
}

Universe load_universe(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_universe: cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return universe_from_json(text);
}

}  // namespace ratelab
