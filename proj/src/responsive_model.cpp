#include "ratelab/responsive_model.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"
#include "ratelab/io_util.hpp"

namespace ratelab {

ResponsiveEngine::ResponsiveEngine(const Universe& universe, const BetaPrior& base_prior,
                                   const ResponsiveRunConfig& config)
    : prior_(scale_prior(base_prior, config.eta)),
      market_size_(config.market_size),
      exit_prob_(config.exit_prob),
      early_k_(config.early_k),
      market_rng_(config.seeds.market),
      choice_rng_(config.seeds.choice),
      feedback_rng_(config.seeds.feedback) {
    if (config.market_size == 0)
        throw std::invalid_argument("ResponsiveEngine: market_size must be positive");
    if (universe.items.size() <= config.market_size)
        throw std::invalid_argument("ResponsiveEngine: universe must exceed market size");
    if (!(config.exit_prob >= 0.0) || !(config.exit_prob <= 1.0))
        throw std::invalid_argument("ResponsiveEngine: exit_prob must lie in [0,1]");
    if (!(config.eta > 0.0))
        throw std::invalid_argument("ResponsiveEngine: eta must be positive (use the 0.001 floor)");
    if (!prior_.positive())
        throw std::invalid_argument("ResponsiveEngine: scaled prior must be positive");

    item_quality_.reserve(universe.items.size());
    for (const auto& item : universe.items) item_quality_.push_back(item.true_quality);

    // Initial market: |M| items drawn uniformly without replacement from V
    // via the market stream's first block.
    std::vector<std::uint32_t> all(universe.items.size());
    for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
    state_.slots.reserve(market_size_);
    for (std::uint32_t s = 0; s < market_size_; ++s) {
        const std::size_t pick = market_rng_.uniform_index(all.size());
        state_.slots.push_back(make_instance(all[pick], 1));
        all[pick] = all.back();
        all.pop_back();
    }
    state_.pool = std::move(all);
    state_.t = 0;
    posteriors_.resize(market_size_);
    exit_draws_.resize(market_size_);
}

ProductInstance ResponsiveEngine::make_instance(std::uint32_t item_index,
                                                std::uint64_t birth_t) {
    ProductInstance inst;
    inst.instance_id = next_instance_id_++;
    inst.item_index = item_index;
    inst.quality = item_quality_[item_index];
    inst.birth_t = birth_t;
    return inst;
}

void ResponsiveEngine::close_instance(const ProductInstance& inst, std::uint64_t death_t,
                                      bool censored) {
    InstanceRecord rec;
    rec.instance_id = inst.instance_id;
    rec.item_index = inst.item_index;
    rec.quality = inst.quality;
    rec.birth_t = inst.birth_t;
    rec.death_t = death_t;
    rec.likes = inst.history.likes;
    rec.total = inst.history.total;
    rec.censored = censored;
    rec.likes_in_first_k = inst.likes_in_first_k;
    rec.kth_rating_t = inst.kth_rating_t;
    registry_.push_back(rec);
}

const LogEntry& ResponsiveEngine::step() {
    const std::uint64_t t = ++state_.t;
    entry_.t = t;
    entry_.exits.clear();
    entry_.entries.clear();

    // (1) Thompson choice over the slot posteriors.
    double best_quality = 0.0;
    for (std::uint32_t i = 0; i < market_size_; ++i) {
        posteriors_[i] = posterior(prior_, state_.slots[i].history);
        best_quality = std::max(best_quality, state_.slots[i].quality);
    }
    const std::size_t chosen = thompson_choose(posteriors_, choice_rng_);
    auto& inst = state_.slots[chosen];
    entry_.chosen_instance = inst.instance_id;
    entry_.chosen_item = inst.item_index;
    entry_.chosen_quality = inst.quality;
    entry_.best_market_quality = best_quality;

    // (2) Bernoulli feedback in the chosen product's true quality.
    const int rating = feedback_rng_.bernoulli(inst.quality) ? 1 : 0;
    inst.history.add_rating(rating);
    entry_.rating = rating;
    if (inst.history.total <= early_k_) {
        inst.likes_in_first_k += static_cast<std::uint32_t>(rating);
        if (inst.history.total == early_k_) inst.kth_rating_t = t;
    }

    // (3) Exit flips: exactly |M| market-stream draws, slot order.
    for (std::uint32_t i = 0; i < market_size_; ++i)
        exit_draws_[i] = market_rng_.uniform01();

    // (4) Replacement block, padded to |M| draws so the market stream's
    // schedule is fixed regardless of how many exits occurred. Replacements
    // come uniformly without replacement from the items outside M(t); an
    // item leaving at t is not eligible to re-enter until a later step.
    leavers_.clear();
    for (std::uint32_t i = 0; i < market_size_; ++i) {
        const double u = market_rng_.uniform01();
        if (exit_draws_[i] >= exit_prob_) continue;
        auto& slot = state_.slots[i];
        entry_.exits.push_back(slot.instance_id);
        close_instance(slot, t + 1, false);
        leavers_.push_back(slot.item_index);

        const std::size_t remaining = state_.pool.size();
        auto pick = static_cast<std::size_t>(u * static_cast<double>(remaining));
        if (pick >= remaining) pick = remaining - 1;
        const std::uint32_t replacement = state_.pool[pick];
        state_.pool[pick] = state_.pool.back();
        state_.pool.pop_back();
        slot = make_instance(replacement, t + 1);
        entry_.entries.push_back(slot.instance_id);
    }
    for (std::uint32_t item : leavers_) state_.pool.push_back(item);
    return entry_;
}

std::vector<InstanceRecord> ResponsiveEngine::finish(std::uint64_t horizon) {
    for (const auto& slot : state_.slots) close_instance(slot, horizon + 1, true);
    return std::move(registry_);
}

EventLog run_responsive(const Universe& universe, const BetaPrior& base_prior,
                        const ResponsiveRunConfig& config, const StepObserver& observer) {
    if (config.horizon == 0)
        throw std::invalid_argument("run_responsive: horizon must be positive");
    ResponsiveEngine engine(universe, base_prior, config);
    EventLog log;
    log.config = config;
    log.effective_prior = scale_prior(base_prior, config.eta);
    log.items.ids.reserve(universe.items.size());
    log.items.quality.reserve(universe.items.size());
    for (const auto& item : universe.items) {
        log.items.ids.push_back(item.item_id);
        log.items.quality.push_back(item.true_quality);
    }
    if (config.keep_entries) log.entries.reserve(config.horizon);
    for (std::uint64_t t = 1; t <= config.horizon; ++t) {
        const LogEntry& entry = engine.step();
        if (observer) observer(entry);
        if (config.keep_entries) log.entries.push_back(entry);
    }
    log.registry = engine.finish(config.horizon);
    return log;
}

// --- persistence ------------------------------------------------------------

namespace {

void append_id_list(std::string& out, const std::vector<std::uint64_t>& ids) {
    out += '[';
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(ids[i]);
    }
    out += ']';
}

}  // namespace

struct EventLogWriter::Impl {
    std::ofstream out;
    LogFormat format;
    std::string buffer;
    std::filesystem::path final_path;
    std::filesystem::path temp_path;
    bool closed = false;
};

EventLogWriter::EventLogWriter(const std::filesystem::path& path, LogFormat format)
    : impl_(std::make_unique<Impl>()) {
    impl_->format = format;
    impl_->final_path = path;
    impl_->temp_path = path;
    impl_->temp_path += ".tmp";
    impl_->out.open(impl_->temp_path, std::ios::binary | std::ios::trunc);
    if (!impl_->out)
        throw std::runtime_error("EventLogWriter: cannot write " + impl_->temp_path.string());
}

EventLogWriter::~EventLogWriter() {
    try {
        close();
    } catch (...) {
    }
}

void EventLogWriter::write(const LogEntry& e) {
    auto& buf = impl_->buffer;
    buf.clear();
    if (impl_->format == LogFormat::ndjson) {
        buf += "{\"t\":";
        buf += std::to_string(e.t);
        buf += ",\"inst\":";
        buf += std::to_string(e.chosen_instance);
        buf += ",\"item\":";
        buf += std::to_string(e.chosen_item);
        buf += ",\"rating\":";
        buf += std::to_string(e.rating);
        buf += ",\"q\":";
        append_double(buf, e.chosen_quality);
        buf += ",\"best\":";
        append_double(buf, e.best_market_quality);
        buf += ",\"exits\":";
        append_id_list(buf, e.exits);
        buf += ",\"entries\":";
        append_id_list(buf, e.entries);
        buf += "}\n";
        impl_->out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    } else {
        auto put = [&](const void* p, std::size_t n) {
            buf.append(static_cast<const char*>(p), n);
        };
        const auto n_exits = static_cast<std::uint8_t>(e.exits.size());
        const auto n_entries = static_cast<std::uint8_t>(e.entries.size());
        const auto rating = static_cast<std::uint8_t>(e.rating);
        put(&e.t, 8);
        put(&e.chosen_instance, 8);
        put(&e.chosen_item, 4);
        put(&rating, 1);
        put(&n_exits, 1);
        put(&n_entries, 1);
        const std::uint8_t pad = 0;
        put(&pad, 1);
        put(&e.chosen_quality, 8);
        put(&e.best_market_quality, 8);
        for (auto id : e.exits) put(&id, 8);
        for (auto id : e.entries) put(&id, 8);
        impl_->out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
}

void EventLogWriter::close() {
    if (impl_->closed) return;
    impl_->closed = true;
    impl_->out.flush();
    impl_->out.close();
    if (!impl_->out)
        throw std::runtime_error("EventLogWriter: write failed for " +
                                 impl_->final_path.string());
    std::filesystem::rename(impl_->temp_path, impl_->final_path);
}

std::vector<LogEntry> read_event_entries(const std::filesystem::path& path, LogFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_event_entries: cannot open " + path.string());
    std::vector<LogEntry> entries;
    if (format == LogFormat::ndjson) {
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto j = nlohmann::json::parse(line);
            LogEntry e;
            e.t = j.at("t").get<std::uint64_t>();
            e.chosen_instance = j.at("inst").get<std::uint64_t>();
            e.chosen_item = j.at("item").get<std::uint32_t>();
            e.rating = j.at("rating").get<int>();
            e.chosen_quality = j.at("q").get<double>();
            e.best_market_quality = j.at("best").get<double>();
            e.exits = j.at("exits").get<std::vector<std::uint64_t>>();
            e.entries = j.at("entries").get<std::vector<std::uint64_t>>();
            entries.push_back(std::move(e));
        }
    } else {
        auto read_exact = [&](void* p, std::size_t n) {
            in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
            return static_cast<std::size_t>(in.gcount()) == n;
        };
        for (;;) {
            LogEntry e;
            if (!read_exact(&e.t, 8)) break;
            std::uint8_t rating = 0, n_exits = 0, n_entries = 0, pad = 0;
            if (!read_exact(&e.chosen_instance, 8) || !read_exact(&e.chosen_item, 4) ||
                !read_exact(&rating, 1) || !read_exact(&n_exits, 1) ||
                !read_exact(&n_entries, 1) || !read_exact(&pad, 1) ||
                !read_exact(&e.chosen_quality, 8) || !read_exact(&e.best_market_quality, 8))
                throw std::runtime_error("read_event_entries: truncated record in " + path.string());
            e.rating = rating;
            e.exits.resize(n_exits);
            e.entries.resize(n_entries);
            for (auto& id : e.exits)
                if (!read_exact(&id, 8))
                    throw std::runtime_error("read_event_entries: truncated record in " + path.string());
            for (auto& id : e.entries)
                if (!read_exact(&id, 8))
                    throw std::runtime_error("read_event_entries: truncated record in " + path.string());
            entries.push_back(std::move(e));
        }
    }
    return entries;
}

void save_registry_csv(const EventLog& log, const std::filesystem::path& path) {
    std::string out;
    out += "instance_id,item_id,quality,birth_t,death_t,likes,total,censored,"
           "likes_in_first_k,kth_rating_t\n";
    for (const auto& r : log.registry) {
        out += std::to_string(r.instance_id);
        out += ',';
        out += log.items.ids[r.item_index];
        out += ',';
        append_double(out, r.quality);
        out += ',';
        out += std::to_string(r.birth_t);
        out += ',';
        out += std::to_string(r.death_t);
        out += ',';
        out += std::to_string(r.likes);
        out += ',';
        out += std::to_string(r.total);
        out += ',';
        out += r.censored ? '1' : '0';
        out += ',';
        out += std::to_string(r.likes_in_first_k);
        out += ',';
        out += std::to_string(r.kth_rating_t);
        out += '\n';
    }
    atomic_write_file(path, out);
}

std::vector<InstanceRecord> load_registry_csv(const std::filesystem::path& path,
                                              const ItemTable& items) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_registry_csv: cannot open " + path.string());
    std::unordered_map<std::string, std::uint32_t> item_of;
    for (std::uint32_t i = 0; i < items.ids.size(); ++i) item_of.emplace(items.ids[i], i);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("load_registry_csv: empty file " + path.string());
    std::vector<InstanceRecord> registry;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        auto next = [&] {
            if (!std::getline(ss, field, ','))
                throw std::runtime_error("load_registry_csv: short row in " + path.string());
            return field;
        };
        InstanceRecord r;
        r.instance_id = std::stoull(next());
        const std::string item_id = next();
        const auto it = item_of.find(item_id);
        if (it == item_of.end())
            throw std::runtime_error("load_registry_csv: unknown item " + item_id);
        r.item_index = it->second;
        r.quality = std::stod(next());
        r.birth_t = std::stoull(next());
        r.death_t = std::stoull(next());
        r.likes = std::stoull(next());
        r.total = std::stoull(next());
        r.censored = next() == "1";
        r.likes_in_first_k = static_cast<std::uint32_t>(std::stoul(next()));
        r.kth_rating_t = std::stoull(next());
        registry.push_back(r);
    }
    return registry;
}

}  // namespace ratelab
