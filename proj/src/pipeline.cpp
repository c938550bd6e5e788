#include "chaingen/pipeline.hpp"

#include <sys/resource.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "chaingen/error.hpp"
#include "chaingen/random.hpp"

namespace chaingen::pipeline {

using nlohmann::json;

namespace {

void check_weighted(const Weighted& w, const char* what) {
    double total = 0.0;
    for (const auto& [name, p] : w) {
        if (name.empty() || !(p >= 0.0) || !std::isfinite(p)) {
            throw Error(Errc::invalid_profile, std::string(what) + ": weights must be finite and nonnegative");
        }
        total += p;
    }
    if (w.empty() || total <= 0.0) throw Error(Errc::invalid_profile, std::string(what) + ": no positive weight");
}

json weighted_json(const Weighted& w) {
    json j = json::object();
    for (const auto& [name, p] : w) j[name] = p;
    return j;
}

Weighted weighted_from_json(const json& j, const Weighted& fallback) {
    if (!j.is_object()) return fallback;
    Weighted w;
    for (const auto& [name, p] : j.items()) w.emplace_back(name, p.get<double>());
    return w;
}

const std::string& draw(Rng& rng, const Weighted& w) {
    std::vector<double> ps;
    for (const auto& e : w) ps.push_back(e.second);
    return w[static_cast<std::size_t>(std::max(0L, rng.weighted(ps)))].first;
}

std::vector<std::size_t> pois_where(const spatial::SpatialWorld& world,
                                    const std::function<bool(const spatial::PoiRecord&)>& pred) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < world.pois.size(); ++i) {
        if (pred(world.pois.at(i))) out.push_back(i);
    }
    return out;
}

}  // namespace

void validate(const PersonaProfile& p) {
    check_weighted(p.age_bands, "age_bands");
    check_weighted(p.occupations, "occupations");
    check_weighted(p.incomes, "incomes");
    check_weighted(p.mobility, "mobility");
    for (const auto& [name, _] : p.mobility) {
        if (name != "walk" && name != "walk+transit" && name != "walk+drive" && name != "walk+cycle") {
            throw Error(Errc::invalid_profile, "unknown mobility profile '" + name + "'");
        }
    }
    if (!(p.home_anchored >= 0.0 && p.home_anchored <= 1.0)) {
        throw Error(Errc::invalid_profile, "home_anchored must be a share in [0, 1]");
    }
    if (!(p.preference_base >= 0.0 && p.preference_base <= 1.0 && p.preference_jitter >= 0.0)) {
        throw Error(Errc::invalid_profile, "preference_base in [0, 1], preference_jitter >= 0");
    }
}

json to_json(const PersonaProfile& p) {
    return {{"age_bands", weighted_json(p.age_bands)},
            {"occupations", weighted_json(p.occupations)},
            {"incomes", weighted_json(p.incomes)},
            {"mobility", weighted_json(p.mobility)},
            {"home_anchored", p.home_anchored},
            {"preference_base", p.preference_base},
            {"preference_jitter", p.preference_jitter}};
}

PersonaProfile persona_profile_from_json(const json& j) {
    PersonaProfile p;
    if (!j.is_object()) return p;
    p.age_bands = weighted_from_json(j.value("age_bands", json()), p.age_bands);
    p.occupations = weighted_from_json(j.value("occupations", json()), p.occupations);
    p.incomes = weighted_from_json(j.value("incomes", json()), p.incomes);
    p.mobility = weighted_from_json(j.value("mobility", json()), p.mobility);
    p.home_anchored = j.value("home_anchored", p.home_anchored);
    p.preference_base = j.value("preference_base", p.preference_base);
    p.preference_jitter = j.value("preference_jitter", p.preference_jitter);
    validate(p);
    return p;
}

std::vector<Persona> synthesize_personas(std::size_t n, std::uint64_t seed, const PersonaProfile& profile,
                                         const spatial::SpatialWorld& world) {
    if (n == 0) throw Error(Errc::invalid_profile, "persona count must be at least 1");
    validate(profile);
    const auto homes = pois_where(world, [](const auto& p) { return p.category == Category::residence; });
    const auto jobs = pois_where(world, [](const auto& p) { return p.category == Category::employment; });
    const auto schools = pois_where(world, [](const auto& p) { return p.label == "school"; });
    if (homes.empty()) throw Error(Errc::invalid_profile, "world has no residence POIs for homes");

    // Occupation quotas by largest remainder, then a seeded shuffle.
    double total = 0.0;
    for (const auto& e : profile.occupations) total += e.second;
    std::vector<std::string> occupations;
    std::vector<std::pair<double, std::size_t>> rema;
    for (std::size_t i = 0; i < profile.occupations.size(); ++i) {
        const double exact = profile.occupations[i].second / total * static_cast<double>(n);
        const auto whole = static_cast<std::size_t>(std::floor(exact));
        occupations.insert(occupations.end(), whole, profile.occupations[i].first);
        rema.emplace_back(exact - std::floor(exact), i);
    }
    std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; occupations.size() < n; ++r) {
        occupations.push_back(profile.occupations[rema[r % rema.size()].second].first);
    }
    Rng shuffle_rng(mix_seed(seed ^ 0x0cc0ULL));
    shuffle_rng.shuffle(occupations);

    std::vector<Persona> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(sample_seed(seed ^ 0x9e75ULL, i));
        Persona p;
        char id[32];
        std::snprintf(id, sizeof id, "p%06zu", i);
        p.id = id;
        p.occupation = occupations[i];
        p.age_band = draw(rng, profile.age_bands);
        if (p.occupation == "student") p.age_band = "18-29";
        if (p.occupation == "retiree") p.age_band = "65+";
        p.income_tier = draw(rng, profile.incomes);
        p.household_role = p.age_band == "18-29" ? "young adult" : "adult";

        const auto& home = world.pois.at(homes[static_cast<std::size_t>(rng.integer(0, static_cast<long>(homes.size()) - 1))]);
        p.home = home.location;
        p.home_poi_id = home.id;
        const std::vector<std::size_t>* anchors = nullptr;
        if (p.occupation == "worker" && !jobs.empty()) anchors = &jobs;
        if (p.occupation == "student" && !schools.empty()) anchors = &schools;
        if (anchors) {
            const auto& a = world.pois.at((*anchors)[static_cast<std::size_t>(rng.integer(0, static_cast<long>(anchors->size()) - 1))]);
            p.anchor = a.location;
            p.anchor_poi_id = a.id;
            p.anchor_category = a.category;
        }
        for (Category c : kAllCategories) {
            const double jitter = profile.preference_jitter * (rng.uniform() - 0.5);
            p.preferences[static_cast<std::size_t>(c)] = std::clamp(profile.preference_base + jitter, 0.0, 1.0);
        }
        const std::string& mobility = draw(rng, profile.mobility);
        p.mode_propensity = {1.0, 0.0, 0.0, 0.0};
        if (mobility == "walk+transit") p.mode_propensity[static_cast<std::size_t>(TravelMode::transit)] = 1.0;
        if (mobility == "walk+drive") p.mode_propensity[static_cast<std::size_t>(TravelMode::drive)] = 1.0;
        if (mobility == "walk+cycle") p.mode_propensity[static_cast<std::size_t>(TravelMode::cycle)] = 1.0;
        p.home_anchored = rng.uniform() < profile.home_anchored;
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<Persona> read_personas_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_failure, "cannot open persona file '" + path + "'");
    std::vector<Persona> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(persona_from_json(json::parse(line)));
            validate(out.back());
        } catch (const json::exception& e) {
            throw Error(Errc::parse_error, path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

long peak_rss_kb() {
    rusage usage{};
    if (getrusage(RUSAGE_SELF, &usage) != 0) return 0;
    return usage.ru_maxrss;
}

json to_json(const RunMetrics& m) {
    json outcomes = json::array();
    for (const auto& o : m.outcomes) {
        json j = {{"index", o.index}, {"persona_id", o.persona_id}, {"seconds", o.seconds}, {"ok", o.ok},
                  {"violations", o.violations}};
        if (!o.ok) j["error"] = o.error;
        outcomes.push_back(std::move(j));
    }
    return {{"workers", m.workers},
            {"samples", m.samples},
            {"successes", m.successes},
            {"failures", m.failures},
            {"mean_seconds", m.mean_seconds},
            {"stdev_seconds", m.stdev_seconds},
            {"wall_seconds", m.wall_seconds},
            {"throughput_per_min", m.throughput_per_min},
            {"peak_rss_kb", m.peak_rss_kb},
            {"peak_rss_note", "process resident memory; not comparable to GPU memory of a hosted model"},
            {"outcomes", outcomes}};
}

RunMetrics run_metrics_from_json(const json& j) {
    RunMetrics m;
    m.workers = j.at("workers").get<std::size_t>();
    m.samples = j.at("samples").get<std::size_t>();
    m.successes = j.at("successes").get<std::size_t>();
    m.failures = j.at("failures").get<std::size_t>();
    m.mean_seconds = j.at("mean_seconds").get<double>();
    m.stdev_seconds = j.at("stdev_seconds").get<double>();
    m.wall_seconds = j.at("wall_seconds").get<double>();
    m.throughput_per_min = j.at("throughput_per_min").get<double>();
    m.peak_rss_kb = j.value("peak_rss_kb", 0L);
    for (const auto& o : j.value("outcomes", json::array())) {
        m.outcomes.push_back({o.at("index").get<std::size_t>(), o.value("persona_id", ""), o.at("seconds").get<double>(),
                              o.at("ok").get<bool>(), o.value("error", ""), o.value("violations", std::size_t{0})});
    }
    return m;
}

namespace {

/// Writes whole lines in sample order, whatever order samples finish in.
class OrderedSink {
public:
    explicit OrderedSink(std::ostream* out) : out_(out) {}

    void put(std::size_t index, std::optional<std::string> line) {
        std::lock_guard lock(mutex_);
        pending_[index] = std::move(line);
        while (!pending_.empty() && pending_.begin()->first == next_) {
            if (out_ && pending_.begin()->second) {
                *out_ << *pending_.begin()->second << '\n';
                out_->flush();
            }
            pending_.erase(pending_.begin());
            ++next_;
        }
    }

private:
    std::ostream* out_;
    std::mutex mutex_;
    std::map<std::size_t, std::optional<std::string>> pending_;
    std::size_t next_ = 0;
};

}  // namespace

BatchResult run_batch(const BatchConfig& config, const BatchServices& services) {
    if (config.workers < 1) throw Error(Errc::invalid_config, "worker count must be at least 1");
    if (config.samples < 1) throw Error(Errc::invalid_config, "sample count must be at least 1");
    if (!services.world) throw Error(Errc::invalid_config, "batch needs a spatial world");
    const std::vector<Persona> personas = config.personas.empty()
                                              ? synthesize_personas(config.samples, config.seed, config.profile,
                                                                    *services.world)
                                              : config.personas;

    std::ofstream file;
    if (!config.out_path.empty()) {
        file.open(config.out_path, std::ios::out | std::ios::trunc);
        if (!file) throw Error(Errc::io_failure, "cannot open '" + config.out_path + "' for writing");
    }
    OrderedSink sink(config.out_path.empty() ? nullptr : &file);

    BatchResult result;
    RunMetrics& m = result.metrics;
    m.workers = config.workers;
    m.samples = config.samples;
    m.outcomes.resize(config.samples);
    std::vector<std::optional<ActivityChain>> chains(config.samples);

    agent::AgentConfig agent_config = config.agent;
    if (config.sample_timeout) agent_config.deadline = config.sample_timeout;

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < config.samples; i = next++) {
            SampleOutcome& o = m.outcomes[i];
            o.index = i;
            const Persona& persona = personas[i % personas.size()];
            o.persona_id = persona.id;
            const auto t0 = std::chrono::steady_clock::now();
            std::optional<std::string> line;
            try {
                agent::Services s;
                s.world = services.world;
                s.environment = services.environment;
                s.memory = std::make_shared<memory::MemoryStore>(config.memory);
                s.reasoner = services.reasoner ? services.reasoner(i) : nullptr;
                agent::DayContext ctx{config.day, sample_seed(config.seed, i), config.date};
                auto day = agent::run_day(persona, ctx, s, agent_config);
                o.ok = true;
                o.violations = day.report.violations.size();
                line = to_json(day.chain, config.with_stages).dump();
                chains[i] = std::move(day.chain);
            } catch (const Error& e) {
                o.error = e.what();
            } catch (const std::exception& e) {
                o.error = std::string("internal: ") + e.what();
            }
            o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            sink.put(i, std::move(line));
        }
    };

    const auto start = std::chrono::steady_clock::now();
    const std::size_t n_threads = std::min(config.workers, config.samples);
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (file.is_open()) {
        file.close();
        if (file.fail()) throw Error(Errc::io_failure, "write to '" + config.out_path + "' failed");
    }

    double sum = 0.0;
    for (const auto& o : m.outcomes) {
        (o.ok ? m.successes : m.failures) += 1;
        sum += o.seconds;
    }
    m.mean_seconds = sum / static_cast<double>(m.samples);
    double var = 0.0;
    for (const auto& o : m.outcomes) var += (o.seconds - m.mean_seconds) * (o.seconds - m.mean_seconds);
    m.stdev_seconds = m.samples > 1 ? std::sqrt(var / static_cast<double>(m.samples - 1)) : 0.0;
    m.throughput_per_min = m.wall_seconds > 0.0 ? 60.0 * static_cast<double>(m.successes) / m.wall_seconds : 0.0;
    m.peak_rss_kb = peak_rss_kb();
    for (auto& c : chains) {
        if (c) result.chains.push_back(std::move(*c));
    }
    if (m.successes == 0) {
        throw Error(Errc::all_samples_failed,
                    "all " + std::to_string(m.samples) + " samples failed; first error: " + m.outcomes.front().error);
    }
    return result;
}

Report report(const std::vector<RunMetrics>& runs, const eval::EvaluationReport* evaluation) {
    std::vector<const RunMetrics*> sorted;
    for (const auto& r : runs) sorted.push_back(&r);
    std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->workers < b->workers; });

    std::ostringstream text;
    json rows = json::array();
    text << "workers  samples  ok    failed  mean_min/sample  stdev_min  throughput/min  peak_rss_mb\n";
    for (const auto* r : sorted) {
        char line[160];
        std::snprintf(line, sizeof line, "%7zu  %7zu  %4zu  %6zu  %15.4f  %9.4f  %14.2f  %11.1f\n", r->workers,
                      r->samples, r->successes, r->failures, r->mean_seconds / 60.0, r->stdev_seconds / 60.0,
                      r->throughput_per_min, static_cast<double>(r->peak_rss_kb) / 1024.0);
        text << line;
        json row = to_json(*r);
        row.erase("outcomes");
        rows.push_back(std::move(row));
    }
    text << "(peak RSS is process memory and not comparable to GPU memory of a hosted model)\n";
    json out = {{"runs", rows}};
    if (evaluation) {
        const json e = to_json(*evaluation);
        out["evaluation"] = e;
        text << "\nevaluation\n";
        auto num = [&](const char* key) {
            return e.at(key).is_null() ? std::string("n/a") : e.at(key).dump();
        };
        text << "  JS spatial   " << num("js_spatial") << "\n";
        text << "  KS temporal  " << num("ks_temporal") << "\n";
        text << "  Q_obj        " << num("q_obj") << "\n";
        text << "  Q_total      " << num("q_total") << "\n";
        text << "  k*           " << num("k_star") << "\n";
        if (evaluation->diversity) {
            text << "  DIV          " << evaluation->diversity->div << "  Score_GD " << evaluation->diversity->score_gd
                 << "\n";
        }
        text << "  violations   " << e.at("violations").dump() << "\n";
    }
    return {text.str(), out};
}

}  // namespace chaingen::pipeline
