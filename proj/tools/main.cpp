#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "chaingen/config.hpp"
#include "chaingen/environment.hpp"
#include "chaingen/error.hpp"
#include "chaingen/evaluation.hpp"
#include "chaingen/memory.hpp"
#include "chaingen/pipeline.hpp"
#include "chaingen/protocol.hpp"
#include "chaingen/spatial.hpp"
#include "chaingen/temporal.hpp"

using namespace chaingen;
using nlohmann::json;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

// Serializes access to a memory store shared by every connection.
class LockedService : public protocol::ToolService {
public:
    explicit LockedService(std::shared_ptr<protocol::ToolService> inner) : inner_(std::move(inner)) {}
    std::string name() const override { return inner_->name(); }
    json query(const json& payload, const json& ctx) override {
        std::lock_guard lock(mutex_);
        return inner_->query(payload, ctx);
    }
    json act(const json& payload, const json& ctx) override {
        std::lock_guard lock(mutex_);
        return inner_->act(payload, ctx);
    }

private:
    std::shared_ptr<protocol::ToolService> inner_;
    std::mutex mutex_;
};

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Errc::io_failure, "cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw Error(Errc::io_failure, "write to '" + path + "' failed");
}

int cmd_generate(const std::string& config_path, std::size_t workers, std::size_t samples, std::uint64_t seed,
                 const std::string& out, const std::string& metrics_path, const std::string& trace_path,
                 std::optional<long> timeout_ms) {
    const config::Config cfg = config_path.empty() ? config::Config{} : config::load_config(config_path);
    std::ofstream trace;
    if (!trace_path.empty()) {
        trace.open(trace_path, std::ios::trunc);
        if (!trace) throw Error(Errc::io_failure, "cannot open trace file '" + trace_path + "'");
    }
    pipeline::BatchServices services;
    services.world = config::build_world(cfg);
    services.environment = config::build_environment(cfg);
    services.reasoner = config::build_reasoner_factory(cfg, trace.is_open() ? &trace : nullptr);

    pipeline::BatchConfig batch;
    batch.workers = workers;
    batch.samples = samples;
    batch.seed = seed;
    batch.out_path = out;
    batch.profile = cfg.personas;
    if (cfg.persona_file) batch.personas = pipeline::read_personas_jsonl(cfg.persona_file->string());
    batch.agent = cfg.agent;
    batch.memory = cfg.memory;
    batch.day = cfg.day;
    batch.date = cfg.date;
    if (timeout_ms) batch.sample_timeout = std::chrono::milliseconds(*timeout_ms);

    const auto result = pipeline::run_batch(batch, services);
    for (const auto& o : result.metrics.outcomes) {
        if (!o.ok) std::cerr << "sample " << o.index << " (" << o.persona_id << ") failed: " << o.error << "\n";
    }
    const auto rep = pipeline::report({result.metrics});
    std::cout << rep.text;
    if (!metrics_path.empty()) write_file(metrics_path, pipeline::to_json(result.metrics).dump(2) + "\n");
    return 0;
}

int cmd_evaluate(const std::string& generated, const std::string& reference, const std::string& out,
                 const std::string& config_path, const std::string& text_path, const std::string& metrics_path,
                 std::optional<double> q_subjective, bool validate) {
    const config::Config cfg = config_path.empty() ? config::Config{} : config::load_config(config_path);
    const auto gen = read_chains_jsonl(generated);
    std::vector<ActivityChain> ref;
    if (!reference.empty()) ref = read_chains_jsonl(reference);
    std::shared_ptr<spatial::SpatialWorld> world;
    if (validate) world = config::build_world(cfg);
    const auto report = eval::evaluate_corpus(gen, reference.empty() ? nullptr : &ref, cfg.evaluation, world.get(),
                                              q_subjective);
    std::vector<pipeline::RunMetrics> runs;
    if (!metrics_path.empty()) {
        std::ifstream in(metrics_path);
        if (!in) throw Error(Errc::io_failure, "cannot open metrics file '" + metrics_path + "'");
        const json j = json::parse(in);
        if (j.is_array()) {
            for (const auto& m : j) runs.push_back(pipeline::run_metrics_from_json(m));
        } else {
            runs.push_back(pipeline::run_metrics_from_json(j));
        }
    }
    const auto rep = pipeline::report(runs, &report);
    if (!out.empty()) write_file(out, eval::to_json(report).dump(2) + "\n");
    if (!text_path.empty()) write_file(text_path, rep.text);
    std::cout << rep.text;
    return 0;
}

int cmd_ingest(const std::string& poi_path, const std::string& network_path, const std::string& out) {
    const std::filesystem::path poi(poi_path);
    const auto ext = poi.extension().string();
    auto pois = ext == ".geojson" || ext == ".json" ? spatial::load_pois_geojson(poi) : spatial::load_pois_csv(poi);
    json summary = {{"pois", pois.size()}};
    std::map<std::string, std::size_t> by_category;
    for (const auto& p : pois) ++by_category[std::string(to_string(p.category))];
    summary["categories"] = by_category;
    if (!network_path.empty()) {
        const auto net = spatial::load_network_csv(network_path);
        summary["nodes"] = net.node_count();
        summary["edges"] = net.edges().size();
    }
    const std::string text = summary.dump(2) + "\n";
    if (!out.empty()) write_file(out, text);
    std::cout << text;
    return 0;
}

int cmd_serve(const std::string& listen, const std::string& config_path) {
    const config::Config cfg = config_path.empty() ? config::Config{} : config::load_config(config_path);
    protocol::Bus bus;
    bus.register_service(std::make_shared<temporal::TemporalService>());
    bus.register_service(std::make_shared<spatial::SpatialService>(config::build_world(cfg)));
    bus.register_service(std::make_shared<env::EnvironmentService>(config::build_environment(cfg)));
    bus.register_service(std::make_shared<LockedService>(
        std::make_shared<memory::MemoryService>(std::make_shared<memory::MemoryStore>(cfg.memory))));

    if (listen == "stdio" || listen == "-") {
        protocol::serve_stream(bus, std::cin, std::cout);
        return 0;
    }
    std::string host = "127.0.0.1";
    std::string port = listen;
    if (const auto colon = listen.rfind(':'); colon != std::string::npos) {
        host = listen.substr(0, colon);
        port = listen.substr(colon + 1);
    }
    int port_num = 0;
    try {
        port_num = std::stoi(port);
    } catch (const std::exception&) {
        throw Error(Errc::invalid_config, "listen address must be host:port, port or stdio");
    }
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::atomic<int> bound{0};
    std::thread announce([&] {
        while (bound.load() == 0 && !g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(10));
        if (bound.load() != 0) std::cerr << "listening on " << host << ":" << bound.load() << std::endl;
    });
    try {
        protocol::serve_tcp(bus, host, port_num, g_stop, &bound);
    } catch (...) {
        g_stop = true;
        announce.join();
        throw;
    }
    announce.join();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"activity-chain generation, evaluation and tool services"};
    app.require_subcommand(1);

    std::string config_path, out, metrics_path, trace_path;
    std::size_t workers = 1, samples = 1;
    std::uint64_t seed = 0;
    long timeout_ms = 0;
    auto* gen = app.add_subcommand("generate", "generate persona-day chains as JSONL");
    gen->add_option("--config", config_path, "JSON config file");
    gen->add_option("--workers", workers, "worker threads")->default_val(1);
    gen->add_option("--samples", samples, "persona-days to generate")->default_val(1);
    gen->add_option("--seed", seed, "global seed")->default_val(0);
    gen->add_option("--out", out, "output JSONL")->required();
    gen->add_option("--metrics", metrics_path, "write run metrics JSON here");
    gen->add_option("--trace", trace_path, "log LLM request/response bodies here");
    gen->add_option("--timeout-ms", timeout_ms, "per-sample wall-clock budget");

    std::string generated, reference, text_path;
    double q_subjective = -1.0;
    bool validate = false;
    auto* ev = app.add_subcommand("evaluate", "score a generated corpus");
    ev->add_option("--generated", generated, "generated chains JSONL")->required();
    ev->add_option("--reference", reference, "reference chains JSONL");
    ev->add_option("--out", out, "report JSON");
    ev->add_option("--config", config_path, "JSON config file (evaluation options, world)");
    ev->add_option("--text", text_path, "also write the text summary here");
    ev->add_option("--metrics", metrics_path, "run metrics JSON from generate, for the throughput table");
    ev->add_option("--q-subjective", q_subjective, "judge score on 0-10 for Q_total");
    ev->add_flag("--validate", validate, "validate chains against the configured world");

    std::string poi_path, network_path;
    auto* in = app.add_subcommand("ingest", "load and summarise POI and network files");
    in->add_option("--poi", poi_path, "POI CSV or GeoJSON")->required();
    in->add_option("--network", network_path, "edge-list CSV");
    in->add_option("--out", out, "write the summary JSON here");

    std::string listen;
    auto* sv = app.add_subcommand("serve", "serve the tool bus as newline-delimited JSON");
    sv->add_option("--listen", listen, "host:port, port, or stdio")->required();
    sv->add_option("--config", config_path, "JSON config file");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*gen) {
            return cmd_generate(config_path, workers, samples, seed, out, metrics_path, trace_path,
                                timeout_ms > 0 ? std::optional<long>(timeout_ms) : std::nullopt);
        }
        if (*ev) {
            return cmd_evaluate(generated, reference, out, config_path, text_path, metrics_path,
                                q_subjective >= 0.0 ? std::optional<double>(q_subjective) : std::nullopt, validate);
        }
        if (*in) return cmd_ingest(poi_path, network_path, out);
        if (*sv) return cmd_serve(listen, config_path);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
