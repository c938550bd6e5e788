#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "chaingen/config.hpp"
#include "chaingen/error.hpp"

using namespace chaingen;
using namespace chaingen::config;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

Errc code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return Errc::invalid_config;
}

fs::path scratch_dir() {
    const auto d = fs::temp_directory_path() / "chaingen_config_test";
    fs::create_directories(d);
    return d;
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

}  // namespace

TEST_SUITE("config") {
    TEST_CASE("defaults round trip") {
        const Config c;
        const json j = to_json(c);
        CHECK(to_json(config_from_json(j)) == j);
        CHECK(to_json(config_from_json(json::object())) == j);
        for (const char* key : {"world", "score", "cost", "memory", "agent", "backend", "personas", "evaluation"}) {
            CHECK(j.contains(key));
        }
    }

    TEST_CASE("partial documents keep the remaining defaults") {
        const auto c = config_from_json({{"agent", {{"max_repairs", 1}}},
                                         {"memory", {{"theta_transfer", 0.6}}},
                                         {"backend", {{"kind", "mock"}, {"mock_latency_us", 10}}},
                                         {"evaluation", {{"k_max", 6}}},
                                         {"date", "2025-01-01"}});
        CHECK(c.agent.max_repairs == 1);
        CHECK(c.agent.candidate_k == 8);
        CHECK(c.memory.theta_transfer == 0.6);
        CHECK(c.memory.theta_forget == 0.05);
        CHECK(c.backend.kind == "mock");
        CHECK(c.backend.llm.tau_reason == 0.7);
        CHECK(c.backend.llm.tau_output == 0.1);
        CHECK(c.evaluation.k_max == 6);
        CHECK(c.evaluation.k_min == 2);
        CHECK(c.date == "2025-01-01");
    }

    TEST_CASE("invalid documents") {
        CHECK(code_of([] { (void)config_from_json(json::array()); }) == Errc::invalid_config);
        CHECK(code_of([] { (void)config_from_json({{"backend", {{"endpoint", {{"api_key", "sk-123"}}}}}}); }) ==
              Errc::invalid_config);
        CHECK(code_of([] { (void)config_from_json({{"backend", {{"kind", "oracle"}}}}); }) == Errc::invalid_config);
        CHECK(code_of([] { (void)config_from_json({{"world", {{"grid", 1}}}}); }) == Errc::invalid_config);
        CHECK(code_of([] { (void)config_from_json({{"memory", {{"a_cos", 0.9}}}}); }) == Errc::invalid_config);
        CHECK(code_of([] { (void)config_from_json({{"poi_file", "p.csv"}}); }) == Errc::invalid_config);
        CHECK(code_of([] { (void)config_from_json({{"agent", {{"candidate_k", 0}}}}); }) == Errc::invalid_config);
        CHECK(code_of([] { (void)config_from_json({{"day", "monday"}}); }) == Errc::invalid_config);
        CHECK(code_of([] { (void)config_from_json({{"personas", {{"home_anchored", 2.0}}}}); }) ==
              Errc::invalid_config);
    }

    TEST_CASE("loading from disk resolves relative paths") {
        const auto dir = scratch_dir();
        write(dir / "pois.csv",
              "id,name,category,lon,lat,open_min,close_min,rating,price,tags\n"
              "h,Home,residence,8.50,47.35,0,1440,3,1,\n"
              "c,Cafe,cafe,8.51,47.35,420,1320,4.5,2,coffee\n");
        write(dir / "edges.csv",
              "from,from_lon,from_lat,to,to_lon,to_lat,length_m,walk_kmh,transit_kmh,drive_kmh,cycle_kmh\n"
              "x,8.50,47.35,y,8.51,47.35,0,4.8,0,30,15\n");
        write(dir / "run.json", R"({"poi_file": "pois.csv", "network_file": "edges.csv", "scenario_seed": 4})");
        const auto c = load_config(dir / "run.json");
        REQUIRE(c.poi_file.has_value());
        CHECK(*c.poi_file == dir / "pois.csv");
        CHECK(c.scenario_seed == 4);
        const auto w = build_world(c);
        CHECK(w->pois.size() == 2);
        CHECK(w->network.node_count() == 2);

        write(dir / "broken.json", "{ not json");
        CHECK(code_of([&] { (void)load_config(dir / "broken.json"); }) == Errc::parse_error);
        CHECK(code_of([&] { (void)load_config(dir / "missing.json"); }) == Errc::io_failure);
        fs::remove_all(dir);
    }

    TEST_CASE("synthetic world and scenario") {
        Config c;
        c.world.poi_count = 30;
        const auto w = build_world(c);
        CHECK(w->pois.size() == 30);
        const auto again = build_world(c);
        for (std::size_t i = 0; i < w->pois.size(); ++i) CHECK(w->pois.at(i).location == again->pois.at(i).location);
        CHECK(build_environment(c) != nullptr);

        env::Scenario s;
        s.weather = {{0, {"fog", 9}}};
        c.scenario = env::to_json(s);
        const auto e = build_environment(c);
        const env::EnvQuery q{600, w->pois.at(0).location, std::nullopt, std::nullopt};
        CHECK(e->realtime(q).weather.condition == "fog");
    }

    TEST_CASE("reasoner factory follows the backend kind") {
        Config c;
        CHECK(build_reasoner_factory(c)(0)->name() == "heuristic");
        c.backend.kind = "mock";
        CHECK(build_reasoner_factory(c)(3)->name() == "mock");
        c.backend.kind = "external_llm";
        c.backend.endpoint.url = "http://127.0.0.1:9/v1/chat/completions";
        CHECK(build_reasoner_factory(c)(0)->name() == "external_llm");
        // the key never appears in the serialized config, only the variable name
        const auto j = to_json(c);
        CHECK(j.at("backend").at("endpoint").at("api_key_env") == "CHAINGEN_API_KEY");
        CHECK_FALSE(j.at("backend").at("endpoint").contains("api_key"));
    }
}
