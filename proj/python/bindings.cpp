#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "chaingen/chain.hpp"
#include "chaingen/clustering.hpp"
#include "chaingen/config.hpp"
#include "chaingen/error.hpp"
#include "chaingen/evaluation.hpp"
#include "chaingen/pipeline.hpp"
#include "chaingen/temporal.hpp"

namespace py = pybind11;
using namespace chaingen;
using nlohmann::json;

namespace {

// JSON crosses the boundary as text; the python side decodes it.
std::string generate(const std::string& config_text, const std::string& base_dir, std::size_t workers,
                     std::size_t samples, std::uint64_t seed, const std::string& out) {
    py::gil_scoped_release release;
    const auto cfg = config::config_from_json(json::parse(config_text), base_dir);
    pipeline::BatchServices services;
    services.world = config::build_world(cfg);
    services.environment = config::build_environment(cfg);
    services.reasoner = config::build_reasoner_factory(cfg);

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
    const auto result = pipeline::run_batch(batch, services);
    json chains = json::array();
    for (const auto& c : result.chains) chains.push_back(to_json(c));
    return json{{"metrics", pipeline::to_json(result.metrics)}, {"chains", chains}}.dump();
}

std::vector<ActivityChain> chains_of(const std::string& text) {
    std::vector<ActivityChain> out;
    for (const auto& j : json::parse(text)) out.push_back(chain_from_json(j));
    return out;
}

std::string evaluate(const std::string& generated, const std::optional<std::string>& reference,
                     const std::string& options_text, std::optional<double> q_subjective) {
    py::gil_scoped_release release;
    const auto gen = chains_of(generated);
    std::vector<ActivityChain> ref;
    if (reference) ref = chains_of(*reference);
    const auto options = eval::evaluation_options_from_json(json::parse(options_text));
    const auto rep = eval::evaluate_corpus(gen, reference ? &ref : nullptr, options, nullptr, q_subjective);
    return eval::to_json(rep).dump();
}

std::string read_chains(const std::string& path) {
    json out = json::array();
    for (const auto& c : read_chains_jsonl(path)) out.push_back(to_json(c));
    return out.dump();
}

eval::Sequence sequence_of(const std::vector<std::string>& labels) {
    eval::Sequence s;
    for (const auto& l : labels) s.push_back(parse_category(l));
    return s;
}

std::vector<std::string> labels_of(const eval::Sequence& s) {
    std::vector<std::string> out;
    for (auto c : s) out.emplace_back(to_string(c));
    return out;
}

}  // namespace

PYBIND11_MODULE(_chaingen, m) {
    static py::exception<Error> error_type(m, "ChaingenError", PyExc_ValueError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object exc = py::reinterpret_borrow<py::object>(error_type.ptr())(e.what());
            exc.attr("code") = std::string(to_string(e.code()));
            PyErr_SetObject(error_type.ptr(), exc.ptr());
        } catch (const json::exception& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        }
    });

    m.def("generate", &generate, py::arg("config"), py::arg("base_dir"), py::arg("workers"), py::arg("samples"),
          py::arg("seed"), py::arg("out"));
    m.def("evaluate", &evaluate, py::arg("generated"), py::arg("reference"), py::arg("options"),
          py::arg("q_subjective"));
    m.def("read_chains", &read_chains, py::arg("path"));
    m.def("default_config", [] { return config::to_json(config::Config{}).dump(); });

    m.def("discretize", [](const std::string& chain) { return labels_of(eval::discretize(chain_from_json(json::parse(chain)))); });
    m.def("js_divergence", [](const std::vector<double>& p, const std::vector<double>& q) { return eval::js_divergence(p, q); });
    m.def("ks_statistic", &eval::ks_statistic, py::arg("xs"), py::arg("ys"));
    m.def("objective_quality", &eval::objective_quality, py::arg("js"), py::arg("ks"));
    m.def("total_quality", &eval::total_quality, py::arg("q_subjective"), py::arg("q_objective"), py::arg("alpha") = 0.5);
    m.def("score_gd", [](double div) { return eval::diversity_score_gd(div); }, py::arg("div"));
    m.def("dtw_distance", [](const std::vector<std::string>& a, const std::vector<std::string>& b) {
        return eval::dtw_distance(sequence_of(a), sequence_of(b));
    });
    m.def(
        "pairwise_dtw",
        [](const std::vector<std::vector<std::string>>& seqs, std::size_t threads) {
            std::vector<eval::Sequence> s;
            for (const auto& x : seqs) s.push_back(sequence_of(x));
            py::gil_scoped_release release;
            return eval::pairwise_dtw(s, threads);
        },
        py::arg("sequences"), py::arg("threads") = 1);
    m.def("ward_cluster", &eval::ward_cluster, py::arg("d"), py::arg("k"));
    m.def(
        "select_k",
        [](const eval::Matrix& d, const std::vector<std::size_t>& ks) {
            const auto sel = eval::select_k(d, ks);
            return py::make_tuple(sel.k, sel.labels, sel.scores);
        },
        py::arg("d"), py::arg("k_range"));
    m.def(
        "diversity",
        [](const eval::Matrix& d, const eval::Assignment& labels) {
            const auto r = eval::diversity_score(d, labels);
            return py::dict(py::arg("between") = r.between, py::arg("within") = r.within, py::arg("div") = r.div,
                            py::arg("score_gd") = r.score_gd);
        },
        py::arg("d"), py::arg("labels"));
    m.def("temporal", [](const std::string& payload, const std::string& ctx) {
        temporal::TemporalService svc;
        return svc.query(json::parse(payload), json::parse(ctx)).dump();
    });
}
