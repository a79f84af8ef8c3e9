#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dynscale/allocator.hpp"
#include "dynscale/answer.hpp"
#include "dynscale/dataset.hpp"
#include "dynscale/error.hpp"
#include "dynscale/harness.hpp"
#include "dynscale/metrics.hpp"
#include "dynscale/serialization.hpp"
#include "dynscale/simulator.hpp"
#include "dynscale/uncertainty.hpp"

namespace py = pybind11;
using namespace dynscale;

namespace {

using AnswerList = std::vector<std::optional<std::string>>;

AnswerDomain domain_of(const std::string& kind, const std::vector<std::string>& choices)
{
    AnswerDomain d;
    d.kind = parse_answer_kind(kind);
    d.choices = choices;
    if (d.kind == AnswerKind::multiple_choice && d.choices.empty()) d.choices = {"A", "B", "C", "D"};
    return d;
}

std::vector<ResponseRecord> records_of(const AnswerList& answers)
{
    std::vector<ResponseRecord> out;
    out.reserve(answers.size());
    for (std::size_t i = 0; i < answers.size(); ++i) {
        ResponseRecord r;
        r.id = std::to_string(i);
        r.extracted_answer = answers[i];
        r.output_tokens = 1;
        out.push_back(std::move(r));
    }
    return out;
}

double measure_of(UncertaintyMeasure m, const AnswerList& answers)
{
    return uncertainty(m, answer_counts(records_of(answers)));
}

std::string run_config(const std::string& config_json)
{
    const auto config = json::parse(config_json).get<RunConfig>();
    py::gil_scoped_release release;
    return record_to_json(execute_run(config), true).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Budget allocation across a batch of queries by uncertainty-driven sampling";

    // The module attribute keeps the type alive.
    static PyObject* error_type = py::exception<Error>(m, "DynscaleError", PyExc_RuntimeError).ptr();
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
            exc.attr("code") = std::string(to_string(e.code()));
            PyErr_SetObject(error_type, exc.ptr());
        }
    });

    m.def(
        "normalize_answer",
        [](const std::string& raw, const std::string& kind, const std::vector<std::string>& choices) {
            return normalize_answer(raw, domain_of(kind, choices));
        },
        py::arg("raw"), py::arg("kind") = "multiple_choice", py::arg("choices") = std::vector<std::string>{});
    m.def(
        "extract_answer",
        [](const std::string& text, const std::string& kind,
           const std::vector<std::string>& choices) -> std::optional<std::string> {
            if (auto a = extract_answer(text, domain_of(kind, choices))) return a->value;
            return std::nullopt;
        },
        py::arg("text"), py::arg("kind") = "multiple_choice", py::arg("choices") = std::vector<std::string>{});

    m.def("majority_vote", [](const AnswerList& answers) { return majority_vote(records_of(answers)); },
          py::arg("answers"));
    m.def(
        "answer_counts",
        [](const AnswerList& answers) {
            const auto c = answer_counts(records_of(answers));
            return py::make_tuple(c.counts, c.n);
        },
        py::arg("answers"), "Returns ([(answer, count), ...] in first-occurrence order, n).");

    m.def("variation_ratio", [](const AnswerList& a) { return measure_of(UncertaintyMeasure::variation_ratio, a); });
    m.def("normalized_entropy",
          [](const AnswerList& a) { return measure_of(UncertaintyMeasure::normalized_entropy, a); });
    m.def("inverse_margin", [](const AnswerList& a) { return measure_of(UncertaintyMeasure::inverse_margin, a); });

    m.def(
        "sampling_priority",
        [](const AnswerList& answers, std::int64_t used_samples, double exploration_ratio, const std::string& measure) {
            QueryState s;
            s.query.id = "q";
            for (auto& r : records_of(answers)) s.append(std::move(r));
            AllocatorConfig cfg;
            cfg.exploration_ratio = exploration_ratio;
            cfg.measure = parse_uncertainty_measure(measure);
            const auto p = sampling_priority(s, used_samples, cfg);
            py::dict d;
            d["exploit"] = p.exploit;
            d["explore"] = p.explore;
            d["total"] = p.total;
            return d;
        },
        py::arg("answers"), py::arg("used_samples"), py::arg("exploration_ratio") = 0.25,
        py::arg("measure") = "variation_ratio");

    m.def(
        "select_subset",
        [](const std::vector<std::pair<std::string, double>>& priorities, std::size_t size, std::uint64_t seed) {
            std::vector<QueryPriority> ps;
            for (const auto& [id, total] : priorities) ps.push_back({id, {total, 0.0, total}});
            Rng rng{SeedStream(seed)};
            return select_subset(ps, size, rng);
        },
        py::arg("priorities"), py::arg("size"), py::arg("seed") = 0);

    m.def(
        "smooth",
        [](const std::vector<double>& accuracies, int window) {
            BudgetCurve c;
            for (std::size_t i = 0; i < accuracies.size(); ++i)
                c.points.push_back({static_cast<std::int64_t>(i), 0.0, accuracies[i], 1});
            std::vector<double> out;
            for (const auto& p : smooth(c, window).points) out.push_back(p.accuracy);
            return out;
        },
        py::arg("accuracies"), py::arg("window") = 3);

    m.def(
        "config_from_files",
        [](const std::filesystem::path& dataset, const std::filesystem::path& profile) {
            RunConfig c;
            c.queries = load_query_set(dataset);
            c.profiles = load_simulator_profile(profile, &c.queries);
            return json(c).dump();
        },
        py::arg("dataset"), py::arg("profile"), "Default run configuration (JSON text) over the given files.");
    m.def("run_json", &run_config, py::arg("config_json"), "Execute a run; returns the record as JSON text.");
    m.def(
        "run_to_dir",
        [](const std::string& config_json, const std::filesystem::path& out) {
            const auto config = json::parse(config_json).get<RunConfig>();
            py::gil_scoped_release release;
            const auto record = execute_run(config);
            write_run_dir(out, record);
            return record_to_json(record, true).dump();
        },
        py::arg("config_json"), py::arg("out_dir"));
    m.def(
        "read_run_dir", [](const std::filesystem::path& dir) { return record_to_json(read_run_dir(dir), true).dump(); },
        py::arg("run_dir"));
    m.def(
        "replay_dir",
        [](const std::filesystem::path& dir) {
            const auto record = read_run_dir(dir);
            py::gil_scoped_release release;
            return record_to_json(replay(record), true).dump();
        },
        py::arg("run_dir"), "Re-execute a simulator run directory; raises DynscaleError on divergence.");
    m.def(
        "accuracy_curve",
        [](const std::vector<std::filesystem::path>& dirs, int window) {
            std::vector<RunRecord> records;
            for (const auto& d : dirs) records.push_back(read_run_dir(d));
            const auto raw = accuracy_curve(records);
            const auto smoothed = smooth(raw, window);
            py::list out;
            for (std::size_t i = 0; i < raw.points.size(); ++i) {
                py::dict d;
                d["budget_samples"] = raw.points[i].budget_samples;
                d["budget_tokens"] = raw.points[i].budget_tokens;
                d["accuracy"] = raw.points[i].accuracy;
                d["accuracy_smoothed"] = smoothed.points[i].accuracy;
                d["runs"] = raw.points[i].runs;
                out.append(d);
            }
            return out;
        },
        py::arg("run_dirs"), py::arg("window") = 3);
    m.def(
        "effective_allocation_rate",
        [](const std::filesystem::path& dir) {
            py::list out;
            for (const auto& p : effective_allocation_rate(read_run_dir(dir))) {
                py::dict d;
                d["round"] = p.round_index;
                d["used_samples"] = p.used_samples;
                d["funded"] = p.funded;
                d["funded_incorrect"] = p.funded_incorrect;
                d["incorrect_fraction"] = p.incorrect_fraction;
                d["rate"] = p.rate;
                d["cumulative_rate"] = p.cumulative_rate;
                out.append(d);
            }
            return out;
        },
        py::arg("run_dir"));
}
