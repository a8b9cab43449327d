#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <iostream>
#include <sstream>

#include "colarec/error.hpp"
#include "colarec/kmeans.hpp"
#include "colarec/lightgcn.hpp"
#include "colarec/metrics.hpp"
#include "colarec/pipeline.hpp"
#include "colarec/synthetic.hpp"

namespace py = pybind11;
using namespace colarec;

namespace {

using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor<double> to_tensor(const F64Array& a) {
    if (a.ndim() != 2) throw Error(ErrorKind::shape, "expected a 2-d array");
    const auto rows = static_cast<std::size_t>(a.shape(0));
    const auto cols = static_cast<std::size_t>(a.shape(1));
    return Tensor<double>({rows, cols}, std::vector<double>(a.data(), a.data() + rows * cols));
}

F64Array to_array(const Tensor<double>& t) {
    F64Array out({t.rows(), t.cols()});
    std::copy(t.values().begin(), t.values().end(), out.mutable_data());
    return out;
}

py::array_t<std::uint32_t> gid_array(const GidAssignment& g) {
    py::array_t<std::uint32_t> out({g.n_items(), g.length()});
    auto* dst = out.mutable_data();
    for (std::size_t i = 0; i < g.n_items(); ++i) {
        for (auto z : g.gid(i)) *dst++ = z;
    }
    return out;
}

GidAssignment from_gid_array(const py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast>& a,
                             std::size_t k) {
    if (a.ndim() != 2) throw Error(ErrorKind::shape, "expected a 2-d GID array");
    return GidAssignment(GidStrategy::random, k, static_cast<std::size_t>(a.shape(1)), 0,
                         std::vector<std::uint32_t>(a.data(), a.data() + a.size()));
}

py::list ranked_list(const RankedList& list) {
    py::list out;
    for (const auto& r : list) out.append(py::make_tuple(r.item, r.score));
    return out;
}

py::list report_rows(const EvalReport& report) {
    py::list out;
    for (const auto& r : report.rows) {
        py::dict d;
        d["segment"] = r.segment;
        d["n"] = r.n;
        d["recall"] = r.recall;
        d["ndcg"] = r.ndcg;
        d["users"] = r.users;
        out.append(d);
    }
    return out;
}

py::object typed_value(const RunConfig& c, const std::string& key) {
    const ConfigKey* k = find_config_key(key);
    if (k == nullptr) throw Error(ErrorKind::config, "unknown config key '" + key + "'");
    switch (k->type) {
        case ValueType::integer: return py::int_(c.integer(key));
        case ValueType::real: return py::float_(c.real(key));
        case ValueType::boolean: return py::bool_(c.flag(key));
        case ValueType::text: break;
    }
    return py::str(c.text(key));
}

std::string as_text(const py::handle& v) {
    if (py::isinstance<py::bool_>(v)) return v.cast<bool>() ? "true" : "false";
    return py::str(v).cast<std::string>();
}

RunConfig make_config(const std::optional<std::filesystem::path>& path, const py::kwargs& overrides) {
    RunConfig c;
    if (path) c.merge_file(*path);
    for (const auto& [k, v] : overrides) c.set(k.cast<std::string>(), as_text(v));
    return c;
}

/// Runs a pipeline stage without the GIL; stage logs go to stderr when verbose.
template <class F>
auto stage(bool verbose, F&& f) {
    std::ostringstream sink;
    std::ostream& log = verbose ? std::cerr : static_cast<std::ostream&>(sink);
    py::gil_scoped_release release;
    return f(log);
}

}  // namespace

PYBIND11_MODULE(_colarec, m) {
    m.doc() = "Generative recommendation with collaborative GIDs";

    static py::handle error_type = py::exception<Error>(m, "ColarecError", PyExc_RuntimeError).release();
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
            exc.attr("kind") = to_string(e.kind());
            PyErr_SetObject(error_type.ptr(), exc.ptr());
        }
    });

    py::class_<RunConfig>(m, "Config")
        .def(py::init(&make_config), py::arg("path") = py::none(),
             "Defaults, then the optional key = value file, then keyword overrides.")
        .def("set", [](RunConfig& c, const std::string& key, const py::object& v) { c.set(key, as_text(v)); })
        .def("get", &typed_value)
        .def("__getitem__", &typed_value)
        .def("__setitem__", [](RunConfig& c, const std::string& key, const py::object& v) { c.set(key, as_text(v)); })
        .def("hash", &RunConfig::hash)
        .def("to_text", &RunConfig::to_text)
        .def("keys", [](const RunConfig& c) {
            std::vector<std::string> out;
            for (const auto& [k, v] : c.values()) out.push_back(k);
            return out;
        })
        .def("copy", [](const RunConfig& c) { return RunConfig(c); });

    m.def(
        "make_synthetic",
        [](const std::filesystem::path& out, std::size_t n_users, std::size_t n_items, std::size_t n_clusters,
           std::uint64_t seed) {
            SyntheticConfig s;
            s.n_users = n_users;
            s.n_items = n_items;
            s.n_clusters = n_clusters;
            s.seed = seed;
            const auto data = make_synthetic(s);
            write_synthetic(data, out);
            return py::make_tuple(data.user_cluster, data.item_cluster);
        },
        py::arg("out"), py::arg("n_users") = 50, py::arg("n_items") = 40, py::arg("n_clusters") = 4,
        py::arg("seed") = 0, "Writes interactions.tsv and content.tsv; returns (user_cluster, item_cluster).");

    m.def(
        "prepare", [](const RunConfig& c, bool verbose) { stage(verbose, [&](std::ostream& log) { run_prepare(c, log); }); },
        py::arg("config"), py::arg("verbose") = false);
    m.def(
        "pretrain_cf",
        [](const RunConfig& c, bool verbose) { stage(verbose, [&](std::ostream& log) { run_pretrain_cf(c, log); }); },
        py::arg("config"), py::arg("verbose") = false);
    m.def(
        "build_gid",
        [](const RunConfig& c, bool verbose) { stage(verbose, [&](std::ostream& log) { run_build_gid(c, log); }); },
        py::arg("config"), py::arg("verbose") = false);
    m.def(
        "train",
        [](const RunConfig& c, bool verbose) {
            const auto result = stage(verbose, [&](std::ostream& log) { return run_train(c, log); });
            py::list trace;
            for (const auto& r : result.trace) {
                py::dict d;
                d["epoch"] = r.epoch;
                d["total"] = r.loss.total;
                d["rec"] = r.loss.rec;
                d["index"] = r.loss.index;
                d["bpr"] = r.loss.bpr;
                d["contrastive"] = r.loss.contrastive;
                d["val_recall"] = r.val_recall;
                trace.append(d);
            }
            return trace;
        },
        py::arg("config"), py::arg("verbose") = false, "Returns the per-epoch loss trace.");
    m.def(
        "evaluate",
        [](const RunConfig& c, bool verbose) {
            return report_rows(stage(verbose, [&](std::ostream& log) { return run_evaluate(c, log); }));
        },
        py::arg("config"), py::arg("verbose") = false);
    m.def(
        "recommend",
        [](const RunConfig& c, std::size_t user, bool verbose) {
            return ranked_list(stage(verbose, [&](std::ostream& log) { return run_recommend(c, user, log); }));
        },
        py::arg("config"), py::arg("user"), py::arg("verbose") = false, "List of (item, log-probability).");
    m.def(
        "sweep",
        [](const RunConfig& c, bool verbose) {
            const auto rows = stage(verbose, [&](std::ostream& log) { return run_sweep(c, log); });
            py::list out;
            for (const auto& r : rows) out.append(py::make_tuple(r.value, report_rows(r.report)));
            return out;
        },
        py::arg("config"), py::arg("verbose") = false);

    m.def(
        "split_counts",
        [](std::size_t degree, double train, double val, double test) {
            const auto c = split_counts(degree, {train, val, test});
            return py::make_tuple(c.train, c.val, c.test);
        },
        py::arg("degree"), py::arg("train") = 8.0, py::arg("val") = 1.0, py::arg("test") = 1.0);
    m.def(
        "filter_kcore",
        [](const std::vector<std::pair<std::string, std::string>>& edges, std::size_t k) {
            std::vector<RawRecord> records;
            for (const auto& [u, i] : edges) records.push_back({u, i});
            std::vector<std::pair<std::string, std::string>> out;
            for (const auto& r : filter_kcore(records, k)) out.emplace_back(r.user_key, r.item_key);
            return out;
        },
        py::arg("edges"), py::arg("k"));

    m.def(
        "recall_at_n",
        [](const std::vector<std::size_t>& ranked, const std::vector<std::uint32_t>& truth, std::size_t n) {
            return recall_at_n(ranked, truth, n);
        },
        py::arg("ranked"), py::arg("truth"), py::arg("n"));
    m.def(
        "ndcg_at_n",
        [](const std::vector<std::size_t>& ranked, const std::vector<std::uint32_t>& truth, std::size_t n) {
            return ndcg_at_n(ranked, truth, n);
        },
        py::arg("ranked"), py::arg("truth"), py::arg("n"));

    m.def(
        "constrained_kmeans",
        [](const F64Array& points, std::size_t k, std::size_t capacity, std::uint64_t seed, std::size_t restarts,
           std::size_t max_iterations) {
            const auto t = to_tensor(points);
            KMeansResult r;
            {
                py::gil_scoped_release release;
                r = constrained_kmeans(t, k, capacity, seed, {max_iterations, restarts});
            }
            return py::make_tuple(py::array_t<std::uint32_t>(r.labels.size(), r.labels.data()), r.sse);
        },
        py::arg("points"), py::arg("k"), py::arg("capacity"), py::arg("seed") = 0, py::arg("restarts") = 4,
        py::arg("max_iterations") = 100, "Returns (labels, sse).");

    m.def(
        "propagate",
        [](std::size_t n_users, std::size_t n_items, const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges,
           const F64Array& e0, std::size_t layers) {
            std::vector<Edge> es;
            for (const auto& [u, i] : edges) es.push_back({u, i});
            return to_array(propagate(BipartiteGraph::from_edges(n_users, n_items, es), to_tensor(e0), layers));
        },
        py::arg("n_users"), py::arg("n_items"), py::arg("edges"), py::arg("e0"), py::arg("layers"),
        "Layer-mean LightGCN propagation over users then items.");

    m.def(
        "build_gids",
        [](const std::string& strategy, std::size_t k, std::size_t length, std::uint64_t seed,
           const std::optional<F64Array>& vectors, std::optional<std::size_t> n_items) {
            const auto s = parse_gid_strategy(strategy);
            const auto count = [&]() -> std::size_t {
                if (n_items) return *n_items;
                if (vectors) return static_cast<std::size_t>(vectors->shape(0));
                throw Error(ErrorKind::invalid_argument, "give vectors or n_items");
            };
            switch (s) {
                case GidStrategy::random: return gid_array(build_random(count(), k, length, seed));
                case GidStrategy::iad: return gid_array(build_iad(count()));
                case GidStrategy::collaborative:
                case GidStrategy::content:
                    if (!vectors) throw Error(ErrorKind::invalid_argument, strategy + " GIDs need vectors");
                    return gid_array(build_hierarchical(to_tensor(*vectors), k, length, seed, s));
            }
            return py::array_t<std::uint32_t>();
        },
        py::arg("strategy"), py::arg("k"), py::arg("length"), py::arg("seed") = 0, py::arg("vectors") = py::none(),
        py::arg("n_items") = py::none(), "Array of shape (n_items, length).");

    m.def(
        "beam_search",
        [](const py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast>& gids, std::size_t k,
           const std::function<std::vector<double>(std::vector<std::uint32_t>)>& scorer, std::size_t beam,
           std::size_t topn) {
            const auto trie = GidTrie::build(from_gid_array(gids, k));
            const StepScorer step = [&](std::span<const std::uint32_t> prefix) {
                return scorer(std::vector<std::uint32_t>(prefix.begin(), prefix.end()));
            };
            return ranked_list(constrained_beam_search(trie, step, beam, topn));
        },
        py::arg("gids"), py::arg("k"), py::arg("scorer"), py::arg("beam"), py::arg("topn"),
        "scorer(prefix) returns K next-token log-probabilities.");
}
