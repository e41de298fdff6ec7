#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "diffcluster/clustering.hpp"
#include "diffcluster/config.hpp"
#include "diffcluster/edge_model.hpp"
#include "diffcluster/knn_graph.hpp"
#include "diffcluster/metrics.hpp"
#include "diffcluster/pipeline.hpp"

namespace py = pybind11;
using namespace dc;

namespace {

using Labels = std::vector<std::int32_t>;
template <typename T>
using Array = py::array_t<T, py::array::c_style | py::array::forcecast>;

template <typename T>
Array<T> to_array(const std::vector<T>& v) {
  return Array<T>(static_cast<py::ssize_t>(v.size()), v.data());
}

template <typename T>
Array<T> to_array2(const std::vector<T>& v, std::size_t rows, std::size_t cols) {
  return Array<T>({static_cast<py::ssize_t>(rows), static_cast<py::ssize_t>(cols)}, v.data());
}

EmbeddingSet to_set(const Matrix& x, const std::optional<Labels>& labels) { return EmbeddingSet(x, labels); }

py::tuple set_to_py(const EmbeddingSet& e) {
  py::object labels = py::none();
  if (e.has_labels()) labels = to_array(*e.labels());
  return py::make_tuple(e.rows(), labels);
}

std::shared_ptr<const KnnGraph> graph_from(const Array<std::uint32_t>& nbrs, const Array<double>& sims) {
  if (nbrs.ndim() != 2 || sims.ndim() != 2 || nbrs.shape(0) != sims.shape(0) || nbrs.shape(1) != sims.shape(1))
    throw Error(ErrorKind::Parameter, "neighbors and sims must be N x K arrays of the same shape");
  const auto n = static_cast<std::size_t>(nbrs.shape(0)), k = static_cast<std::size_t>(nbrs.shape(1));
  return std::make_shared<const KnnGraph>(n, k, std::vector<std::uint32_t>(nbrs.data(), nbrs.data() + n * k),
                                          std::vector<double>(sims.data(), sims.data() + n * k));
}

TransformConfig transform_from(const std::string& kind, double delta, double epsilon, double tau) {
  TransformConfig t;
  t.kind = parse_transform_kind(kind);
  t.delta = delta;
  t.epsilon = epsilon;
  t.tau = tau;
  return t;
}

WeightedGraph weighted_from(std::size_t n, const Array<std::uint32_t>& src, const Array<std::uint32_t>& dst,
                            const Array<double>& w) {
  if (src.size() != dst.size() || src.size() != w.size())
    throw Error(ErrorKind::Parameter, "src, dst and weight must have the same length");
  std::vector<WeightedEdge> es;
  for (py::ssize_t i = 0; i < src.size(); ++i) es.push_back({src.data()[i], dst.data()[i], w.data()[i]});
  return WeightedGraph(n, std::move(es));
}

py::dict metrics_dict(const MetricsReport& m) {
  py::dict d;
  d["pairwise_precision"] = m.pairwise.precision;
  d["pairwise_recall"] = m.pairwise.recall;
  d["pairwise_f"] = m.pairwise.f;
  d["bcubed_precision"] = m.bcubed.precision;
  d["bcubed_recall"] = m.bcubed.recall;
  d["bcubed_f"] = m.bcubed.f;
  d["nmi"] = m.nmi;
  return d;
}

// Accepts None, a config text, or a dict of key -> value (values go through str()).
PipelineConfig config_from(const py::object& cfg) {
  Config c;
  if (py::isinstance<py::str>(cfg)) {
    c = Config::parse(cfg.cast<std::string>());
  } else if (py::isinstance<py::dict>(cfg)) {
    for (const auto& [k, v] : cfg.cast<py::dict>()) {
      std::string value = py::str(v);
      if (py::isinstance<py::bool_>(v)) value = v.cast<bool>() ? "true" : "false";
      c.set(py::str(k), value);
    }
  } else if (!cfg.is_none()) {
    throw Error(ErrorKind::Parameter, "config must be None, a str or a dict");
  }
  auto out = pipeline_config_from(c);
  c.reject_unused();
  out.validate();
  return out;
}

py::tuple edges_to_py(const std::vector<RefinedEdge>& edges) {
  std::vector<std::uint32_t> s, d;
  std::vector<double> p;
  for (const auto& e : edges) {
    s.push_back(e.src);
    d.push_back(e.dst);
    p.push_back(e.prob);
  }
  return py::make_tuple(to_array(s), to_array(d), to_array(p));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "diffcluster core bindings";
  py::register_exception<Error>(m, "Error", PyExc_ValueError);

  m.def(
      "generate",
      [](std::int64_t clusters, std::int64_t points, std::int64_t dim, double spread, std::uint64_t seed) {
        return set_to_py(generate_synthetic({clusters, points, dim, spread, seed}));
      },
      py::arg("clusters") = 20, py::arg("points") = 50, py::arg("dim") = 64, py::arg("spread") = 0.15,
      py::arg("seed") = 0, "Gaussian clusters on the unit sphere; returns (X, labels).");

  m.def("normalize", [](const Matrix& x) { return l2_normalize(EmbeddingSet(x)).rows(); }, py::arg("x"));

  m.def(
      "build_knn",
      [](const Matrix& x, std::size_t k, unsigned threads) {
        const auto g = build_knn(l2_normalize(EmbeddingSet(x)), k, threads);
        return py::make_tuple(to_array2(g.neighbor_table(), g.size(), g.k()), to_array2(g.sim_table(), g.size(), g.k()));
      },
      py::arg("x"), py::arg("k"), py::arg("threads") = 1,
      "Exact cosine kNN, self first; returns (neighbors, sims), both N x K.");

  m.def(
      "edge_probs",
      [](const Array<std::uint32_t>& nbrs, const Array<double>& sims, const std::string& transform, double delta,
         double epsilon, double tau) {
        const auto table = build_edge_probs(graph_from(nbrs, sims), transform_from(transform, delta, epsilon, tau));
        return table.norm();
      },
      py::arg("neighbors"), py::arg("sims"), py::arg("transform") = "sigmoid", py::arg("delta") = 7.5,
      py::arg("epsilon") = -5.0, py::arg("tau") = 0.25, "Row-normalized edge probabilities, N x K.");

  m.def(
      "refine",
      [](const Array<std::uint32_t>& nbrs, const Array<double>& sims, std::optional<Labels> khat,
         const std::string& transform, double delta, double epsilon, double tau) {
        const auto table = build_edge_probs(graph_from(nbrs, sims), transform_from(transform, delta, epsilon, tau));
        TopKVector kv{khat ? *khat : Labels(table.size(), static_cast<std::int32_t>(table.k()))};
        return edges_to_py(refine_graph(table, kv));
      },
      py::arg("neighbors"), py::arg("sims"), py::arg("khat") = py::none(), py::arg("transform") = "sigmoid",
      py::arg("delta") = 7.5, py::arg("epsilon") = -5.0, py::arg("tau") = 0.25,
      "Top-K Jaccard refinement; khat defaults to K. Returns (src, dst, prob).");

  m.def("round_topk", &round_topk, py::arg("topk"), py::arg("k"));
  m.def(
      "prob_sigmoid", [](double d, double delta, double epsilon) { return prob_sigmoid(d, transform_from("sigmoid", delta, epsilon, 0.25)); },
      py::arg("d"), py::arg("delta") = 7.5, py::arg("epsilon") = -5.0);

  m.def(
      "map_cluster",
      [](std::size_t n, const Array<std::uint32_t>& src, const Array<std::uint32_t>& dst, const Array<double>& w) {
        return to_array(map_cluster(weighted_from(n, src, dst, w)).module);
      },
      py::arg("n"), py::arg("src"), py::arg("dst"), py::arg("weight"));
  m.def(
      "connected_components",
      [](std::size_t n, const Array<std::uint32_t>& src, const Array<std::uint32_t>& dst, const Array<double>& w) {
        return to_array(connected_components(weighted_from(n, src, dst, w)).module);
      },
      py::arg("n"), py::arg("src"), py::arg("dst"), py::arg("weight"));
  m.def(
      "map_codelength",
      [](std::size_t n, const Array<std::uint32_t>& src, const Array<std::uint32_t>& dst, const Array<double>& w,
         const Labels& partition) { return map_codelength(weighted_from(n, src, dst, w), {partition}); },
      py::arg("n"), py::arg("src"), py::arg("dst"), py::arg("weight"), py::arg("partition"));

  m.def(
      "evaluate", [](const Labels& pred, const Labels& truth) { return metrics_dict(evaluate_partition(pred, truth)); },
      py::arg("pred"), py::arg("truth"), "Pairwise F, BCubed F and NMI.");

  m.def(
      "run_pipeline",
      [](const Matrix& x, std::optional<Labels> labels, const py::object& config, std::optional<Matrix> train_x,
         std::optional<Labels> train_labels) {
        const auto cfg = config_from(config);
        const auto data = to_set(x, labels);
        std::optional<EmbeddingSet> train;
        if (train_x) train = to_set(*train_x, train_labels);
        PipelineResult r;
        {
          py::gil_scoped_release release;
          r = run_pipeline(cfg, data, train ? &*train : nullptr);
        }
        py::dict out;
        out["partition"] = to_array(r.partition.module);
        out["khat"] = to_array(r.khat);
        out["edges"] = edges_to_py(r.edges);
        out["loss_curve"] = r.loss_curve;
        out["metrics"] = r.metrics ? py::object(metrics_dict(*r.metrics)) : py::object(py::none());
        return out;
      },
      py::arg("x"), py::arg("labels") = py::none(), py::arg("config") = py::none(), py::arg("train_x") = py::none(),
      py::arg("train_labels") = py::none(),
      "Full pipeline. config is None, key = value text, or a dict of the same keys.");

  m.def("benchmark_names", &benchmark_names);
  m.def(
      "benchmark",
      [](const std::string& name, std::uint64_t seed) {
        const auto b = make_benchmark(name, seed);
        py::dict d;
        d["test"] = set_to_py(b.test);
        d["train"] = set_to_py(b.train);
        d["config"] = pipeline_config_text(b.config);
        return d;
      },
      py::arg("name"), py::arg("seed") = 0, "Bundled benchmark: test and train (X, labels) plus its config text.");
}
