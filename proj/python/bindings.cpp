#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "softgrove/commands.hpp"
#include "softgrove/errors.hpp"
#include "softgrove/gradients.hpp"
#include "softgrove/random_tree.hpp"
#include "softgrove/serialize.hpp"
#include "softgrove/stats.hpp"
#include "softgrove/training.hpp"
#include "softgrove/tree.hpp"

namespace py = pybind11;
using namespace softgrove;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const DoubleArray& a) {
  const auto buf = a.request();
  if (buf.ndim != 1) throw std::invalid_argument("expected a 1-D array");
  const auto* p = static_cast<const double*>(buf.ptr);
  return {p, p + buf.shape[0]};
}

py::array_t<double> to_array(const std::vector<double>& v) {
  py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

// X: (N, d) features; y: (N,) targets or integer labels.
Dataset make_dataset(const DoubleArray& X, const DoubleArray& y, Task task) {
  const auto xb = X.request();
  if (xb.ndim != 2) throw std::invalid_argument("X must be 2-D");
  const auto yv = to_vector(y);
  Dataset d;
  d.task = task;
  d.rows = static_cast<std::size_t>(xb.shape[0]);
  d.dim = static_cast<std::size_t>(xb.shape[1]);
  if (yv.size() != d.rows) throw std::invalid_argument("X and y differ in length");
  const auto* p = static_cast<const double*>(xb.ptr);
  d.features.assign(p, p + d.rows * d.dim);
  for (std::size_t j = 0; j < d.dim; ++j) d.feature_names.push_back("x" + std::to_string(j + 1));
  if (task == Task::regression) {
    d.targets = yv;
    return d;
  }
  int max_label = 0;
  for (const double v : yv) {
    if (v < 0 || v != static_cast<int>(v)) throw std::invalid_argument("labels must be nonnegative integers");
    d.labels.push_back(static_cast<int>(v));
    max_label = std::max(max_label, static_cast<int>(v));
  }
  for (int c = 0; c <= std::max(max_label, 1); ++c) d.class_names.push_back(std::to_string(c));
  return d;
}

py::dict grads_dict(const ParamGrads& g) {
  py::dict out;
  out["values"] = to_array(g.flatten());
  out["names"] = g.names();
  return out;
}

}  // namespace

PYBIND11_MODULE(softgrove, m) {
  m.doc() = "Budding and distributed soft decision trees";

  py::register_exception<StructuralError>(m, "StructuralError");
  py::register_exception<ContractError>(m, "ContractError");
  py::register_exception<DataError>(m, "DataError");
  py::register_exception<TrainingError>(m, "TrainingError");

  py::enum_<TreeKind>(m, "TreeKind")
      .value("soft", TreeKind::soft)
      .value("budding", TreeKind::budding)
      .value("distributed", TreeKind::distributed);
  py::enum_<Task>(m, "Task")
      .value("regression", Task::regression)
      .value("binary", Task::binary)
      .value("multiclass", Task::multiclass);

  py::class_<SoftTree>(m, "SoftTree")
      .def_static("from_json",
                  [](const std::string& s) {
                    ModelFile f = parse_model(s);
                    if (!std::holds_alternative<SoftTree>(f.model)) throw DataError("not a soft tree");
                    return std::get<SoftTree>(std::move(f.model));
                  })
      .def("to_json", [](const SoftTree& t) { return to_json(t).dump(); })
      .def_readonly("kind", &SoftTree::kind)
      .def_readonly("input_dim", &SoftTree::input_dim)
      .def_readonly("output_dim", &SoftTree::output_dim)
      .def_readonly("task", &SoftTree::task)
      .def_property_readonly("hardened", &SoftTree::hardened)
      .def("size", [](const SoftTree& t) { return tree_size(t); })
      .def("depth", [](const SoftTree& t) { return tree_depth(t); })
      .def("__call__", [](const SoftTree& t, const DoubleArray& x) { return to_array(evaluate(t, to_vector(x))); },
           py::arg("x"), "Response for an augmented input [1, x_1, ..., x_d].");

  py::class_<HardTree>(m, "HardTree")
      .def("to_json", [](const HardTree& t) { return to_json(t).dump(); })
      .def("size", [](const HardTree& t) { return tree_size(t); })
      .def("__call__", [](const HardTree& t, const DoubleArray& x) { return to_array(eval_hard(t, to_vector(x))); });

  py::class_<Dataset>(m, "Dataset")
      .def(py::init(&make_dataset), py::arg("X"), py::arg("y"), py::arg("task"))
      .def_readonly("rows", &Dataset::rows)
      .def_readonly("dim", &Dataset::dim)
      .def_readonly("task", &Dataset::task)
      .def_readonly("labels", &Dataset::labels)
      .def_readonly("class_names", &Dataset::class_names)
      .def("subset", [](const Dataset& d, const std::vector<std::size_t>& idx) { return d.subset(idx); })
      .def("features", [](const Dataset& d) {
        py::array_t<double> out({static_cast<py::ssize_t>(d.rows), static_cast<py::ssize_t>(d.dim)});
        std::copy(d.features.begin(), d.features.end(), out.mutable_data());
        return out;
      });

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("lambda_", &TrainConfig::lambda)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("growth_threshold", &TrainConfig::growth_threshold)
      .def_readwrite("init_scale", &TrainConfig::init_scale)
      .def_readwrite("prune_eps", &TrainConfig::prune_eps)
      .def_readwrite("max_depth", &TrainConfig::max_depth);

  m.def("sigmoid_gate", [](const DoubleArray& w, const DoubleArray& x) {
    return sigmoid_gate(to_vector(w), to_vector(x));
  });
  m.def("eval_budding", [](const SoftTree& t, const DoubleArray& x) { return to_array(eval_budding(t, to_vector(x))); });
  m.def("eval_distributed",
        [](const SoftTree& t, const DoubleArray& x) { return to_array(eval_distributed(t, to_vector(x))); });
  m.def("to_soft", &to_soft);
  m.def("harden", &harden, py::arg("tree"), py::arg("gate_threshold") = 0.5);
  m.def("active_leaves", [](const SoftTree& t, const DoubleArray& x) { return active_leaves(t, to_vector(x)); });
  m.def("prune", &prune, py::arg("tree"), py::arg("eps"));
  m.def("tree_size", [](const SoftTree& t) { return tree_size(t); });

  m.def(
      "random_tree",
      [](TreeKind kind, Task task, int input_dim, int output_dim, int depth, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        RandomTreeOptions opt;
        opt.depth = depth;
        return random_tree(kind, task, input_dim, output_dim, opt, rng);
      },
      py::arg("kind"), py::arg("task"), py::arg("input_dim"), py::arg("output_dim"), py::arg("depth"),
      py::arg("seed") = 0);

  m.def(
      "forward_loss",
      [](const SoftTree& t, const Dataset& d, double lambda) {
        return forward_loss(t, d, LossSpec::for_task(d.task, lambda));
      },
      py::arg("tree"), py::arg("batch"), py::arg("lambda_") = 0.0);
  m.def(
      "backward",
      [](const SoftTree& t, const Dataset& d, double lambda) {
        return grads_dict(backward(t, d, LossSpec::for_task(d.task, lambda)));
      },
      py::arg("tree"), py::arg("batch"), py::arg("lambda_") = 0.0);
  m.def(
      "finite_diff_grads",
      [](const SoftTree& t, const Dataset& d, double lambda, double step) {
        return grads_dict(finite_diff_grads(t, d, LossSpec::for_task(d.task, lambda), step));
      },
      py::arg("tree"), py::arg("batch"), py::arg("lambda_") = 0.0, py::arg("step") = 1e-5);

  m.def(
      "sgd_fit",
      [](TreeKind kind, const Dataset& train, const Dataset& valid, const TrainConfig& config) {
        FitResult r = sgd_fit(kind, train, valid, config);
        py::list history;
        for (const EpochRecord& e : r.history.epochs) {
          py::dict rec;
          rec["epoch"] = e.epoch;
          rec["train_loss"] = e.train_loss;
          rec["valid_metric"] = e.valid_metric;
          rec["size"] = e.size;
          history.append(rec);
        }
        return py::make_tuple(std::move(r.tree), history);
      },
      py::arg("kind"), py::arg("train"), py::arg("valid"), py::arg("config"));
  m.def("grow_hard", &grow_hard, py::arg("train"), py::arg("valid"));
  m.def("predict", [](const SoftTree& t, const Dataset& d) { return to_array(predict_raw(t, d)); });
  m.def("metric", [](const SoftTree& t, const Dataset& d) { return metric(predict_raw(t, d), d); });

  m.def("synth", &synth, py::arg("name"), py::arg("n"), py::arg("seed") = 0);
  m.def("load_csv", [](const std::string& path, Task task) { return load_csv(path, task); });
  m.def("split_test_third", &split_test_third, py::arg("data"), py::arg("seed"));
  m.def("cv_5x2", [](const Dataset& d, std::uint64_t seed) {
    py::list pairs;
    for (const FoldPair& p : cv_5x2(d, seed).pairs) pairs.append(py::make_tuple(p.train, p.valid));
    return pairs;
  });

  m.def(
      "paired_t_test",
      [](const std::vector<double>& a, const std::vector<double>& b, double alpha) {
        const auto r = paired_t_test(a, b, alpha);
        py::dict out;
        out["t"] = r.t;
        out["p"] = r.p;
        out["significant"] = r.significant;
        out["degenerate"] = r.degenerate;
        out["winner"] = r.winner == Winner::a ? "a" : r.winner == Winner::b ? "b" : "none";
        return out;
      },
      py::arg("a"), py::arg("b"), py::arg("alpha") = 0.05);
  m.def(
      "wilcoxon_rank_sum",
      [](const std::vector<double>& a, const std::vector<double>& b, double alpha) {
        const auto r = wilcoxon_rank_sum(a, b, alpha);
        py::dict out;
        out["w"] = r.w;
        out["u"] = r.u;
        out["z"] = r.z;
        out["p"] = r.p;
        out["exact"] = r.exact;
        out["significant"] = r.significant;
        return out;
      },
      py::arg("a"), py::arg("b"), py::arg("alpha") = 0.05);

  m.def(
      "gradcheck",
      [](int trials, int depth, int dim, std::uint64_t seed) {
        GradcheckOptions o;
        o.trials = trials;
        o.depth = depth;
        o.dim = dim;
        o.seed = seed;
        std::ostringstream log;
        const auto r = run_gradcheck(o, log);
        return py::make_tuple(r.passed, r.max_rel_error);
      },
      py::arg("trials") = 10, py::arg("depth") = 3, py::arg("dim") = 5, py::arg("seed") = 0);
}
