#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "camel/augment.hpp"
#include "camel/cli/checkpoint.hpp"
#include "camel/cli/config.hpp"
#include "camel/cli/experiment.hpp"
#include "camel/cli/selfcheck.hpp"
#include "camel/eval.hpp"
#include "camel/meta.hpp"

namespace py = pybind11;
using namespace camel;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

ParamVector to_params(const py::dict& d) {
  ParamVector p;
  for (auto item : d) p.add(py::cast<std::string>(item.first), to_tensor(py::cast<Array>(item.second)));
  return p;
}

py::dict to_dict(const ParamVector& p) {
  py::dict d;
  for (const auto& [name, t] : p.entries()) d[py::str(name)] = to_array(t);
  return d;
}

Image to_image(const Array& a) {
  if (a.ndim() != 3) throw std::invalid_argument("image must be an H x W x C array");
  return Image(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
               static_cast<std::size_t>(a.shape(2)), std::vector<double>(a.data(), a.data() + a.size()));
}

Array image_array(const Image& img) {
  Array out({img.height(), img.width(), img.channels()});
  std::copy(img.pixels().begin(), img.pixels().end(), out.mutable_data());
  return out;
}

SimilarityMatrix similarity(const Array& scores, std::vector<int> q, std::vector<int> g) {
  return SimilarityMatrix(to_tensor(scores), std::move(q), std::move(g));
}

py::dict metrics_dict(const RetrievalMetrics& m) {
  py::dict d;
  d["r1"] = m.r1;
  d["r5"] = m.r5;
  d["r10"] = m.r10;
  d["map"] = m.map;
  return d;
}

py::dict run(const std::string& config_text, std::uint64_t seed) {
  auto cfg = cli::parse_run_config(cli::KeyValueFile::parse(config_text, "<python>"));
  cfg.seed = seed;
  cli::RunOutcome outcome;
  {
    py::gil_scoped_release release;
    const auto data = cli::load_datasets(cfg, seed);
    outcome = cli::run_experiment(cfg, seed, data);
  }
  py::list curve;
  for (const auto& m : outcome.curve) curve.append(metrics_dict(m));
  py::list losses;
  for (const auto& rec : outcome.train.log) losses.append(rec.loss);
  py::dict out;
  out["curve"] = curve;
  out["losses"] = losses;
  out["params"] = to_dict(outcome.train.params);
  out["seconds"] = outcome.seconds;
  return out;
}

}  // namespace

PYBIND11_MODULE(_camel, m) {
  m.doc() = "Meta-learned text-based person retrieval on a procedural dataset";

  py::register_exception<cli::ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("fast_update", [](const py::dict& theta0, const std::vector<py::dict>& tasks, double eps_fast) {
    std::vector<ParamVector> t;
    for (const auto& d : tasks) t.push_back(to_params(d));
    return to_dict(fast_update(to_params(theta0), t, eps_fast));
  }, py::arg("theta0"), py::arg("task_params"), py::arg("eps_fast"));

  m.def("slow_update", [](const py::dict& slow, const py::dict& fast, double eps_slow) {
    auto [s, f] = slow_update(to_params(slow), to_params(fast), eps_slow);
    return py::make_tuple(to_dict(s), to_dict(f));
  }, py::arg("slow"), py::arg("fast"), py::arg("eps_slow"));

  m.def("gaussian_kernel", [](double sigma, int radius) { return to_array(gaussian_kernel({sigma, radius})); },
        py::arg("sigma"), py::arg("radius"));
  m.def("gaussian_blur", [](const Array& img, double sigma, int radius) {
    return image_array(gaussian_blur(to_image(img), {sigma, radius}));
  }, py::arg("image"), py::arg("sigma"), py::arg("radius"));
  m.def("mixup_images", [](const Array& a, const Array& b, double lam) {
    return image_array(mixup_images(to_image(a), to_image(b), lam));
  }, py::arg("a"), py::arg("b"), py::arg("lam"));
  m.def("sample_lambda", [](double delta, std::uint64_t seed, std::size_t n) {
    Rng rng(seed);
    std::vector<double> out(n);
    for (auto& x : out) x = sample_lambda({delta}, rng);
    return out;
  }, py::arg("delta"), py::arg("seed"), py::arg("n") = 1);

  m.def("recall_at_k", [](const Array& s, std::vector<int> q, std::vector<int> g, std::size_t k) {
    return recall_at_k(similarity(s, std::move(q), std::move(g)), k);
  }, py::arg("scores"), py::arg("query_ids"), py::arg("gallery_ids"), py::arg("k"));
  m.def("mean_ap", [](const Array& s, std::vector<int> q, std::vector<int> g) {
    return mean_ap(similarity(s, std::move(q), std::move(g)));
  }, py::arg("scores"), py::arg("query_ids"), py::arg("gallery_ids"));
  m.def("retrieval_metrics", [](const Array& s, std::vector<int> q, std::vector<int> g) {
    return metrics_dict(retrieval_metrics(similarity(s, std::move(q), std::move(g))));
  }, py::arg("scores"), py::arg("query_ids"), py::arg("gallery_ids"));

  m.def("run", &run, py::arg("config_text") = "", py::arg("seed") = 0,
        "Train and evaluate one run; the config uses the same format as the CLI's --config file.");

  m.def("load_checkpoint", [](const std::string& path) { return to_dict(cli::load_checkpoint(path).params); },
        py::arg("path"));

  m.def("selfcheck", [] {
    py::list out;
    for (const auto& r : cli::run_selfcheck()) out.append(py::make_tuple(r.name, r.measured, r.threshold, r.pass));
    return out;
  });
}
