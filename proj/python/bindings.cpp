#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include <json.hpp>

#include "hwnas/cli.hpp"
#include "hwnas/config.hpp"
#include "hwnas/eps_select.hpp"
#include "hwnas/errors.hpp"
#include "hwnas/genotype.hpp"
#include "hwnas/hw_model.hpp"
#include "hwnas/nsga2.hpp"
#include "hwnas/search.hpp"
#include "hwnas/toy_model.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

hwnas::RunConfig load(const std::string& config) {
  json doc = config.empty() ? json::object() : json::parse(config, nullptr, false);
  if (doc.is_discarded()) throw hwnas::ConfigError("configuration is not valid JSON");
  if (doc.is_object() && doc.empty()) doc["preset"] = "surrogate-demo";
  return hwnas::parse_run_config(doc);
}

std::vector<hwnas::Sense> senses_from(const std::vector<std::string>& names) {
  std::vector<hwnas::Sense> out;
  for (const auto& s : names) {
    if (s == "min")
      out.push_back(hwnas::Sense::Minimize);
    else if (s == "max")
      out.push_back(hwnas::Sense::Maximize);
    else
      throw std::invalid_argument("sense must be 'min' or 'max', got '" + s + "'");
  }
  return out;
}

std::vector<hwnas::FitnessVector> points_from(const std::vector<std::vector<double>>& values,
                                              const std::vector<hwnas::Sense>& senses) {
  std::vector<hwnas::FitnessVector> out;
  for (const auto& v : values) out.push_back({v, senses});
  return out;
}

py::dict estimate(const std::string& genotype, const std::string& config) {
  const auto cfg = load(config);
  const auto cost = hwnas::estimate(hwnas::decode(genotype), cfg.hardware);
  py::list layers;
  for (const auto& l : cost.per_layer) {
    py::dict d;
    d["weights"] = l.shape.weights;
    d["summands"] = l.shape.summands;
    d["maps_per_weight"] = l.shape.maps_per_weight;
    d["weight_load_groups"] = l.weight_load_groups;
    d["memory_accesses"] = l.memory_accesses;
    d["cycles"] = l.cycles;
    layers.append(d);
  }
  py::dict out;
  out["latency_ms"] = cost.latency_ms;
  out["energy_mj"] = cost.energy_mj;
  out["memory_mib"] = cost.memory_mib;
  out["cycles"] = cost.total_cycles;
  out["weights"] = cost.total_weights;
  out["layers"] = layers;
  return out;
}

std::string search(const std::string& config, std::optional<std::uint64_t> seed,
                   const std::string& strategy) {
  auto cfg = load(config);
  if (seed) cfg.seed = *seed;
  if (!hwnas::resolve_static_epsilons(cfg))
    throw hwnas::ConfigError("automatic epsilons are only available through the CLI");
  cfg.search.check();
  auto evaluator = hwnas::make_evaluator(cfg);
  py::gil_scoped_release release;
  const auto log = strategy == "random"
                       ? hwnas::random_search(cfg.search, *evaluator, cfg.hardware, cfg.seed)
                       : hwnas::evolve(cfg.search, *evaluator, cfg.hardware, cfg.seed);
  std::ostringstream s;
  log.write(s);
  return s.str();
}

py::dict select_epsilons(const std::vector<double>& epsilons, const std::vector<double>& accuracies,
                         double clean_accuracy, const std::string& spacing) {
  hwnas::AccuracyCurve curve;
  curve.epsilons = epsilons;
  curve.accuracies = accuracies;
  curve.clean_accuracy = clean_accuracy;
  if (spacing == "linear")
    curve.spacing = hwnas::GridSpacing::Linear;
  else if (spacing == "log")
    curve.spacing = hwnas::GridSpacing::Log;
  else if (spacing == "one_three")
    curve.spacing = hwnas::GridSpacing::OneThree;
  else
    throw std::invalid_argument("spacing must be log, linear or one_three");
  const auto sel = hwnas::select_epsilons(curve);
  py::dict out;
  out["eps_low"] = sel.eps_low;
  out["eps_nas"] = sel.eps_nas;
  out["eps_high"] = sel.eps_high;
  out["low_clamped"] = sel.low_clamped;
  out["high_clamped"] = sel.high_clamped;
  return out;
}

py::tuple run_cli(const std::vector<std::string>& args) {
  std::vector<std::string> argv{"hwnas"};
  argv.insert(argv.end(), args.begin(), args.end());
  std::ostringstream out, err;
  int code;
  {
    py::gil_scoped_release release;
    code = hwnas::cli::run(argv, out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Core operations of the hwnas search engine";

  // Base first: the most recently registered translator is tried first.
  py::register_exception<hwnas::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<hwnas::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<hwnas::FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<hwnas::UnsatisfiableSpace>(m, "UnsatisfiableSpace", PyExc_ValueError);
  py::register_exception<hwnas::DegenerateCurve>(m, "DegenerateCurve", PyExc_ValueError);
  py::register_exception<hwnas::BadReference>(m, "BadReference", PyExc_ValueError);

  m.def("estimate", &estimate, py::arg("genotype"), py::arg("config") = "",
        "Accelerator cost of a genotype (JSON text) under the configured hardware.");
  m.def(
      "random_genotype",
      [](std::uint64_t seed, const std::string& config) {
        return hwnas::encode(hwnas::random_genotype(load(config).search.space, seed));
      },
      py::arg("seed"), py::arg("config") = "");
  m.def(
      "validation_error",
      [](const std::string& genotype, const std::string& config) {
        return hwnas::validation_error(hwnas::decode(genotype), load(config).search.space);
      },
      py::arg("genotype"), py::arg("config") = "",
      "None for a valid genotype, otherwise the first violated rule.");
  m.def("genotype_hash", [](const std::string& g) { return hwnas::genotype_hash(hwnas::decode(g)); });
  m.def("search", &search, py::arg("config") = "", py::arg("seed") = py::none(),
        py::arg("strategy") = "nsga2", "Runs a search and returns the run log (NDJSON).");
  m.def("select_epsilons", &select_epsilons, py::arg("epsilons"), py::arg("accuracies"),
        py::arg("clean_accuracy"), py::arg("spacing") = "one_three");
  m.def(
      "non_dominated_sort",
      [](const std::vector<std::vector<double>>& values, const std::vector<std::string>& senses) {
        return hwnas::non_dominated_sort(points_from(values, senses_from(senses)));
      },
      py::arg("values"), py::arg("senses"));
  m.def(
      "crowding_distance",
      [](const std::vector<std::vector<double>>& values, const std::vector<std::string>& senses) {
        const auto pts = points_from(values, senses_from(senses));
        hwnas::Front all(pts.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        return hwnas::crowding_distance(pts, all);
      },
      py::arg("values"), py::arg("senses"));
  m.def(
      "hypervolume",
      [](const std::vector<std::vector<double>>& front, const std::vector<double>& reference,
         const std::vector<std::string>& senses) {
        const auto s = senses_from(senses);
        return hwnas::hypervolume(points_from(front, s), hwnas::FitnessVector{reference, s});
      },
      py::arg("front"), py::arg("reference"), py::arg("senses"));
  m.def("squash", [](const std::vector<double>& x) { return hwnas::squash(x); });
  m.def("cli", &run_cli, py::arg("args"), "Runs the command line; returns (code, stdout, stderr).");
}
