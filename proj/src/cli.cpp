#include "hwnas/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <unistd.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "hwnas/config.hpp"
#include "hwnas/eps_select.hpp"
#include "hwnas/errors.hpp"
#include "hwnas/search.hpp"

namespace hwnas::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOptions {
  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string backend;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_backend = true) {
  cmd->add_option("--config", o.config_path, "JSON configuration file");
  cmd->add_option("--preset", o.preset,
                  "built-in configuration: surrogate-demo, toy-demo, mnist, fmnist, cifar10");
  cmd->add_option("--seed", o.seed, "random seed");
  if (with_backend)
    cmd->add_option("--backend", o.backend, "surrogate | toy | external:<command>");
}

RunConfig load_config(const CommonOptions& o) {
  json doc = json::object();
  if (!o.config_path.empty()) {
    doc = json::parse(read_file(o.config_path), nullptr, false);
    if (doc.is_discarded()) throw ConfigError(o.config_path + " is not valid JSON");
  }
  if (!o.preset.empty())
    doc["preset"] = o.preset;
  else if (o.config_path.empty())
    doc["preset"] = "surrogate-demo";
  auto cfg = parse_run_config(doc);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.backend.empty()) set_backend(cfg.evaluator, o.backend);
  apply_environment(cfg);
  return cfg;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return fmt(v);
}

json selection_to_json(const EpsilonSelection& sel, SearchMode mode) {
  auto curve = json::array();
  for (std::size_t i = 0; i < sel.curve.epsilons.size(); ++i)
    curve.push_back({{"epsilon", sel.curve.epsilons[i]}, {"accuracy", sel.curve.accuracies[i]}});
  return {{"eps_low", sel.eps_low},
          {"eps_nas", sel.eps_nas},
          {"eps_high", sel.eps_high},
          {"low_clamped", sel.low_clamped},
          {"high_clamped", sel.high_clamped},
          {"clean_accuracy", sel.curve.clean_accuracy},
          {"search_epsilons", epsilons_for_mode(sel, mode)},
          {"curve", curve}};
}

std::string curve_csv(const AccuracyCurve& c) {
  std::string s = "epsilon,accuracy\n" + fmt(0.0) + "," + fmt(c.clean_accuracy) + "\n";
  for (std::size_t i = 0; i < c.epsilons.size(); ++i)
    s += fmt(c.epsilons[i]) + "," + fmt(c.accuracies[i]) + "\n";
  return s;
}

EpsilonSelection run_sweep(const RunConfig& cfg, Evaluator& ev, const Genotype& probe) {
  const auto curve =
      sweep_accuracy(ev, probe, cfg.epsilon.grid, cfg.search.train_epochs, cfg.seed);
  return select_epsilons(curve);
}

Genotype load_genotype(const std::string& path) {
  try {
    return decode(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

// search ---------------------------------------------------------------

struct SearchOptions {
  CommonOptions common;
  std::string out = "runlog.ndjson";
  std::string front_dir;
  std::string strategy;
  std::optional<int> generations;
  std::optional<int> population;
};

int cmd_search(const SearchOptions& o, std::ostream& out, std::ostream& err) {
  auto cfg = load_config(o.common);
  if (!o.strategy.empty()) {
    if (o.strategy == "nsga2")
      cfg.strategy = Strategy::Nsga2;
    else if (o.strategy == "random")
      cfg.strategy = Strategy::Random;
    else
      throw ConfigError("--strategy must be nsga2 or random");
  }
  if (o.generations) cfg.search.generations = *o.generations;
  if (o.population) cfg.search.population = *o.population;

  auto evaluator = make_evaluator(cfg);
  if (!resolve_static_epsilons(cfg)) {
    const auto sel = run_sweep(cfg, *evaluator, probe_genotype(cfg));
    cfg.search.epsilons = epsilons_for_mode(sel, cfg.search.mode);
    err << "epsilon sweep selected";
    for (double e : cfg.search.epsilons) err << ' ' << e;
    err << '\n';
  }
  cfg.search.check();

  const RunLog log = cfg.strategy == Strategy::Nsga2
                         ? evolve(cfg.search, *evaluator, cfg.hardware, cfg.seed)
                         : random_search(cfg.search, *evaluator, cfg.hardware, cfg.seed);

  std::ostringstream text;
  log.write(text);
  write_file_atomic(o.out, text.str());

  const fs::path dir = o.front_dir.empty() ? fs::path(o.out + ".front") : fs::path(o.front_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  auto index = json::array();
  for (auto id : log.front) {
    const auto* r = log.find(id);
    write_file_atomic((dir / (r->hash + ".json")).string(), to_json(r->genotype).dump(2) + "\n");
    index.push_back({{"id", r->id}, {"hash", r->hash}, {"fitness", r->fitness.values}});
  }
  write_file_atomic((dir / "front.json").string(), index.dump(2) + "\n");

  std::size_t failed = 0;
  for (const auto& r : log.records) failed += r.result.ok() ? 0 : 1;
  const auto& last = log.generations.back();
  out << "evaluations " << last.evaluations << ", evaluator calls " << last.evaluator_calls
      << ", failed " << failed << ", front size " << log.front.size() << ", hypervolume "
      << last.hypervolume << "\n"
      << "run log: " << o.out << "\nfront genotypes: " << dir.string() << "\n";
  if (!log.records.empty() && failed == log.records.size())
    throw EvaluatorError("every evaluation failed; first error: " + log.records.front().result.error);
  return kOk;
}

// estimate -------------------------------------------------------------

struct EstimateOptions {
  CommonOptions common;
  std::string genotype_path;
  std::string out;
  bool json_output = false;
};

json cost_to_json(const Genotype& g, const NetworkCost& c, const HardwareConfig& hw) {
  auto layers = json::array();
  for (std::size_t i = 0; i < c.per_layer.size(); ++i) {
    const auto& l = c.per_layer[i];
    layers.push_back({{"layer", i},
                      {"type", to_string(g.layers[i].type)},
                      {"weights", l.shape.weights},
                      {"summands", l.shape.summands},
                      {"maps_per_weight", l.shape.maps_per_weight},
                      {"weight_load_groups", l.weight_load_groups},
                      {"memory_accesses", l.memory_accesses},
                      {"cycles", l.cycles}});
  }
  return {{"hardware", hardware_to_json(hw)},
          {"layers", layers},
          {"totals",
           {{"latency_ms", c.latency_ms},
            {"energy_mj", c.energy_mj},
            {"memory_mib", c.memory_mib},
            {"cycles", c.total_cycles},
            {"weights", c.total_weights}}}};
}

int cmd_estimate(const EstimateOptions& o, std::ostream& out, std::ostream& err) {
  const auto cfg = load_config(o.common);
  const auto g = load_genotype(o.genotype_path);
  if (const auto why = validation_error(g, cfg.search.space))
    err << "warning: genotype is outside the configured search space: " << *why << "\n";
  const auto cost = estimate(g, cfg.hardware);
  const auto doc = cost_to_json(g, cost, cfg.hardware);
  if (!o.out.empty()) write_file_atomic(o.out, doc.dump(2) + "\n");
  if (o.json_output)
    out << doc.dump(2) << "\n";
  else
    out << format_cost_table(cost);
  return kOk;
}

// eps-select -----------------------------------------------------------

struct EpsSelectOptions {
  CommonOptions common;
  std::string probe_path;
  std::string out;
  std::string csv;
};

int cmd_eps_select(const EpsSelectOptions& o, std::ostream& out, std::ostream&) {
  auto cfg = load_config(o.common);
  const auto probe = o.probe_path.empty() ? probe_genotype(cfg) : load_genotype(o.probe_path);
  auto evaluator = make_evaluator(cfg);
  const auto sel = run_sweep(cfg, *evaluator, probe);
  const auto doc = selection_to_json(sel, cfg.search.mode);
  const auto csv = curve_csv(sel.curve);
  if (!o.out.empty()) write_file_atomic(o.out, doc.dump(2) + "\n");
  if (!o.csv.empty()) write_file_atomic(o.csv, csv);
  out << doc.dump(2) << "\n\n" << csv;
  return kOk;
}

// front ----------------------------------------------------------------

struct FrontOptions {
  std::string runlog;
  std::string out;
};

int cmd_front(const FrontOptions& o, std::ostream& out, std::ostream&) {
  std::istringstream in(read_file(o.runlog));
  const auto log = read_run_log(in);
  std::string csv = "hash";
  for (const auto& n : log.layout.names) csv += "," + n;
  csv += "\n";
  for (std::size_t i : archive_front(log)) {
    const auto& r = log.records[i];
    csv += r.hash;
    for (double v : r.fitness.values) csv += "," + csv_number(v);
    csv += "\n";
  }
  if (o.out.empty())
    out << csv;
  else
    write_file_atomic(o.out, csv);
  return kOk;
}

void report(std::ostream& err, int code, std::string_view kind, const std::string& message) {
  err << json{{"error", {{"code", code}, {"kind", kind}, {"message", message}}}}.dump() << "\n";
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path);
  std::ostringstream s;
  s << f.rdbuf();
  if (f.bad()) throw IoError("error reading " + path);
  return s.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + tmp.string());
    f << content;
    f.flush();
    if (!f) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("error writing " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    std::error_code ignore;
    fs::remove(tmp, ignore);
    throw IoError("cannot rename into " + path + ": " + ec.message());
  }
}

std::string format_cost_table(const NetworkCost& cost) {
  std::ostringstream s;
  s << std::left << std::setw(6) << "layer" << std::right << std::setw(14) << "weights"
    << std::setw(10) << "summands" << std::setw(8) << "maps" << std::setw(10) << "w_pe"
    << std::setw(8) << "m_acc" << std::setw(16) << "cycles" << "\n";
  for (std::size_t i = 0; i < cost.per_layer.size(); ++i) {
    const auto& l = cost.per_layer[i];
    s << std::left << std::setw(6) << i << std::right << std::setw(14) << l.shape.weights
      << std::setw(10) << l.shape.summands << std::setw(8) << l.shape.maps_per_weight
      << std::setw(10) << l.weight_load_groups << std::setw(8) << l.memory_accesses
      << std::setw(16) << l.cycles << "\n";
  }
  s << std::setprecision(10) << "latency_ms " << cost.latency_ms << "\nenergy_mj "
    << cost.energy_mj << "\nmemory_mib " << cost.memory_mib << "\ncycles " << cost.total_cycles
    << "\nweights " << cost.total_weights << "\n";
  return s.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-objective architecture search for robust, hardware-efficient networks"};
  app.require_subcommand(1);

  SearchOptions search;
  auto* s = app.add_subcommand("search", "run NSGA-II or random search and write the run log");
  add_common(s, search.common);
  s->add_option("--out", search.out, "run log path (newline-delimited JSON)")->capture_default_str();
  s->add_option("--front-dir", search.front_dir,
                "directory for final-front genotype files (default <out>.front)");
  s->add_option("--strategy", search.strategy, "nsga2 | random");
  s->add_option("--generations", search.generations, "number of generations");
  s->add_option("--population", search.population, "population size");

  EstimateOptions est;
  auto* e = app.add_subcommand("estimate", "print the accelerator cost of a genotype");
  add_common(e, est.common, false);
  e->add_option("genotype", est.genotype_path, "genotype JSON file")->required();
  e->add_option("--out", est.out, "also write the cost document to this path");
  e->add_flag("--json", est.json_output, "print JSON instead of a table");

  EpsSelectOptions eps;
  auto* p = app.add_subcommand("eps-select", "sweep epsilon and pick the search perturbations");
  add_common(p, eps.common);
  p->add_option("--probe", eps.probe_path, "genotype used for the sweep");
  p->add_option("--out", eps.out, "write the selection document here");
  p->add_option("--csv", eps.csv, "write the epsilon,accuracy curve here");

  FrontOptions front;
  auto* f = app.add_subcommand("front", "export the non-dominated archive of a run log as CSV");
  f->add_option("runlog", front.runlog, "run log path")->required();
  f->add_option("--out", front.out, "CSV path (default standard output)");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  if (argv.empty()) argv.push_back("hwnas");

  try {
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& ex) {
      return app.exit(ex, out, err);
    } catch (const CLI::CallForAllHelp& ex) {
      return app.exit(ex, out, err);
    } catch (const CLI::CallForVersion& ex) {
      return app.exit(ex, out, err);
    } catch (const CLI::ParseError& ex) {
      report(err, kConfig, "usage", ex.what());
      return kConfig;
    }
    if (s->parsed()) return cmd_search(search, out, err);
    if (e->parsed()) return cmd_estimate(est, out, err);
    if (p->parsed()) return cmd_eps_select(eps, out, err);
    if (f->parsed()) return cmd_front(front, out, err);
    return kInternal;
  } catch (const IoError& ex) {
    report(err, kIo, "io", ex.what());
    return kIo;
  } catch (const EvaluatorError& ex) {
    report(err, kEvaluator, "evaluator", ex.what());
    return kEvaluator;
  } catch (const ConfigError& ex) {
    report(err, kConfig, "config", ex.what());
    return kConfig;
  } catch (const FormatError& ex) {
    report(err, kConfig, "format", ex.what());
    return kConfig;
  } catch (const UnsatisfiableSpace& ex) {
    report(err, kConfig, "config", ex.what());
    return kConfig;
  } catch (const DegenerateCurve& ex) {
    report(err, kConfig, "degenerate_curve", ex.what());
    return kConfig;
  } catch (const std::invalid_argument& ex) {
    report(err, kConfig, "config", ex.what());
    return kConfig;
  } catch (const std::exception& ex) {
    report(err, kInternal, "internal", ex.what());
    return kInternal;
  }
}

}  // namespace hwnas::cli
