#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kdde/dataset.hpp"
#include "kdde/dynamics.hpp"
#include "kdde/encoder.hpp"
#include "kdde/error.hpp"
#include "kdde/eval.hpp"
#include "kdde/experiments.hpp"
#include "kdde/model.hpp"

namespace fs = std::filesystem;
using namespace kdde;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumerical = 4;
constexpr int kExitData = 5;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::SpecError:
      return kExitUsage;
    case ErrorCode::IoError:
    case ErrorCode::SchemaError:
      return kExitIo;
    case ErrorCode::SingularGram:
    case ErrorCode::DegenerateInput:
      return kExitNumerical;
    default:
      return kExitData;
  }
}

std::vector<double> parse_list(const std::string& s, char sep) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, sep)) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(part, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != part.size()) throw Error(ErrorCode::SpecError, "bad number '" + part + "' in '" + s + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<int> parse_grid(const std::string& s) {
  std::vector<int> out;
  for (double v : parse_list(s, 'x')) {
    if (v < 1 || v != static_cast<int>(v)) throw Error(ErrorCode::SpecError, "bad grid '" + s + "'");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("KDDE_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw Error(ErrorCode::SpecError, std::string("KDDE_SEED is not an integer: ") + env);
    }
  }
  return 7;
}

Box parse_bounds(const std::string& s) {
  // "lo1,hi1;lo2,hi2"
  std::vector<double> lo, hi;
  std::stringstream ss(s);
  std::string axis;
  while (std::getline(ss, axis, ';')) {
    const auto v = parse_list(axis, ',');
    if (v.size() != 2) throw Error(ErrorCode::SpecError, "bounds axis needs lo,hi: '" + axis + "'");
    lo.push_back(v[0]);
    hi.push_back(v[1]);
  }
  if (lo.size() != 2) throw Error(ErrorCode::SpecError, "bounds must cover both pendulum states");
  return Box{Eigen::Map<Vector>(lo.data(), 2), Eigen::Map<Vector>(hi.data(), 2)};
}

PendulumParams params_from_model(const KoopmanModel& model) {
  const auto& meta = model.meta;
  if (meta.contains("dataset") && meta["dataset"].contains("params"))
    return PendulumParams::from_json(meta["dataset"]["params"]);
  return {};
}

std::string json_number(double v) { return nlohmann::json(v).dump(); }

struct GenArgs {
  std::string kind;
  Eigen::Index n = 0;
  std::string center = "0,0";
  std::string stddev;
  std::string bounds;
  int border = 100;
  int trajectories = 100;
  std::uint64_t seed = 0;
  double dt = PendulumParams{}.dt;
  int substeps = PendulumParams{}.substeps;
  std::string out;
};

int run_gen(const GenArgs& a) {
  DatasetSpec spec;
  spec.kind = parse_dataset_kind(a.kind);
  spec.size = a.n;
  spec.seed = a.seed;
  spec.border_count = a.border;
  spec.n_trajectories = a.trajectories;
  if (!a.bounds.empty()) spec.bounds = parse_bounds(a.bounds);
  const auto c = parse_list(a.center, ',');
  if (c.size() != 2) throw Error(ErrorCode::SpecError, "--center needs two values");
  spec.center = Eigen::Vector2d(c[0], c[1]);
  if (!a.stddev.empty()) {
    const auto s = parse_list(a.stddev, ',');
    if (s.size() != 2) throw Error(ErrorCode::SpecError, "--stddev needs two values");
    spec.stddev = Eigen::Vector2d(s[0], s[1]);
  }
  PendulumParams params;
  params.dt = a.dt;
  params.substeps = a.substeps;

  const TransitionDataset data = generate(spec, params);
  const fs::path out = a.out.empty() ? fs::path(a.kind + std::to_string(data.size()) + ".csv") : fs::path(a.out);
  write_dataset_csv(data, out);
  write_json(data.provenance, provenance_path(out));
  std::cout << "wrote " << data.size() << " samples to " << out.string() << '\n';
  for (const auto& note : data.provenance["notes"]) std::cout << "note: " << note.get<std::string>() << '\n';
  return 0;
}

struct FitArgs {
  std::string method = "dde";
  std::string dict = "rbf:5x5";
  std::string data;
  std::string out;
  double ridge = 0.0;
  double rcond = 1e-12;
};

int run_fit(const FitArgs& a) {
  const FitMethod method = parse_fit_method(a.method);
  const DictionarySpec dspec = DictionarySpec::parse(a.dict);
  const TransitionDataset data = read_dataset_csv(a.data);
  const Dictionary dict = dspec.build(data);
  KoopmanModel model = fit(method, data, dict, FitSettings{a.ridge, a.rcond});
  model.meta["dictionary_spec"] = dspec.str();

  const fs::path out = a.out.empty() ? fs::path(a.method + "_model.json") : fs::path(a.out);
  write_model(model, out);
  std::cout << "method " << to_string(method) << '\n'
            << "observables " << dict.output_dim() << '\n';
  if (method == FitMethod::DDE) {
    std::cout << "condition_estimate " << model.meta["condition_estimate"].dump() << '\n'
              << "hull_volume " << json_number(model.meta["hull_volume"].get<double>()) << '\n'
              << "out_of_hull_targets " << model.meta["out_of_hull_targets"].get<long long>() << '\n';
  } else {
    std::cout << "condition_estimate " << model.meta["lifted_data_condition"].dump() << '\n'
              << "rank " << model.meta["rank"].get<long long>() << '\n';
  }
  std::cout << "wrote " << out.string() << '\n';
  return 0;
}

struct EvalArgs {
  std::string model;
  std::string data;
  std::string domain = "auto";
  std::string bounds;
  std::string grid = "100x100";
  std::string out = "eval";
};

EvalDomain resolve_domain(const EvalArgs& a, const KoopmanModel& model) {
  std::string mode = a.domain;
  std::optional<DatasetSpec> spec;
  if (model.meta.contains("dataset") && model.meta["dataset"].contains("spec"))
    spec = DatasetSpec::from_json(model.meta["dataset"]["spec"]);
  if (mode == "auto") mode = (spec && spec->kind == DatasetKind::Trajectories) ? "hull" : "box";
  if (mode == "hull") {
    if (a.data.empty()) throw Error(ErrorCode::SpecError, "a hull domain needs --data");
    return EvalDomain::hull_of(read_dataset_csv(a.data).current);
  }
  if (mode != "box") throw Error(ErrorCode::SpecError, "--domain must be auto, box or hull");
  if (!a.bounds.empty()) return EvalDomain::rectangle(parse_bounds(a.bounds));
  if (spec) return EvalDomain::rectangle(spec->bounds);
  if (!a.data.empty()) return EvalDomain::rectangle(bounding_box(read_dataset_csv(a.data).current));
  return EvalDomain::rectangle(DatasetSpec{}.bounds);
}

int run_eval(const EvalArgs& a) {
  const KoopmanModel model = read_model(a.model);
  const EvalDomain domain = resolve_domain(a, model);
  const std::vector<int> grid = parse_grid(a.grid);
  EvalReport report = sse_grid(model, params_from_model(model), domain, grid);
  report.model_meta["model_file"] = a.model;
  report.write_csv(a.out + ".csv");
  write_json(report.summary_json(), a.out + ".json");
  std::cout << "method " << to_string(model.method) << '\n'
            << "total_sse " << json_number(report.total_sse) << '\n'
            << "sse_variance " << json_number(report.sse_variance) << '\n'
            << "cells_in_range " << report.cells_in_range << '\n';
  return 0;
}

struct ConvergenceArgs {
  std::string sizes = "1000,2500,5000,10000,25000";
  std::string dict = "rbf:5x5";
  std::uint64_t seed = 0;
  std::string out = "convergence.csv";
  int jobs = 1;
};

int run_convergence(const ConvergenceArgs& a) {
  std::vector<Eigen::Index> sizes;
  for (double v : parse_list(a.sizes, ',')) sizes.push_back(static_cast<Eigen::Index>(v));
  ExperimentOptions opts;
  opts.dictionary = DictionarySpec::parse(a.dict);
  opts.seed = a.seed;
  opts.jobs = a.jobs;
  DatasetSpec spec;
  spec.kind = DatasetKind::Trajectories;
  spec.seed = a.seed;
  const ConvergenceTrace trace = q_convergence(sizes, spec, opts);
  trace.write_csv(a.out);
  const Vector change = trace.last_relative_change();
  for (std::size_t s = 0; s < trace.selectors.size(); ++s)
    std::cout << trace.selectors[s].label << " last_relative_change " << json_number(change(static_cast<Eigen::Index>(s)))
              << '\n';
  std::cout << "wrote " << a.out << '\n';
  return 0;
}

struct ReproduceArgs {
  std::string table;
  int repeats = 8;
  std::string dict = "rbf:5x5";
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out;
};

int run_reproduce(const ReproduceArgs& a) {
  ExperimentOptions opts;
  opts.dictionary = DictionarySpec::parse(a.dict);
  opts.seed = a.seed;
  opts.jobs = a.jobs;
  const std::string md = reproduce_table(a.table, opts, a.repeats);
  std::cout << md;
  if (!a.out.empty()) {
    std::ofstream f(a.out);
    if (!(f << md)) throw Error(ErrorCode::IoError, "cannot write " + a.out);
  }
  return 0;
}

int run_config(const std::string& path) {
  const ExperimentConfig cfg = ExperimentConfig::from_json(read_json(path));
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  write_json(cfg.to_json(), dir / "config.json");

  DatasetSpec spec = cfg.dataset;
  spec.seed = cfg.seed;
  const TransitionDataset data = generate(spec);
  write_dataset_csv(data, dir / "data.csv");
  write_json(data.provenance, provenance_path(dir / "data.csv"));

  const Dictionary dict = DictionarySpec::parse(cfg.dictionary).build(data);
  const EvalDomain domain = default_domain(spec.kind, spec, data);
  for (const auto& name : cfg.methods) {
    const FitMethod method = parse_fit_method(name);
    KoopmanModel model = fit(method, data, dict, FitSettings{cfg.ridge, cfg.rcond});
    model.meta["dictionary_spec"] = cfg.dictionary;
    write_model(model, dir / (name + "_model.json"));
    EvalReport report = sse_grid(model, PendulumParams{}, domain, cfg.eval_grid);
    report.write_csv(dir / (name + "_eval.csv"));
    write_json(report.summary_json(), dir / (name + "_eval.json"));
    std::cout << name << " total_sse " << json_number(report.total_sse) << " sse_variance "
              << json_number(report.sse_variance) << '\n';
  }
  std::cout << "wrote " << dir.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Koopman models by data-driven encoding (DDE) and EDMD"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  GenArgs gen;
  FitArgs fit_args;
  EvalArgs eval_args;
  ConvergenceArgs conv;
  ReproduceArgs repro;
  std::string config_path;

  try {
    seed = default_seed();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  auto* g = app.add_subcommand("gen-data", "generate a pendulum transition dataset");
  g->add_option("--kind", gen.kind, "uniform, gaussian or traj")->required()->check(CLI::IsMember({"uniform", "gaussian", "traj"}));
  g->add_option("--n", gen.n, "number of samples")->required()->check(CLI::PositiveNumber);
  g->add_option("--center", gen.center, "Gaussian center theta,theta_dot");
  g->add_option("--stddev", gen.stddev, "Gaussian std per axis (default extent/4)");
  g->add_option("--bounds", gen.bounds, "lo,hi;lo,hi (default -0.8,0.8;-2,2)");
  g->add_option("--border", gen.border, "perimeter points for gaussian data");
  g->add_option("--trajectories", gen.trajectories, "initial conditions for traj data");
  g->add_option("--dt", gen.dt, "map time step");
  g->add_option("--substeps", gen.substeps, "RK4 steps per map step");
  g->add_option("--seed", gen.seed, "RNG seed (default $KDDE_SEED or 7)");
  g->add_option("--out", gen.out, "output CSV");

  auto* f = app.add_subcommand("fit", "fit a Koopman model");
  f->add_option("--method", fit_args.method, "dde or edmd")->check(CLI::IsMember({"dde", "edmd"}));
  f->add_option("--dict", fit_args.dict, "state, rbf:AxB[:factor] or mlp:weights.json");
  f->add_option("--data", fit_args.data, "dataset CSV")->required();
  f->add_option("--out", fit_args.out, "model JSON");
  f->add_option("--ridge", fit_args.ridge, "Tikhonov term added to R (DDE)")->check(CLI::NonNegativeNumber);
  f->add_option("--rcond", fit_args.rcond, "relative singular value cutoff (EDMD)")->check(CLI::PositiveNumber);

  auto* e = app.add_subcommand("eval", "one-step SSE over the dynamic range");
  e->add_option("--model", eval_args.model, "model JSON")->required();
  e->add_option("--data", eval_args.data, "training CSV (needed for hull domains)");
  e->add_option("--domain", eval_args.domain, "auto, box or hull");
  e->add_option("--bounds", eval_args.bounds, "box lo,hi;lo,hi");
  e->add_option("--grid", eval_args.grid, "cells per axis, e.g. 100x100");
  e->add_option("--out", eval_args.out, "output prefix (.csv and .json)");

  auto* c = app.add_subcommand("convergence", "Q and R entries against trajectory dataset size");
  c->add_option("--sizes", conv.sizes, "increasing comma-separated sizes");
  c->add_option("--dict", conv.dict, "dictionary spec");
  c->add_option("--seed", conv.seed, "RNG seed");
  c->add_option("--out", conv.out, "trace CSV");
  c->add_option("--jobs", conv.jobs, "worker threads")->check(CLI::PositiveNumber);

  auto* r = app.add_subcommand("reproduce", "regenerate a results table as Markdown");
  r->add_option("--table", repro.table, "I, II or III")->required()->check(CLI::IsMember({"I", "II", "III"}));
  r->add_option("--repeats", repro.repeats, "seeds per Gaussian dataset")->check(CLI::PositiveNumber);
  r->add_option("--dict", repro.dict, "dictionary spec");
  r->add_option("--seed", repro.seed, "RNG seed");
  r->add_option("--jobs", repro.jobs, "worker threads")->check(CLI::PositiveNumber);
  r->add_option("--out", repro.out, "also write the table here");

  auto* run = app.add_subcommand("run", "run a whole experiment from a JSON config");
  run->add_option("--config", config_path, "experiment config JSON")->required();

  gen.seed = conv.seed = repro.seed = seed;

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*g) return run_gen(gen);
    if (*f) return run_fit(fit_args);
    if (*e) return run_eval(eval_args);
    if (*c) return run_convergence(conv);
    if (*r) return run_reproduce(repro);
    if (*run) return run_config(config_path);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return exit_code_for(err.code());
  } catch (const fs::filesystem_error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitIo;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 0;
}
