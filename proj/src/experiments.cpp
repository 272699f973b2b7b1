#include "kdde/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <numeric>
#include <sstream>
#include <iomanip>

#include "kdde/edmd.hpp"
#include "kdde/encoder.hpp"
#include "kdde/error.hpp"

namespace kdde {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, sep)) out.push_back(part);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

int parse_positive_int(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty() || v < 1) throw Error(ErrorCode::SpecError, "bad " + what + ": '" + s + "'");
  return v;
}

double parse_positive_double(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty() || !(v > 0.0) || !std::isfinite(v))
    throw Error(ErrorCode::SpecError, "bad " + what + ": '" + s + "'");
  return v;
}

// Runs task(i) for i in [0, count) on up to `jobs` threads; results keep
// their index so the reduction order never depends on scheduling.
template <class T, class F>
std::vector<T> parallel_map(int count, int jobs, F task) {
  std::vector<T> out(static_cast<std::size_t>(count));
  if (jobs <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = task(i);
    return out;
  }
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int i = next++; i < count; i = next++) out[static_cast<std::size_t>(i)] = task(i);
  };
  std::vector<std::future<void>> pool;
  for (int t = 0; t < std::min(jobs, count); ++t) pool.push_back(std::async(std::launch::async, worker));
  for (auto& f : pool) f.get();
  return out;
}

MethodStats stats_of(const std::vector<double>& totals, const std::vector<double>& variances) {
  MethodStats s;
  s.totals = totals;
  s.variances = variances;
  const double n = static_cast<double>(totals.size());
  s.mean_total = std::accumulate(totals.begin(), totals.end(), 0.0) / n;
  s.mean_variance = std::accumulate(variances.begin(), variances.end(), 0.0) / n;
  double ss = 0.0;
  for (double t : totals) ss += (t - s.mean_total) * (t - s.mean_total);
  s.std_total = std::sqrt(ss / n);
  return s;
}

// Negative digits switch to scientific notation (variances are ~1e-5).
std::string fmt(double v, int digits) {
  std::ostringstream os;
  if (digits < 0) os << std::scientific << std::setprecision(-digits) << v;
  else os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string pair_cell(double edmd, double dde, int digits) {
  std::string a = fmt(edmd, digits), b = fmt(dde, digits);
  if (dde < edmd) b = "**" + b + "**";
  else if (edmd < dde) a = "**" + a + "**";
  return a + " / " + b;
}

}  // namespace

DictionarySpec DictionarySpec::parse(const std::string& text) {
  DictionarySpec spec;
  if (text == "state") {
    spec.kind = Kind::State;
    spec.grid.clear();
    return spec;
  }
  if (text.rfind("mlp:", 0) == 0) {
    spec.kind = Kind::Mlp;
    spec.grid.clear();
    spec.mlp_path = text.substr(4);
    if (spec.mlp_path.empty()) throw Error(ErrorCode::SpecError, "mlp dictionary needs a weights path");
    return spec;
  }
  if (text.rfind("rbf:", 0) == 0) {
    const auto parts = split(text.substr(4), ':');
    if (parts.empty() || parts.size() > 2) throw Error(ErrorCode::SpecError, "expected rbf:AxB[:factor], got '" + text + "'");
    spec.kind = Kind::Rbf;
    spec.grid.clear();
    for (const auto& side : split(parts[0], 'x')) spec.grid.push_back(parse_positive_int(side, "RBF grid side"));
    if (parts.size() == 2) spec.width_factor = parse_positive_double(parts[1], "RBF width factor");
    return spec;
  }
  throw Error(ErrorCode::SpecError, "unknown dictionary spec '" + text + "' (state, rbf:AxB[:factor], mlp:path)");
}

std::string DictionarySpec::str() const {
  switch (kind) {
    case Kind::State:
      return "state";
    case Kind::Mlp:
      return "mlp:" + mlp_path;
    case Kind::Rbf: {
      std::string s = "rbf:";
      for (std::size_t i = 0; i < grid.size(); ++i) s += (i ? "x" : "") + std::to_string(grid[i]);
      if (width_factor != 1.0) {
        std::ostringstream os;
        os << std::setprecision(17) << width_factor;
        s += ":" + os.str();
      }
      return s;
    }
  }
  return "state";
}

Dictionary DictionarySpec::build(const TransitionDataset& data) const {
  data.validate();
  switch (kind) {
    case Kind::State:
      return Dictionary::state_only(data.dim());
    case Kind::Mlp: {
      const MlpWeights w = read_mlp_weights(mlp_path);
      if (w.input_dim != data.dim())
        throw Error(ErrorCode::DimensionMismatch, "MLP input_dim does not match the dataset");
      return load_mlp_dictionary(w, w.include_state);
    }
    case Kind::Rbf: {
      if (static_cast<int>(grid.size()) != data.dim())
        throw Error(ErrorCode::DimensionMismatch, "RBF grid needs one side per state variable");
      return make_rbf_grid(bounding_box(data.current), grid, SpacingScaled{width_factor});
    }
  }
  throw Error(ErrorCode::SpecError, "unreachable dictionary kind");
}

KoopmanModel fit(FitMethod method, const TransitionDataset& data, const Dictionary& dict, const FitSettings& settings) {
  if (method == FitMethod::DDE) return fit_dde(data, dict, DdeOptions{settings.ridge, {}});
  return fit_edmd(data, dict, EdmdOptions{settings.rcond});
}

EvalDomain default_domain(DatasetKind kind, const DatasetSpec& spec, const TransitionDataset& data) {
  if (kind == DatasetKind::Trajectories) return EvalDomain::hull_of(data.current);
  return EvalDomain::rectangle(spec.bounds);
}

Comparison compare_methods(const TransitionDataset& data, const Dictionary& dict, const PendulumParams& truth,
                           const EvalDomain& domain, std::span<const int> resolution, const FitSettings& settings) {
  const KoopmanModel edmd = fit(FitMethod::EDMD, data, dict, settings);
  const KoopmanModel dde = fit(FitMethod::DDE, data, dict, settings);
  return {sse_grid(edmd, truth, domain, resolution), sse_grid(dde, truth, domain, resolution)};
}

std::vector<ProtocolRow> gaussian_protocol(const Eigen::Vector2d& center, const std::vector<Eigen::Index>& sizes,
                                           int repeats, const ExperimentOptions& options) {
  if (repeats < 1) throw Error(ErrorCode::SpecError, "repeats must be >= 1");
  std::vector<ProtocolRow> rows;
  for (const Eigen::Index n : sizes) {
    auto runs = parallel_map<Comparison>(repeats, options.jobs, [&](int r) {
      DatasetSpec spec;
      spec.kind = DatasetKind::GaussianCloud;
      spec.size = n;
      spec.center = center;
      spec.seed = options.seed + static_cast<std::uint64_t>(r);
      const TransitionDataset data = generate(spec, options.params);
      const Dictionary dict = options.dictionary.build(data);
      return compare_methods(data, dict, options.params, default_domain(spec.kind, spec, data), options.resolution,
                             options.fit);
    });
    std::vector<double> et, ev, dt, dv;
    for (const auto& c : runs) {
      et.push_back(c.edmd.total_sse);
      ev.push_back(c.edmd.sse_variance);
      dt.push_back(c.dde.total_sse);
      dv.push_back(c.dde.sse_variance);
    }
    rows.push_back({n, stats_of(et, ev), stats_of(dt, dv)});
  }
  return rows;
}

std::vector<ProtocolRow> size_sweep(DatasetKind kind, const std::vector<Eigen::Index>& sizes,
                                    const ExperimentOptions& options) {
  auto runs = parallel_map<ProtocolRow>(static_cast<int>(sizes.size()), options.jobs, [&](int i) {
    DatasetSpec spec;
    spec.kind = kind;
    spec.size = sizes[static_cast<std::size_t>(i)];
    spec.seed = options.seed;
    const TransitionDataset data = generate(spec, options.params);
    const Dictionary dict = options.dictionary.build(data);
    const Comparison c =
        compare_methods(data, dict, options.params, default_domain(kind, spec, data), options.resolution, options.fit);
    return ProtocolRow{data.size(), stats_of({c.edmd.total_sse}, {c.edmd.sse_variance}),
                       stats_of({c.dde.total_sse}, {c.dde.sse_variance})};
  });
  return runs;
}

std::vector<ConvergenceSelector> default_selectors(const Dictionary& dict) {
  std::vector<ConvergenceSelector> sel{{0, 0, "Q[0,0]"}};
  const RbfBlock* rbf = nullptr;
  int offset = 0;
  for (const auto& block : dict.blocks()) {
    if (const auto* b = std::get_if<RbfBlock>(&block)) {
      rbf = b;
      break;
    }
    if (std::holds_alternative<StateBlock>(block)) offset += dict.input_dim();
    else if (std::holds_alternative<ConstantBlock>(block)) offset += 1;
    else if (const auto* mlp = std::get_if<MlpBlock>(&block)) offset += mlp->weights.output_dim();
  }
  if (!rbf || rbf->centers.rows() < 3) return sel;

  // Rank centers by distance from the origin in units of the RBF width so the
  // choice does not depend on axis scaling.
  const auto k = rbf->centers.rows();
  std::vector<std::pair<double, int>> dist;
  for (Eigen::Index c = 0; c < k; ++c)
    dist.emplace_back((rbf->centers.row(c).transpose().array() / rbf->widths.array()).matrix().norm(), static_cast<int>(c));
  std::stable_sort(dist.begin(), dist.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const std::size_t pick : {std::size_t{0}, dist.size() / 2, dist.size() - 1}) {
    const int idx = offset + dist[pick].second;
    sel.push_back({idx, idx, "Q[" + std::to_string(idx) + "," + std::to_string(idx) + "]"});
  }
  return sel;
}

namespace {

void check_sizes(const std::vector<Eigen::Index>& sizes) {
  if (sizes.size() < 2) throw Error(ErrorCode::SpecError, "convergence needs at least two sizes");
  for (std::size_t i = 1; i < sizes.size(); ++i)
    if (sizes[i] <= sizes[i - 1]) throw Error(ErrorCode::SpecError, "convergence sizes must be strictly increasing");
}

TransitionDataset sized(const DatasetSpec& spec_template, Eigen::Index n, const PendulumParams& params) {
  DatasetSpec spec = spec_template;
  spec.size = n;
  return generate(spec, params);
}

}  // namespace

ConvergenceTrace q_convergence(const std::vector<Eigen::Index>& sizes, const DatasetSpec& spec_template,
                               const ExperimentOptions& options,
                               std::optional<std::vector<ConvergenceSelector>> selectors) {
  check_sizes(sizes);
  const Dictionary dict = options.dictionary.build(sized(spec_template, sizes.back(), options.params));
  return q_convergence(sizes, spec_template, dict, selectors ? *selectors : default_selectors(dict), options);
}

ConvergenceTrace q_convergence(const std::vector<Eigen::Index>& sizes, const DatasetSpec& spec_template,
                               const Dictionary& dict, const std::vector<ConvergenceSelector>& selectors,
                               const ExperimentOptions& options) {
  check_sizes(sizes);
  if (selectors.empty()) throw Error(ErrorCode::SpecError, "convergence needs at least one selector");
  const auto m = dict.output_dim();
  for (const auto& s : selectors)
    if (s.row < 0 || s.col < 0 || s.row >= m || s.col >= m)
      throw Error(ErrorCode::SpecError, "selector " + s.label + " is outside the " + std::to_string(m) + "x" +
                                            std::to_string(m) + " Gram matrices");

  ConvergenceTrace trace;
  trace.sizes = sizes;
  trace.selectors = selectors;
  const auto count = static_cast<Eigen::Index>(sizes.size());
  const auto nsel = static_cast<Eigen::Index>(selectors.size());
  trace.q_values.resize(count, nsel);
  trace.r_values.resize(count, nsel);
  auto grams = parallel_map<GramPair>(static_cast<int>(count), options.jobs, [&](int i) {
    const TransitionDataset data = sized(spec_template, sizes[static_cast<std::size_t>(i)], options.params);
    return compute_grams(data, dict, build_mesh(data.current));
  });
  for (Eigen::Index i = 0; i < count; ++i)
    for (Eigen::Index s = 0; s < nsel; ++s) {
      const auto& sel = selectors[static_cast<std::size_t>(s)];
      trace.q_values(i, s) = grams[static_cast<std::size_t>(i)].Q(sel.row, sel.col);
      trace.r_values(i, s) = grams[static_cast<std::size_t>(i)].R(sel.row, sel.col);
    }
  return trace;
}

std::vector<ObservableRow> observable_sweep(Eigen::Index size, const std::vector<int>& grid_sides,
                                            const ExperimentOptions& options) {
  DatasetSpec spec;
  spec.kind = DatasetKind::Trajectories;
  spec.size = size;
  spec.seed = options.seed;
  const TransitionDataset data = generate(spec, options.params);
  const EvalDomain domain = default_domain(spec.kind, spec, data);
  return parallel_map<ObservableRow>(static_cast<int>(grid_sides.size()), options.jobs, [&](int i) {
    DictionarySpec ds = options.dictionary;
    ds.kind = DictionarySpec::Kind::Rbf;
    const int side = grid_sides[static_cast<std::size_t>(i)];
    ds.grid = {side, side};
    const Dictionary dict = ds.build(data);
    const Comparison c = compare_methods(data, dict, options.params, domain, options.resolution, options.fit);
    return ObservableRow{dict.output_dim(), c.edmd.total_sse, c.dde.total_sse};
  });
}

std::string reproduce_table(const std::string& table, const ExperimentOptions& options, int repeats) {
  std::ostringstream md;
  if (table == "I") {
    md << "| Dataset size | Total SSE (EDMD / DDE) | SSE variance (EDMD / DDE) |\n|---|---|---|\n";
    md << "| *Uniform* | | |\n";
    for (const auto& r : size_sweep(DatasetKind::UniformGrid, {900, 2500, 10000, 22500}, options))
      md << "| " << r.size << " | " << pair_cell(r.edmd.mean_total, r.dde.mean_total, 3) << " | "
         << pair_cell(r.edmd.mean_variance, r.dde.mean_variance, -2) << " |\n";
    md << "| *Trajectory* | | |\n";
    for (const auto& r : size_sweep(DatasetKind::Trajectories, {1000, 2500, 5000, 10000, 25000}, options))
      md << "| " << r.size << " | " << pair_cell(r.edmd.mean_total, r.dde.mean_total, 3) << " | "
         << pair_cell(r.edmd.mean_variance, r.dde.mean_variance, -2) << " |\n";
    return md.str();
  }
  if (table == "II") {
    const std::vector<Eigen::Index> sizes{1000, 2500, 5000, 10000, 25000};
    const std::vector<Eigen::Vector2d> centers{{0.0, 0.0}, {0.8, 0.0}, {0.0, 2.0}};
    std::vector<std::vector<ProtocolRow>> cols;
    for (const auto& c : centers) cols.push_back(gaussian_protocol(c, sizes, repeats, options));
    md << "| Dataset size | Center [0,0] | Center [0.8,0] | Center [0,2] |\n|---|---|---|---|\n";
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      md << "| " << sizes[i];
      for (const auto& col : cols) md << " | " << pair_cell(col[i].edmd.mean_total, col[i].dde.mean_total, 3);
      md << " |\n";
    }
    md << "\nTotals are means over " << repeats << " seeds; cells read EDMD / DDE.\n";
    return md.str();
  }
  if (table == "III") {
    md << "| Observables | EDMD | DDE |\n|---|---|---|\n";
    for (const auto& r : observable_sweep(5000, {5, 7, 9}, options)) {
      const bool dde_wins = r.dde_total < r.edmd_total;
      md << "| " << r.observables << " | " << (dde_wins ? fmt(r.edmd_total, 3) : "**" + fmt(r.edmd_total, 3) + "**")
         << " | " << (dde_wins ? "**" + fmt(r.dde_total, 3) + "**" : fmt(r.dde_total, 3)) << " |\n";
    }
    return md.str();
  }
  throw Error(ErrorCode::SpecError, "unknown table '" + table + "' (I, II or III)");
}

nlohmann::json ExperimentConfig::to_json() const {
  return {{"dataset", dataset.to_json()}, {"dictionary", dictionary}, {"methods", methods},
          {"ridge", ridge},               {"rcond", rcond},           {"eval_grid", eval_grid},
          {"output_dir", output_dir},     {"seed", seed}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::SchemaError, "experiment config must be a JSON object");
  static const std::vector<std::string> keys{"dataset", "dictionary", "methods",    "ridge",
                                             "rcond",   "eval_grid",  "output_dir", "seed"};
  for (const auto& [k, v] : j.items())
    if (std::find(keys.begin(), keys.end(), k) == keys.end())
      throw Error(ErrorCode::SchemaError, "unknown experiment config key '" + k + "'");
  ExperimentConfig c;
  try {
    if (j.contains("dataset")) c.dataset = DatasetSpec::from_json(j.at("dataset"));
    if (j.contains("dictionary")) c.dictionary = j.at("dictionary").get<std::string>();
    if (j.contains("methods")) c.methods = j.at("methods").get<std::vector<std::string>>();
    if (j.contains("ridge")) c.ridge = j.at("ridge").get<double>();
    if (j.contains("rcond")) c.rcond = j.at("rcond").get<double>();
    if (j.contains("eval_grid")) c.eval_grid = j.at("eval_grid").get<std::vector<int>>();
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("bad experiment config: ") + e.what());
  }
  DictionarySpec::parse(c.dictionary);
  for (const auto& m : c.methods) parse_fit_method(m);
  if (c.ridge < 0.0 || !(c.rcond > 0.0)) throw Error(ErrorCode::SchemaError, "ridge must be >= 0 and rcond > 0");
  return c;
}

}  // namespace kdde
