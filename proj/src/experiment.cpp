#include "gatlab/experiment.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace gatlab::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

KeyValues parse_kv_text(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ExperimentError("spec line " + std::to_string(lineno) + ": expected key = value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues parse_kv_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ExperimentError("cannot open spec file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_kv_text(ss.str());
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (const std::string& item : split_list(s)) {
    if (item == "adaptive") {
      out.push_back(-1);
      continue;
    }
    const auto dash = item.find("..");
    if (dash != std::string::npos) {
      const int lo = std::stoi(item.substr(0, dash));
      const int hi = std::stoi(item.substr(dash + 2));
      for (int v = lo; v <= hi; ++v) out.push_back(v);
    } else {
      out.push_back(std::stoi(item));
    }
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  for (const std::string& item : split_list(s)) out.push_back(std::stod(item));
  return out;
}

std::uint64_t hash_string(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Dataset default_synthetic(Index num_nodes, std::uint64_t seed) {
  SyntheticParams p;
  p.num_nodes = num_nodes;
  p.avg_degree = 4.0;
  p.num_classes = 7;
  p.feat_dim = 32;
  p.homophily = 0.9;
  p.noise_sigma = 0.5;
  if (num_nodes >= 1700) {
    p.train_size = 140;
    p.val_size = 500;
    p.test_size = std::min<Index>(1000, num_nodes - 640);
  } else {
    p.train_size = num_nodes / 10;
    p.val_size = num_nodes / 5;
    p.test_size = num_nodes / 2;
  }
  p.seed = seed;
  p.name = "synthetic-n" + std::to_string(num_nodes);
  return generate_synthetic(p);
}

Dataset load_or_synthesize(const std::string& dataset_dir, Index synthetic_nodes) {
  if (dataset_dir.empty()) return default_synthetic(synthetic_nodes);
  return load_dataset(dataset_dir);
}

RunSpec spec_from_kv(const KeyValues& kv) {
  RunSpec spec;
  auto get = [&](const char* key) -> std::optional<std::string> {
    const auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    return it->second;
  };
  if (auto v = get("dataset")) spec.dataset_dir = *v;
  if (auto v = get("variants")) spec.variants = split_list(*v);
  if (auto v = get("variant")) spec.variants = split_list(*v);
  if (auto v = get("depths")) spec.depths = parse_int_list(*v);
  if (auto v = get("seeds")) spec.num_seeds = std::stoi(*v);
  if (auto v = get("seed_base")) spec.seed_base = std::stoull(*v);
  if (auto v = get("learning_rate")) spec.hp.learning_rate = std::stod(*v);
  if (auto v = get("weight_decay")) spec.hp.weight_decay = std::stod(*v);
  if (auto v = get("beta")) spec.hp.beta = std::stod(*v);
  if (auto v = get("epochs")) spec.hp.epochs = std::stoi(*v);
  if (auto v = get("patience")) spec.hp.patience = std::stoi(*v);
  if (auto v = get("dropout")) spec.hp.dropout = std::stod(*v);
  if (auto v = get("lr_grid")) spec.grid.learning_rates = parse_double_list(*v);
  if (auto v = get("wd_grid")) spec.grid.weight_decays = parse_double_list(*v);
  if (auto v = get("beta_grid")) spec.grid.betas = parse_double_list(*v);
  if (auto v = get("hidden_dim")) spec.base_config.hidden_dim = std::stoi(*v);
  if (auto v = get("heads")) spec.base_config.heads = std::stoi(*v);
  if (auto v = get("attention_activation"))
    spec.base_config.attention_activation = ad::act_from_string(*v);
  if (auto v = get("residual"))
    spec.base_config.residual.kind = layers::residual_kind_from_string(*v);
  if (auto v = get("pre_mlp_layers")) spec.base_config.pre_mlp_layers = std::stoi(*v);
  if (auto v = get("post_mlp_layers")) spec.base_config.post_mlp_layers = std::stoi(*v);
  if (auto v = get("synthetic_nodes")) spec.synthetic_nodes = std::stoll(*v);
  if (auto v = get("workers")) spec.workers = std::stoi(*v);
  if (spec.depths.empty()) throw ExperimentError("spec: depth list is empty");
  if (!spec.grid.learning_rates.empty() && spec.grid.weight_decays.empty())
    spec.grid.weight_decays = {spec.hp.weight_decay};
  return spec;
}

std::vector<std::uint64_t> make_seeds(int count, std::uint64_t base) {
  std::vector<std::uint64_t> seeds;
  for (int k = 0; k < count; ++k) seeds.push_back(base + static_cast<std::uint64_t>(k));
  return seeds;
}

void write_trace_csv(const fs::path& path, const std::vector<metrics::EpochTrace>& traces,
                     const std::string& provenance) {
  std::ofstream out(path);
  if (!out) throw ExperimentError("cannot write " + path.string());
  out << "# " << provenance << "\n";
  out << "epoch,loss,acc_train,acc_val,acc_test,smv,corr,grad_l1_mean\n";
  for (const auto& t : traces)
    out << t.epoch << ',' << fmt(t.loss) << ',' << fmt(t.acc_train) << ',' << fmt(t.acc_val)
        << ',' << fmt(t.acc_test) << ',' << fmt(t.smv) << ',' << fmt(t.corr) << ','
        << fmt(t.grad_l1_mean) << "\n";
}

std::vector<metrics::EpochTrace> read_trace_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ExperimentError("cannot read " + path.string());
  std::vector<metrics::EpochTrace> traces;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("epoch,", 0) == 0) continue;
    metrics::EpochTrace t;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf,%lf,%lf,%lf", &t.epoch, &t.loss,
                    &t.acc_train, &t.acc_val, &t.acc_test, &t.smv, &t.corr,
                    &t.grad_l1_mean) != 8)
      throw ExperimentError("malformed trace row in " + path.string() + ": " + line);
    traces.push_back(t);
  }
  return traces;
}

DepthReport depth_report(const Dataset& d) {
  const auto choice =
      model::adaptive_depth(d.graph.num_nodes, d.graph.num_edges_undirected());
  return {choice.q, choice.l_real, choice.l_selected};
}

int cmd_depth(const std::string& dataset_dir, const fs::path& out_dir) {
  const Dataset d = load_dataset(dataset_dir);
  const DepthReport r = depth_report(d);
  std::printf("dataset=%s q=%.6f L_real=%.6f L_selected=%d\n", d.meta.name.c_str(), r.q, r.l_real,
              r.l_selected);
  fs::create_directories(out_dir);
  json j = {{"q", r.q}, {"L_real", r.l_real}, {"L_selected", r.l_selected}};
  std::ofstream(out_dir / "depth.json") << j.dump(2) << "\n";
  return 0;
}

namespace {

std::string provenance_line(const std::string& dataset, const std::string& variant, int depth,
                            std::uint64_t seed, const std::vector<std::uint64_t>& all_seeds,
                            const trainer::HParams& hp, const model::ModelConfig& cfg) {
  std::ostringstream canon;
  canon << variant << '|' << depth << '|' << cfg.hidden_dim << '|' << cfg.heads << '|'
        << ad::to_string(cfg.attention_activation) << '|'
        << layers::to_string(cfg.residual.kind) << '|' << hp.learning_rate << '|'
        << hp.weight_decay << '|' << hp.beta << '|' << hp.epochs << '|' << hp.patience << '|'
        << hp.dropout;
  std::ostringstream seeds;
  for (std::size_t i = 0; i < all_seeds.size(); ++i) seeds << (i ? ";" : "") << all_seeds[i];
  std::ostringstream out;
  out << "dataset=" << dataset << " variant=" << variant << " depth=" << depth
      << " seed=" << seed << " seeds=" << seeds.str() << " config_hash=" << std::hex
      << hash_string(canon.str());
  return out.str();
}

model::ModelConfig cell_config(const model::ModelConfig& base, const std::string& variant,
                               int depth) {
  model::ModelConfig cfg = base;
  cfg.variant = model::variant_from_string(variant);
  if (depth < 0) {
    cfg.adaptive = true;
    cfg.depth = 1;
  } else {
    cfg.adaptive = false;
    cfg.depth = depth;
  }
  if (cfg.variant == model::Variant::Decoupled && depth > 0) cfg.propagation_depth = depth;
  return cfg;
}

struct KeyedTrace {
  std::string dataset, variant;
  int depth = 0;
  std::uint64_t seed = 0;
  std::vector<metrics::EpochTrace> traces;
};

KeyedTrace parse_keyed_trace(const fs::path& path) {
  std::ifstream in(path);
  std::string first;
  std::getline(in, first);
  KeyedTrace kt;
  std::istringstream ss(first);
  std::string tok;
  while (ss >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = tok.substr(0, eq);
    const std::string val = tok.substr(eq + 1);
    if (key == "dataset") kt.dataset = val;
    else if (key == "variant") kt.variant = val;
    else if (key == "depth") kt.depth = std::stoi(val);
    else if (key == "seed") kt.seed = std::stoull(val);
  }
  if (kt.variant.empty())
    throw ExperimentError("trace file missing provenance: " + path.string());
  kt.traces = read_trace_csv(path);
  return kt;
}

void write_table(const fs::path& path, const std::vector<TableRow>& rows,
                 const std::string& provenance) {
  std::ofstream out(path);
  out << "# " << provenance << "\n";
  out << "dataset,variant,depth,num_seeds,mean,stddev\n";
  for (const TableRow& r : rows)
    out << r.dataset << ',' << r.variant << ',' << r.depth << ',' << r.num_seeds << ','
        << fmt(r.mean) << ',' << fmt(r.stddev) << "\n";
}

std::vector<TableRow> read_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ExperimentError("cannot read " + path.string());
  std::vector<TableRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("dataset,", 0) == 0) continue;
    TableRow r;
    std::istringstream ss(line);
    std::string cell;
    std::getline(ss, r.dataset, ',');
    std::getline(ss, r.variant, ',');
    std::getline(ss, cell, ',');
    r.depth = std::stoi(cell);
    std::getline(ss, cell, ',');
    r.num_seeds = std::stoi(cell);
    std::getline(ss, cell, ',');
    r.mean = std::stod(cell);
    std::getline(ss, cell, ',');
    r.stddev = std::stod(cell);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

std::vector<TableRow> cmd_run(const RunSpec& spec, const fs::path& out_dir) {
  const Dataset dataset = load_or_synthesize(spec.dataset_dir, spec.synthetic_nodes);
  const auto seeds = make_seeds(spec.num_seeds, spec.seed_base);
  fs::create_directories(out_dir / "runs");

  std::vector<TableRow> rows;
  for (const std::string& variant : spec.variants) {
    for (int depth : spec.depths) {
      const model::ModelConfig cfg = cell_config(spec.base_config, variant, depth);
      trainer::HParams hp = spec.hp;
      if (!spec.grid.learning_rates.empty()) {
        const auto sweep = trainer::hparam_sweep(spec.grid, cfg, dataset, hp, seeds, spec.workers);
        hp = sweep.best;
      }
      trainer::SeedStats stats;
      try {
        stats = trainer::run_seeds(cfg, dataset, hp, seeds, spec.workers);
      } catch (const trainer::TrainError& e) {
        throw ExperimentError("run " + dataset.meta.name + "/" + variant + "/d" +
                              std::to_string(depth) + " failed: " + e.what());
      }
      int shown_depth = depth;
      if (depth < 0)
        shown_depth = model::adaptive_depth(dataset.graph.num_nodes,
                                            dataset.graph.num_edges_undirected())
                          .l_selected;
      for (std::size_t k = 0; k < seeds.size(); ++k) {
        std::ostringstream name;
        name << dataset.meta.name << "_" << variant << "_d" << shown_depth << "_s" << seeds[k]
             << ".csv";
        write_trace_csv(out_dir / "runs" / name.str(), stats.results[k].traces,
                        provenance_line(dataset.meta.name, variant, shown_depth, seeds[k], seeds,
                                        hp, cfg));
      }
      rows.push_back({dataset.meta.name, variant, shown_depth, static_cast<int>(seeds.size()),
                      stats.mean, stats.stddev});
      std::printf("%s %s depth=%d mean=%.4f std=%.4f\n", dataset.meta.name.c_str(),
                  variant.c_str(), shown_depth, stats.mean, stats.stddev);
    }
  }

  const std::string prov = "seeds=" + std::to_string(spec.num_seeds) +
                           " seed_base=" + std::to_string(spec.seed_base);
  write_table(out_dir / "table.csv", rows, prov);
  json j = json::array();
  for (const TableRow& r : rows)
    j.push_back({{"dataset", r.dataset},
                 {"variant", r.variant},
                 {"depth", r.depth},
                 {"num_seeds", r.num_seeds},
                 {"mean", r.mean},
                 {"stddev", r.stddev}});
  std::ofstream(out_dir / "table.json") << j.dump(2) << "\n";
  return rows;
}

std::vector<TableRow> cmd_report(const fs::path& out_dir) {
  std::map<std::tuple<std::string, std::string, int>, std::vector<double>> cells;
  const fs::path runs = out_dir / "runs";
  if (!fs::exists(runs)) throw ExperimentError("no runs directory under " + out_dir.string());
  for (const auto& entry : fs::directory_iterator(runs)) {
    if (entry.path().extension() != ".csv") continue;
    const KeyedTrace kt = parse_keyed_trace(entry.path());
    const int best = trainer::select_best_epoch(kt.traces);
    cells[{kt.dataset, kt.variant, kt.depth}].push_back(
        kt.traces[static_cast<std::size_t>(best)].acc_test);
  }

  std::vector<TableRow> rows;
  for (const auto& [key, vals] : cells) {
    TableRow r;
    std::tie(r.dataset, r.variant, r.depth) = key;
    r.num_seeds = static_cast<int>(vals.size());
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= static_cast<double>(vals.size());
    r.mean = mean;
    r.stddev = std::sqrt(var);
    rows.push_back(r);
  }

  if (fs::exists(out_dir / "table.csv")) {
    for (const TableRow& stored : read_table(out_dir / "table.csv")) {
      const auto it = cells.find({stored.dataset, stored.variant, stored.depth});
      if (it == cells.end())
        throw ExperimentError("table row has no stored traces: " + stored.dataset + "/" +
                              stored.variant + "/d" + std::to_string(stored.depth));
      const auto match = std::find_if(rows.begin(), rows.end(), [&](const TableRow& r) {
        return r.dataset == stored.dataset && r.variant == stored.variant &&
               r.depth == stored.depth;
      });
      if (std::abs(match->mean - stored.mean) > 1e-12 ||
          std::abs(match->stddev - stored.stddev) > 1e-12)
        throw ExperimentError("re-aggregation mismatch for " + stored.dataset + "/" +
                              stored.variant + "/d" + std::to_string(stored.depth));
    }
  }
  write_table(out_dir / "report.csv", rows, "re-aggregated from runs/");
  return rows;
}

// ---------------------------------------------------------------------------
// Probe presets

namespace {

struct ProbeContext {
  Dataset dataset;
  std::vector<std::uint64_t> seeds;
  trainer::HParams hp;
  model::ModelConfig base;
  int workers = 1;
};

ProbeContext make_context(const ProbeOptions& opt, Index synthetic_cap = 0) {
  ProbeContext ctx;
  Index n = opt.synthetic_nodes;
  if (synthetic_cap > 0) n = std::min(n, synthetic_cap);
  ctx.dataset = load_or_synthesize(opt.dataset_dir, n);
  ctx.seeds = make_seeds(opt.num_seeds, opt.seed_base);
  ctx.hp = opt.hp;
  ctx.base.hidden_dim = opt.hidden_dim;
  ctx.workers = opt.workers;
  return ctx;
}

double mean_of(const std::vector<double>& vals) {
  double m = 0.0;
  for (double v : vals) m += v;
  return m / static_cast<double>(vals.size());
}

/// Mean over seeds of a per-trace statistic taken at the best epoch.
double mean_at_best(const trainer::SeedStats& stats,
                    double (*pick)(const metrics::EpochTrace&)) {
  std::vector<double> vals;
  for (const auto& r : stats.results)
    vals.push_back(pick(r.traces[static_cast<std::size_t>(r.best_epoch)]));
  return mean_of(vals);
}

trainer::SeedStats run_cell(const ProbeContext& ctx, model::ModelConfig cfg) {
  return trainer::run_seeds(cfg, ctx.dataset, ctx.hp, ctx.seeds, ctx.workers);
}

std::string probe_provenance(const std::string& preset, const ProbeContext& ctx) {
  std::ostringstream seeds;
  for (std::size_t i = 0; i < ctx.seeds.size(); ++i) seeds << (i ? ";" : "") << ctx.seeds[i];
  std::ostringstream canon;
  canon << preset << '|' << ctx.dataset.meta.name << '|' << ctx.base.hidden_dim << '|'
        << ctx.hp.learning_rate << '|' << ctx.hp.weight_decay << '|' << ctx.hp.epochs;
  std::ostringstream out;
  out << "preset=" << preset << " dataset=" << ctx.dataset.meta.name << " seeds=" << seeds.str()
      << " config_hash=" << std::hex << hash_string(canon.str());
  return out.str();
}

std::ofstream open_csv(const fs::path& path, const std::string& provenance,
                       const std::string& header) {
  std::ofstream out(path);
  if (!out) throw ExperimentError("cannot write " + path.string());
  out << "# " << provenance << "\n" << header << "\n";
  return out;
}

std::vector<int> depths_or(const ProbeOptions& opt, std::vector<int> fallback) {
  return opt.depths.empty() ? std::move(fallback) : opt.depths;
}

}  // namespace

const std::vector<std::string>& probe_names() {
  static const std::vector<std::string> names = {
      "overfitting",    "oversmoothing", "overcorrelation",
      "gradient_vanishing", "oversquashing", "activation_sweep",
      "fa",             "decoupled",     "residual_comparison"};
  return names;
}

fs::path cmd_probe(const std::string& preset, const ProbeOptions& opt, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const fs::path out_path = out_dir / (preset + ".csv");

  if (preset == "overfitting" || preset == "oversmoothing" || preset == "overcorrelation") {
    ProbeContext ctx = make_context(opt);
    const auto depths = depths_or(opt, {2, 5, 10, 15, 20, 25, 30});
    const char* header = preset == "overfitting" ? "depth,acc_train,acc_test"
                         : preset == "oversmoothing" ? "depth,acc_test,smv"
                                                     : "depth,acc_test,corr";
    auto out = open_csv(out_path, probe_provenance(preset, ctx), header);
    for (int depth : depths) {
      auto cfg = ctx.base;
      cfg.variant = model::Variant::Gat;
      cfg.depth = depth;
      const auto stats = run_cell(ctx, cfg);
      const double acc = stats.mean;
      if (preset == "overfitting") {
        const double train =
            mean_at_best(stats, +[](const metrics::EpochTrace& t) { return t.acc_train; });
        out << depth << ',' << fmt(train) << ',' << fmt(acc) << "\n";
      } else if (preset == "oversmoothing") {
        const double v = mean_at_best(stats, +[](const metrics::EpochTrace& t) { return t.smv; });
        out << depth << ',' << fmt(acc) << ',' << fmt(v) << "\n";
      } else {
        const double v = mean_at_best(stats, +[](const metrics::EpochTrace& t) { return t.corr; });
        out << depth << ',' << fmt(acc) << ',' << fmt(v) << "\n";
      }
      out.flush();
    }
    return out_path;
  }

  if (preset == "gradient_vanishing") {
    ProbeContext ctx = make_context(opt);
    const auto depths = depths_or(opt, {2, 7});
    auto out = open_csv(out_path, probe_provenance(preset, ctx), "depth,epoch,grad_l1_mean");
    for (int depth : depths) {
      auto cfg = ctx.base;
      cfg.variant = model::Variant::Gat;
      cfg.depth = depth;
      cfg.residual.beta = ctx.hp.beta;
      model::Model m = model::build_model(cfg, ctx.dataset, ctx.seeds.front());
      trainer::HParams hp = ctx.hp;
      hp.seed = ctx.seeds.front();
      const auto result = trainer::train(m, ctx.dataset, hp);
      for (const auto& t : result.traces)
        out << depth << ',' << t.epoch << ',' << fmt(t.grad_l1_mean) << "\n";
    }
    return out_path;
  }

  struct Series {
    std::string column;
    std::function<model::ModelConfig(const model::ModelConfig&, int depth)> configure;
  };
  std::vector<Series> series;
  Index synthetic_cap = 0;
  auto with = [](model::Variant v, layers::ResidualKind rk = layers::ResidualKind::None,
                 ad::Act act = ad::Act::LeakyRelu) {
    return [=](const model::ModelConfig& base, int depth) {
      model::ModelConfig cfg = base;
      cfg.variant = v;
      cfg.depth = depth;
      cfg.residual.kind = rk;
      cfg.attention_activation = act;
      if (v == model::Variant::Decoupled) cfg.propagation_depth = depth;
      return cfg;
    };
  };

  if (preset == "oversquashing") {
    series = {{"acc_constant", with(model::Variant::Gat)},
              {"acc_width_doubling", with(model::Variant::WidthDoubling)}};
  } else if (preset == "activation_sweep") {
    series = {{"acc_leaky_relu",
               with(model::Variant::Gat, layers::ResidualKind::None, ad::Act::LeakyRelu)},
              {"acc_sigmoid",
               with(model::Variant::Gat, layers::ResidualKind::None, ad::Act::Sigmoid)},
              {"acc_tanh", with(model::Variant::Gat, layers::ResidualKind::None, ad::Act::Tanh)}};
  } else if (preset == "fa") {
    synthetic_cap = 800;  // the FA edge array is N^2
    series = {{"acc_gat", with(model::Variant::Gat)}, {"acc_fa", with(model::Variant::Fa)}};
  } else if (preset == "decoupled") {
    series = {{"acc_entangled", with(model::Variant::Gat)},
              {"acc_decoupled", with(model::Variant::Decoupled)}};
  } else if (preset == "residual_comparison") {
    series = {{"acc_none", with(model::Variant::Adgat, layers::ResidualKind::None)},
              {"acc_input", with(model::Variant::Adgat, layers::ResidualKind::Input)},
              {"acc_initial", with(model::Variant::Adgat, layers::ResidualKind::Initial)}};
  } else {
    throw ExperimentError("unknown probe preset: " + preset);
  }

  ProbeContext ctx = make_context(opt, synthetic_cap);
  if (preset == "fa" && ctx.dataset.graph.num_nodes > ctx.base.fa_node_cap)
    throw ExperimentError("fa probe refused: dataset exceeds the FA node cap");
  std::string header = "depth";
  for (const Series& s : series) header += "," + s.column;
  auto out = open_csv(out_path, probe_provenance(preset, ctx), header);
  for (int depth : depths_or(opt, {1, 2, 3, 4, 5, 6, 7, 8})) {
    out << depth;
    for (const Series& s : series)
      out << ',' << fmt(run_cell(ctx, s.configure(ctx.base, depth)).mean);
    out << "\n";
    out.flush();
  }
  return out_path;
}

int cmd_prep_synthetic(const SyntheticParams& params, const fs::path& out_dir) {
  const Dataset d = generate_synthetic(params);
  save_dataset(d, out_dir);
  const DegreeStats s = degree_stats(d.graph);
  std::printf("wrote %s: n=%lld edges=%lld q=%.4f min_deg=%lld max_deg=%lld isolated=%lld\n",
              out_dir.string().c_str(), static_cast<long long>(d.meta.num_nodes),
              static_cast<long long>(d.meta.num_edges), s.avg_degree_q,
              static_cast<long long>(s.min_degree), static_cast<long long>(s.max_degree),
              static_cast<long long>(s.num_isolated));
  return 0;
}

int cmd_prep_convert(const ConvertInputs& in, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  for (const auto& [src, dst] :
       {std::pair{in.edges, "edges.csv"}, {in.features, "features.csv"},
        {in.labels, "labels.csv"}, {in.splits, "splits.json"}}) {
    if (!fs::exists(src)) throw ExperimentError("missing input file: " + src.string());
    fs::copy_file(src, out_dir / dst, fs::copy_options::overwrite_existing);
  }

  Index num_edges = 0, num_nodes = 0, feat_dim = 0;
  int max_label = -1;
  {
    std::ifstream e(in.edges);
    std::string line;
    while (std::getline(e, line))
      if (!trim(line).empty()) ++num_edges;
    std::ifstream f(in.features);
    while (std::getline(f, line)) {
      if (trim(line).empty()) continue;
      if (num_nodes == 0) feat_dim = static_cast<Index>(split_list(line).size());
      ++num_nodes;
    }
    std::ifstream l(in.labels);
    while (std::getline(l, line))
      if (!trim(line).empty()) max_label = std::max(max_label, std::stoi(line));
  }

  json meta = {{"name", in.name},
               {"num_nodes", num_nodes},
               {"num_edges", num_edges},
               {"feat_dim", feat_dim},
               {"num_classes", max_label + 1}};
  std::ofstream(out_dir / "meta.json") << meta.dump(2) << "\n";

  const Dataset d = load_dataset(out_dir);  // validates counts and splits
  const DegreeStats s = degree_stats(d.graph);
  std::printf("converted %s: n=%lld edges=%lld classes=%lld q=%.4f\n", in.name.c_str(),
              static_cast<long long>(d.meta.num_nodes), static_cast<long long>(d.meta.num_edges),
              static_cast<long long>(d.meta.num_classes), s.avg_degree_q);
  return 0;
}

}  // namespace gatlab::experiment
