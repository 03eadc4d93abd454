#include "gatlab/experiment.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace gatlab;
namespace ex = gatlab::experiment;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("parse_kv_text") {
  const ex::KeyValues kv = ex::parse_kv_text(
      "# a comment\n"
      "variant = adgat  # trailing comment\n"
      "  depths=1,2,3\n"
      "\n"
      "learning_rate = 0.01\n");
  CHECK(kv.at("variant") == "adgat");
  CHECK(kv.at("depths") == "1,2,3");
  CHECK(kv.at("learning_rate") == "0.01");
  CHECK(kv.size() == 3);
  CHECK_THROWS_WITH_AS(ex::parse_kv_text("not a pair\n"), doctest::Contains("line 1"),
                       ex::ExperimentError);
}

TEST_CASE("list parsing") {
  CHECK(ex::split_list(" a, b ,,c ") == std::vector<std::string>{"a", "b", "c"});
  CHECK(ex::parse_int_list("1..4,7,adaptive") == std::vector<int>{1, 2, 3, 4, 7, -1});
  CHECK(ex::parse_double_list("0.5,1e-3") == std::vector<double>{0.5, 1e-3});
  CHECK(ex::parse_int_list("").empty());
}

TEST_CASE("spec_from_kv: defaults and overrides") {
  const ex::RunSpec defaults = ex::spec_from_kv({});
  CHECK(defaults.variants == std::vector<std::string>{"gat"});
  CHECK(defaults.depths == std::vector<int>{2});
  CHECK(defaults.num_seeds == 10);
  CHECK(defaults.grid.learning_rates.empty());

  const ex::RunSpec spec = ex::spec_from_kv(ex::parse_kv_text(
      "variants = gat, adgat\n"
      "depths = 2..4\n"
      "seeds = 3\n"
      "seed_base = 100\n"
      "learning_rate = 0.005\n"
      "lr_grid = 0.005, 0.02\n"
      "hidden_dim = 12\n"
      "residual = initial\n"
      "workers = 4\n"));
  CHECK(spec.variants == std::vector<std::string>{"gat", "adgat"});
  CHECK(spec.depths == std::vector<int>{2, 3, 4});
  CHECK(spec.num_seeds == 3);
  CHECK(spec.seed_base == 100);
  CHECK(spec.hp.learning_rate == 0.005);
  CHECK(spec.grid.learning_rates == std::vector<double>{0.005, 0.02});
  // wd grid defaults to the base weight decay when only lr_grid is given
  CHECK(spec.grid.weight_decays == std::vector<double>{spec.hp.weight_decay});
  CHECK(spec.base_config.hidden_dim == 12);
  CHECK(spec.base_config.residual.kind == layers::ResidualKind::Initial);
  CHECK(spec.workers == 4);

  CHECK_THROWS_AS(ex::spec_from_kv({{"depths", ""}}), ex::ExperimentError);
}

TEST_CASE("make_seeds") {
  CHECK(ex::make_seeds(3, 40) == std::vector<std::uint64_t>{40, 41, 42});
  CHECK(ex::make_seeds(0, 0).empty());
}

TEST_CASE("trace csv round trip is exact") {
  const fs::path dir = fresh_dir("gatlab_trace_rt");
  std::vector<metrics::EpochTrace> traces(3);
  for (int i = 0; i < 3; ++i) {
    auto& t = traces[static_cast<std::size_t>(i)];
    t.epoch = i;
    t.loss = 1.0 / 3.0 + i;
    t.acc_train = 0.1 * i;
    t.acc_val = 0.25;
    t.acc_test = 1.0 / 7.0;
    t.smv = 0.70710678118654757;
    t.corr = 1e-17;
    t.grad_l1_mean = 123.456789012345678;
  }
  const fs::path p = dir / "t.csv";
  ex::write_trace_csv(p, traces, "dataset=x variant=gat depth=1 seed=0");
  const auto back = ex::read_trace_csv(p);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].epoch == traces[i].epoch);
    CHECK(back[i].loss == traces[i].loss);
    CHECK(back[i].smv == traces[i].smv);
    CHECK(back[i].corr == traces[i].corr);
    CHECK(back[i].grad_l1_mean == traces[i].grad_l1_mean);
  }
  CHECK(slurp(p).rfind("# dataset=x", 0) == 0);

  std::ofstream(dir / "bad.csv") << "# p\nepoch,loss\n1,2,notanumber,4,5,6,7\n";
  CHECK_THROWS_WITH_AS(ex::read_trace_csv(dir / "bad.csv"), doctest::Contains("malformed"),
                       ex::ExperimentError);
  fs::remove_all(dir);
}

TEST_CASE("default_synthetic splits scale with size") {
  const Dataset small = ex::default_synthetic(300, 1);
  Index train = 0, val = 0, test = 0;
  for (auto m : small.train_mask) train += m;
  for (auto m : small.val_mask) val += m;
  for (auto m : small.test_mask) test += m;
  CHECK(train == 30);
  CHECK(val == 60);
  CHECK(test == 150);
  CHECK(small.meta.num_classes == 7);
}

TEST_CASE("depth_report agrees with the model formula") {
  const Dataset d = ex::default_synthetic(500, 3);
  const ex::DepthReport r = ex::depth_report(d);
  const auto want = model::adaptive_depth(d.graph.num_nodes, d.graph.num_edges_undirected());
  CHECK(r.q == want.q);
  CHECK(r.l_real == want.l_real);
  CHECK(r.l_selected == want.l_selected);
}

TEST_CASE("cmd_run + cmd_report on a tiny spec") {
  const fs::path out = fresh_dir("gatlab_run_tiny");
  ex::RunSpec spec = ex::spec_from_kv(ex::parse_kv_text(
      "variants = gat, adgat\n"
      "depths = 1,2\n"
      "seeds = 2\n"
      "epochs = 8\n"
      "synthetic_nodes = 200\n"
      "workers = 2\n"));
  const auto rows = ex::cmd_run(spec, out);
  REQUIRE(rows.size() == 4);
  for (const auto& r : rows) {
    CHECK(r.num_seeds == 2);
    CHECK(r.mean >= 0.0);
    CHECK(r.mean <= 1.0);
    const fs::path trace =
        out / "runs" / (r.dataset + "_" + r.variant + "_d" + std::to_string(r.depth) + "_s0.csv");
    CHECK(fs::exists(trace));
    CHECK(ex::read_trace_csv(trace).size() <= 8);
  }
  CHECK(fs::exists(out / "table.csv"));
  CHECK(fs::exists(out / "table.json"));

  // report re-aggregates to the same numbers
  const auto reported = ex::cmd_report(out);
  CHECK(reported.size() == 4);
  CHECK(fs::exists(out / "report.csv"));

  // a rerun of the same spec reproduces the table exactly
  const std::string table_before = slurp(out / "table.csv");
  ex::cmd_run(spec, out);
  CHECK(slurp(out / "table.csv") == table_before);

  // tampering with the stored table is detected
  std::string tampered = table_before;
  const auto pos = tampered.find("0.");
  REQUIRE(pos != std::string::npos);
  tampered[pos + 2] = tampered[pos + 2] == '9' ? '1' : '9';
  std::ofstream(out / "table.csv") << tampered;
  CHECK_THROWS_WITH_AS(ex::cmd_report(out), doctest::Contains("mismatch"), ex::ExperimentError);
  fs::remove_all(out);
}

TEST_CASE("cmd_run: adaptive depth cell resolves to a concrete depth") {
  const fs::path out = fresh_dir("gatlab_run_adaptive");
  ex::RunSpec spec = ex::spec_from_kv(ex::parse_kv_text(
      "depths = adaptive\n"
      "seeds = 1\n"
      "epochs = 3\n"
      "synthetic_nodes = 200\n"));
  const auto rows = ex::cmd_run(spec, out);
  REQUIRE(rows.size() == 1);
  const Dataset d = ex::default_synthetic(200);
  CHECK(rows[0].depth ==
        model::adaptive_depth(d.graph.num_nodes, d.graph.num_edges_undirected()).l_selected);
  fs::remove_all(out);
}

TEST_CASE("probe presets") {
  CHECK(ex::probe_names().size() == 9);
  const fs::path out = fresh_dir("gatlab_probe_tiny");
  ex::ProbeOptions opt;
  opt.synthetic_nodes = 200;
  opt.num_seeds = 1;
  opt.depths = {1, 2};
  opt.hp.epochs = 5;
  opt.hidden_dim = 8;
  opt.workers = 2;

  SUBCASE("residual_comparison emits one column per mode") {
    const fs::path p = ex::cmd_probe("residual_comparison", opt, out);
    const std::string text = slurp(p);
    CHECK(text.find("depth,acc_none,acc_input,acc_initial") != std::string::npos);
    CHECK(text.find("\n1,") != std::string::npos);
    CHECK(text.find("\n2,") != std::string::npos);
    CHECK(text.rfind("# preset=residual_comparison", 0) == 0);
  }

  SUBCASE("gradient_vanishing emits long-format epoch rows") {
    const fs::path p = ex::cmd_probe("gradient_vanishing", opt, out);
    const std::string text = slurp(p);
    CHECK(text.find("depth,epoch,grad_l1_mean") != std::string::npos);
    const auto traces_for = [&](const std::string& prefix) {
      int count = 0;
      std::istringstream ss(text);
      std::string line;
      while (std::getline(ss, line))
        if (line.rfind(prefix, 0) == 0) ++count;
      return count;
    };
    CHECK(traces_for("1,") == 5);
    CHECK(traces_for("2,") == 5);
  }

  SUBCASE("oversmoothing reports smv next to accuracy") {
    const fs::path p = ex::cmd_probe("oversmoothing", opt, out);
    CHECK(slurp(p).find("depth,acc_test,smv") != std::string::npos);
  }

  SUBCASE("unknown preset rejected") {
    CHECK_THROWS_WITH_AS(ex::cmd_probe("oversharpening", opt, out), doctest::Contains("preset"),
                         ex::ExperimentError);
  }
  fs::remove_all(out);
}

TEST_CASE("prep: synthetic then convert round trip") {
  const fs::path synth = fresh_dir("gatlab_prep_synth");
  SyntheticParams p;
  p.num_nodes = 80;
  p.num_classes = 3;
  p.feat_dim = 6;
  p.train_size = 10;
  p.val_size = 10;
  p.test_size = 20;
  p.name = "prep-test";
  CHECK(ex::cmd_prep_synthetic(p, synth) == 0);
  const Dataset d = load_dataset(synth);
  CHECK(d.meta.num_nodes == 80);

  ex::ConvertInputs in;
  in.edges = synth / "edges.csv";
  in.features = synth / "features.csv";
  in.labels = synth / "labels.csv";
  in.splits = synth / "splits.json";
  in.name = "converted-copy";
  const fs::path conv = fresh_dir("gatlab_prep_conv");
  CHECK(ex::cmd_prep_convert(in, conv) == 0);
  const Dataset c = load_dataset(conv);
  CHECK(c.meta.name == "converted-copy");
  CHECK(c.graph == d.graph);
  CHECK(c.features == d.features);
  CHECK(c.labels == d.labels);

  in.splits = synth / "does_not_exist.json";
  CHECK_THROWS_WITH_AS(ex::cmd_prep_convert(in, conv), doctest::Contains("missing input"),
                       ex::ExperimentError);
  fs::remove_all(synth);
  fs::remove_all(conv);
}
