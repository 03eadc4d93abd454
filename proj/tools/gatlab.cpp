#include "gatlab/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <exception>

namespace {

using namespace gatlab;

int run_cli(int argc, char** argv) {
  CLI::App app{"Graph attention network laboratory"};
  app.require_subcommand(1);

  // prep
  auto* prep = app.add_subcommand("prep", "Create or convert a dataset directory");
  prep->require_subcommand(1);

  SyntheticParams syn;
  std::string prep_out = "dataset";
  auto* prep_syn = prep->add_subcommand("synthetic", "Generate a stochastic-block dataset");
  prep_syn->add_option("--n", syn.num_nodes, "Node count");
  prep_syn->add_option("--avg-degree", syn.avg_degree, "Target average degree");
  prep_syn->add_option("--classes", syn.num_classes, "Number of classes");
  prep_syn->add_option("--feat-dim", syn.feat_dim, "Feature dimension");
  prep_syn->add_option("--homophily", syn.homophily, "Intra-class edge fraction in [0,1]");
  prep_syn->add_option("--noise", syn.noise_sigma, "Feature noise sigma");
  prep_syn->add_option("--train", syn.train_size, "Train split size");
  prep_syn->add_option("--val", syn.val_size, "Validation split size");
  prep_syn->add_option("--test", syn.test_size, "Test split size");
  prep_syn->add_option("--seed", syn.seed, "Generator seed");
  prep_syn->add_option("--name", syn.name, "Dataset name");
  prep_syn->add_option("--out", prep_out, "Output directory")->required();

  experiment::ConvertInputs conv;
  auto* prep_conv = prep->add_subcommand("convert", "Assemble a dataset from raw files");
  prep_conv->add_option("--edges", conv.edges, "edges.csv source")->required();
  prep_conv->add_option("--features", conv.features, "features.csv source")->required();
  prep_conv->add_option("--labels", conv.labels, "labels.csv source")->required();
  prep_conv->add_option("--splits", conv.splits, "splits.json source")->required();
  prep_conv->add_option("--name", conv.name, "Dataset name");
  prep_conv->add_option("--out", prep_out, "Output directory")->required();

  // depth
  std::string depth_dataset;
  std::string depth_out = ".";
  auto* depth = app.add_subcommand("depth", "Print the sparsity-based depth advice");
  depth->add_option("--dataset", depth_dataset, "Dataset directory")->required();
  depth->add_option("--out", depth_out, "Output directory for depth.json");

  // run
  std::string run_spec_file, run_dataset, run_variant = "gat", run_depths, run_out = "out";
  int run_seeds_n = 10, run_workers = 1;
  auto* run = app.add_subcommand("run", "Train (variant, depth) cells and emit the result table");
  run->add_option("--spec", run_spec_file, "Spec file (flat key = value)");
  run->add_option("--dataset", run_dataset, "Dataset directory (default: synthetic)");
  run->add_option("--variant", run_variant,
                  "Comma list: gat, adgat, gat_width_doubling, gat_fa, gat_decoupled");
  run->add_option("--depths", run_depths, "Comma list, ranges like 1..8, or 'adaptive'");
  run->add_option("--seeds", run_seeds_n, "Number of seeds");
  run->add_option("--workers", run_workers, "Parallel training workers");
  run->add_option("--out", run_out, "Output directory");

  // probe
  std::string probe_preset, probe_dataset, probe_depths, probe_out = "out";
  experiment::ProbeOptions popt;
  auto* probe = app.add_subcommand("probe", "Emit plot data for one diagnostic study");
  probe->add_option("--preset", probe_preset, "One of the registered probe presets")->required();
  probe->add_option("--dataset", probe_dataset, "Dataset directory (default: synthetic)");
  probe->add_option("--depths", probe_depths, "Depth list override");
  probe->add_option("--seeds", popt.num_seeds, "Number of seeds");
  probe->add_option("--epochs", popt.hp.epochs, "Epoch budget");
  probe->add_option("--hidden", popt.hidden_dim, "Hidden width");
  probe->add_option("--n", popt.synthetic_nodes, "Synthetic node count");
  probe->add_option("--workers", popt.workers, "Parallel training workers");
  probe->add_option("--out", probe_out, "Output directory");

  // report
  std::string report_out = "out";
  auto* report = app.add_subcommand("report", "Re-aggregate stored traces into a table");
  report->add_option("--out", report_out, "Experiment output directory");

  CLI11_PARSE(app, argc, argv);

  if (prep_syn->parsed()) return experiment::cmd_prep_synthetic(syn, prep_out);
  if (prep_conv->parsed()) return experiment::cmd_prep_convert(conv, prep_out);
  if (depth->parsed()) return experiment::cmd_depth(depth_dataset, depth_out);
  if (run->parsed()) {
    experiment::RunSpec spec;
    if (!run_spec_file.empty()) spec = experiment::spec_from_kv(experiment::parse_kv_file(run_spec_file));
    if (!run_dataset.empty()) spec.dataset_dir = run_dataset;
    if (run->count("--variant") || run_spec_file.empty())
      spec.variants = experiment::split_list(run_variant);
    if (!run_depths.empty()) spec.depths = experiment::parse_int_list(run_depths);
    if (run->count("--seeds")) spec.num_seeds = run_seeds_n;
    if (run->count("--workers")) spec.workers = run_workers;
    experiment::cmd_run(spec, run_out);
    return 0;
  }
  if (probe->parsed()) {
    popt.dataset_dir = probe_dataset;
    if (!probe_depths.empty()) popt.depths = experiment::parse_int_list(probe_depths);
    const auto path = experiment::cmd_probe(probe_preset, popt, probe_out);
    std::printf("wrote %s\n", path.string().c_str());
    return 0;
  }
  if (report->parsed()) {
    experiment::cmd_report(report_out);
    std::printf("report verified against stored traces\n");
    return 0;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const gatlab::DatasetError& e) {
    std::fprintf(stderr, "ERR:dataset %s\n", e.what());
  } catch (const gatlab::GraphError& e) {
    std::fprintf(stderr, "ERR:graph %s\n", e.what());
  } catch (const gatlab::model::ModelError& e) {
    std::fprintf(stderr, "ERR:model %s\n", e.what());
  } catch (const gatlab::trainer::TrainError& e) {
    std::fprintf(stderr, "ERR:train %s\n", e.what());
  } catch (const gatlab::experiment::ExperimentError& e) {
    std::fprintf(stderr, "ERR:experiment %s\n", e.what());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "ERR:internal %s\n", e.what());
  }
  return 1;
}
