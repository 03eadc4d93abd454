#pragma once

#include "gatlab/graph.hpp"
#include "gatlab/layers.hpp"
#include "gatlab/tensor.hpp"

#include <string>
#include <vector>

namespace gatlab::model {

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Variant { Gat, Adgat, WidthDoubling, Fa, Decoupled };

Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);

struct ModelConfig {
  Variant variant = Variant::Gat;
  int depth = 2;
  bool adaptive = false;  // resolve depth from graph sparsity
  int hidden_dim = 16;
  int heads = 1;
  layers::ResidualMode residual{layers::ResidualKind::Initial, 0.5};
  ad::Act attention_activation = ad::Act::LeakyRelu;
  int pre_mlp_layers = 1;
  int post_mlp_layers = 1;
  double dropout = 0.0;
  int propagation_depth = 2;  // Decoupled only
  Index fa_node_cap = 5000;
  int max_depth = 16;
};

struct DepthChoice {
  double l_real = 0.0;
  int l_selected = 0;
  double q = 0.0;
};

/// Ideal convolution depth from graph sparsity: the depth at which the
/// expected receptive field covers the graph. Undefined for q <= 1.
DepthChoice adaptive_depth(Index num_nodes, Index num_edges_undirected, int max_depth = 16);

struct Model {
  struct LinearDesc {
    int w = -1, b = -1;
  };
  struct AttDesc {
    std::vector<int> w, a;
    int w_res = -1;
    bool average_heads = false;
    bool fully_adjacent = false;
  };

  ModelConfig config;
  int depth = 0;
  Index input_dim = 0, num_classes = 0;
  std::vector<Matrix> params;
  std::vector<std::string> param_names;
  std::vector<LinearDesc> pre_mlp, post_mlp;
  std::vector<AttDesc> att_layers;
  LinearDesc classifier;        // WidthDoubling / Decoupled tail
  int first_attention_w = -1;   // probed by the first-layer gradient diagnostic

  AdjacencyCSR graph;  // self-loop augmented
  ad::EdgeSegments segments;
  AdjacencyCSR fa_graph;
  ad::EdgeSegments fa_segments;
};

Model build_model(const ModelConfig& config, const Dataset& dataset, std::uint64_t seed);

struct ForwardResult {
  ad::Var logits;
  std::vector<ad::Var> param_vars;  // aligned with Model::params
};

/// `param_vars` substitutes existing tape leaves for the model parameters
/// (one per Model::params entry, same order); used by gradient checking.
ForwardResult forward_on_tape(ad::Tape& tape, const Model& m, const Matrix& features,
                              bool training, std::uint64_t dropout_seed,
                              const std::vector<ad::Var>* param_vars = nullptr);

/// Convenience evaluation pass; returns logits values.
Matrix forward(const Model& m, const Dataset& dataset, bool training = false,
               std::uint64_t dropout_seed = 0);

}  // namespace gatlab::model
