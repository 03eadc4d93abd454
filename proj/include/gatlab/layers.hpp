#pragma once

#include "gatlab/graph.hpp"
#include "gatlab/tensor.hpp"

namespace gatlab::layers {

enum class ResidualKind { None, Input, Initial };

struct ResidualMode {
  ResidualKind kind = ResidualKind::None;
  double beta = 0.0;
};

ResidualKind residual_kind_from_string(const std::string& s);
std::string to_string(ResidualKind k);

/// One attention head: transform is the shared linear map (in x out, applied
/// as H * transform) and attention the 2*out x 1 score vector.
struct AttentionHead {
  ad::Var transform;
  ad::Var attention;
};

struct AttentionParams {
  std::vector<AttentionHead> heads;
  ad::Var residual_transform;  // optional alignment map, anchor_dim x out
  ad::Act attention_activation = ad::Act::LeakyRelu;
  double leaky_slope = 0.2;
};

ad::EdgeSegments make_segments(const AdjacencyCSR& g);

/// Per-edge unnormalized attention scores for one head, E x 1 in CSR edge
/// order. Never materializes a dense N x N score matrix.
ad::Var attention_scores(ad::Tape& tape, ad::Var h_src, ad::Var h_dst, const AttentionHead& head,
                         const AdjacencyCSR& g, const ad::EdgeSegments& seg,
                         ad::Act attention_activation, double leaky_slope = 0.2);

/// Attention scores -> per-segment softmax -> weighted sum of transformed
/// neighbors -> sigma. Heads concatenate by default; average_heads is for the
/// output layer.
ad::Var gat_layer_forward(ad::Tape& tape, ad::Var h, const AttentionParams& params,
                          const AdjacencyCSR& g, const ad::EdgeSegments& seg, ad::Act sigma,
                          bool average_heads = false);

/// GAT layer plus a scaled residual term from `anchor` added before sigma.
/// With Initial mode the anchor is the stack's initial representation; with
/// Input mode the caller passes the layer input. beta == 0 or kind == None
/// records exactly the same tape ops as gat_layer_forward.
ad::Var adgat_layer_forward(ad::Tape& tape, ad::Var h, ad::Var anchor,
                            const AttentionParams& params, const AdjacencyCSR& g,
                            const ad::EdgeSegments& seg, ResidualMode mode, ad::Act sigma,
                            bool average_heads = false);

/// One transform + sigma, then propagation_depth attention-weighted
/// aggregations with the transform frozen to identity. The attention vector
/// of head 0 is shared across propagation steps.
ad::Var decoupled_propagate(ad::Tape& tape, ad::Var h, const AttentionParams& params,
                            const AdjacencyCSR& g, const ad::EdgeSegments& seg,
                            int propagation_depth, ad::Act sigma);

/// gat_layer_forward over the complete graph with self-loops. Refuses node
/// counts above `node_cap` since the edge array is N^2.
ad::Var fa_layer_forward(ad::Tape& tape, ad::Var h, const AttentionParams& params,
                         Index num_nodes, ad::Act sigma, bool average_heads = false,
                         Index node_cap = 5000);

}  // namespace gatlab::layers
