#include "gatlab/layers.hpp"

#include <numeric>

namespace gatlab::layers {

namespace {

using ad::Tape;
using ad::Var;

// e_k = act(a1 . wh_dst[dst(k)] + a2 . wh_src[col(k)]) for each CSR entry k.
Var scores_from_transformed(Tape& tape, Var wh_src, Var wh_dst, Var attention,
                            const AdjacencyCSR& g, const ad::EdgeSegments& seg, ad::Act act,
                            double slope) {
  const Index width = tape.value(wh_src).cols();
  if (tape.value(attention).rows() != 2 * width || tape.value(attention).cols() != 1)
    throw ad::TapeError("attention vector must be 2*width x 1");
  std::vector<Index> lower(static_cast<std::size_t>(width));
  std::vector<Index> upper(static_cast<std::size_t>(width));
  std::iota(lower.begin(), lower.end(), Index{0});
  std::iota(upper.begin(), upper.end(), width);
  const Var a_dst = tape.gather_rows(attention, lower);
  const Var a_src = tape.gather_rows(attention, upper);
  const Var s_dst = tape.matmul(wh_dst, a_dst);  // N x 1
  const Var s_src = tape.matmul(wh_src, a_src);
  const Var per_edge_dst = tape.gather_rows(s_dst, seg.dst);
  const Var per_edge_src = tape.gather_rows(s_src, g.col_indices);
  return tape.activation(tape.add(per_edge_dst, per_edge_src), act, slope);
}

Var transformed(Tape& tape, Var h, const AttentionHead& head) {
  return head.transform.valid() ? tape.matmul(h, head.transform) : h;
}

Var head_aggregate(Tape& tape, Var h, const AttentionHead& head, const AttentionParams& params,
                   const AdjacencyCSR& g, const ad::EdgeSegments& seg) {
  const Var wh = transformed(tape, h, head);
  const Var scores = scores_from_transformed(tape, wh, wh, head.attention, g, seg,
                                             params.attention_activation, params.leaky_slope);
  const Var alpha = tape.segment_softmax(scores, seg);
  const Var m = tape.gather_rows(wh, g.col_indices);
  return tape.segment_weighted_sum(alpha, m, seg);
}

Var combine_heads(Tape& tape, const std::vector<Var>& parts, bool average_heads) {
  if (parts.size() == 1) return parts[0];
  return average_heads ? tape.mean_of(parts) : tape.concat_cols(parts);
}

}  // namespace

ResidualKind residual_kind_from_string(const std::string& s) {
  if (s == "none") return ResidualKind::None;
  if (s == "input") return ResidualKind::Input;
  if (s == "initial") return ResidualKind::Initial;
  throw ad::TapeError("unknown residual mode: " + s);
}

std::string to_string(ResidualKind k) {
  switch (k) {
    case ResidualKind::None: return "none";
    case ResidualKind::Input: return "input";
    case ResidualKind::Initial: return "initial";
  }
  return "?";
}

ad::EdgeSegments make_segments(const AdjacencyCSR& g) {
  ad::EdgeSegments seg;
  seg.row_offsets = g.row_offsets;
  seg.dst.resize(static_cast<std::size_t>(g.num_entries()));
  for (Index i = 0; i < g.num_nodes; ++i)
    for (Index k = g.row_offsets[static_cast<std::size_t>(i)];
         k < g.row_offsets[static_cast<std::size_t>(i) + 1]; ++k)
      seg.dst[static_cast<std::size_t>(k)] = i;
  return seg;
}

ad::Var attention_scores(Tape& tape, Var h_src, Var h_dst, const AttentionHead& head,
                         const AdjacencyCSR& g, const ad::EdgeSegments& seg,
                         ad::Act attention_activation, double leaky_slope) {
  const Var wh_src = transformed(tape, h_src, head);
  const Var wh_dst =
      (h_src.id == h_dst.id) ? wh_src : transformed(tape, h_dst, head);
  return scores_from_transformed(tape, wh_src, wh_dst, head.attention, g, seg,
                                 attention_activation, leaky_slope);
}

ad::Var gat_layer_forward(Tape& tape, Var h, const AttentionParams& params, const AdjacencyCSR& g,
                          const ad::EdgeSegments& seg, ad::Act sigma, bool average_heads) {
  if (!g.has_self_loops)
    throw ad::TapeError("attention layers require self-loops in the graph");
  std::vector<Var> parts;
  parts.reserve(params.heads.size());
  for (const AttentionHead& head : params.heads)
    parts.push_back(head_aggregate(tape, h, head, params, g, seg));
  return tape.activation(combine_heads(tape, parts, average_heads), sigma);
}

ad::Var adgat_layer_forward(Tape& tape, Var h, Var anchor, const AttentionParams& params,
                            const AdjacencyCSR& g, const ad::EdgeSegments& seg, ResidualMode mode,
                            ad::Act sigma, bool average_heads) {
  if (mode.kind == ResidualKind::None || mode.beta == 0.0)
    return gat_layer_forward(tape, h, params, g, seg, sigma, average_heads);
  if (!g.has_self_loops)
    throw ad::TapeError("attention layers require self-loops in the graph");
  std::vector<Var> parts;
  parts.reserve(params.heads.size());
  for (const AttentionHead& head : params.heads)
    parts.push_back(head_aggregate(tape, h, head, params, g, seg));
  Var combined = combine_heads(tape, parts, average_heads);
  Var res = params.residual_transform.valid()
                ? tape.matmul(anchor, params.residual_transform)
                : anchor;
  if (tape.value(res).cols() != tape.value(combined).cols())
    throw ad::TapeError("residual anchor width incompatible with layer output");
  combined = tape.add(combined, tape.scale(res, mode.beta));
  return tape.activation(combined, sigma);
}

ad::Var decoupled_propagate(Tape& tape, Var h, const AttentionParams& params,
                            const AdjacencyCSR& g, const ad::EdgeSegments& seg,
                            int propagation_depth, ad::Act sigma) {
  if (propagation_depth < 1)
    throw ad::TapeError("decoupled_propagate: propagation depth must be >= 1");
  if (!g.has_self_loops)
    throw ad::TapeError("attention layers require self-loops in the graph");
  const AttentionHead& head = params.heads.at(0);
  Var cur = tape.activation(tape.matmul(h, head.transform), sigma);  // single ET
  for (int step = 0; step < propagation_depth; ++step) {
    const Var scores = scores_from_transformed(tape, cur, cur, head.attention, g, seg,
                                               params.attention_activation, params.leaky_slope);
    const Var alpha = tape.segment_softmax(scores, seg);
    const Var m = tape.gather_rows(cur, g.col_indices);
    cur = tape.segment_weighted_sum(alpha, m, seg);
  }
  return cur;
}

ad::Var fa_layer_forward(Tape& tape, Var h, const AttentionParams& params, Index num_nodes,
                         ad::Act sigma, bool average_heads, Index node_cap) {
  if (num_nodes > node_cap)
    throw ad::TapeError("fa layer refused: " + std::to_string(num_nodes) +
                        " nodes exceeds cap " + std::to_string(node_cap) +
                        " (edge array would be N^2)");
  const AdjacencyCSR& g = tape.adopt(make_fully_adjacent(num_nodes));
  const ad::EdgeSegments& seg = tape.adopt(make_segments(g));
  return gat_layer_forward(tape, h, params, g, seg, sigma, average_heads);
}

}  // namespace gatlab::layers
