#include "gatlab/model.hpp"

#include <cmath>
#include <random>

namespace gatlab::model {

Variant variant_from_string(const std::string& s) {
  if (s == "gat") return Variant::Gat;
  if (s == "adgat") return Variant::Adgat;
  if (s == "gat_width_doubling") return Variant::WidthDoubling;
  if (s == "gat_fa") return Variant::Fa;
  if (s == "gat_decoupled") return Variant::Decoupled;
  throw ModelError("unknown variant: " + s);
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Gat: return "gat";
    case Variant::Adgat: return "adgat";
    case Variant::WidthDoubling: return "gat_width_doubling";
    case Variant::Fa: return "gat_fa";
    case Variant::Decoupled: return "gat_decoupled";
  }
  return "?";
}

DepthChoice adaptive_depth(Index num_nodes, Index num_edges_undirected, int max_depth) {
  const double q = 2.0 * static_cast<double>(num_edges_undirected) / static_cast<double>(num_nodes);
  const double arg = 1.0 - static_cast<double>(num_nodes) + 2.0 * static_cast<double>(num_edges_undirected);
  if (q <= 1.0 || arg <= 1.0)
    throw ModelError("adaptive depth undefined for this sparsity (q=" + std::to_string(q) +
                     "); set an explicit depth");
  DepthChoice c;
  c.q = q;
  c.l_real = std::log(arg) / std::log(q);
  const int rounded = static_cast<int>(std::floor(c.l_real + 0.5));  // round half up
  c.l_selected = std::clamp(rounded, 1, max_depth);
  return c;
}

namespace {

class ParamBuilder {
 public:
  ParamBuilder(Model& m, std::uint64_t seed) : m_(m), rng_(seed) {}

  int glorot(Index rows, Index cols, const std::string& name) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> u(-limit, limit);
    Matrix w(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) w(i, j) = u(rng_);
    return add(std::move(w), name);
  }

  int zeros(Index rows, Index cols, const std::string& name) {
    return add(Matrix::Zero(rows, cols), name);
  }

 private:
  int add(Matrix w, const std::string& name) {
    m_.params.push_back(std::move(w));
    m_.param_names.push_back(name);
    return static_cast<int>(m_.params.size()) - 1;
  }
  Model& m_;
  std::mt19937_64 rng_;
};

Model::AttDesc make_att_layer(ParamBuilder& pb, Index in_dim, Index out_dim, int heads,
                              const std::string& tag) {
  Model::AttDesc d;
  for (int h = 0; h < heads; ++h) {
    d.w.push_back(pb.glorot(in_dim, out_dim, tag + ".w" + std::to_string(h)));
    d.a.push_back(pb.glorot(2 * out_dim, 1, tag + ".a" + std::to_string(h)));
  }
  return d;
}

}  // namespace

Model build_model(const ModelConfig& config, const Dataset& dataset, std::uint64_t seed) {
  if (config.hidden_dim < 1) throw ModelError("hidden_dim must be >= 1");
  if (config.heads < 1) throw ModelError("heads must be >= 1");
  Model m;
  m.config = config;
  m.input_dim = dataset.meta.feat_dim;
  m.num_classes = dataset.meta.num_classes;
  m.graph = with_self_loops(dataset.graph);
  m.segments = layers::make_segments(m.graph);

  if (config.adaptive) {
    m.depth = adaptive_depth(dataset.graph.num_nodes, dataset.graph.num_edges_undirected(),
                             config.max_depth)
                  .l_selected;
  } else {
    m.depth = config.depth;
  }
  if (m.depth < 1) throw ModelError("depth must be >= 1 after resolution");

  ParamBuilder pb(m, seed);
  const Index d = m.input_dim;
  const Index hd = config.hidden_dim;
  const Index c = m.num_classes;
  const int heads = config.heads;
  const int L = m.depth;

  switch (config.variant) {
    case Variant::Gat:
    case Variant::Fa: {
      for (int l = 1; l <= L; ++l) {
        const Index in = (l == 1) ? d : heads * hd;
        const Index out = (l == L) ? c : hd;
        auto att = make_att_layer(pb, in, out, heads, "gat" + std::to_string(l));
        att.average_heads = (l == L);
        att.fully_adjacent = (config.variant == Variant::Fa && l == L);
        m.att_layers.push_back(std::move(att));
      }
      break;
    }
    case Variant::WidthDoubling: {
      Index total = 0;
      Index in = d;
      for (int l = 1; l <= L; ++l) {
        const Index out = hd * (Index{1} << (l - 1));
        total += heads * out;
        if (total > (Index{1} << 20))
          throw ModelError("width-doubling stack exceeds 2^20 hidden units");
        m.att_layers.push_back(make_att_layer(pb, in, out, heads, "wd" + std::to_string(l)));
        in = heads * out;
      }
      m.classifier.w = pb.glorot(in, c, "classifier.w");
      m.classifier.b = pb.zeros(1, c, "classifier.b");
      break;
    }
    case Variant::Decoupled: {
      auto att = make_att_layer(pb, d, hd, 1, "et");
      m.att_layers.push_back(std::move(att));
      m.classifier.w = pb.glorot(hd, c, "classifier.w");
      m.classifier.b = pb.zeros(1, c, "classifier.b");
      break;
    }
    case Variant::Adgat: {
      if (config.pre_mlp_layers < 1) throw ModelError("adgat requires pre_mlp_layers >= 1");
      for (int l = 1; l <= config.pre_mlp_layers; ++l) {
        Model::LinearDesc lin;
        lin.w = pb.glorot(l == 1 ? d : hd, hd, "pre" + std::to_string(l) + ".w");
        lin.b = pb.zeros(1, hd, "pre" + std::to_string(l) + ".b");
        m.pre_mlp.push_back(lin);
      }
      for (int l = 1; l <= L; ++l) {
        const Index in = (l == 1) ? hd : heads * hd;
        auto att = make_att_layer(pb, in, hd, heads, "conv" + std::to_string(l));
        if (config.residual.kind != layers::ResidualKind::None && heads > 1) {
          // anchor/input width differs from the concat width; learn alignment
          const Index anchor_dim =
              (config.residual.kind == layers::ResidualKind::Initial) ? hd : in;
          att.w_res = pb.glorot(anchor_dim, heads * hd, "conv" + std::to_string(l) + ".w_res");
        }
        m.att_layers.push_back(std::move(att));
      }
      for (int l = 1; l <= config.post_mlp_layers; ++l) {
        Model::LinearDesc lin;
        const Index in = (l == 1) ? heads * hd : hd;
        const Index out = (l == config.post_mlp_layers) ? c : hd;
        lin.w = pb.glorot(in, out, "post" + std::to_string(l) + ".w");
        lin.b = pb.zeros(1, out, "post" + std::to_string(l) + ".b");
        m.post_mlp.push_back(lin);
      }
      break;
    }
  }

  if (!m.att_layers.empty()) m.first_attention_w = m.att_layers.front().w.front();

  if (config.variant == Variant::Fa) {
    if (m.graph.num_nodes > config.fa_node_cap)
      throw ModelError("fa layer refused: " + std::to_string(m.graph.num_nodes) +
                       " nodes exceeds cap " + std::to_string(config.fa_node_cap));
    m.fa_graph = make_fully_adjacent(m.graph.num_nodes);
    m.fa_segments = layers::make_segments(m.fa_graph);
  }
  return m;
}

namespace {

layers::AttentionParams att_params(const Model& m, const Model::AttDesc& desc,
                                   const std::vector<ad::Var>& pv) {
  layers::AttentionParams p;
  p.attention_activation = m.config.attention_activation;
  for (std::size_t h = 0; h < desc.w.size(); ++h)
    p.heads.push_back({pv[static_cast<std::size_t>(desc.w[h])],
                       pv[static_cast<std::size_t>(desc.a[h])]});
  if (desc.w_res >= 0) p.residual_transform = pv[static_cast<std::size_t>(desc.w_res)];
  return p;
}

ad::Var linear(ad::Tape& tape, ad::Var x, const Model::LinearDesc& lin,
               const std::vector<ad::Var>& pv) {
  ad::Var out = tape.matmul(x, pv[static_cast<std::size_t>(lin.w)]);
  if (lin.b >= 0) out = tape.add_rowvec(out, pv[static_cast<std::size_t>(lin.b)]);
  return out;
}

}  // namespace

ForwardResult forward_on_tape(ad::Tape& tape, const Model& m, const Matrix& features,
                              bool training, std::uint64_t dropout_seed,
                              const std::vector<ad::Var>* param_vars) {
  if (features.cols() != m.input_dim) throw ModelError("feature width does not match model");
  ForwardResult r;
  if (param_vars != nullptr) {
    if (param_vars->size() != m.params.size())
      throw ModelError("param_vars count does not match model parameters");
    r.param_vars = *param_vars;
  } else {
    r.param_vars.reserve(m.params.size());
    for (const Matrix& p : m.params) r.param_vars.push_back(tape.param(p));
  }
  const auto& pv = r.param_vars;

  std::uint64_t drop_counter = 0;
  auto drop = [&](ad::Var x) {
    if (m.config.dropout <= 0.0) return x;
    return tape.dropout(x, m.config.dropout, dropout_seed + 0x9e3779b97f4a7c15ULL * ++drop_counter,
                        training);
  };

  ad::Var h = drop(tape.constant(features));

  switch (m.config.variant) {
    case Variant::Gat:
    case Variant::Fa: {
      for (std::size_t l = 0; l < m.att_layers.size(); ++l) {
        const auto& desc = m.att_layers[l];
        const bool last = (l + 1 == m.att_layers.size());
        const ad::Act sigma = last ? ad::Act::Identity : ad::Act::Elu;
        const auto p = att_params(m, desc, pv);
        if (desc.fully_adjacent)
          h = layers::gat_layer_forward(tape, h, p, m.fa_graph, m.fa_segments, sigma,
                                        desc.average_heads);
        else
          h = layers::gat_layer_forward(tape, h, p, m.graph, m.segments, sigma,
                                        desc.average_heads);
        if (!last) h = drop(h);
      }
      r.logits = h;
      break;
    }
    case Variant::WidthDoubling: {
      for (const auto& desc : m.att_layers) {
        h = layers::gat_layer_forward(tape, h, att_params(m, desc, pv), m.graph, m.segments,
                                      ad::Act::Elu, false);
        h = drop(h);
      }
      r.logits = linear(tape, h, m.classifier, pv);
      break;
    }
    case Variant::Decoupled: {
      const auto p = att_params(m, m.att_layers.front(), pv);
      h = layers::decoupled_propagate(tape, h, p, m.graph, m.segments,
                                      m.config.propagation_depth, ad::Act::Elu);
      h = drop(h);
      r.logits = linear(tape, h, m.classifier, pv);
      break;
    }
    case Variant::Adgat: {
      for (const auto& lin : m.pre_mlp) h = drop(tape.activation(linear(tape, h, lin, pv), ad::Act::Elu));
      const ad::Var anchor = h;
      for (const auto& desc : m.att_layers) {
        const ad::Var res_anchor =
            (m.config.residual.kind == layers::ResidualKind::Input) ? h : anchor;
        h = layers::adgat_layer_forward(tape, h, res_anchor, att_params(m, desc, pv), m.graph,
                                        m.segments, m.config.residual, ad::Act::Elu, false);
        h = drop(h);
      }
      for (std::size_t l = 0; l < m.post_mlp.size(); ++l) {
        h = linear(tape, h, m.post_mlp[l], pv);
        if (l + 1 < m.post_mlp.size()) h = drop(tape.activation(h, ad::Act::Elu));
      }
      r.logits = h;
      break;
    }
  }
  return r;
}

Matrix forward(const Model& m, const Dataset& dataset, bool training, std::uint64_t dropout_seed) {
  ad::Tape tape;
  const ForwardResult r = forward_on_tape(tape, m, dataset.features, training, dropout_seed);
  return tape.value(r.logits);
}

}  // namespace gatlab::model
