#include "gatlab/layers.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <numeric>
#include <random>

using namespace gatlab;
using ad::Tape;
using ad::Var;
namespace L = gatlab::layers;

namespace {

struct LayerFixture {
  AdjacencyCSR g;
  ad::EdgeSegments seg;
  Matrix h, w, a;

  LayerFixture(Index n, Index in_dim, Index out_dim, std::uint64_t seed, double edge_prob = 0.4) {
    std::mt19937_64 rng(seed);
    g = oracles::random_graph(n, edge_prob, rng);
    seg = L::make_segments(g);
    h = oracles::random_matrix(n, in_dim, rng);
    w = oracles::random_matrix(in_dim, out_dim, rng);
    a = oracles::random_matrix(2 * out_dim, 1, rng);
  }

  L::AttentionParams params(Tape& t, Var* w_var = nullptr) const {
    L::AttentionParams p;
    const Var wv = t.param(w);
    if (w_var != nullptr) *w_var = wv;
    p.heads.push_back({wv, t.param(a)});
    return p;
  }
};

}  // namespace

TEST_CASE("gat layer matches the dense per-pair oracle") {
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    LayerFixture f(10, 5, 3, seed);
    Tape t;
    const Matrix got = t.value(L::gat_layer_forward(t, t.constant(f.h), f.params(t), f.g, f.seg,
                                                    ad::Act::Elu));
    const Matrix want = oracles::dense_gat_layer(f.h, f.w, f.a, f.g, ad::Act::LeakyRelu, 0.2,
                                                 ad::Act::Elu);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("gat layer with a = 0 reduces to neighborhood means") {
  LayerFixture f(8, 4, 3, 7);
  f.a.setZero();
  Tape t;
  const Matrix got = t.value(L::gat_layer_forward(t, t.constant(f.h), f.params(t), f.g, f.seg,
                                                  ad::Act::Identity));
  const Matrix wh = f.h * f.w;
  for (Index i = 0; i < f.g.num_nodes; ++i) {
    const auto nbrs = f.g.neighbors(i);
    Matrix mean = Matrix::Zero(1, wh.cols());
    for (Index j : nbrs) mean += wh.row(j);
    mean /= static_cast<double>(nbrs.size());
    CHECK((got.row(i) - mean.row(0)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("gat layer refuses graphs without self-loops") {
  LayerFixture f(6, 3, 2, 9);
  const AdjacencyCSR bare = build_csr(extract_edges(f.g), f.g.num_nodes, false);
  const ad::EdgeSegments bare_seg = L::make_segments(bare);
  Tape t;
  CHECK_THROWS_WITH_AS(
      L::gat_layer_forward(t, t.constant(f.h), f.params(t), bare, bare_seg, ad::Act::Elu),
      doctest::Contains("self-loops"), ad::TapeError);
}

TEST_CASE("multi-head concat and average shapes") {
  LayerFixture f(7, 4, 3, 11);
  std::mt19937_64 rng(99);
  auto two_heads = [&](Tape& t) {
    L::AttentionParams p;
    p.heads.push_back({t.param(f.w), t.param(f.a)});
    p.heads.push_back({t.param(oracles::random_matrix(4, 3, rng)),
                       t.param(oracles::random_matrix(6, 1, rng))});
    return p;
  };
  Tape t1;
  CHECK(t1.value(L::gat_layer_forward(t1, t1.constant(f.h), two_heads(t1), f.g, f.seg,
                                      ad::Act::Elu))
            .cols() == 6);
  Tape t2;
  CHECK(t2.value(L::gat_layer_forward(t2, t2.constant(f.h), two_heads(t2), f.g, f.seg,
                                      ad::Act::Elu, true))
            .cols() == 3);
}

TEST_CASE("adgat layer") {
  LayerFixture f(9, 4, 4, 13);
  std::mt19937_64 rng(17);
  const Matrix anchor = oracles::random_matrix(9, 4, rng);

  SUBCASE("beta = 0 produces the exact gat tape") {
    Tape t1;
    const Matrix plain = t1.value(L::gat_layer_forward(t1, t1.constant(f.h), f.params(t1), f.g,
                                                       f.seg, ad::Act::Elu));
    Tape t2;
    const Matrix with_res = t2.value(
        L::adgat_layer_forward(t2, t2.constant(f.h), t2.constant(anchor), f.params(t2), f.g,
                               f.seg, {L::ResidualKind::Initial, 0.0}, ad::Act::Elu));
    CHECK(plain == with_res);
    CHECK(t1.size() == t2.size() - 1);  // only the unused anchor constant differs
  }

  SUBCASE("identity-width residual matches the dense oracle") {
    Tape t;
    const Matrix got = t.value(
        L::adgat_layer_forward(t, t.constant(f.h), t.constant(anchor), f.params(t), f.g, f.seg,
                               {L::ResidualKind::Initial, 0.7}, ad::Act::Elu));
    const Matrix want = oracles::dense_gat_layer(f.h, f.w, f.a, f.g, ad::Act::LeakyRelu, 0.2,
                                                 ad::Act::Elu, &anchor, nullptr, 0.7);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("misaligned anchor goes through the residual transform") {
    const Matrix wide_anchor = oracles::random_matrix(9, 6, rng);
    const Matrix w_res = oracles::random_matrix(6, 4, rng);
    Tape t;
    L::AttentionParams p = f.params(t);
    p.residual_transform = t.param(w_res);
    const Matrix got = t.value(
        L::adgat_layer_forward(t, t.constant(f.h), t.constant(wide_anchor), p, f.g, f.seg,
                               {L::ResidualKind::Input, 0.3}, ad::Act::Elu));
    const Matrix want = oracles::dense_gat_layer(f.h, f.w, f.a, f.g, ad::Act::LeakyRelu, 0.2,
                                                 ad::Act::Elu, &wide_anchor, &w_res, 0.3);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);

    Tape t2;
    L::AttentionParams bare = f.params(t2);
    CHECK_THROWS_WITH_AS(
        L::adgat_layer_forward(t2, t2.constant(f.h), t2.constant(wide_anchor), bare, f.g, f.seg,
                               {L::ResidualKind::Input, 0.3}, ad::Act::Elu),
        doctest::Contains("anchor width"), ad::TapeError);
  }
}

TEST_CASE("decoupled propagation matches the dense oracle") {
  for (int steps : {1, 2, 4}) {
    LayerFixture f(8, 5, 3, 19 + static_cast<std::uint64_t>(steps));
    Tape t;
    const Matrix got = t.value(L::decoupled_propagate(t, t.constant(f.h), f.params(t), f.g,
                                                      f.seg, steps, ad::Act::Elu));
    const Matrix want = oracles::dense_decoupled(f.h, f.w, f.a, f.g, ad::Act::LeakyRelu, 0.2,
                                                 ad::Act::Elu, steps);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-10);
  }
  LayerFixture f(5, 3, 2, 23);
  Tape t;
  CHECK_THROWS_AS(
      L::decoupled_propagate(t, t.constant(f.h), f.params(t), f.g, f.seg, 0, ad::Act::Elu),
      ad::TapeError);
}

TEST_CASE("fa layer equals an explicit complete-graph gat layer") {
  LayerFixture f(6, 4, 3, 29);
  Tape t1;
  const Matrix fa = t1.value(
      L::fa_layer_forward(t1, t1.constant(f.h), f.params(t1), f.g.num_nodes, ad::Act::Elu));
  const AdjacencyCSR kn = make_fully_adjacent(f.g.num_nodes);
  const ad::EdgeSegments kn_seg = L::make_segments(kn);
  Tape t2;
  const Matrix explicit_kn = t2.value(
      L::gat_layer_forward(t2, t2.constant(f.h), f.params(t2), kn, kn_seg, ad::Act::Elu));
  CHECK(fa == explicit_kn);

  Tape t3;
  CHECK_THROWS_WITH_AS(
      L::fa_layer_forward(t3, t3.constant(f.h), f.params(t3), 6, ad::Act::Elu, false, 5),
      doctest::Contains("cap"), ad::TapeError);
}

TEST_CASE("gat layer is permutation equivariant") {
  LayerFixture f(11, 4, 3, 31);
  Tape t;
  const Matrix base = t.value(L::gat_layer_forward(t, t.constant(f.h), f.params(t), f.g, f.seg,
                                                   ad::Act::Elu));

  std::vector<Index> perm(11);
  std::iota(perm.begin(), perm.end(), Index{0});
  std::mt19937_64 rng(37);
  std::shuffle(perm.begin(), perm.end(), rng);  // perm[old] = new

  EdgeList relabeled;
  for (const auto& [u, v] : extract_edges(f.g))
    if (u != v)
      relabeled.emplace_back(perm[static_cast<std::size_t>(u)],
                             perm[static_cast<std::size_t>(v)]);
  const AdjacencyCSR pg = build_csr(relabeled, 11, true);
  const ad::EdgeSegments pseg = L::make_segments(pg);
  Matrix ph(11, 4);
  for (Index i = 0; i < 11; ++i) ph.row(perm[static_cast<std::size_t>(i)]) = f.h.row(i);

  Tape t2;
  L::AttentionParams p;
  p.heads.push_back({t2.param(f.w), t2.param(f.a)});
  const Matrix out = t2.value(L::gat_layer_forward(t2, t2.constant(ph), p, pg, pseg,
                                                   ad::Act::Elu));
  for (Index i = 0; i < 11; ++i)
    CHECK((out.row(perm[static_cast<std::size_t>(i)]) - base.row(i)).cwiseAbs().maxCoeff() <
          1e-9);
}

TEST_CASE("attention weights sum to one per node") {
  LayerFixture f(9, 4, 3, 41);
  Tape t;
  const Var h = t.constant(f.h);
  L::AttentionParams p = f.params(t);
  const Var scores = L::attention_scores(t, h, h, p.heads[0], f.g, f.seg,
                                         p.attention_activation, p.leaky_slope);
  const Matrix alpha = t.value(t.segment_softmax(scores, f.seg));
  for (Index i = 0; i < f.g.num_nodes; ++i) {
    double total = 0.0;
    for (Index k = f.g.row_offsets[static_cast<std::size_t>(i)];
         k < f.g.row_offsets[static_cast<std::size_t>(i) + 1]; ++k)
      total += alpha(k, 0);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("layer gradients pass the finite-difference check") {
  LayerFixture f(7, 4, 3, 43);
  std::mt19937_64 rng(47);
  const Matrix anchor = oracles::random_matrix(7, 3, rng);

  auto check = [&](const ad::ForwardFn& fn) { CHECK(ad::grad_check(fn, {f.w, f.a}) < 1e-4); };

  check([&](Tape& t, const std::vector<Var>& vars) {
    L::AttentionParams p;
    p.heads.push_back({vars[0], vars[1]});
    return t.sum(L::gat_layer_forward(t, t.constant(f.h), p, f.g, f.seg, ad::Act::Elu));
  });
  check([&](Tape& t, const std::vector<Var>& vars) {
    L::AttentionParams p;
    p.heads.push_back({vars[0], vars[1]});
    return t.sum(L::adgat_layer_forward(t, t.constant(f.h), t.constant(anchor), p, f.g, f.seg,
                                        {L::ResidualKind::Initial, 0.5}, ad::Act::Elu));
  });
  check([&](Tape& t, const std::vector<Var>& vars) {
    L::AttentionParams p;
    p.heads.push_back({vars[0], vars[1]});
    return t.sum(L::decoupled_propagate(t, t.constant(f.h), p, f.g, f.seg, 2, ad::Act::Elu));
  });
  check([&](Tape& t, const std::vector<Var>& vars) {
    L::AttentionParams p;
    p.heads.push_back({vars[0], vars[1]});
    return t.sum(
        L::fa_layer_forward(t, t.constant(f.h), p, f.g.num_nodes, ad::Act::Elu));
  });
}
