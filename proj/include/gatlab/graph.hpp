#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gatlab {

using Matrix = Eigen::MatrixXd;
using Index = std::int64_t;
using EdgeList = std::vector<std::pair<Index, Index>>;

struct GraphError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Symmetric sparse topology in compressed row form. Within each row the
/// neighbor indices are sorted ascending and deduplicated.
struct AdjacencyCSR {
  Index num_nodes = 0;
  std::vector<Index> row_offsets;  // length num_nodes + 1
  std::vector<Index> col_indices;
  bool has_self_loops = false;

  Index num_entries() const { return static_cast<Index>(col_indices.size()); }

  std::span<const Index> neighbors(Index i) const {
    return {col_indices.data() + row_offsets[i],
            static_cast<std::size_t>(row_offsets[i + 1] - row_offsets[i])};
  }

  /// Undirected edge count, self-loops excluded.
  Index num_edges_undirected() const;

  bool operator==(const AdjacencyCSR&) const = default;
};

struct DegreeStats {
  double avg_degree_q = 0.0;  // 2|E| / |V|
  Index min_degree = 0;
  Index max_degree = 0;
  Index num_isolated = 0;
};

struct DatasetMeta {
  std::string name;
  Index num_nodes = 0;
  Index num_edges = 0;  // raw undirected count, pre-symmetrization
  Index feat_dim = 0;
  Index num_classes = 0;

  bool operator==(const DatasetMeta&) const = default;
};

struct Dataset {
  AdjacencyCSR graph;  // stored without self-loops
  Matrix features;     // N x d
  std::vector<int> labels;
  std::vector<std::uint8_t> train_mask, val_mask, test_mask;
  DatasetMeta meta;
};

AdjacencyCSR build_csr(const EdgeList& edges, Index num_nodes, bool add_self_loops);

AdjacencyCSR make_fully_adjacent(Index num_nodes);

/// Unique undirected edges (u < v), self-loops dropped.
EdgeList extract_edges(const AdjacencyCSR& g);

/// Same topology with a self-loop in every row.
AdjacencyCSR with_self_loops(const AdjacencyCSR& g);

DegreeStats degree_stats(const AdjacencyCSR& g);

Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const Dataset& d, const std::filesystem::path& dir);

struct SyntheticParams {
  Index num_nodes = 400;
  double avg_degree = 4.0;
  Index num_classes = 3;
  Index feat_dim = 16;
  double homophily = 0.9;
  double noise_sigma = 0.5;
  Index train_size = 60, val_size = 100, test_size = 200;
  std::uint64_t seed = 0;
  std::string name = "synthetic";
};

/// Stochastic-block-style generator: intra-class edges with probability
/// `homophily`, class-mean features on orthogonal axes plus Gaussian noise.
/// Deterministic given the seed.
Dataset generate_synthetic(const SyntheticParams& p);

bool dataset_equal(const Dataset& a, const Dataset& b);

}  // namespace gatlab
