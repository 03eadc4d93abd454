#include "gatlab/graph.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace gatlab {

namespace {

using nlohmann::json;

json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw DatasetError("missing file: " + p.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DatasetError("malformed json in " + p.string() + ": " + e.what());
  }
  return j;
}

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw DatasetError("missing file: " + p.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

}  // namespace

Index AdjacencyCSR::num_edges_undirected() const {
  Index loops = 0;
  for (Index i = 0; i < num_nodes; ++i)
    for (Index j : neighbors(i))
      if (j == i) ++loops;
  return (num_entries() - loops) / 2;
}

AdjacencyCSR build_csr(const EdgeList& edges, Index num_nodes, bool add_self_loops) {
  if (num_nodes < 0) throw GraphError("build_csr: negative node count");
  std::vector<std::set<Index>> adj(static_cast<std::size_t>(num_nodes));
  for (const auto& [u, v] : edges) {
    if (u < 0 || u >= num_nodes || v < 0 || v >= num_nodes)
      throw GraphError("build_csr: edge (" + std::to_string(u) + "," + std::to_string(v) +
                       ") out of range for " + std::to_string(num_nodes) + " nodes");
    adj[static_cast<std::size_t>(u)].insert(v);
    adj[static_cast<std::size_t>(v)].insert(u);
  }
  if (add_self_loops)
    for (Index i = 0; i < num_nodes; ++i) adj[static_cast<std::size_t>(i)].insert(i);

  AdjacencyCSR g;
  g.num_nodes = num_nodes;
  g.has_self_loops = add_self_loops;
  g.row_offsets.resize(static_cast<std::size_t>(num_nodes) + 1, 0);
  for (Index i = 0; i < num_nodes; ++i)
    g.row_offsets[static_cast<std::size_t>(i) + 1] =
        g.row_offsets[static_cast<std::size_t>(i)] +
        static_cast<Index>(adj[static_cast<std::size_t>(i)].size());
  g.col_indices.reserve(static_cast<std::size_t>(g.row_offsets.back()));
  for (Index i = 0; i < num_nodes; ++i)
    g.col_indices.insert(g.col_indices.end(), adj[static_cast<std::size_t>(i)].begin(),
                         adj[static_cast<std::size_t>(i)].end());
  return g;
}

AdjacencyCSR make_fully_adjacent(Index num_nodes) {
  if (num_nodes < 1) throw GraphError("make_fully_adjacent: need at least one node");
  AdjacencyCSR g;
  g.num_nodes = num_nodes;
  g.has_self_loops = true;
  g.row_offsets.resize(static_cast<std::size_t>(num_nodes) + 1);
  g.col_indices.resize(static_cast<std::size_t>(num_nodes * num_nodes));
  for (Index i = 0; i <= num_nodes; ++i)
    g.row_offsets[static_cast<std::size_t>(i)] = i * num_nodes;
  for (Index i = 0; i < num_nodes; ++i)
    for (Index j = 0; j < num_nodes; ++j)
      g.col_indices[static_cast<std::size_t>(i * num_nodes + j)] = j;
  return g;
}

EdgeList extract_edges(const AdjacencyCSR& g) {
  EdgeList edges;
  for (Index i = 0; i < g.num_nodes; ++i)
    for (Index j : g.neighbors(i))
      if (i < j) edges.emplace_back(i, j);
  return edges;
}

AdjacencyCSR with_self_loops(const AdjacencyCSR& g) {
  if (g.has_self_loops) return g;
  return build_csr(extract_edges(g), g.num_nodes, true);
}

DegreeStats degree_stats(const AdjacencyCSR& g) {
  DegreeStats s;
  if (g.num_nodes == 0) return s;
  s.min_degree = std::numeric_limits<Index>::max();
  Index total = 0;
  for (Index i = 0; i < g.num_nodes; ++i) {
    Index deg = 0;
    for (Index j : g.neighbors(i))
      if (j != i) ++deg;
    total += deg;
    s.min_degree = std::min(s.min_degree, deg);
    s.max_degree = std::max(s.max_degree, deg);
    if (deg == 0) ++s.num_isolated;
  }
  s.avg_degree_q = static_cast<double>(total) / static_cast<double>(g.num_nodes);
  return s;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const json meta = read_json(dir / "meta.json");
  Dataset d;
  d.meta.name = meta.at("name").get<std::string>();
  d.meta.num_nodes = meta.at("num_nodes").get<Index>();
  d.meta.num_edges = meta.at("num_edges").get<Index>();
  d.meta.feat_dim = meta.at("feat_dim").get<Index>();
  d.meta.num_classes = meta.at("num_classes").get<Index>();
  const Index n = d.meta.num_nodes;

  EdgeList edges;
  for (const std::string& line : read_lines(dir / "edges.csv")) {
    Index u = 0, v = 0;
    char comma = 0;
    std::istringstream ss(line);
    if (!(ss >> u >> comma >> v) || comma != ',')
      throw DatasetError("malformed edge line: " + line);
    edges.emplace_back(u, v);
  }
  if (static_cast<Index>(edges.size()) != d.meta.num_edges)
    throw DatasetError("count mismatch: meta.json num_edges=" + std::to_string(d.meta.num_edges) +
                       " but edges.csv has " + std::to_string(edges.size()));
  try {
    d.graph = build_csr(edges, n, false);
  } catch (const GraphError& e) {
    throw DatasetError(std::string("bad edge: ") + e.what());
  }

  const auto feat_lines = read_lines(dir / "features.csv");
  if (static_cast<Index>(feat_lines.size()) != n)
    throw DatasetError("count mismatch: features.csv has " + std::to_string(feat_lines.size()) +
                       " rows, expected " + std::to_string(n));
  d.features.resize(n, d.meta.feat_dim);
  for (Index i = 0; i < n; ++i) {
    std::istringstream ss(feat_lines[static_cast<std::size_t>(i)]);
    std::string cell;
    Index j = 0;
    while (std::getline(ss, cell, ',')) {
      if (j >= d.meta.feat_dim)
        throw DatasetError("count mismatch: features.csv row " + std::to_string(i) +
                           " has too many columns");
      d.features(i, j++) = std::stod(cell);
    }
    if (j != d.meta.feat_dim)
      throw DatasetError("count mismatch: features.csv row " + std::to_string(i) + " has " +
                         std::to_string(j) + " columns, expected " +
                         std::to_string(d.meta.feat_dim));
  }

  const auto label_lines = read_lines(dir / "labels.csv");
  if (static_cast<Index>(label_lines.size()) != n)
    throw DatasetError("count mismatch: labels.csv has " + std::to_string(label_lines.size()) +
                       " rows, expected " + std::to_string(n));
  d.labels.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const int y = std::stoi(label_lines[static_cast<std::size_t>(i)]);
    if (y < 0 || y >= d.meta.num_classes)
      throw DatasetError("label out of range at node " + std::to_string(i) + ": " +
                         std::to_string(y));
    d.labels[static_cast<std::size_t>(i)] = y;
  }

  const json splits = read_json(dir / "splits.json");
  d.train_mask.assign(static_cast<std::size_t>(n), 0);
  d.val_mask.assign(static_cast<std::size_t>(n), 0);
  d.test_mask.assign(static_cast<std::size_t>(n), 0);
  auto fill = [&](const char* key, std::vector<std::uint8_t>& mask) {
    for (Index idx : splits.at(key).get<std::vector<Index>>()) {
      if (idx < 0 || idx >= n)
        throw DatasetError("split index out of range: " + std::to_string(idx));
      mask[static_cast<std::size_t>(idx)] = 1;
    }
  };
  fill("train", d.train_mask);
  fill("val", d.val_mask);
  fill("test", d.test_mask);
  for (Index i = 0; i < n; ++i) {
    const int cnt = d.train_mask[static_cast<std::size_t>(i)] +
                    d.val_mask[static_cast<std::size_t>(i)] +
                    d.test_mask[static_cast<std::size_t>(i)];
    if (cnt > 1) throw DatasetError("split overlap at node " + std::to_string(i));
  }
  return d;
}

void save_dataset(const Dataset& d, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    json meta = {{"name", d.meta.name},
                 {"num_nodes", d.meta.num_nodes},
                 {"num_edges", d.meta.num_edges},
                 {"feat_dim", d.meta.feat_dim},
                 {"num_classes", d.meta.num_classes}};
    std::ofstream(dir / "meta.json") << meta.dump(2) << "\n";
  }
  {
    std::ofstream out(dir / "edges.csv");
    for (const auto& [u, v] : extract_edges(d.graph)) out << u << "," << v << "\n";
  }
  {
    std::ofstream out(dir / "features.csv");
    char buf[32];
    for (Index i = 0; i < d.features.rows(); ++i) {
      for (Index j = 0; j < d.features.cols(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", d.features(i, j));
        out << (j ? "," : "") << buf;
      }
      out << "\n";
    }
  }
  {
    std::ofstream out(dir / "labels.csv");
    for (int y : d.labels) out << y << "\n";
  }
  {
    json splits = {{"train", json::array()}, {"val", json::array()}, {"test", json::array()}};
    for (Index i = 0; i < d.meta.num_nodes; ++i) {
      if (d.train_mask[static_cast<std::size_t>(i)]) splits["train"].push_back(i);
      if (d.val_mask[static_cast<std::size_t>(i)]) splits["val"].push_back(i);
      if (d.test_mask[static_cast<std::size_t>(i)]) splits["test"].push_back(i);
    }
    std::ofstream(dir / "splits.json") << splits.dump() << "\n";
  }
}

Dataset generate_synthetic(const SyntheticParams& p) {
  if (p.num_nodes < p.num_classes)
    throw GraphError("generate_synthetic: need at least one node per class");
  if (p.feat_dim < p.num_classes)
    throw GraphError("generate_synthetic: feat_dim must be >= num_classes for orthogonal means");
  if (p.homophily < 0.0 || p.homophily > 1.0)
    throw GraphError("generate_synthetic: homophily must be in [0,1]");
  if (p.train_size + p.val_size + p.test_size > p.num_nodes)
    throw GraphError("generate_synthetic: split sizes exceed node count");
  const Index n = p.num_nodes;
  const Index target_edges = static_cast<Index>(std::llround(p.avg_degree * n / 2.0));
  if (target_edges > n * (n - 1) / 2)
    throw GraphError("generate_synthetic: avg_degree infeasible for node count");

  std::mt19937_64 rng(p.seed);

  // Round-robin class assignment over a shuffled node order keeps class sizes
  // balanced while decorrelating class from node index.
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> labels(static_cast<std::size_t>(n));
  std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(p.num_classes));
  for (Index r = 0; r < n; ++r) {
    const int c = static_cast<int>(r % p.num_classes);
    labels[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = c;
    by_class[static_cast<std::size_t>(c)].push_back(order[static_cast<std::size_t>(r)]);
  }

  std::set<std::pair<Index, Index>> edge_set;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<Index> any_node(0, n - 1);
  const Index max_attempts = target_edges * 200 + 1000;
  Index attempts = 0;
  while (static_cast<Index>(edge_set.size()) < target_edges && attempts++ < max_attempts) {
    Index u, v;
    if (unit(rng) < p.homophily) {
      u = any_node(rng);
      const auto& cls = by_class[static_cast<std::size_t>(labels[static_cast<std::size_t>(u)])];
      v = cls[std::uniform_int_distribution<std::size_t>(0, cls.size() - 1)(rng)];
    } else {
      u = any_node(rng);
      v = any_node(rng);
      if (labels[static_cast<std::size_t>(u)] == labels[static_cast<std::size_t>(v)]) continue;
    }
    if (u == v) continue;
    edge_set.insert({std::min(u, v), std::max(u, v)});
  }
  if (static_cast<Index>(edge_set.size()) < target_edges)
    throw GraphError("generate_synthetic: could not reach target edge count");

  Dataset d;
  EdgeList edges(edge_set.begin(), edge_set.end());
  d.graph = build_csr(edges, n, false);
  d.labels = std::move(labels);

  d.features.resize(n, p.feat_dim);
  std::normal_distribution<double> noise(0.0, p.noise_sigma);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p.feat_dim; ++j) {
      const double mean = (j == d.labels[static_cast<std::size_t>(i)]) ? 1.0 : 0.0;
      d.features(i, j) = mean + (p.noise_sigma > 0.0 ? noise(rng) : 0.0);
    }
  }

  std::vector<Index> split_order(static_cast<std::size_t>(n));
  std::iota(split_order.begin(), split_order.end(), Index{0});
  std::shuffle(split_order.begin(), split_order.end(), rng);
  d.train_mask.assign(static_cast<std::size_t>(n), 0);
  d.val_mask.assign(static_cast<std::size_t>(n), 0);
  d.test_mask.assign(static_cast<std::size_t>(n), 0);
  Index pos = 0;
  for (Index k = 0; k < p.train_size; ++k)
    d.train_mask[static_cast<std::size_t>(split_order[static_cast<std::size_t>(pos++)])] = 1;
  for (Index k = 0; k < p.val_size; ++k)
    d.val_mask[static_cast<std::size_t>(split_order[static_cast<std::size_t>(pos++)])] = 1;
  for (Index k = 0; k < p.test_size; ++k)
    d.test_mask[static_cast<std::size_t>(split_order[static_cast<std::size_t>(pos++)])] = 1;

  d.meta = {p.name, n, static_cast<Index>(edges.size()), p.feat_dim, p.num_classes};
  return d;
}

bool dataset_equal(const Dataset& a, const Dataset& b) {
  return a.meta == b.meta && a.graph == b.graph && a.labels == b.labels &&
         a.train_mask == b.train_mask && a.val_mask == b.val_mask && a.test_mask == b.test_mask &&
         a.features.rows() == b.features.rows() && a.features.cols() == b.features.cols() &&
         a.features == b.features;
}

}  // namespace gatlab
