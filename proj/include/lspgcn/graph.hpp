#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "lspgcn/tensor.hpp"

namespace lspgcn {

/// Directed graph in CSR form keyed by receiver: senders_of(i) is the sorted,
/// deduplicated list of j with edge (j, i). Immutable after construction.
struct Graph {
    int64_t num_nodes = 0;
    std::vector<int64_t> offsets;  // size num_nodes + 1
    std::vector<int64_t> senders;  // grouped by receiver, ascending within a group
    bool has_self_loops = false;

    int64_t num_edges() const { return static_cast<int64_t>(senders.size()); }
    int64_t in_degree(int64_t i) const { return offsets[i + 1] - offsets[i]; }
    std::span<const int64_t> senders_of(int64_t i) const {
        return {senders.data() + offsets[i], static_cast<size_t>(in_degree(i))};
    }
    bool same_structure(const Graph& o) const {
        return num_nodes == o.num_nodes && offsets == o.offsets && senders == o.senders;
    }
};

Graph build_graph(int64_t num_nodes, const std::vector<std::pair<int64_t, int64_t>>& edges,
                  bool undirected);

/// Directed kNN graph: senders_of(i) holds the k nodes closest to i in
/// Euclidean distance, excluding i itself; ties resolved toward the smaller
/// node index. Requires k < num points.
Graph knn_graph(const Tensor& points, int64_t k);

/// Returns a copy in which every node's sender list contains the node itself.
/// Idempotent.
Graph add_self_loops(const Graph& g);

enum class EdgeOrigin : uint8_t { teacher_only, student_only, both };

/// Per-node union of two graphs' sender lists, with edge provenance. The
/// merged lists keep the CSR ordering so teacher and student distributions
/// computed over the view align index by index.
struct EdgeUnionView {
    int64_t num_nodes = 0;
    std::vector<int64_t> offsets;
    std::vector<int64_t> senders;
    std::vector<EdgeOrigin> origins;  // parallel to senders

    int64_t num_edges() const { return static_cast<int64_t>(senders.size()); }
    int64_t in_degree(int64_t i) const { return offsets[i + 1] - offsets[i]; }
    std::span<const int64_t> senders_of(int64_t i) const {
        return {senders.data() + offsets[i], static_cast<size_t>(in_degree(i))};
    }
    std::span<const EdgeOrigin> origins_of(int64_t i) const {
        return {origins.data() + offsets[i], static_cast<size_t>(in_degree(i))};
    }
};

EdgeUnionView edge_union(const Graph& teacher, const Graph& student);

/// Flat (sender, receiver) arrays in CSR order, shared by the message-passing
/// layers and the loss code.
struct EdgeList {
    std::vector<int64_t> senders;
    std::vector<int64_t> receivers;
    int64_t size() const { return static_cast<int64_t>(senders.size()); }
};

EdgeList edge_list(const Graph& g);
/// Same, but with self edges (j == i) dropped.
EdgeList edge_list_no_self(const Graph& g);
EdgeList edge_list_no_self(const EdgeUnionView& u);

}  // namespace lspgcn
