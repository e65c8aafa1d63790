#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lspgcn/graph.hpp"
#include "lspgcn/tensor.hpp"

namespace lspgcn {

/// Raised for bad run configuration (flag combinations, task mismatches).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class KernelKind { l2norm, poly, rbf, linear };

/// Similarity kernel used inside the local-structure softmax.
///   l2norm: ||zi - zj||^2         (note: weights farther neighbors higher)
///   poly:   (zi . zj + c)^d
///   rbf:    exp(-||zi - zj||^2 / (2 sigma^2))
///   linear: zi . zj
struct KernelChoice {
    KernelKind kind = KernelKind::rbf;
    int poly_d = 2;
    double poly_c = 0.0;
    double rbf_sigma = 1.0;

    void validate() const;
    std::string name() const;
    static KernelChoice parse(const std::string& name);  // "l2" | "poly" | "rbf" | "linear"
    static std::vector<KernelChoice> all_defaults();
};

/// Scalar kernel evaluation on two feature rows (float64 path, used by
/// inspection code and tests).
double kernel_eval(std::span<const float> zi, std::span<const float> zj, const KernelChoice& k);

/// Per-node neighbor distribution: probs[i][t] is the local-structure mass of
/// neighbor neighbors[i][t] around center i. Isolated nodes get empty vectors.
struct LocalStructureSet {
    std::vector<std::vector<int64_t>> neighbors;
    std::vector<std::vector<double>> probs;
    int64_t num_nodes() const { return static_cast<int64_t>(neighbors.size()); }
};

/// Softmax-normalized kernel similarities between each node and its
/// in-neighbors (self edges excluded). Neighbor order is the graph's sorted
/// sender order, or the union view's merged order.
LocalStructureSet local_structure(const Tensor& z, const Graph& g, const KernelChoice& k);
LocalStructureSet local_structure(const Tensor& z, const EdgeUnionView& u, const KernelChoice& k);

/// KL(student || teacher) of two aligned probability vectors; logs clamped at
/// 1e-10. Both inputs must sum to one within 1e-5.
double kl_per_node(std::span<const double> ls_student, std::span<const double> ls_teacher);

enum class LspMode { static_graph, union_graph };

/// Local-structure-preserving loss: the mean over nodes of
/// KL(LS_i^student || LS_i^teacher). Differentiable w.r.t. z_student only;
/// teacher features are treated as constants. In static mode the two graphs
/// must be structurally identical; union mode matches distributions over the
/// per-node union of both edge sets.
Tensor lsp_loss(const Tensor& z_student, const Graph& g_student, const Tensor& z_teacher,
                const Graph& g_teacher, const KernelChoice& k, LspMode mode);

/// task + lambda * lsp (lambda >= 0).
Tensor total_loss(const Tensor& task_loss, const Tensor& lsp, double lambda);

/// Internal building block, exposed for the layer/loss code: kernel
/// similarity for each (sender, receiver) pair, differentiable in z.
Tensor edge_similarity(const Tensor& z, const EdgeList& edges, const KernelChoice& k);

}  // namespace lspgcn
