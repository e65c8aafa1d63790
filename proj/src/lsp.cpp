#include "lspgcn/lsp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lspgcn {

void KernelChoice::validate() const {
    if (kind == KernelKind::poly && poly_d < 1)
        throw ConfigError("kernel: poly exponent must be >= 1");
    if (kind == KernelKind::rbf && !(rbf_sigma > 0.0))
        throw ConfigError("kernel: rbf sigma must be > 0");
}

std::string KernelChoice::name() const {
    switch (kind) {
        case KernelKind::l2norm: return "l2";
        case KernelKind::poly: return "poly";
        case KernelKind::rbf: return "rbf";
        case KernelKind::linear: return "linear";
    }
    return "?";
}

KernelChoice KernelChoice::parse(const std::string& name) {
    KernelChoice k;
    if (name == "l2") k.kind = KernelKind::l2norm;
    else if (name == "poly") k.kind = KernelKind::poly;
    else if (name == "rbf") k.kind = KernelKind::rbf;
    else if (name == "linear") k.kind = KernelKind::linear;
    else throw ConfigError("kernel: unknown kernel '" + name + "' (expected l2|poly|rbf|linear)");
    return k;
}

std::vector<KernelChoice> KernelChoice::all_defaults() {
    std::vector<KernelChoice> out;
    for (KernelKind kk : {KernelKind::l2norm, KernelKind::poly, KernelKind::rbf, KernelKind::linear}) {
        KernelChoice k;
        k.kind = kk;
        out.push_back(k);
    }
    return out;
}

double kernel_eval(std::span<const float> zi, std::span<const float> zj, const KernelChoice& k) {
    if (zi.size() != zj.size())
        throw std::invalid_argument("kernel_eval: width mismatch " + std::to_string(zi.size()) +
                                    " vs " + std::to_string(zj.size()));
    k.validate();
    switch (k.kind) {
        case KernelKind::l2norm: {
            double d = 0.0;
            for (size_t t = 0; t < zi.size(); ++t) {
                const double diff = static_cast<double>(zi[t]) - zj[t];
                d += diff * diff;
            }
            return d;
        }
        case KernelKind::linear: {
            double d = 0.0;
            for (size_t t = 0; t < zi.size(); ++t) d += static_cast<double>(zi[t]) * zj[t];
            return d;
        }
        case KernelKind::poly: {
            double d = 0.0;
            for (size_t t = 0; t < zi.size(); ++t) d += static_cast<double>(zi[t]) * zj[t];
            double p = 1.0;
            for (int r = 0; r < k.poly_d; ++r) p *= (d + k.poly_c);
            return p;
        }
        case KernelKind::rbf: {
            double d = 0.0;
            for (size_t t = 0; t < zi.size(); ++t) {
                const double diff = static_cast<double>(zi[t]) - zj[t];
                d += diff * diff;
            }
            return std::exp(-d / (2.0 * k.rbf_sigma * k.rbf_sigma));
        }
    }
    return 0.0;
}

Tensor edge_similarity(const Tensor& z, const EdgeList& edges, const KernelChoice& k) {
    k.validate();
    Tensor zi = gather_rows(z, edges.receivers);
    Tensor zj = gather_rows(z, edges.senders);
    switch (k.kind) {
        case KernelKind::l2norm: {
            Tensor d = sub(zi, zj);
            return row_sum(mul(d, d));
        }
        case KernelKind::linear:
            return row_sum(mul(zi, zj));
        case KernelKind::poly: {
            Tensor dot = row_sum(mul(zi, zj));
            return pow_int(add_scalar(dot, k.poly_c), k.poly_d);
        }
        case KernelKind::rbf: {
            Tensor d = sub(zi, zj);
            Tensor dist2 = row_sum(mul(d, d));
            return exp(scale(dist2, -1.0 / (2.0 * k.rbf_sigma * k.rbf_sigma)));
        }
    }
    throw std::logic_error("edge_similarity: unreachable");
}

namespace {

template <typename G>
LocalStructureSet local_structure_impl(const Tensor& z, const G& g, const KernelChoice& k) {
    if (z.rank() != 2 || z.rows() != g.num_nodes)
        throw std::invalid_argument("local_structure: features " + shape_str(z.shape()) +
                                    " do not cover " + std::to_string(g.num_nodes) + " nodes");
    NoGradGuard ng;
    const EdgeList edges = edge_list_no_self(g);
    LocalStructureSet ls;
    ls.neighbors.resize(static_cast<size_t>(g.num_nodes));
    ls.probs.resize(static_cast<size_t>(g.num_nodes));
    if (edges.size() == 0) return ls;
    Tensor probs = segment_softmax(edge_similarity(z, edges, k), edges.receivers, g.num_nodes);
    const auto pv = probs.values();
    for (int64_t e = 0; e < edges.size(); ++e) {
        const size_t i = static_cast<size_t>(edges.receivers[static_cast<size_t>(e)]);
        ls.neighbors[i].push_back(edges.senders[static_cast<size_t>(e)]);
        ls.probs[i].push_back(static_cast<double>(pv[static_cast<size_t>(e)]));
    }
    return ls;
}

}  // namespace

LocalStructureSet local_structure(const Tensor& z, const Graph& g, const KernelChoice& k) {
    return local_structure_impl(z, g, k);
}

LocalStructureSet local_structure(const Tensor& z, const EdgeUnionView& u, const KernelChoice& k) {
    return local_structure_impl(z, u, k);
}

double kl_per_node(std::span<const double> ls_student, std::span<const double> ls_teacher) {
    if (ls_student.size() != ls_teacher.size())
        throw std::invalid_argument("kl_per_node: distribution lengths differ (" +
                                    std::to_string(ls_student.size()) + " vs " +
                                    std::to_string(ls_teacher.size()) +
                                    "); teacher/student neighbor lists are misaligned");
    constexpr double kEps = 1e-10;
    double s_sum = 0.0, t_sum = 0.0;
    for (size_t t = 0; t < ls_student.size(); ++t) {
        s_sum += ls_student[t];
        t_sum += ls_teacher[t];
    }
    if (!ls_student.empty() && (std::fabs(s_sum - 1.0) > 1e-5 || std::fabs(t_sum - 1.0) > 1e-5))
        throw std::invalid_argument("kl_per_node: inputs must be normalized distributions");
    double kl = 0.0;
    for (size_t t = 0; t < ls_student.size(); ++t) {
        const double p = ls_student[t];
        if (p <= 0.0) continue;  // 0 * log(0/q) = 0
        kl += p * (std::log(std::max(p, kEps)) - std::log(std::max(ls_teacher[t], kEps)));
    }
    return kl;
}

namespace {

// Shared loss body once the (aligned) edge list is fixed.
Tensor lsp_loss_on_edges(const Tensor& z_student, const Tensor& z_teacher, const EdgeList& edges,
                         int64_t num_nodes, const KernelChoice& k) {
    if (edges.size() == 0) return Tensor::scalar(0.0f);
    // Teacher side under stop-gradient: log LS^t becomes a constant vector.
    Tensor log_t;
    {
        NoGradGuard ng;
        Tensor t_probs =
            segment_softmax(edge_similarity(z_teacher.detach(), edges, k), edges.receivers, num_nodes);
        log_t = log(t_probs);
    }
    Tensor s_probs = segment_softmax(edge_similarity(z_student, edges, k), edges.receivers, num_nodes);
    // Count nodes that actually carry a distribution.
    std::vector<char> seen(static_cast<size_t>(num_nodes), 0);
    for (int64_t r : edges.receivers) seen[static_cast<size_t>(r)] = 1;
    int64_t n_active = 0;
    for (char c : seen) n_active += c;
    Tensor kl_terms = mul(s_probs, sub(log(s_probs), log_t));
    return scale(sum(kl_terms), 1.0 / static_cast<double>(n_active));
}

}  // namespace

Tensor lsp_loss(const Tensor& z_student, const Graph& g_student, const Tensor& z_teacher,
                const Graph& g_teacher, const KernelChoice& k, LspMode mode) {
    if (g_student.num_nodes != g_teacher.num_nodes)
        throw std::invalid_argument("lsp_loss: node counts differ");
    if (z_student.rows() != g_student.num_nodes || z_teacher.rows() != g_teacher.num_nodes)
        throw std::invalid_argument("lsp_loss: feature row counts do not match the graphs");
    if (mode == LspMode::static_graph) {
        if (!g_student.same_structure(g_teacher))
            throw ConfigError(
                "lsp_loss: static mode requires structurally identical graphs; "
                "use union mode for dynamic-graph models");
        return lsp_loss_on_edges(z_student, z_teacher, edge_list_no_self(g_student),
                                 g_student.num_nodes, k);
    }
    const EdgeUnionView u = edge_union(g_teacher, g_student);
    return lsp_loss_on_edges(z_student, z_teacher, edge_list_no_self(u), u.num_nodes, k);
}

Tensor total_loss(const Tensor& task_loss, const Tensor& lsp, double lambda) {
    if (lambda < 0.0) throw ConfigError("total_loss: lambda must be >= 0");
    if (lambda == 0.0) return task_loss;
    return add(task_loss, scale(lsp, lambda));
}

}  // namespace lspgcn
