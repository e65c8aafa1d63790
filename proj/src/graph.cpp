#include "lspgcn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lspgcn {

namespace {

Graph from_sender_lists(int64_t n, std::vector<std::vector<int64_t>>& lists) {
    Graph g;
    g.num_nodes = n;
    g.offsets.assign(static_cast<size_t>(n) + 1, 0);
    for (int64_t i = 0; i < n; ++i) {
        auto& l = lists[static_cast<size_t>(i)];
        std::sort(l.begin(), l.end());
        l.erase(std::unique(l.begin(), l.end()), l.end());
        g.offsets[static_cast<size_t>(i) + 1] = g.offsets[static_cast<size_t>(i)] + static_cast<int64_t>(l.size());
    }
    g.senders.reserve(static_cast<size_t>(g.offsets.back()));
    for (int64_t i = 0; i < n; ++i) {
        for (int64_t j : lists[static_cast<size_t>(i)]) {
            g.senders.push_back(j);
            if (j == i) g.has_self_loops = true;
        }
    }
    return g;
}

}  // namespace

Graph build_graph(int64_t num_nodes, const std::vector<std::pair<int64_t, int64_t>>& edges,
                  bool undirected) {
    std::vector<std::vector<int64_t>> lists(static_cast<size_t>(num_nodes));
    for (size_t e = 0; e < edges.size(); ++e) {
        const auto [s, r] = edges[e];
        if (s < 0 || s >= num_nodes || r < 0 || r >= num_nodes)
            throw std::invalid_argument("build_graph: edge " + std::to_string(e) + " = (" +
                                        std::to_string(s) + "," + std::to_string(r) +
                                        ") out of range for " + std::to_string(num_nodes) +
                                        " nodes");
        lists[static_cast<size_t>(r)].push_back(s);
        if (undirected && s != r) lists[static_cast<size_t>(s)].push_back(r);
    }
    return from_sender_lists(num_nodes, lists);
}

Graph knn_graph(const Tensor& points, int64_t k) {
    if (points.rank() != 2)
        throw std::invalid_argument("knn_graph: points must be rank-2, got " + shape_str(points.shape()));
    const int64_t n = points.rows(), f = points.cols();
    if (k < 1 || k >= n)
        throw std::invalid_argument("knn_graph: k = " + std::to_string(k) +
                                    " must satisfy 1 <= k < n = " + std::to_string(n));
    const auto pv = points.values();
    for (float v : pv)
        if (!std::isfinite(v)) throw NumericError("knn_graph: non-finite coordinate");

    std::vector<std::vector<int64_t>> lists(static_cast<size_t>(n));
    std::vector<std::pair<double, int64_t>> cand(static_cast<size_t>(n - 1));
    for (int64_t i = 0; i < n; ++i) {
        size_t c = 0;
        for (int64_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double d = 0.0;
            const float* a = pv.data() + i * f;
            const float* b = pv.data() + j * f;
            for (int64_t t = 0; t < f; ++t) {
                const double diff = static_cast<double>(a[t]) - b[t];
                d += diff * diff;
            }
            cand[c++] = {d, j};
        }
        std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
        auto& l = lists[static_cast<size_t>(i)];
        l.reserve(static_cast<size_t>(k));
        for (int64_t t = 0; t < k; ++t) l.push_back(cand[static_cast<size_t>(t)].second);
    }
    return from_sender_lists(n, lists);
}

Graph add_self_loops(const Graph& g) {
    std::vector<std::vector<int64_t>> lists(static_cast<size_t>(g.num_nodes));
    for (int64_t i = 0; i < g.num_nodes; ++i) {
        const auto s = g.senders_of(i);
        auto& l = lists[static_cast<size_t>(i)];
        l.assign(s.begin(), s.end());
        l.push_back(i);
    }
    Graph out = from_sender_lists(g.num_nodes, lists);
    out.has_self_loops = true;
    return out;
}

EdgeUnionView edge_union(const Graph& teacher, const Graph& student) {
    if (teacher.num_nodes != student.num_nodes)
        throw std::invalid_argument("edge_union: node counts differ: " +
                                    std::to_string(teacher.num_nodes) + " vs " +
                                    std::to_string(student.num_nodes));
    EdgeUnionView u;
    u.num_nodes = teacher.num_nodes;
    u.offsets.assign(static_cast<size_t>(u.num_nodes) + 1, 0);
    for (int64_t i = 0; i < u.num_nodes; ++i) {
        const auto ts = teacher.senders_of(i);
        const auto ss = student.senders_of(i);
        size_t a = 0, b = 0;
        while (a < ts.size() || b < ss.size()) {
            if (b == ss.size() || (a < ts.size() && ts[a] < ss[b])) {
                u.senders.push_back(ts[a++]);
                u.origins.push_back(EdgeOrigin::teacher_only);
            } else if (a == ts.size() || ss[b] < ts[a]) {
                u.senders.push_back(ss[b++]);
                u.origins.push_back(EdgeOrigin::student_only);
            } else {
                u.senders.push_back(ts[a]);
                u.origins.push_back(EdgeOrigin::both);
                ++a;
                ++b;
            }
        }
        u.offsets[static_cast<size_t>(i) + 1] = static_cast<int64_t>(u.senders.size());
    }
    return u;
}

EdgeList edge_list(const Graph& g) {
    EdgeList e;
    e.senders.reserve(static_cast<size_t>(g.num_edges()));
    e.receivers.reserve(static_cast<size_t>(g.num_edges()));
    for (int64_t i = 0; i < g.num_nodes; ++i)
        for (int64_t j : g.senders_of(i)) {
            e.senders.push_back(j);
            e.receivers.push_back(i);
        }
    return e;
}

namespace {

template <typename G>
EdgeList edge_list_no_self_impl(const G& g) {
    EdgeList e;
    for (int64_t i = 0; i < g.num_nodes; ++i)
        for (int64_t j : g.senders_of(i)) {
            if (j == i) continue;
            e.senders.push_back(j);
            e.receivers.push_back(i);
        }
    return e;
}

}  // namespace

EdgeList edge_list_no_self(const Graph& g) { return edge_list_no_self_impl(g); }

EdgeList edge_list_no_self(const EdgeUnionView& u) { return edge_list_no_self_impl(u); }

}  // namespace lspgcn
