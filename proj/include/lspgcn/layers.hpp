#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "lspgcn/graph.hpp"
#include "lspgcn/lsp.hpp"
#include "lspgcn/rng.hpp"
#include "lspgcn/tensor.hpp"

namespace lspgcn {

struct NamedParam {
    std::string name;
    Tensor tensor;
};

/// Architecture description for GAT / DGCNN style models.
///
/// gat:   widths[l] is the per-head output width of conv l, heads[l] its head
///        count; hidden convs concatenate heads, the final conv averages them
///        and its width must equal num_classes. Every conv carries a residual
///        connection (identity when the widths line up, otherwise a linear
///        projection).
/// dgcnn: widths are the edge-conv output widths; each layer rebuilds a kNN
///        graph (k = knn_k) from its input features. When emb_width > 0 a
///        pointwise layer maps the concatenated edge-conv outputs to
///        emb_width before pooling. Readout concatenates max and mean pooling
///        and runs the classifier MLP (mlp_widths, then num_classes).
struct ModelSpec {
    std::string kind;  // "gat" | "dgcnn"
    int64_t in_dim = 0;
    int64_t num_classes = 0;
    std::vector<int64_t> widths;
    std::vector<int64_t> heads;      // gat
    bool residual = true;            // gat
    int64_t emb_width = 0;           // dgcnn
    std::vector<int64_t> mlp_widths; // dgcnn
    int64_t knn_k = 0;               // dgcnn
    double dropout = 0.0;
    double leaky_slope = 0.2;

    bool is_gat() const { return kind == "gat"; }
    void validate() const;
    std::string to_json() const;
    static ModelSpec from_json(const std::string& text);
    static ModelSpec preset(const std::string& name);
    static std::vector<std::string> preset_names();
};

/// One multi-head graph-attention convolution. Attention per head h on edge
/// (j -> i): LeakyReLU(a_dst . W_h x_i + a_src . W_h x_j), softmax-normalized
/// over each receiver's in-segment; aggregation is the attention-weighted sum
/// of W_h x_j over senders j.
struct GatConv {
    int64_t in = 0, out = 0, num_heads = 0;
    bool concat = true;        // false: average heads (output layer)
    bool identity_res = false; // residual without projection (in == heads*out)
    std::vector<Tensor> weight;    // per head {in, out}
    std::vector<Tensor> attn_src;  // per head {out, 1}
    std::vector<Tensor> attn_dst;  // per head {out, 1}
    std::vector<Tensor> bias;      // per head {out}
    std::vector<Tensor> res_w;     // per head {in, out}; empty when identity_res
};

GatConv make_gat_conv(int64_t in, int64_t out, int64_t heads, bool concat, bool residual, Rng& rng);

struct GatLayerOut {
    Tensor features;   // {n, heads*out} or {n, out} (average)
    Tensor attention;  // {E, heads}, per-receiver columns sum to 1
};

/// g must contain a self loop on every node.
GatLayerOut gat_forward(const GatConv& layer, const Tensor& x, const Graph& g, double slope = 0.2);

/// EdgeConv: out_i = max_{j in senders(i)} LeakyReLU(W [x_i || x_j - x_i] + b).
struct EdgeConvLayer {
    int64_t in = 0, out = 0;
    Tensor weight;  // {2*in, out}
    Tensor bias;    // {out}
};

EdgeConvLayer make_edge_conv(int64_t in, int64_t out, Rng& rng);

/// Every node must have at least one sender (kNN graphs guarantee this).
Tensor edgeconv_forward(const EdgeConvLayer& layer, const Tensor& x, const Graph& g,
                        double slope = 0.2);

/// Coordinate-wise max over all rows; permutation-invariant set readout.
Tensor global_pool(const Tensor& features);

/// Per graph-convolution layer: the features it produced and the graph it saw
/// (without self loops), as consumed by the distillers.
struct LayerTrace {
    Tensor features;
    Graph graph;
};

struct ForwardResult {
    Tensor logits;
    std::vector<LayerTrace> layers;
};

class Model {
public:
    Model(ModelSpec spec, uint64_t init_seed);

    const ModelSpec& spec() const { return spec_; }

    /// GAT forward over a static graph (self loops added internally).
    ForwardResult forward_graph(const Tensor& x, const Graph& g, Rng* dropout_rng = nullptr) const;
    /// DGCNN forward over one point cloud {n, in_dim}; the kNN graph is
    /// rebuilt from each layer's input features.
    ForwardResult forward_cloud(const Tensor& points, Rng* dropout_rng = nullptr) const;

    std::vector<NamedParam>& params() { return params_; }
    const std::vector<NamedParam>& params() const { return params_; }
    int64_t param_count() const;
    void freeze();
    bool frozen() const { return frozen_; }
    /// Replace parameter values by name; shapes must agree exactly.
    void load_values(const std::unordered_map<std::string, Tensor>& named);

private:
    ModelSpec spec_;
    std::vector<GatConv> gat_convs_;
    std::vector<EdgeConvLayer> edge_convs_;
    Tensor emb_w_, emb_b_;
    std::vector<Tensor> mlp_w_, mlp_b_;
    Tensor cls_w_, cls_b_;
    std::vector<NamedParam> params_;
    bool frozen_ = false;
};

int64_t param_count(const ModelSpec& spec);

}  // namespace lspgcn
