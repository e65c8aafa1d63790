#include "lspgcn/layers.hpp"

#include <algorithm>
#include <stdexcept>

#include "json.hpp"

namespace lspgcn {

using nlohmann::json;

// --- ModelSpec ----------------------------------------------------------------

void ModelSpec::validate() const {
    if (kind != "gat" && kind != "dgcnn")
        throw ConfigError("model spec: kind must be 'gat' or 'dgcnn', got '" + kind + "'");
    if (in_dim < 1) throw ConfigError("model spec: in_dim must be positive");
    if (num_classes < 1) throw ConfigError("model spec: num_classes must be positive");
    if (widths.empty()) throw ConfigError("model spec: widths must be non-empty");
    for (int64_t w : widths)
        if (w < 1) throw ConfigError("model spec: widths must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("model spec: dropout must be in [0,1)");
    if (is_gat()) {
        if (heads.size() != widths.size())
            throw ConfigError("model spec: gat needs one head count per conv layer");
        for (int64_t h : heads)
            if (h < 1) throw ConfigError("model spec: head counts must be positive");
        if (widths.back() != num_classes)
            throw ConfigError("model spec: gat final width must equal num_classes");
    } else {
        if (knn_k < 1) throw ConfigError("model spec: dgcnn needs knn_k >= 1");
        if (emb_width < 0) throw ConfigError("model spec: emb_width must be >= 0");
        for (int64_t w : mlp_widths)
            if (w < 1) throw ConfigError("model spec: mlp widths must be positive");
    }
}

std::string ModelSpec::to_json() const {
    json j;
    j["kind"] = kind;
    j["in_dim"] = in_dim;
    j["num_classes"] = num_classes;
    j["widths"] = widths;
    j["heads"] = heads;
    j["residual"] = residual;
    j["emb_width"] = emb_width;
    j["mlp_widths"] = mlp_widths;
    j["knn_k"] = knn_k;
    j["dropout"] = dropout;
    j["leaky_slope"] = leaky_slope;
    return j.dump();
}

ModelSpec ModelSpec::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model spec: bad JSON: ") + e.what());
    }
    ModelSpec s;
    try {
        s.kind = j.at("kind").get<std::string>();
        s.in_dim = j.at("in_dim").get<int64_t>();
        s.num_classes = j.at("num_classes").get<int64_t>();
        s.widths = j.at("widths").get<std::vector<int64_t>>();
        s.heads = j.value("heads", std::vector<int64_t>{});
        s.residual = j.value("residual", true);
        s.emb_width = j.value("emb_width", int64_t{0});
        s.mlp_widths = j.value("mlp_widths", std::vector<int64_t>{});
        s.knn_k = j.value("knn_k", int64_t{0});
        s.dropout = j.value("dropout", 0.0);
        s.leaky_slope = j.value("leaky_slope", 0.2);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model spec: missing or mistyped field: ") + e.what());
    }
    s.validate();
    return s;
}

ModelSpec ModelSpec::preset(const std::string& name) {
    ModelSpec s;
    if (name == "table1-teacher") {
        s.kind = "gat";
        s.in_dim = 50;
        s.num_classes = 121;
        s.widths = {256, 256, 256, 121};
        s.heads = {4, 4, 4, 6};
    } else if (name == "table1-student") {
        s.kind = "gat";
        s.in_dim = 50;
        s.num_classes = 121;
        s.widths = {68, 68, 68, 68, 68, 121};
        s.heads = {2, 2, 2, 2, 2, 2};
    } else if (name == "table3-teacher") {
        s.kind = "dgcnn";
        s.in_dim = 3;
        s.num_classes = 40;
        s.widths = {64, 64, 128, 256};
        s.emb_width = 1024;
        s.mlp_widths = {512, 256};
        s.knn_k = 20;
    } else if (name == "table3-student") {
        s.kind = "dgcnn";
        s.in_dim = 3;
        s.num_classes = 40;
        s.widths = {32, 32, 64, 128};
        s.emb_width = 0;
        s.mlp_widths = {256};
        s.knn_k = 10;
    } else if (name == "desk-gat-teacher") {
        s.kind = "gat";
        s.in_dim = 16;
        s.num_classes = 8;
        s.widths = {32, 32, 8};
        s.heads = {4, 4, 4};
    } else if (name == "desk-gat-student") {
        s.kind = "gat";
        s.in_dim = 16;
        s.num_classes = 8;
        s.widths = {16, 16, 16, 8};
        s.heads = {2, 2, 2, 2};
    } else if (name == "desk-dgcnn-teacher") {
        // Table 3 proportions scaled by 1/8, K kept at 20.
        s.kind = "dgcnn";
        s.in_dim = 3;
        s.num_classes = 4;
        s.widths = {8, 8, 16, 32};
        s.emb_width = 128;
        s.mlp_widths = {64, 32};
        s.knn_k = 20;
    } else if (name == "desk-dgcnn-student") {
        s.kind = "dgcnn";
        s.in_dim = 3;
        s.num_classes = 4;
        s.widths = {4, 4, 8, 16};
        s.emb_width = 0;
        s.mlp_widths = {32};
        s.knn_k = 10;
    } else {
        throw ConfigError("model spec: unknown preset '" + name + "'");
    }
    s.validate();
    return s;
}

std::vector<std::string> ModelSpec::preset_names() {
    return {"table1-teacher", "table1-student", "table3-teacher",     "table3-student",
            "desk-gat-teacher", "desk-gat-student", "desk-dgcnn-teacher", "desk-dgcnn-student"};
}

// --- GAT conv ----------------------------------------------------------------

GatConv make_gat_conv(int64_t in, int64_t out, int64_t heads, bool concat, bool residual,
                      Rng& rng) {
    GatConv c;
    c.in = in;
    c.out = out;
    c.num_heads = heads;
    c.concat = concat;
    c.identity_res = residual && (in == heads * out);
    for (int64_t h = 0; h < heads; ++h) {
        c.weight.push_back(Tensor::glorot(in, out, rng));
        c.attn_src.push_back(Tensor::glorot(out, 1, rng));
        c.attn_dst.push_back(Tensor::glorot(out, 1, rng));
        c.bias.push_back(Tensor::zeros({out}, /*requires_grad=*/true));
        if (residual && !c.identity_res) c.res_w.push_back(Tensor::glorot(in, out, rng));
    }
    return c;
}

GatLayerOut gat_forward(const GatConv& layer, const Tensor& x, const Graph& g, double slope) {
    if (x.rank() != 2 || x.cols() != layer.in)
        throw std::invalid_argument("gat_forward: input width " + shape_str(x.shape()) +
                                    " does not match layer in=" + std::to_string(layer.in));
    if (x.rows() != g.num_nodes)
        throw std::invalid_argument("gat_forward: feature rows do not match node count");
    if (!g.has_self_loops)
        throw std::invalid_argument("gat_forward: graph must carry self loops (see add_self_loops)");
    for (int64_t i = 0; i < g.num_nodes; ++i) {
        const auto s = g.senders_of(i);
        if (!std::binary_search(s.begin(), s.end(), i))
            throw std::invalid_argument("gat_forward: node " + std::to_string(i) +
                                        " is missing its self loop");
    }

    const EdgeList edges = edge_list(g);
    std::vector<Tensor> head_feats;
    std::vector<Tensor> head_attn;
    const bool use_res = layer.identity_res || !layer.res_w.empty();
    for (int64_t h = 0; h < layer.num_heads; ++h) {
        const size_t hh = static_cast<size_t>(h);
        Tensor wx = matmul(x, layer.weight[hh]);                       // {n, out}
        Tensor s_src = matmul(wx, layer.attn_src[hh]);                 // {n, 1}
        Tensor s_dst = matmul(wx, layer.attn_dst[hh]);                 // {n, 1}
        Tensor e = add(gather_rows(s_dst, edges.receivers), gather_rows(s_src, edges.senders));
        Tensor att = segment_softmax(flatten(leaky_relu(e, slope)), edges.receivers, g.num_nodes);
        Tensor msg = scale_rows(gather_rows(wx, edges.senders), att);
        Tensor agg = scatter_add_rows(msg, edges.receivers, g.num_nodes);
        if (use_res) {
            Tensor res = layer.identity_res
                             ? slice_cols(x, h * layer.out, (h + 1) * layer.out)
                             : matmul(x, layer.res_w[hh]);
            agg = add(agg, res);
        }
        agg = add_rowvec(agg, layer.bias[hh]);
        head_feats.push_back(agg);
        head_attn.push_back(reshape(att, {att.numel(), 1}));
    }
    GatLayerOut out;
    if (layer.num_heads == 1) {
        out.features = head_feats[0];
    } else if (layer.concat) {
        out.features = concat_cols(head_feats);
    } else {
        Tensor acc = head_feats[0];
        for (size_t h = 1; h < head_feats.size(); ++h) acc = add(acc, head_feats[h]);
        out.features = scale(acc, 1.0 / static_cast<double>(layer.num_heads));
    }
    out.attention = head_attn.size() == 1 ? head_attn[0] : concat_cols(head_attn);
    return out;
}

// --- EdgeConv ------------------------------------------------------------------

EdgeConvLayer make_edge_conv(int64_t in, int64_t out, Rng& rng) {
    EdgeConvLayer l;
    l.in = in;
    l.out = out;
    l.weight = Tensor::glorot(2 * in, out, rng);
    l.bias = Tensor::zeros({out}, /*requires_grad=*/true);
    return l;
}

Tensor edgeconv_forward(const EdgeConvLayer& layer, const Tensor& x, const Graph& g, double slope) {
    if (x.rank() != 2 || x.cols() != layer.in)
        throw std::invalid_argument("edgeconv_forward: input width " + shape_str(x.shape()) +
                                    " does not match layer in=" + std::to_string(layer.in));
    if (x.rows() != g.num_nodes)
        throw std::invalid_argument("edgeconv_forward: feature rows do not match node count");
    for (int64_t i = 0; i < g.num_nodes; ++i)
        if (g.in_degree(i) == 0)
            throw std::invalid_argument("edgeconv_forward: node " + std::to_string(i) +
                                        " has no senders");
    const EdgeList edges = edge_list(g);
    Tensor xi = gather_rows(x, edges.receivers);
    Tensor xj = gather_rows(x, edges.senders);
    Tensor m = concat_cols(xi, sub(xj, xi));
    Tensor h = leaky_relu(add_rowvec(matmul(m, layer.weight), layer.bias), slope);
    return segment_max_rows(h, edges.receivers, g.num_nodes);
}

Tensor global_pool(const Tensor& features) {
    if (features.rank() != 2 || features.rows() < 1)
        throw std::invalid_argument("global_pool: expects a non-empty {n, f} tensor");
    return col_max(features);
}

// --- Model ----------------------------------------------------------------------

Model::Model(ModelSpec spec, uint64_t init_seed) : spec_(std::move(spec)) {
    spec_.validate();
    Rng rng(init_seed);
    auto reg = [this](std::string name, const Tensor& t) { params_.push_back({std::move(name), t}); };

    if (spec_.is_gat()) {
        int64_t in = spec_.in_dim;
        const size_t n_convs = spec_.widths.size();
        for (size_t l = 0; l < n_convs; ++l) {
            const bool last = l + 1 == n_convs;
            GatConv c = make_gat_conv(in, spec_.widths[l], spec_.heads[l], /*concat=*/!last,
                                      spec_.residual, rng);
            const std::string p = "conv" + std::to_string(l) + ".h";
            for (int64_t h = 0; h < c.num_heads; ++h) {
                const std::string hp = p + std::to_string(h) + ".";
                reg(hp + "weight", c.weight[static_cast<size_t>(h)]);
                reg(hp + "attn_src", c.attn_src[static_cast<size_t>(h)]);
                reg(hp + "attn_dst", c.attn_dst[static_cast<size_t>(h)]);
                reg(hp + "bias", c.bias[static_cast<size_t>(h)]);
                if (!c.res_w.empty()) reg(hp + "res", c.res_w[static_cast<size_t>(h)]);
            }
            in = last ? spec_.widths[l] : spec_.widths[l] * spec_.heads[l];
            gat_convs_.push_back(std::move(c));
        }
        return;
    }

    int64_t in = spec_.in_dim;
    for (size_t l = 0; l < spec_.widths.size(); ++l) {
        EdgeConvLayer c = make_edge_conv(in, spec_.widths[l], rng);
        reg("conv" + std::to_string(l) + ".weight", c.weight);
        reg("conv" + std::to_string(l) + ".bias", c.bias);
        in = spec_.widths[l];
        edge_convs_.push_back(std::move(c));
    }
    int64_t feat = in;
    if (spec_.emb_width > 0) {
        int64_t cat_w = 0;
        for (int64_t w : spec_.widths) cat_w += w;
        emb_w_ = Tensor::glorot(cat_w, spec_.emb_width, rng);
        emb_b_ = Tensor::zeros({spec_.emb_width}, true);
        reg("embed.weight", emb_w_);
        reg("embed.bias", emb_b_);
        feat = spec_.emb_width;
    }
    int64_t mlp_in = 2 * feat;  // max pool || mean pool
    for (size_t l = 0; l < spec_.mlp_widths.size(); ++l) {
        mlp_w_.push_back(Tensor::glorot(mlp_in, spec_.mlp_widths[l], rng));
        mlp_b_.push_back(Tensor::zeros({spec_.mlp_widths[l]}, true));
        reg("mlp" + std::to_string(l) + ".weight", mlp_w_[l]);
        reg("mlp" + std::to_string(l) + ".bias", mlp_b_[l]);
        mlp_in = spec_.mlp_widths[l];
    }
    cls_w_ = Tensor::glorot(mlp_in, spec_.num_classes, rng);
    cls_b_ = Tensor::zeros({spec_.num_classes}, true);
    reg("cls.weight", cls_w_);
    reg("cls.bias", cls_b_);
}

ForwardResult Model::forward_graph(const Tensor& x, const Graph& g, Rng* dropout_rng) const {
    if (!spec_.is_gat()) throw std::invalid_argument("forward_graph: model is not a gat");
    if (x.cols() != spec_.in_dim)
        throw std::invalid_argument("forward_graph: input width " + std::to_string(x.cols()) +
                                    " != spec in_dim " + std::to_string(spec_.in_dim));
    const Graph g_agg = add_self_loops(g);
    ForwardResult out;
    Tensor h = x;
    for (size_t l = 0; l < gat_convs_.size(); ++l) {
        if (spec_.dropout > 0.0 && dropout_rng) h = dropout(h, spec_.dropout, *dropout_rng);
        GatLayerOut lo = gat_forward(gat_convs_[l], h, g_agg, spec_.leaky_slope);
        out.layers.push_back(LayerTrace{lo.features, g});
        h = (l + 1 < gat_convs_.size()) ? elu(lo.features) : lo.features;
    }
    out.logits = h;
    return out;
}

ForwardResult Model::forward_cloud(const Tensor& points, Rng* dropout_rng) const {
    if (spec_.is_gat()) throw std::invalid_argument("forward_cloud: model is not a dgcnn");
    if (points.cols() != spec_.in_dim)
        throw std::invalid_argument("forward_cloud: input width " + std::to_string(points.cols()) +
                                    " != spec in_dim " + std::to_string(spec_.in_dim));
    ForwardResult out;
    Tensor h = points;
    std::vector<Tensor> conv_outs;
    for (size_t l = 0; l < edge_convs_.size(); ++l) {
        Graph g = knn_graph(h, spec_.knn_k);
        h = edgeconv_forward(edge_convs_[l], h, g, spec_.leaky_slope);
        out.layers.push_back(LayerTrace{h, g});
        conv_outs.push_back(h);
    }
    Tensor feat = h;
    if (spec_.emb_width > 0) {
        Tensor cat = conv_outs.size() == 1 ? conv_outs[0] : concat_cols(conv_outs);
        feat = leaky_relu(add_rowvec(matmul(cat, emb_w_), emb_b_), spec_.leaky_slope);
    }
    Tensor pooled = concat_cols(reshape(col_max(feat), {1, feat.cols()}),
                                reshape(col_mean(feat), {1, feat.cols()}));
    Tensor z = pooled;
    for (size_t l = 0; l < mlp_w_.size(); ++l) {
        z = leaky_relu(add_rowvec(matmul(z, mlp_w_[l]), mlp_b_[l]), spec_.leaky_slope);
        if (spec_.dropout > 0.0 && dropout_rng) z = dropout(z, spec_.dropout, *dropout_rng);
    }
    out.logits = add_rowvec(matmul(z, cls_w_), cls_b_);
    return out;
}

int64_t Model::param_count() const {
    int64_t n = 0;
    for (const auto& p : params_) n += p.tensor.numel();
    return n;
}

void Model::freeze() {
    for (auto& p : params_) p.tensor.set_requires_grad(false);
    frozen_ = true;
}

void Model::load_values(const std::unordered_map<std::string, Tensor>& named) {
    for (auto& p : params_) {
        auto it = named.find(p.name);
        if (it == named.end())
            throw std::invalid_argument("load_values: missing parameter '" + p.name + "'");
        if (it->second.shape() != p.tensor.shape())
            throw std::invalid_argument("load_values: shape mismatch for '" + p.name + "': " +
                                        shape_str(it->second.shape()) + " vs expected " +
                                        shape_str(p.tensor.shape()));
        auto dst = p.tensor.raw_values();
        auto src = it->second.values();
        std::copy(src.begin(), src.end(), dst.begin());
    }
    if (named.size() != params_.size())
        throw std::invalid_argument("load_values: checkpoint has " + std::to_string(named.size()) +
                                    " tensors, model expects " + std::to_string(params_.size()));
}

int64_t param_count(const ModelSpec& spec) { return Model(spec, 0).param_count(); }

}  // namespace lspgcn
