#include "lspgcn/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "lspgcn/rng.hpp"

namespace lspgcn {

namespace fs = std::filesystem;
using nlohmann::json;

std::string split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

Split parse_split(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "val") return Split::val;
    if (name == "test") return Split::test;
    throw DataError("unknown split '" + name + "' (expected train|val|test)");
}

std::string task_name(TaskKind t) { return t == TaskKind::multilabel ? "multilabel" : "multiclass"; }

TaskKind parse_task(const std::string& name) {
    if (name == "multilabel") return TaskKind::multilabel;
    if (name == "multiclass") return TaskKind::multiclass;
    throw DataError("unknown task '" + name + "' (expected multilabel|multiclass)");
}

std::vector<int64_t> GraphDataset::indices_of(Split s) const {
    std::vector<int64_t> out;
    for (size_t i = 0; i < graphs.size(); ++i)
        if (graphs[i].split == s) out.push_back(static_cast<int64_t>(i));
    return out;
}

std::vector<int64_t> PointCloudDataset::indices_of(Split s) const {
    std::vector<int64_t> out;
    for (size_t i = 0; i < clouds.size(); ++i)
        if (clouds[i].split == s) out.push_back(static_cast<int64_t>(i));
    return out;
}

// --- graph dataset JSON -------------------------------------------------------

GraphDataset load_graph_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("dataset '" + path + "': JSON parse failed: " + e.what());
    }
    GraphDataset ds;
    try {
        ds.feature_dim = j.at("feature_dim").get<int64_t>();
        ds.label_dim = j.at("label_dim").get<int64_t>();
        ds.task = parse_task(j.at("task").get<std::string>());
        if (ds.feature_dim < 1 || ds.label_dim < 1)
            throw DataError("dataset '" + path + "': feature_dim and label_dim must be positive");
        const json& graphs = j.at("graphs");
        if (!graphs.is_array() || graphs.empty())
            throw DataError("dataset '" + path + "': graphs must be a non-empty array");
        for (size_t gi = 0; gi < graphs.size(); ++gi) {
            const std::string where = "graphs[" + std::to_string(gi) + "]";
            const json& jg = graphs[gi];
            GraphSample s;
            s.split = parse_split(jg.at("split").get<std::string>());
            const int64_t n = jg.at("num_nodes").get<int64_t>();
            if (n < 1) throw DataError("dataset '" + path + "' " + where + ": num_nodes must be >= 1");

            std::vector<std::pair<int64_t, int64_t>> edges;
            for (size_t ei = 0; ei < jg.at("edges").size(); ++ei) {
                const json& je = jg["edges"][ei];
                if (!je.is_array() || je.size() != 2)
                    throw DataError("dataset '" + path + "' " + where + ".edges[" +
                                    std::to_string(ei) + "]: expected [sender, receiver]");
                edges.emplace_back(je[0].get<int64_t>(), je[1].get<int64_t>());
            }
            try {
                s.graph = build_graph(n, edges, /*undirected=*/true);
            } catch (const std::invalid_argument& e) {
                throw DataError("dataset '" + path + "' " + where + ": " + e.what());
            }

            const json& jf = jg.at("features");
            if (static_cast<int64_t>(jf.size()) != n)
                throw DataError("dataset '" + path + "' " + where + ".features: expected " +
                                std::to_string(n) + " rows, got " + std::to_string(jf.size()));
            std::vector<float> feats;
            feats.reserve(static_cast<size_t>(n * ds.feature_dim));
            for (size_t ri = 0; ri < jf.size(); ++ri) {
                if (static_cast<int64_t>(jf[ri].size()) != ds.feature_dim)
                    throw DataError("dataset '" + path + "' " + where + ".features[" +
                                    std::to_string(ri) + "]: width " + std::to_string(jf[ri].size()) +
                                    " != feature_dim " + std::to_string(ds.feature_dim));
                for (const json& v : jf[ri]) {
                    const double x = v.get<double>();
                    if (!std::isfinite(x))
                        throw DataError("dataset '" + path + "' " + where + ".features[" +
                                        std::to_string(ri) + "]: non-finite value");
                    feats.push_back(static_cast<float>(x));
                }
            }
            s.features = Tensor({n, ds.feature_dim}, std::move(feats));

            const json& jl = jg.at("labels");
            if (static_cast<int64_t>(jl.size()) != n)
                throw DataError("dataset '" + path + "' " + where + ".labels: expected " +
                                std::to_string(n) + " rows, got " + std::to_string(jl.size()));
            if (ds.task == TaskKind::multilabel) {
                std::vector<float> labels;
                labels.reserve(static_cast<size_t>(n * ds.label_dim));
                for (size_t ri = 0; ri < jl.size(); ++ri) {
                    if (static_cast<int64_t>(jl[ri].size()) != ds.label_dim)
                        throw DataError("dataset '" + path + "' " + where + ".labels[" +
                                        std::to_string(ri) + "]: width " + std::to_string(jl[ri].size()) +
                                        " != label_dim " + std::to_string(ds.label_dim));
                    for (const json& v : jl[ri]) {
                        const int64_t y = v.get<int64_t>();
                        if (y != 0 && y != 1)
                            throw DataError("dataset '" + path + "' " + where + ".labels[" +
                                            std::to_string(ri) + "]: labels must be 0/1");
                        labels.push_back(static_cast<float>(y));
                    }
                }
                s.labels = Tensor({n, ds.label_dim}, std::move(labels));
            } else {
                for (size_t ri = 0; ri < jl.size(); ++ri) {
                    const json& row = jl[ri];
                    const int64_t y = row.is_array() ? row.at(0).get<int64_t>() : row.get<int64_t>();
                    if (y < 0 || y >= ds.label_dim)
                        throw DataError("dataset '" + path + "' " + where + ".labels[" +
                                        std::to_string(ri) + "]: class " + std::to_string(y) +
                                        " out of range [0," + std::to_string(ds.label_dim) + ")");
                    s.classes.push_back(y);
                }
            }
            ds.graphs.push_back(std::move(s));
        }
    } catch (const json::exception& e) {
        throw DataError("dataset '" + path + "': " + e.what());
    }
    return ds;
}

void save_graph_dataset(const std::string& path, const GraphDataset& ds) {
    json j;
    j["feature_dim"] = ds.feature_dim;
    j["label_dim"] = ds.label_dim;
    j["task"] = task_name(ds.task);
    json graphs = json::array();
    for (const GraphSample& s : ds.graphs) {
        json jg;
        jg["split"] = split_name(s.split);
        jg["num_nodes"] = s.graph.num_nodes;
        json edges = json::array();
        // Keep one direction per undirected pair: sender <= receiver.
        for (int64_t i = 0; i < s.graph.num_nodes; ++i)
            for (int64_t snd : s.graph.senders_of(i))
                if (snd <= i) edges.push_back(json::array({snd, i}));
        jg["edges"] = std::move(edges);
        json feats = json::array();
        for (int64_t i = 0; i < s.graph.num_nodes; ++i) {
            json row = json::array();
            for (int64_t f = 0; f < ds.feature_dim; ++f) row.push_back(s.features.at(i, f));
            feats.push_back(std::move(row));
        }
        jg["features"] = std::move(feats);
        json labels = json::array();
        for (int64_t i = 0; i < s.graph.num_nodes; ++i) {
            if (ds.task == TaskKind::multilabel) {
                json row = json::array();
                for (int64_t c = 0; c < ds.label_dim; ++c)
                    row.push_back(static_cast<int64_t>(s.labels.at(i, c)));
                labels.push_back(std::move(row));
            } else {
                labels.push_back(json::array({s.classes[static_cast<size_t>(i)]}));
            }
        }
        jg["labels"] = std::move(labels);
        graphs.push_back(std::move(jg));
    }
    j["graphs"] = std::move(graphs);
    std::ofstream out(path);
    if (!out) throw DataError("cannot write dataset file '" + path + "'");
    out << j.dump();
}

// --- synthetic corpora ----------------------------------------------------------

GraphDataset synth_multilabel_graphs(uint64_t seed, int64_t n_graphs, int64_t nodes_per_graph,
                                     int64_t feature_dim, int64_t label_dim) {
    if (n_graphs < 1 || nodes_per_graph < 2 || feature_dim < 1 || label_dim < 1)
        throw DataError("synth_multilabel_graphs: sizes must be positive (and >= 2 nodes)");
    constexpr int64_t kCommunities = 4;
    constexpr double kIntraProb = 0.3;
    constexpr double kInterProb = 0.02;
    constexpr double kFeatureNoise = 0.5;
    constexpr double kHighRate = 0.95;
    constexpr double kLowRate = 0.05;

    Rng rng(seed);
    // Corpus-level structure shared by all graphs.
    std::vector<std::vector<float>> prototypes(kCommunities, std::vector<float>(static_cast<size_t>(feature_dim)));
    for (auto& proto : prototypes)
        for (auto& v : proto) v = static_cast<float>(rng.normal());
    std::vector<std::vector<double>> label_rate(kCommunities, std::vector<double>(static_cast<size_t>(label_dim)));
    for (auto& row : label_rate)
        for (auto& p : row) p = rng.bernoulli(0.5) ? kHighRate : kLowRate;

    GraphDataset ds;
    ds.task = TaskKind::multilabel;
    ds.feature_dim = feature_dim;
    ds.label_dim = label_dim;

    const int64_t n_val = std::max<int64_t>(1, n_graphs / 10);
    const int64_t n_test = std::max<int64_t>(1, n_graphs / 10);
    for (int64_t gi = 0; gi < n_graphs; ++gi) {
        GraphSample s;
        const int64_t n = nodes_per_graph;
        auto community = [n](int64_t i) { return i * kCommunities / n; };
        std::vector<std::pair<int64_t, int64_t>> edges;
        for (int64_t i = 0; i < n; ++i)
            for (int64_t jn = i + 1; jn < n; ++jn) {
                const double p = community(i) == community(jn) ? kIntraProb : kInterProb;
                if (rng.bernoulli(p)) edges.emplace_back(i, jn);
            }
        s.graph = build_graph(n, edges, /*undirected=*/true);

        std::vector<float> feats(static_cast<size_t>(n * feature_dim));
        std::vector<float> labels(static_cast<size_t>(n * label_dim));
        for (int64_t i = 0; i < n; ++i) {
            const auto c = static_cast<size_t>(community(i));
            for (int64_t f = 0; f < feature_dim; ++f)
                feats[static_cast<size_t>(i * feature_dim + f)] =
                    prototypes[c][static_cast<size_t>(f)] + static_cast<float>(rng.normal(0.0, kFeatureNoise));
            for (int64_t l = 0; l < label_dim; ++l)
                labels[static_cast<size_t>(i * label_dim + l)] =
                    rng.bernoulli(label_rate[c][static_cast<size_t>(l)]) ? 1.0f : 0.0f;
        }
        s.features = Tensor({n, feature_dim}, std::move(feats));
        s.labels = Tensor({n, label_dim}, std::move(labels));
        if (gi >= n_graphs - n_test) s.split = Split::test;
        else if (gi >= n_graphs - n_test - n_val) s.split = Split::val;
        else s.split = Split::train;
        ds.graphs.push_back(std::move(s));
    }
    return ds;
}

void standardize_features(GraphDataset& ds) {
    const int64_t f_dim = ds.feature_dim;
    std::vector<double> mean(static_cast<size_t>(f_dim), 0.0), var(static_cast<size_t>(f_dim), 0.0);
    int64_t count = 0;
    for (const GraphSample& s : ds.graphs) {
        if (s.split != Split::train) continue;
        const auto v = s.features.values();
        for (int64_t i = 0; i < s.graph.num_nodes; ++i)
            for (int64_t f = 0; f < f_dim; ++f) mean[static_cast<size_t>(f)] += v[static_cast<size_t>(i * f_dim + f)];
        count += s.graph.num_nodes;
    }
    if (count == 0) throw DataError("standardize_features: no train nodes");
    for (auto& m : mean) m /= static_cast<double>(count);
    for (const GraphSample& s : ds.graphs) {
        if (s.split != Split::train) continue;
        const auto v = s.features.values();
        for (int64_t i = 0; i < s.graph.num_nodes; ++i)
            for (int64_t f = 0; f < f_dim; ++f) {
                const double d = v[static_cast<size_t>(i * f_dim + f)] - mean[static_cast<size_t>(f)];
                var[static_cast<size_t>(f)] += d * d;
            }
    }
    for (auto& s2 : var) s2 = std::sqrt(s2 / static_cast<double>(count) + 1e-8);
    for (GraphSample& s : ds.graphs) {
        auto v = s.features.raw_values();
        for (int64_t i = 0; i < s.graph.num_nodes; ++i)
            for (int64_t f = 0; f < f_dim; ++f) {
                auto& x = v[static_cast<size_t>(i * f_dim + f)];
                x = static_cast<float>((x - mean[static_cast<size_t>(f)]) / var[static_cast<size_t>(f)]);
            }
    }
}

PointCloudDataset synth_shapes(uint64_t seed, int64_t per_class, int64_t points_per_cloud) {
    if (per_class < 1 || points_per_cloud < 2)
        throw DataError("synth_shapes: sizes must be positive (and >= 2 points)");
    constexpr double kJitter = 0.01;
    PointCloudDataset ds;
    ds.class_names = {"sphere", "cube", "cylinder", "plane"};
    ds.points_per_cloud = points_per_cloud;
    Rng rng(seed);

    auto rotation = [&rng]() {
        // Uniform rotation from a normalized random quaternion.
        double q[4];
        double norm = 0.0;
        for (double& c : q) {
            c = rng.normal();
            norm += c * c;
        }
        norm = std::sqrt(norm);
        for (double& c : q) c /= norm;
        const double w = q[0], x = q[1], y = q[2], z = q[3];
        return std::array<double, 9>{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
                                     2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
                                     2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)};
    };

    for (int64_t cls = 0; cls < ds.num_classes(); ++cls) {
        for (int64_t c = 0; c < per_class; ++c) {
            const auto rot = rotation();
            std::vector<float> pts(static_cast<size_t>(points_per_cloud * 3));
            for (int64_t p = 0; p < points_per_cloud; ++p) {
                double v[3] = {0, 0, 0};
                switch (cls) {
                    case 0: {  // sphere surface
                        double n2 = 0.0;
                        for (double& x : v) {
                            x = rng.normal();
                            n2 += x * x;
                        }
                        const double inv = 1.0 / std::max(std::sqrt(n2), 1e-12);
                        for (double& x : v) x *= inv;
                        break;
                    }
                    case 1: {  // cube surface
                        const int64_t face = rng.uniform_int(0, 6);
                        v[0] = rng.uniform(-1.0, 1.0);
                        v[1] = rng.uniform(-1.0, 1.0);
                        v[2] = face % 2 == 0 ? 1.0 : -1.0;
                        std::swap(v[2], v[face / 2]);
                        break;
                    }
                    case 2: {  // cylinder lateral surface
                        const double theta = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
                        v[0] = std::cos(theta);
                        v[1] = std::sin(theta);
                        v[2] = rng.uniform(-1.0, 1.0);
                        break;
                    }
                    default: {  // plane patch
                        v[0] = rng.uniform(-1.0, 1.0);
                        v[1] = rng.uniform(-1.0, 1.0);
                        v[2] = 0.0;
                        break;
                    }
                }
                for (int a = 0; a < 3; ++a) {
                    double r = rot[static_cast<size_t>(a * 3)] * v[0] +
                               rot[static_cast<size_t>(a * 3 + 1)] * v[1] +
                               rot[static_cast<size_t>(a * 3 + 2)] * v[2];
                    r += rng.normal(0.0, kJitter);
                    pts[static_cast<size_t>(p * 3 + a)] = static_cast<float>(r);
                }
            }
            PointCloud cloud;
            cloud.points = Tensor({points_per_cloud, 3}, std::move(pts));
            cloud.label = cls;
            const int64_t n_train = std::max<int64_t>(1, (per_class * 7 + 9) / 10);
            const int64_t n_val = std::max<int64_t>(per_class > 1 ? 1 : 0, (per_class * 15) / 100);
            if (c < n_train) cloud.split = Split::train;
            else if (c < n_train + n_val) cloud.split = Split::val;
            else cloud.split = Split::test;
            ds.clouds.push_back(std::move(cloud));
        }
    }
    return ds;
}

// --- point cloud files ----------------------------------------------------------

namespace {

PointCloud load_xyz_file(const fs::path& path, int64_t label, Split split) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open point file '" + path.string() + "'");
    std::vector<float> vals;
    std::string line;
    int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        double x, y, z;
        if (!(ls >> x >> y >> z))
            throw DataError("point file '" + path.string() + "' line " + std::to_string(lineno) +
                            ": expected three numeric fields");
        std::string extra;
        if (ls >> extra)
            throw DataError("point file '" + path.string() + "' line " + std::to_string(lineno) +
                            ": expected exactly three fields");
        if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z))
            throw DataError("point file '" + path.string() + "' line " + std::to_string(lineno) +
                            ": non-finite coordinate");
        vals.push_back(static_cast<float>(x));
        vals.push_back(static_cast<float>(y));
        vals.push_back(static_cast<float>(z));
    }
    if (vals.empty()) throw DataError("point file '" + path.string() + "': no points");
    PointCloud c;
    c.points = Tensor({static_cast<int64_t>(vals.size()) / 3, 3}, std::move(vals));
    c.label = label;
    c.split = split;
    return c;
}

}  // namespace

PointCloudDataset load_point_clouds(const std::string& dir) {
    if (!fs::is_directory(dir)) throw DataError("'" + dir + "' is not a directory");
    PointCloudDataset ds;
    std::vector<std::string> classes;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_directory()) classes.push_back(e.path().filename().string());
    std::sort(classes.begin(), classes.end());
    if (classes.empty()) throw DataError("'" + dir + "': no class subdirectories");
    ds.class_names = classes;

    for (size_t cls = 0; cls < classes.size(); ++cls) {
        const fs::path cdir = fs::path(dir) / classes[cls];
        auto load_split_dir = [&](const fs::path& d, Split split) {
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(d))
                if (e.is_regular_file()) files.push_back(e.path());
            std::sort(files.begin(), files.end());
            for (const auto& f : files)
                ds.clouds.push_back(load_xyz_file(f, static_cast<int64_t>(cls), split));
        };
        for (const char* sname : {"train", "val", "test"}) {
            const fs::path sdir = cdir / sname;
            if (fs::is_directory(sdir)) load_split_dir(sdir, parse_split(sname));
        }
        // Flat files under the class directory default to train.
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(cdir))
            if (e.is_regular_file()) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files)
            ds.clouds.push_back(load_xyz_file(f, static_cast<int64_t>(cls), Split::train));
    }
    if (ds.clouds.empty()) throw DataError("'" + dir + "': no point files found");
    ds.points_per_cloud = ds.clouds[0].points.rows();
    for (const PointCloud& c : ds.clouds)
        if (c.points.rows() != ds.points_per_cloud)
            throw DataError("'" + dir + "': cloud sizes differ (" +
                            std::to_string(ds.points_per_cloud) + " vs " +
                            std::to_string(c.points.rows()) + ")");
    return ds;
}

void save_point_clouds(const std::string& dir, const PointCloudDataset& ds) {
    std::vector<int64_t> counter(static_cast<size_t>(ds.num_classes()), 0);
    for (const PointCloud& c : ds.clouds) {
        const fs::path cdir =
            fs::path(dir) / ds.class_names[static_cast<size_t>(c.label)] / split_name(c.split);
        fs::create_directories(cdir);
        char name[32];
        std::snprintf(name, sizeof(name), "cloud_%05lld.xyz",
                      static_cast<long long>(counter[static_cast<size_t>(c.label)]++));
        std::ofstream out(cdir / name);
        if (!out) throw DataError("cannot write point file in '" + cdir.string() + "'");
        out.precision(9);
        for (int64_t p = 0; p < c.points.rows(); ++p)
            out << c.points.at(p, 0) << " " << c.points.at(p, 1) << " " << c.points.at(p, 2) << "\n";
    }
}

// --- PPI converter ---------------------------------------------------------------

namespace {

// Minimal .npy reader: little-endian C-order float32/float64 matrices.
std::vector<std::vector<float>> read_npy_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open npy file '" + path + "'");
    char magic[6];
    in.read(magic, 6);
    if (!in || std::memcmp(magic, "\x93NUMPY", 6) != 0)
        throw DataError("npy '" + path + "': bad magic");
    unsigned char ver[2];
    in.read(reinterpret_cast<char*>(ver), 2);
    uint32_t header_len = 0;
    if (ver[0] == 1) {
        uint16_t h16;
        in.read(reinterpret_cast<char*>(&h16), 2);
        header_len = h16;
    } else {
        in.read(reinterpret_cast<char*>(&header_len), 4);
    }
    std::string header(header_len, '\0');
    in.read(header.data(), header_len);
    if (!in) throw DataError("npy '" + path + "': truncated header");

    const bool f4 = header.find("<f4") != std::string::npos;
    const bool f8 = header.find("<f8") != std::string::npos;
    if (!f4 && !f8) throw DataError("npy '" + path + "': unsupported dtype (expected <f4 or <f8)");
    if (header.find("'fortran_order': True") != std::string::npos)
        throw DataError("npy '" + path + "': fortran order unsupported");
    const size_t sp = header.find("'shape':");
    const size_t lp = header.find('(', sp);
    const size_t rp = header.find(')', lp);
    if (sp == std::string::npos || lp == std::string::npos || rp == std::string::npos)
        throw DataError("npy '" + path + "': cannot parse shape");
    std::string shape_s = header.substr(lp + 1, rp - lp - 1);
    std::replace(shape_s.begin(), shape_s.end(), ',', ' ');
    std::istringstream ss(shape_s);
    int64_t rows = 0, cols = 1;
    ss >> rows;
    if (!(ss >> cols)) cols = 1;
    if (rows < 1 || cols < 1) throw DataError("npy '" + path + "': bad shape");

    std::vector<std::vector<float>> out(static_cast<size_t>(rows), std::vector<float>(static_cast<size_t>(cols)));
    if (f4) {
        std::vector<float> buf(static_cast<size_t>(cols));
        for (int64_t r = 0; r < rows; ++r) {
            in.read(reinterpret_cast<char*>(buf.data()), cols * 4);
            if (!in) throw DataError("npy '" + path + "': truncated data");
            out[static_cast<size_t>(r)].assign(buf.begin(), buf.end());
        }
    } else {
        std::vector<double> buf(static_cast<size_t>(cols));
        for (int64_t r = 0; r < rows; ++r) {
            in.read(reinterpret_cast<char*>(buf.data()), cols * 8);
            if (!in) throw DataError("npy '" + path + "': truncated data");
            for (int64_t c = 0; c < cols; ++c)
                out[static_cast<size_t>(r)][static_cast<size_t>(c)] = static_cast<float>(buf[static_cast<size_t>(c)]);
        }
    }
    return out;
}

struct UnionFind {
    std::vector<int64_t> parent;
    explicit UnionFind(int64_t n) : parent(static_cast<size_t>(n)) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int64_t find(int64_t x) {
        while (parent[static_cast<size_t>(x)] != x) {
            parent[static_cast<size_t>(x)] = parent[static_cast<size_t>(parent[static_cast<size_t>(x)])];
            x = parent[static_cast<size_t>(x)];
        }
        return x;
    }
    void unite(int64_t a, int64_t b) { parent[static_cast<size_t>(find(a))] = find(b); }
};

}  // namespace

GraphDataset convert_ppi(const std::string& graph_json_path, const std::string& feats_npy_path,
                         const std::string& id_map_json_path,
                         const std::string& class_map_json_path) {
    std::ifstream gin(graph_json_path);
    if (!gin) throw DataError("cannot open graph json '" + graph_json_path + "'");
    json jg;
    try {
        gin >> jg;
    } catch (const json::exception& e) {
        throw DataError("graph json '" + graph_json_path + "': " + e.what());
    }

    std::ifstream iin(id_map_json_path);
    if (!iin) throw DataError("cannot open id map '" + id_map_json_path + "'");
    json jid;
    iin >> jid;
    std::ifstream cin_(class_map_json_path);
    if (!cin_) throw DataError("cannot open class map '" + class_map_json_path + "'");
    json jcls;
    cin_ >> jcls;

    const auto feats = read_npy_matrix(feats_npy_path);
    const int64_t n_total = static_cast<int64_t>(feats.size());
    const int64_t f_dim = n_total ? static_cast<int64_t>(feats[0].size()) : 0;

    const json& nodes = jg.at("nodes");
    if (static_cast<int64_t>(nodes.size()) != n_total)
        throw DataError("ppi: node count " + std::to_string(nodes.size()) +
                        " does not match feature rows " + std::to_string(n_total));

    // id -> dense index via the id map.
    auto index_of = [&jid](const json& id) -> int64_t {
        const std::string key = id.is_string() ? id.get<std::string>() : std::to_string(id.get<int64_t>());
        auto it = jid.find(key);
        if (it == jid.end()) throw DataError("ppi: node id '" + key + "' missing from id map");
        return it->get<int64_t>();
    };

    std::vector<int> flag(static_cast<size_t>(n_total), 0);  // 0 train, 1 val, 2 test
    for (const json& nd : nodes) {
        const int64_t idx = index_of(nd.at("id"));
        if (idx < 0 || idx >= n_total) throw DataError("ppi: node index out of range");
        if (nd.value("test", false)) flag[static_cast<size_t>(idx)] = 2;
        else if (nd.value("val", false)) flag[static_cast<size_t>(idx)] = 1;
    }

    int64_t c_dim = 0;
    std::vector<std::vector<float>> labels(static_cast<size_t>(n_total));
    for (auto it = jcls.begin(); it != jcls.end(); ++it) {
        auto jt = jid.find(it.key());
        if (jt == jid.end()) throw DataError("ppi: class map id '" + it.key() + "' missing from id map");
        const int64_t idx = jt->get<int64_t>();
        std::vector<float> row;
        for (const json& v : it.value()) row.push_back(static_cast<float>(v.get<int64_t>()));
        if (c_dim == 0) c_dim = static_cast<int64_t>(row.size());
        else if (c_dim != static_cast<int64_t>(row.size()))
            throw DataError("ppi: inconsistent label widths in class map");
        labels[static_cast<size_t>(idx)] = std::move(row);
    }

    UnionFind uf(n_total);
    std::vector<std::pair<int64_t, int64_t>> links;
    for (const json& l : jg.at("links")) {
        const int64_t a = index_of(l.at("source"));
        const int64_t b = index_of(l.at("target"));
        links.emplace_back(a, b);
        uf.unite(a, b);
    }

    // Group nodes by component root, in first-appearance order.
    std::vector<int64_t> comp_of(static_cast<size_t>(n_total));
    std::vector<int64_t> roots;
    for (int64_t i = 0; i < n_total; ++i) {
        const int64_t r = uf.find(i);
        auto it = std::find(roots.begin(), roots.end(), r);
        if (it == roots.end()) {
            comp_of[static_cast<size_t>(i)] = static_cast<int64_t>(roots.size());
            roots.push_back(r);
        } else {
            comp_of[static_cast<size_t>(i)] = it - roots.begin();
        }
    }
    const int64_t n_comp = static_cast<int64_t>(roots.size());
    std::vector<std::vector<int64_t>> members(static_cast<size_t>(n_comp));
    std::vector<int64_t> local(static_cast<size_t>(n_total));
    for (int64_t i = 0; i < n_total; ++i) {
        local[static_cast<size_t>(i)] = static_cast<int64_t>(members[static_cast<size_t>(comp_of[static_cast<size_t>(i)])].size());
        members[static_cast<size_t>(comp_of[static_cast<size_t>(i)])].push_back(i);
    }

    GraphDataset ds;
    ds.task = TaskKind::multilabel;
    ds.feature_dim = f_dim;
    ds.label_dim = c_dim;
    std::vector<std::vector<std::pair<int64_t, int64_t>>> comp_edges(static_cast<size_t>(n_comp));
    for (const auto& [a, b] : links)
        comp_edges[static_cast<size_t>(comp_of[static_cast<size_t>(a)])].emplace_back(
            local[static_cast<size_t>(a)], local[static_cast<size_t>(b)]);

    for (int64_t c = 0; c < n_comp; ++c) {
        const auto& mem = members[static_cast<size_t>(c)];
        GraphSample s;
        s.graph = build_graph(static_cast<int64_t>(mem.size()), comp_edges[static_cast<size_t>(c)], true);
        std::vector<float> fv, lv;
        int64_t votes[3] = {0, 0, 0};
        for (int64_t g : mem) {
            fv.insert(fv.end(), feats[static_cast<size_t>(g)].begin(), feats[static_cast<size_t>(g)].end());
            const auto& lr = labels[static_cast<size_t>(g)];
            if (static_cast<int64_t>(lr.size()) != c_dim)
                throw DataError("ppi: node " + std::to_string(g) + " missing labels");
            lv.insert(lv.end(), lr.begin(), lr.end());
            ++votes[flag[static_cast<size_t>(g)]];
        }
        s.features = Tensor({static_cast<int64_t>(mem.size()), f_dim}, std::move(fv));
        s.labels = Tensor({static_cast<int64_t>(mem.size()), c_dim}, std::move(lv));
        const int64_t best = std::max_element(votes, votes + 3) - votes;
        s.split = best == 2 ? Split::test : (best == 1 ? Split::val : Split::train);
        ds.graphs.push_back(std::move(s));
    }
    return ds;
}

}  // namespace lspgcn
