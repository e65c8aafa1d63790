#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "lspgcn/graph.hpp"
#include "lspgcn/tensor.hpp"

namespace lspgcn {

/// Raised for malformed or inconsistent data files.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class TaskKind { multilabel, multiclass };
enum class Split { train, val, test };

std::string split_name(Split s);
Split parse_split(const std::string& name);
std::string task_name(TaskKind t);
TaskKind parse_task(const std::string& name);

struct GraphSample {
    Graph graph;
    Tensor features;               // {n, feature_dim}
    Tensor labels;                 // multilabel: {n, label_dim} of exact 0/1
    std::vector<int64_t> classes;  // multiclass: one class id per node
    Split split = Split::train;
};

/// A set of independent graphs sharing one feature space and label space.
/// Edges are undirected on disk and materialized in both directions on load.
struct GraphDataset {
    TaskKind task = TaskKind::multilabel;
    int64_t feature_dim = 0;
    int64_t label_dim = 0;
    std::vector<GraphSample> graphs;

    std::vector<int64_t> indices_of(Split s) const;
};

GraphDataset load_graph_dataset(const std::string& path);
void save_graph_dataset(const std::string& path, const GraphDataset& ds);

/// Community-structured multilabel corpus: planted-partition graphs
/// (intra-community edge probability 0.3, inter 0.02), features = community
/// prototype + N(0, 0.5^2) noise, labels Bernoulli with community-conditioned
/// rates. Pure function of its arguments.
GraphDataset synth_multilabel_graphs(uint64_t seed, int64_t n_graphs, int64_t nodes_per_graph,
                                     int64_t feature_dim, int64_t label_dim);

/// Standardize features to zero mean / unit variance using train-split
/// statistics.
void standardize_features(GraphDataset& ds);

struct PointCloud {
    Tensor points;  // {n, 3}
    int64_t label = 0;
    Split split = Split::train;
};

struct PointCloudDataset {
    std::vector<std::string> class_names;
    int64_t points_per_cloud = 0;
    std::vector<PointCloud> clouds;

    int64_t num_classes() const { return static_cast<int64_t>(class_names.size()); }
    std::vector<int64_t> indices_of(Split s) const;
};

/// Four shape classes (sphere, cube, cylinder, plane), uniformly sampled,
/// randomly rotated, jittered with N(0, 0.01^2). Per class: 70% train,
/// 15% val, 15% test.
PointCloudDataset synth_shapes(uint64_t seed, int64_t per_class, int64_t points_per_cloud);

/// Directory layout: <dir>/<class>/(train|val|test)/<name>.xyz with one
/// "x y z" triple per line. Files directly under a class directory land in
/// the train split.
PointCloudDataset load_point_clouds(const std::string& dir);
void save_point_clouds(const std::string& dir, const PointCloudDataset& ds);

/// Converts the publicly distributed PPI layout (graph JSON with val/test
/// node flags, float .npy feature matrix, id map and class map JSON) into a
/// GraphDataset; connected components become individual graphs whose split is
/// the majority flag of their nodes.
GraphDataset convert_ppi(const std::string& graph_json_path, const std::string& feats_npy_path,
                         const std::string& id_map_json_path,
                         const std::string& class_map_json_path);

}  // namespace lspgcn
