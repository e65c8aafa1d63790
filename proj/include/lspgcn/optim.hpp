#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lspgcn/layers.hpp"
#include "lspgcn/tensor.hpp"

namespace lspgcn {

enum class OptimKind { adam, sgd };

/// Optimizer + run-length settings. Paper protocols: Adam(0.005), weight
/// decay 0, 500 epochs for the node-classification task; SGD(0.1, momentum
/// 0.9), 250 epochs for point clouds.
struct OptimConfig {
    OptimKind kind = OptimKind::adam;
    double lr = 0.005;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    double momentum = 0.9;
    int epochs = 1;
    uint64_t seed = 0;
    int batch_size = 16;  // point-cloud minibatch; graph task steps per graph

    void validate() const;
};

struct AdamState {
    std::vector<float> m, v;
};

struct SgdState {
    std::vector<float> velocity;
};

/// One Adam update with bias correction; t is the 1-based step count.
/// Throws NumericError on non-finite gradients.
void adam_step(Tensor& param, AdamState& state, const OptimConfig& cfg, int64_t t,
               const std::string& name = "");

/// v <- momentum * v + g;  p <- p - lr * v.
void sgd_momentum_step(Tensor& param, SgdState& state, const OptimConfig& cfg,
                       const std::string& name = "");

/// Applies the configured rule to every parameter with an accumulated
/// gradient, then leaves gradients untouched (call reset_grads()).
class Optimizer {
public:
    Optimizer(std::vector<NamedParam> params, OptimConfig cfg);

    void step();
    void reset_grads();
    int64_t steps_taken() const { return t_; }

private:
    std::vector<NamedParam> params_;
    OptimConfig cfg_;
    std::vector<AdamState> adam_;
    std::vector<SgdState> sgd_;
    int64_t t_ = 0;
};

}  // namespace lspgcn
