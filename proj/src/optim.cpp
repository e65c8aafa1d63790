#include "lspgcn/optim.hpp"

#include <cmath>

namespace lspgcn {

void OptimConfig::validate() const {
    if (!(lr > 0.0)) throw ConfigError("optimizer: lr must be > 0");
    if (epochs < 1) throw ConfigError("optimizer: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("optimizer: batch size must be >= 1");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw ConfigError("optimizer: betas must be in [0,1)");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("optimizer: momentum must be in [0,1)");
    if (weight_decay < 0.0) throw ConfigError("optimizer: weight decay must be >= 0");
}

namespace {

void check_finite_grad(std::span<const float> g, const std::string& name) {
    for (float v : g)
        if (!std::isfinite(v))
            throw NumericError("optimizer: non-finite gradient in parameter '" + name + "'");
}

}  // namespace

void adam_step(Tensor& param, AdamState& state, const OptimConfig& cfg, int64_t t,
               const std::string& name) {
    if (!param.has_grad()) return;
    const auto g = param.grad();
    check_finite_grad(g, name);
    auto p = param.raw_values();
    if (state.m.empty()) {
        state.m.assign(p.size(), 0.0f);
        state.v.assign(p.size(), 0.0f);
    }
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (size_t i = 0; i < p.size(); ++i) {
        const double gi = static_cast<double>(g[i]) + cfg.weight_decay * p[i];
        state.m[i] = static_cast<float>(cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * gi);
        state.v[i] = static_cast<float>(cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * gi * gi);
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        p[i] = static_cast<float>(p[i] - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
}

void sgd_momentum_step(Tensor& param, SgdState& state, const OptimConfig& cfg,
                       const std::string& name) {
    if (!param.has_grad()) return;
    const auto g = param.grad();
    check_finite_grad(g, name);
    auto p = param.raw_values();
    if (state.velocity.empty()) state.velocity.assign(p.size(), 0.0f);
    for (size_t i = 0; i < p.size(); ++i) {
        const double gi = static_cast<double>(g[i]) + cfg.weight_decay * p[i];
        state.velocity[i] = static_cast<float>(cfg.momentum * state.velocity[i] + gi);
        p[i] = static_cast<float>(p[i] - cfg.lr * state.velocity[i]);
    }
}

Optimizer::Optimizer(std::vector<NamedParam> params, OptimConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    cfg_.validate();
    adam_.resize(params_.size());
    sgd_.resize(params_.size());
}

void Optimizer::step() {
    ++t_;
    for (size_t i = 0; i < params_.size(); ++i) {
        if (cfg_.kind == OptimKind::adam)
            adam_step(params_[i].tensor, adam_[i], cfg_, t_, params_[i].name);
        else
            sgd_momentum_step(params_[i].tensor, sgd_[i], cfg_, params_[i].name);
    }
}

void Optimizer::reset_grads() {
    for (auto& p : params_) p.tensor.reset_grad();
}

}  // namespace lspgcn
