#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lspgcn/lsp.hpp"
#include "lspgcn/rng.hpp"
#include "lspgcn/tensor.hpp"

namespace lspgcn {

enum class DistillMethod { none, kd, fitnet, at, lsp };

DistillMethod parse_distill_method(const std::string& name);
std::string distill_method_name(DistillMethod m);

/// Full distiller configuration; only the fields of the selected method are
/// consulted. pairs lists (teacher layer, student layer) indices into the
/// models' graph-conv traces; empty means "last conv of each".
struct DistillerConfig {
    DistillMethod method = DistillMethod::none;
    // kd
    double kd_temperature = 4.0;
    double kd_alpha = 0.1;
    // fitnet / at
    double fitnet_weight = 1.0;
    double at_weight = 1.0;
    // lsp
    KernelChoice kernel{};
    double lambda = 100.0;
    LspMode lsp_mode = LspMode::union_graph;
    std::vector<std::pair<int, int>> pairs;

    void validate() const;
};

/// Soft-label loss: T^2 * mean_row KL(softmax(teacher/T) || softmax(student/T)).
/// The caller mixes it with the task loss as (1-alpha)*task + alpha*kd.
/// Only softmax-based (multiclass) tasks support KD; the training loop
/// enforces that.
Tensor kd_loss(const Tensor& student_logits, const Tensor& teacher_logits, double temperature);

/// Trainable linear map from student feature width to teacher feature width,
/// optimized jointly with the student.
struct FitnetMapper {
    Tensor weight;  // {f_student, f_teacher}
    Tensor bias;    // {f_teacher}
    static FitnetMapper make(int64_t f_student, int64_t f_teacher, Rng& rng);
};

/// Mean squared error between mapped student features and (detached) teacher
/// features.
Tensor fitnet_loss(const Tensor& student_feat, const Tensor& teacher_feat,
                   const FitnetMapper& mapper);

/// Attention transfer: per-node attention a_i = sum_channels |feature|;
/// both attention vectors are L2-normalized before the squared distance.
Tensor at_loss(const Tensor& student_feat, const Tensor& teacher_feat);

}  // namespace lspgcn
