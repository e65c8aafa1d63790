#include "lspgcn/distill.hpp"

#include <cmath>
#include <stdexcept>

namespace lspgcn {

DistillMethod parse_distill_method(const std::string& name) {
    if (name == "none") return DistillMethod::none;
    if (name == "kd") return DistillMethod::kd;
    if (name == "fitnet") return DistillMethod::fitnet;
    if (name == "at") return DistillMethod::at;
    if (name == "lsp") return DistillMethod::lsp;
    throw ConfigError("distiller: unknown method '" + name + "' (expected none|kd|fitnet|at|lsp)");
}

std::string distill_method_name(DistillMethod m) {
    switch (m) {
        case DistillMethod::none: return "none";
        case DistillMethod::kd: return "kd";
        case DistillMethod::fitnet: return "fitnet";
        case DistillMethod::at: return "at";
        case DistillMethod::lsp: return "lsp";
    }
    return "?";
}

void DistillerConfig::validate() const {
    if (kd_temperature <= 0.0) throw ConfigError("distiller: kd temperature must be > 0");
    if (kd_alpha < 0.0 || kd_alpha > 1.0) throw ConfigError("distiller: kd alpha must be in [0,1]");
    if (fitnet_weight < 0.0) throw ConfigError("distiller: fitnet weight must be >= 0");
    if (at_weight < 0.0) throw ConfigError("distiller: at weight must be >= 0");
    if (lambda < 0.0) throw ConfigError("distiller: lambda must be >= 0");
    kernel.validate();
}

Tensor kd_loss(const Tensor& student_logits, const Tensor& teacher_logits, double temperature) {
    if (temperature <= 0.0) throw ConfigError("kd_loss: temperature must be > 0");
    if (student_logits.shape() != teacher_logits.shape())
        throw std::invalid_argument("kd_loss: logit shapes differ: " +
                                    shape_str(student_logits.shape()) + " vs " +
                                    shape_str(teacher_logits.shape()));
    const int64_t n = student_logits.rows();
    // Teacher term: constants p_t and sum p_t log p_t.
    Tensor p_t;
    double t_entropy_sum = 0.0;
    {
        NoGradGuard ng;
        p_t = softmax_rows(scale(teacher_logits.detach(), 1.0 / temperature));
        Tensor log_p_t = log(p_t);
        for (size_t i = 0; i < p_t.values().size(); ++i)
            t_entropy_sum += static_cast<double>(p_t.values()[i]) * log_p_t.values()[i];
    }
    Tensor log_p_s = log_softmax_rows(scale(student_logits, 1.0 / temperature));
    Tensor cross = sum(mul(p_t, log_p_s));
    const double t2n = temperature * temperature / static_cast<double>(n);
    // T^2/n * (sum p_t log p_t - sum p_t log p_s)
    return scale(sub(Tensor::scalar(static_cast<float>(t_entropy_sum)), cross), t2n);
}

FitnetMapper FitnetMapper::make(int64_t f_student, int64_t f_teacher, Rng& rng) {
    FitnetMapper m;
    m.weight = Tensor::glorot(f_student, f_teacher, rng);
    m.bias = Tensor::zeros({f_teacher}, /*requires_grad=*/true);
    return m;
}

Tensor fitnet_loss(const Tensor& student_feat, const Tensor& teacher_feat,
                   const FitnetMapper& mapper) {
    if (student_feat.rows() != teacher_feat.rows())
        throw std::invalid_argument("fitnet_loss: node counts differ");
    if (mapper.weight.rows() != student_feat.cols() || mapper.weight.cols() != teacher_feat.cols())
        throw std::invalid_argument("fitnet_loss: mapper " + shape_str(mapper.weight.shape()) +
                                    " does not map " + shape_str(student_feat.shape()) + " onto " +
                                    shape_str(teacher_feat.shape()));
    Tensor mapped = add_rowvec(matmul(student_feat, mapper.weight), mapper.bias);
    Tensor diff = sub(mapped, teacher_feat.detach());
    return mean(mul(diff, diff));
}

Tensor at_loss(const Tensor& student_feat, const Tensor& teacher_feat) {
    if (student_feat.rows() != teacher_feat.rows())
        throw std::invalid_argument("at_loss: node counts differ");
    auto norm_check = [](const Tensor& a, const char* who) {
        double sq = 0.0;
        for (float v : a.values()) sq += static_cast<double>(v) * v;
        if (sq <= 1e-24)
            throw std::invalid_argument(std::string("at_loss: all-zero ") + who +
                                        " attention vector cannot be normalized");
    };
    Tensor a_s = row_sum(abs(student_feat));
    norm_check(a_s, "student");
    Tensor ns = div_by_scalar(a_s, sqrt(sum(mul(a_s, a_s))));
    Tensor nt;
    {
        NoGradGuard ng;
        Tensor a_t = row_sum(abs(teacher_feat.detach()));
        norm_check(a_t, "teacher");
        nt = div_by_scalar(a_t, sqrt(sum(mul(a_t, a_t))));
    }
    Tensor diff = sub(ns, nt);
    return sum(mul(diff, diff));
}

}  // namespace lspgcn
