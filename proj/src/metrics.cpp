#include "lspgcn/metrics.hpp"

#include <stdexcept>

namespace lspgcn {

Tensor bce_multilabel_loss(const Tensor& logits, const Tensor& targets) {
    return bce_with_logits(logits, targets);
}

Tensor cross_entropy_loss(const Tensor& logits, const std::vector<int64_t>& labels) {
    if (logits.rank() != 2)
        throw std::invalid_argument("cross_entropy_loss: logits must be rank-2");
    if (static_cast<int64_t>(labels.size()) != logits.rows())
        throw std::invalid_argument("cross_entropy_loss: one label per row required");
    Tensor logp = log_softmax_rows(logits);
    return scale(mean(pick_per_row(logp, labels)), -1.0);
}

double micro_f1(const Tensor& logits, const Tensor& targets) {
    if (logits.shape() != targets.shape())
        throw std::invalid_argument("micro_f1: shape mismatch");
    const auto lv = logits.values(), tv = targets.values();
    int64_t tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < lv.size(); ++i) {
        const bool pred = lv[i] > 0.0f;
        const bool truth = tv[i] > 0.5f;
        if (pred && truth) ++tp;
        else if (pred && !truth) ++fp;
        else if (!pred && truth) ++fn;
    }
    const double denom = 2.0 * tp + fp + fn;
    return denom == 0.0 ? 0.0 : 2.0 * tp / denom;
}

namespace {

int64_t argmax_row(std::span<const float> v, int64_t row, int64_t c) {
    int64_t best = 0;
    float bv = v[static_cast<size_t>(row * c)];
    for (int64_t j = 1; j < c; ++j) {
        const float x = v[static_cast<size_t>(row * c + j)];
        if (x > bv) {
            bv = x;
            best = j;
        }
    }
    return best;
}

}  // namespace

double accuracy(const Tensor& logits, const std::vector<int64_t>& labels) {
    if (static_cast<int64_t>(labels.size()) != logits.rows())
        throw std::invalid_argument("accuracy: one label per row required");
    if (labels.empty()) return 0.0;
    const auto lv = logits.values();
    int64_t correct = 0;
    for (int64_t i = 0; i < logits.rows(); ++i)
        if (argmax_row(lv, i, logits.cols()) == labels[static_cast<size_t>(i)]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double mean_class_accuracy(const Tensor& logits, const std::vector<int64_t>& labels,
                           int64_t num_classes) {
    if (static_cast<int64_t>(labels.size()) != logits.rows())
        throw std::invalid_argument("mean_class_accuracy: one label per row required");
    std::vector<int64_t> total(static_cast<size_t>(num_classes), 0);
    std::vector<int64_t> hit(static_cast<size_t>(num_classes), 0);
    const auto lv = logits.values();
    for (int64_t i = 0; i < logits.rows(); ++i) {
        const int64_t y = labels[static_cast<size_t>(i)];
        if (y < 0 || y >= num_classes)
            throw std::invalid_argument("mean_class_accuracy: label out of range");
        ++total[static_cast<size_t>(y)];
        if (argmax_row(lv, i, logits.cols()) == y) ++hit[static_cast<size_t>(y)];
    }
    double acc_sum = 0.0;
    int64_t present = 0;
    for (int64_t c = 0; c < num_classes; ++c) {
        if (total[static_cast<size_t>(c)] == 0) continue;  // absent classes excluded
        acc_sum += static_cast<double>(hit[static_cast<size_t>(c)]) / total[static_cast<size_t>(c)];
        ++present;
    }
    return present == 0 ? 0.0 : acc_sum / static_cast<double>(present);
}

}  // namespace lspgcn
