#pragma once

#include <cstdint>
#include <vector>

#include "lspgcn/tensor.hpp"

namespace lspgcn {

/// Mean binary cross entropy over all (node, class) entries;
/// targets must be exactly 0/1.
Tensor bce_multilabel_loss(const Tensor& logits, const Tensor& targets);

/// Softmax cross entropy against integer class labels, averaged over rows.
Tensor cross_entropy_loss(const Tensor& logits, const std::vector<int64_t>& labels);

/// Micro-averaged F1 over all (node, class) decisions; predictions threshold
/// the logits at 0.
double micro_f1(const Tensor& logits, const Tensor& targets);

/// Fraction of rows whose argmax matches the label.
double accuracy(const Tensor& logits, const std::vector<int64_t>& labels);

/// Unweighted mean of per-class recall; classes absent from the targets are
/// excluded from the mean.
double mean_class_accuracy(const Tensor& logits, const std::vector<int64_t>& labels,
                           int64_t num_classes);

}  // namespace lspgcn
