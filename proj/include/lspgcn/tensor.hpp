#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lspgcn/rng.hpp"

namespace lspgcn {

/// Raised when a computation produces or receives non-finite values.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& s);

namespace detail {

struct Node {
    Shape shape;
    std::vector<float> values;
    std::vector<float> grad;     // allocated lazily, only for grad participants
    bool requires_grad = false;  // leaf opted into training
    bool from_op = false;        // produced by a recorded operation

    bool wants_grad() const { return requires_grad || from_op; }
    int64_t numel() const { return static_cast<int64_t>(values.size()); }
    std::vector<float>& grad_buf();  // sized and zeroed on first use
};

}  // namespace detail

/// Dense row-major float32 tensor. Value-semantic handle onto shared storage;
/// reductions accumulate in float64 before the float32 store. A tensor that
/// was not created with requires_grad and is not an op output never receives
/// a grad buffer.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<float> values, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, float v);
    static Tensor scalar(float v);
    static Tensor glorot(int64_t fan_in, int64_t fan_out, Rng& rng);  // trainable {fan_in, fan_out}

    bool defined() const { return static_cast<bool>(n_); }
    const Shape& shape() const;
    int rank() const { return static_cast<int>(shape().size()); }
    int64_t numel() const;
    int64_t rows() const;  // size of dim 0; 1 for scalars
    int64_t cols() const;  // size of dim 1; 1 for rank < 2

    std::span<const float> values() const;
    /// Mutable view of the storage. Bypasses the tape: callers (optimizers,
    /// finite-difference probes) own the consistency of downstream state.
    std::span<float> raw_values();
    float item() const;  // scalar tensors only
    float at(int64_t i) const;
    float at(int64_t r, int64_t c) const;

    bool requires_grad() const;
    void set_requires_grad(bool b);  // leaf tensors only; used to freeze models
    bool tracked() const;  // participates in the current autodiff graph
    bool has_grad() const;
    std::span<const float> grad() const;  // throws if no grad has been accumulated
    void reset_grad();

    Tensor detach() const;  // value copy with no grad participation
    Tensor clone_values() const { return detach(); }

    /// Internal: shared node. Used by the op layer and serialization.
    const std::shared_ptr<detail::Node>& node() const { return n_; }
    static Tensor wrap(std::shared_ptr<detail::Node> n) { return Tensor(std::move(n)); }

private:
    explicit Tensor(std::shared_ptr<detail::Node> n) : n_(std::move(n)) {}
    std::shared_ptr<detail::Node> n_;
};

/// Reverse-mode tape. Operations are recorded in execution order, which is a
/// topological order of the data flow; backward() replays them exactly once
/// in reverse. Gradients accumulate across backward calls until reset_grad /
/// clear, which also releases all recorded references.
class Tape {
public:
    static Tape& active();  // thread-local

    size_t size() const { return entries_.size(); }
    void clear() { entries_.clear(); }

    /// Seeds d(loss)/d(loss) = 1 and propagates to every grad participant.
    /// loss must be a scalar.
    void backward(const Tensor& loss);

    // Internal: called by the op layer.
    void record(std::shared_ptr<detail::Node> output, std::function<void()> fn);

private:
    struct Entry {
        std::shared_ptr<detail::Node> output;
        std::function<void()> fn;
    };
    std::vector<Entry> entries_;
};

bool grad_enabled();

/// Scoped "stop recording" switch; used for teacher inference and evaluation.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// ---------------------------------------------------------------------------
// Operations. Each op validates shapes, computes forward with float64
// reduction accumulators, and registers an exact backward rule when grad
// recording is on and any input participates.
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);  // {m,k} x {k,n} -> {m,n}

Tensor add(const Tensor& a, const Tensor& b);  // same shape
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& x, double c);
Tensor add_scalar(const Tensor& x, double c);
Tensor add_rowvec(const Tensor& x, const Tensor& b);  // {n,f} + {f}
Tensor div_by_scalar(const Tensor& x, const Tensor& s);  // s: scalar tensor

Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);  // input clamped at 1e-10 before the log
Tensor sqrt(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor pow_int(const Tensor& x, int d);  // d >= 1
Tensor sigmoid(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope);
Tensor elu(const Tensor& x);

Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& x, int64_t lo, int64_t hi);
Tensor reshape(const Tensor& x, Shape shape);
Tensor flatten(const Tensor& x);

Tensor sum(const Tensor& x);   // -> scalar
Tensor mean(const Tensor& x);  // -> scalar
Tensor row_sum(const Tensor& x);   // {n,f} -> {n}
Tensor col_max(const Tensor& x);   // {n,f} -> {f}, max over rows
Tensor col_mean(const Tensor& x);  // {n,f} -> {f}

Tensor gather_rows(const Tensor& x, const std::vector<int64_t>& idx);
Tensor scatter_add_rows(const Tensor& x, const std::vector<int64_t>& idx, int64_t n);
Tensor scale_rows(const Tensor& x, const Tensor& s);  // {m,f} * {m} per row

/// Softmax within segments of a flat score vector. segment_of[e] names the
/// receiving segment of entry e; every non-empty segment sums to one. Scores
/// are max-shifted per segment before exponentiation.
Tensor segment_softmax(const Tensor& scores, const std::vector<int64_t>& segment_of, int64_t n);

/// Per-segment coordinate-wise max of rows; empty segments yield zero rows.
Tensor segment_max_rows(const Tensor& x, const std::vector<int64_t>& segment_of, int64_t n);

Tensor softmax_rows(const Tensor& x);
Tensor log_softmax_rows(const Tensor& x);
Tensor pick_per_row(const Tensor& x, const std::vector<int64_t>& cols);  // {n,c} -> {n}

/// Numerically stable mean binary cross entropy over all entries;
/// targets must be exactly 0 or 1.
Tensor bce_with_logits(const Tensor& logits, const Tensor& targets);

Tensor dropout(const Tensor& x, double rate, Rng& rng);

/// Central-difference check of d f / d x against the tape. Returns
/// max_i |analytic_i - numeric_i| / max(1, |numeric_i|). f must be a
/// deterministic scalar-valued function of the current value of x (plus any
/// captured constants/parameters). step in [1e-5, 1e-2].
double gradient_check(const std::function<Tensor()>& f, Tensor x, double step = 1e-3);

}  // namespace lspgcn
