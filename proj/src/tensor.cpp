#include "lspgcn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace lspgcn {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) os << "x";
        os << s[i];
    }
    os << "]";
    return os.str();
}

namespace detail {

std::vector<float>& Node::grad_buf() {
    if (grad.empty()) grad.assign(values.size(), 0.0f);
    return grad;
}

}  // namespace detail

namespace {

using NodePtr = std::shared_ptr<detail::Node>;

thread_local bool g_grad_enabled = true;

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

bool tracking(std::initializer_list<const Tensor*> ins) {
    if (!g_grad_enabled) return false;
    for (const Tensor* t : ins)
        if (t->defined() && t->node()->wants_grad()) return true;
    return false;
}

void record(const Tensor& out, std::function<void()> fn) {
    out.node()->from_op = true;
    Tape::active().record(out.node(), std::move(fn));
}

// Accumulates into dst->grad only when dst participates in the graph.
void axpy_grad(const NodePtr& dst, const float* g, double factor = 1.0) {
    if (!dst->wants_grad()) return;
    auto& gb = dst->grad_buf();
    for (size_t i = 0; i < gb.size(); ++i) gb[i] += static_cast<float>(factor * g[i]);
}

}  // namespace

// --- Tensor -----------------------------------------------------------------

Tensor::Tensor(Shape shape, std::vector<float> values, bool requires_grad) {
    require(shape_numel(shape) == static_cast<int64_t>(values.size()),
            "tensor: shape " + shape_str(shape) + " does not match " +
                std::to_string(values.size()) + " values");
    auto n = std::make_shared<detail::Node>();
    n->shape = std::move(shape);
    n->values = std::move(values);
    n->requires_grad = requires_grad;
    n_ = std::move(n);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    const int64_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<float>(static_cast<size_t>(n), 0.0f), requires_grad);
}

Tensor Tensor::full(Shape shape, float v) {
    const int64_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<float>(static_cast<size_t>(n), v));
}

Tensor Tensor::scalar(float v) { return Tensor(Shape{}, std::vector<float>{v}); }

Tensor Tensor::glorot(int64_t fan_in, int64_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<float> vals(static_cast<size_t>(fan_in * fan_out));
    for (auto& v : vals) v = static_cast<float>(rng.uniform(-limit, limit));
    return Tensor(Shape{fan_in, fan_out}, std::move(vals), /*requires_grad=*/true);
}

const Shape& Tensor::shape() const {
    require(defined(), "tensor: use of undefined tensor");
    return n_->shape;
}

int64_t Tensor::numel() const { return n_ ? n_->numel() : 0; }

int64_t Tensor::rows() const { return rank() >= 1 ? shape()[0] : 1; }

int64_t Tensor::cols() const { return rank() >= 2 ? shape()[1] : 1; }

std::span<const float> Tensor::values() const {
    require(defined(), "tensor: use of undefined tensor");
    return {n_->values.data(), n_->values.size()};
}

std::span<float> Tensor::raw_values() {
    require(defined(), "tensor: use of undefined tensor");
    return {n_->values.data(), n_->values.size()};
}

float Tensor::item() const {
    require(numel() == 1, "tensor: item() on non-scalar " + shape_str(shape()));
    return n_->values[0];
}

float Tensor::at(int64_t i) const { return values()[static_cast<size_t>(i)]; }

float Tensor::at(int64_t r, int64_t c) const {
    return values()[static_cast<size_t>(r * cols() + c)];
}

bool Tensor::requires_grad() const { return defined() && n_->requires_grad; }

void Tensor::set_requires_grad(bool b) {
    require(defined(), "tensor: set_requires_grad on undefined tensor");
    n_->requires_grad = b;
    if (!b) n_->grad.clear();
}

bool Tensor::tracked() const { return defined() && n_->wants_grad(); }

bool Tensor::has_grad() const { return defined() && !n_->grad.empty(); }

std::span<const float> Tensor::grad() const {
    require(has_grad(), "tensor: grad() but no gradient has been accumulated");
    return {n_->grad.data(), n_->grad.size()};
}

void Tensor::reset_grad() {
    if (defined()) n_->grad.clear();
}

Tensor Tensor::detach() const {
    require(defined(), "tensor: detach of undefined tensor");
    return Tensor(n_->shape, n_->values, /*requires_grad=*/false);
}

// --- Tape -------------------------------------------------------------------

Tape& Tape::active() {
    thread_local Tape tape;
    return tape;
}

void Tape::record(std::shared_ptr<detail::Node> output, std::function<void()> fn) {
    entries_.push_back(Entry{std::move(output), std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
    require(loss.defined() && loss.numel() == 1,
            "backward: loss must be a scalar, got " + shape_str(loss.shape()));
    require(loss.tracked(), "backward: loss is not part of the recorded graph");
    loss.node()->grad_buf()[0] += 1.0f;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) it->fn();
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }

NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

// --- matmul -----------------------------------------------------------------

namespace {

// C(m,n) = A(m,k) * B(k,n); B is transposed up front so both dots run over
// contiguous memory, accumulating in double.
void mm_nn(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n) {
    std::vector<float> bt(static_cast<size_t>(n * k));
    for (int64_t l = 0; l < k; ++l)
        for (int64_t j = 0; j < n; ++j) bt[static_cast<size_t>(j * k + l)] = b[l * n + j];
    for (int64_t i = 0; i < m; ++i) {
        const float* arow = a + i * k;
        for (int64_t j = 0; j < n; ++j) {
            const float* brow = bt.data() + j * k;
            double acc = 0.0;
            for (int64_t l = 0; l < k; ++l) acc += static_cast<double>(arow[l]) * brow[l];
            c[i * n + j] = static_cast<float>(acc);
        }
    }
}

// dst(m,k) += G(m,n) * B(k,n)^T  (dot over the shared n dimension)
void mm_nt_acc(const float* g, const float* b, float* dst, int64_t m, int64_t n, int64_t k) {
    for (int64_t i = 0; i < m; ++i) {
        const float* grow = g + i * n;
        for (int64_t l = 0; l < k; ++l) {
            const float* brow = b + l * n;
            double acc = 0.0;
            for (int64_t j = 0; j < n; ++j) acc += static_cast<double>(grow[j]) * brow[j];
            dst[i * k + l] += static_cast<float>(acc);
        }
    }
}

// dst(k,n) += A(m,k)^T * G(m,n)
void mm_tn_acc(const float* a, const float* g, float* dst, int64_t m, int64_t k, int64_t n) {
    std::vector<double> tmp(static_cast<size_t>(k * n), 0.0);
    for (int64_t i = 0; i < m; ++i) {
        const float* arow = a + i * k;
        const float* grow = g + i * n;
        for (int64_t l = 0; l < k; ++l) {
            const double av = arow[l];
            if (av == 0.0) continue;
            double* trow = tmp.data() + l * n;
            for (int64_t j = 0; j < n; ++j) trow[j] += av * grow[j];
        }
    }
    for (int64_t i = 0; i < k * n; ++i) dst[i] += static_cast<float>(tmp[static_cast<size_t>(i)]);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.rank() == 2 && b.rank() == 2,
            "matmul: expects rank-2 operands, got " + shape_str(a.shape()) + " and " +
                shape_str(b.shape()));
    require(a.cols() == b.rows(), "matmul: inner dimensions disagree: " + shape_str(a.shape()) +
                                      " x " + shape_str(b.shape()));
    const int64_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out = Tensor::zeros({m, n});
    mm_nn(a.values().data(), b.values().data(), out.raw_values().data(), m, k, n);
    if (tracking({&a, &b})) {
        NodePtr an = a.node(), bn = b.node(), on = out.node();
        record(out, [an, bn, on, m, k, n]() {
            if (on->grad.empty()) return;
            const float* gy = on->grad.data();
            if (an->wants_grad())
                mm_nt_acc(gy, bn->values.data(), an->grad_buf().data(), m, n, k);
            if (bn->wants_grad())
                mm_tn_acc(an->values.data(), gy, bn->grad_buf().data(), m, k, n);
        });
    }
    return out;
}

// --- elementwise binary -----------------------------------------------------

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                        " vs " + shape_str(b.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    const auto av = a.values(), bv = b.values();
    std::vector<float> out(av.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    Tensor y(a.shape(), std::move(out));
    if (tracking({&a, &b})) {
        NodePtr an = a.node(), bn = b.node(), on = y.node();
        record(y, [an, bn, on]() {
            if (on->grad.empty()) return;
            axpy_grad(an, on->grad.data());
            axpy_grad(bn, on->grad.data());
        });
    }
    return y;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    const auto av = a.values(), bv = b.values();
    std::vector<float> out(av.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
    Tensor y(a.shape(), std::move(out));
    if (tracking({&a, &b})) {
        NodePtr an = a.node(), bn = b.node(), on = y.node();
        record(y, [an, bn, on]() {
            if (on->grad.empty()) return;
            axpy_grad(an, on->grad.data());
            axpy_grad(bn, on->grad.data(), -1.0);
        });
    }
    return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    const auto av = a.values(), bv = b.values();
    std::vector<float> out(av.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    Tensor y(a.shape(), std::move(out));
    if (tracking({&a, &b})) {
        NodePtr an = a.node(), bn = b.node(), on = y.node();
        record(y, [an, bn, on]() {
            if (on->grad.empty()) return;
            const float* gy = on->grad.data();
            if (an->wants_grad()) {
                auto& ga = an->grad_buf();
                for (size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i] * bn->values[i];
            }
            if (bn->wants_grad()) {
                auto& gb = bn->grad_buf();
                for (size_t i = 0; i < gb.size(); ++i) gb[i] += gy[i] * an->values[i];
            }
        });
    }
    return y;
}

Tensor scale(const Tensor& x, double c) {
    const auto xv = x.values();
    std::vector<float> out(xv.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(c * xv[i]);
    Tensor y(x.shape(), std::move(out));
    if (tracking({&x})) {
        NodePtr xn = x.node(), on = y.node();
        record(y, [xn, on, c]() {
            if (on->grad.empty()) return;
            axpy_grad(xn, on->grad.data(), c);
        });
    }
    return y;
}

Tensor add_scalar(const Tensor& x, double c) {
    const auto xv = x.values();
    std::vector<float> out(xv.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(xv[i] + c);
    Tensor y(x.shape(), std::move(out));
    if (tracking({&x})) {
        NodePtr xn = x.node(), on = y.node();
        record(y, [xn, on]() {
            if (on->grad.empty()) return;
            axpy_grad(xn, on->grad.data());
        });
    }
    return y;
}

Tensor add_rowvec(const Tensor& x, const Tensor& b) {
    require(x.rank() == 2 && b.rank() == 1 && b.shape()[0] == x.cols(),
            "add_rowvec: incompatible shapes " + shape_str(x.shape()) + " and " +
                shape_str(b.shape()));
    const int64_t n = x.rows(), f = x.cols();
    const auto xv = x.values(), bv = b.values();
    std::vector<float> out(xv.size());
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < f; ++j)
            out[static_cast<size_t>(i * f + j)] = xv[static_cast<size_t>(i * f + j)] + bv[static_cast<size_t>(j)];
    Tensor y(x.shape(), std::move(out));
    if (tracking({&x, &b})) {
        NodePtr xn = x.node(), bn = b.node(), on = y.node();
        record(y, [xn, bn, on, n, f]() {
            if (on->grad.empty()) return;
            const float* gy = on->grad.data();
            axpy_grad(xn, gy);
            if (bn->wants_grad()) {
                auto& gb = bn->grad_buf();
                for (int64_t j = 0; j < f; ++j) {
                    double acc = 0.0;
                    for (int64_t i = 0; i < n; ++i) acc += gy[i * f + j];
                    gb[static_cast<size_t>(j)] += static_cast<float>(acc);
                }
            }
        });
    }
    return y;
}

Tensor div_by_scalar(const Tensor& x, const Tensor& s) {
    require(s.numel() == 1, "div_by_scalar: divisor must be a scalar tensor");
    const double sv = s.values()[0];
    require(std::isfinite(sv) && sv != 0.0, "div_by_scalar: divisor must be finite and nonzero");
    const auto xv = x.values();
    std::vector<float> out(xv.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(xv[i] / sv);
    Tensor y(x.shape(), std::move(out));
    if (tracking({&x, &s})) {
        NodePtr xn = x.node(), sn = s.node(), on = y.node();
        record(y, [xn, sn, on, sv]() {
            if (on->grad.empty()) return;
            const float* gy = on->grad.data();
            axpy_grad(xn, gy, 1.0 / sv);
            if (sn->wants_grad()) {
                double acc = 0.0;
                for (size_t i = 0; i < xn->values.size(); ++i)
                    acc += static_cast<double>(gy[i]) * (-static_cast<double>(xn->values[i]) / (sv * sv));
                sn->grad_buf()[0] += static_cast<float>(acc);
            }
        });
    }
    return y;
}

// --- elementwise unary ------------------------------------------------------

Tensor exp(const Tensor& x) {
    const auto xv = x.values();
    std::vector<float> out(xv.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(std::exp(static_cast<double>(xv[i])));
    Tensor y(x.shape(), std::move(out));
    if (tracking({&x})) {
        NodePtr xn = x.node(), on = y.node();
        record(y, [xn, on]() {
            if (on->grad.empty() || !xn->wants_grad()) return;
            auto& gx = xn->grad_buf();
            for (size_t i = 0; i < gx.size(); ++i) gx[i] += on->grad[i] * on->values[i];
        });
    }
    return y;
}

namespace {
constexpr float kLogClamp = 1e-10f;
}

Tensor log(const Tensor& x) {
    const auto xv = x.values();
    std::vector<float> out(xv.size());
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = std::log(std::max(xv[i], kLogClamp));
    Tensor y(x.shape(), std::move(out));
    if (tracking({&x})) {
        NodePtr xn = x.node(), on = y.node();
        record(y, [xn, on]() {
            if (on->grad.empty() || !xn->wants_grad()) return;
            auto& gx = xn->grad_buf();
            for (size_t i = 0; i < gx.size(); ++i)
                gx[i] += on->grad[i] / std::max(xn->values[i], kLogClamp);
        });
    }
    return y;
}

Tensor sqrt(const Tensor& x) {
    const auto xv = x.values();
    std::vector<float> out(xv.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(std::max(xv[i], 0.0f));
    Tensor y(x.shape(), std::move(out));
    if (tracking({&x})) {
        NodePtr xn = x.node(), on = y.node();
        record(y, [xn, on]() {
            if (on->grad.empty() || !xn->wants_grad()) return;
            auto& gx = xn->grad_buf();
            for (size_t i = 0; i < gx.size(); ++i)
                gx[i] += on->grad[i] * 0.5f / std::max(on->values[i], 1e-12f);
        });
    }
    return y;
}

Tensor abs(const Tensor& x) {
    const auto xv = x.values();
    std::vector<float> out(xv.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::fabs(xv[i]);
    Tensor y(x.shape(), std::move(out));
    if (tracking({&x})) {
        NodePtr xn = x.node(), on = y.node();
        record(y, [xn, on]() {
            if (on->grad.empty() || !xn->wants_grad()) return;
            auto& gx = xn->grad_buf();
            for (size_t i = 0; i < gx.size(); ++i) {
                const float s = xn->values[i] > 0.0f ? 1.0f : (xn->values[i] < 0.0f ? -1.0f : 0.0f);
                gx[i] += on->grad[i] * s;
            }
        });
    }
    return y;
}

Tensor pow_int(const Tensor& x, int d) {
    require(d >= 1, "pow_int: exponent must be >= 1");
    const auto xv = x.values();
    std::vector<float> out(xv.size());
    for (size_t i = 0; i < out.size(); ++i) {
        double p = 1.0;
        for (int r = 0; r < d; ++r) p *= xv[i];
        out[i] = static_cast<float>(p);
    }
    Tensor y(x.shape(), std::move(out));
    if (tracking({&x})) {
        NodePtr xn = x.node(), on = y.node();
        record(y, [xn, on, d]() {
            if (on->grad.empty() || !xn->wants_grad()) return;
            auto& gx = xn->grad_buf();
            for (size_t i = 0; i < gx.size(); ++i) {
                double p = 1.0;
                for (int r = 0; r + 1 < d; ++r) p *= xn->values[i];
                gx[i] += static_cast<float>(on->grad[i] * d * p);
            }
        });
    }
    return y;
}

Tensor sigmoid(const Tensor& x) {
    const auto xv = x.values();
    std::vector<float> out(xv.size());
    for (size_t i = 0; i < out.size(); ++i) {
        const double v = xv[i];
        out[i] = static_cast<float>(v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                             : std::exp(v) / (1.0 + std::exp(v)));
    }
    Tensor y(x.shape(), std::move(out));
    if (tracking({&x})) {
        NodePtr xn = x.node(), on = y.node();
        record(y, [xn, on]() {
            if (on->grad.empty() || !xn->wants_grad()) return;
            auto& gx = xn->grad_buf();
            for (size_t i = 0; i < gx.size(); ++i) {
                const float s = on->values[i];
                gx[i] += on->grad[i] * s * (1.0f - s);
            }
        });
    }
    return y;
}

Tensor leaky_relu(const Tensor& x, double slope) {
    const auto xv = x.values();
    std::vector<float> out(xv.size());
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = xv[i] >= 0.0f ? xv[i] : static_cast<float>(slope * xv[i]);
    Tensor y(x.shape(), std::move(out));
    if (tracking({&x})) {
        NodePtr xn = x.node(), on = y.node();
        record(y, [xn, on, slope]() {
            if (on->grad.empty() || !xn->wants_grad()) return;
            auto& gx = xn->grad_buf();
            for (size_t i = 0; i < gx.size(); ++i)
                gx[i] += on->grad[i] * (xn->values[i] >= 0.0f ? 1.0f : static_cast<float>(slope));
        });
    }
    return y;
}

Tensor elu(const Tensor& x) {
    const auto xv = x.values();
    std::vector<float> out(xv.size());
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = xv[i] > 0.0f ? xv[i] : static_cast<float>(std::expm1(static_cast<double>(xv[i])));
    Tensor y(x.shape(), std::move(out));
    if (tracking({&x})) {
        NodePtr xn = x.node(), on = y.node();
        record(y, [xn, on]() {
            if (on->grad.empty() || !xn->wants_grad()) return;
            auto& gx = xn->grad_buf();
            for (size_t i = 0; i < gx.size(); ++i)
                gx[i] += on->grad[i] * (xn->values[i] > 0.0f ? 1.0f : on->values[i] + 1.0f);
        });
    }
    return y;
}

// --- structure ops ----------------------------------------------------------

Tensor concat_cols(const std::vector<Tensor>& parts) {
    require(!parts.empty(), "concat_cols: no inputs");
    const int64_t n = parts[0].rows();
    int64_t total = 0;
    for (const Tensor& p : parts) {
        require(p.rank() == 2 && p.rows() == n,
                "concat_cols: all inputs must be rank-2 with equal rows");
        total += p.cols();
    }
    std::vector<float> out(static_cast<size_t>(n * total));
    int64_t off = 0;
    for (const Tensor& p : parts) {
        const int64_t f = p.cols();
        const auto pv = p.values();
        for (int64_t i = 0; i < n; ++i)
            std::copy_n(pv.data() + i * f, f, out.data() + i * total + off);
        off += f;
    }
    Tensor y({n, total}, std::move(out));
    bool track = false;
    for (const Tensor& p : parts) track = track || tracking({&p});
    if (track) {
        std::vector<NodePtr> ins;
        std::vector<int64_t> widths;
        for (const Tensor& p : parts) {
            ins.push_back(p.node());
            widths.push_back(p.cols());
        }
        NodePtr on = y.node();
        record(y, [ins, widths, on, n, total]() {
            if (on->grad.empty()) return;
            const float* gy = on->grad.data();
            int64_t off2 = 0;
            for (size_t pi = 0; pi < ins.size(); ++pi) {
                const int64_t f = widths[pi];
                if (ins[pi]->wants_grad()) {
                    auto& gx = ins[pi]->grad_buf();
                    for (int64_t i = 0; i < n; ++i)
                        for (int64_t j = 0; j < f; ++j)
                            gx[static_cast<size_t>(i * f + j)] += gy[i * total + off2 + j];
                }
                off2 += f;
            }
        });
    }
    return y;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) { return concat_cols(std::vector<Tensor>{a, b}); }

Tensor slice_cols(const Tensor& x, int64_t lo, int64_t hi) {
    require(x.rank() == 2 && lo >= 0 && lo < hi && hi <= x.cols(),
            "slice_cols: bad range [" + std::to_string(lo) + "," + std::to_string(hi) +
                ") for " + shape_str(x.shape()));
    const int64_t n = x.rows(), f = x.cols(), w = hi - lo;
    const auto xv = x.values();
    std::vector<float> out(static_cast<size_t>(n * w));
    for (int64_t i = 0; i < n; ++i)
        std::copy_n(xv.data() + i * f + lo, w, out.data() + i * w);
    Tensor y({n, w}, std::move(out));
    if (tracking({&x})) {
        NodePtr xn = x.node(), on = y.node();
        record(y, [xn, on, n, f, w, lo]() {
            if (on->grad.empty() || !xn->wants_grad()) return;
            auto& gx = xn->grad_buf();
            const float* gy = on->grad.data();
            for (int64_t i = 0; i < n; ++i)
                for (int64_t j = 0; j < w; ++j)
                    gx[static_cast<size_t>(i * f + lo + j)] += gy[i * w + j];
        });
    }
    return y;
}

Tensor reshape(const Tensor& x, Shape shape) {
    require(shape_numel(shape) == x.numel(), "reshape: element count mismatch " +
                                                 shape_str(x.shape()) + " -> " + shape_str(shape));
    Tensor y(std::move(shape), std::vector<float>(x.values().begin(), x.values().end()));
    if (tracking({&x})) {
        NodePtr xn = x.node(), on = y.node();
        record(y, [xn, on]() {
            if (on->grad.empty()) return;
            axpy_grad(xn, on->grad.data());
        });
    }
    return y;
}

Tensor flatten(const Tensor& x) { return reshape(x, Shape{x.numel()}); }

// --- reductions -------------------------------------------------------------

Tensor sum(const Tensor& x) {
    double acc = 0.0;
    for (float v : x.values()) acc += v;
    Tensor y = Tensor::scalar(static_cast<float>(acc));
    if (tracking({&x})) {
        NodePtr xn = x.node(), on = y.node();
        record(y, [xn, on]() {
            if (on->grad.empty() || !xn->wants_grad()) return;
            const float g = on->grad[0];
            auto& gx = xn->grad_buf();
            for (auto& v : gx) v += g;
        });
    }
    return y;
}

Tensor mean(const Tensor& x) {
    require(x.numel() > 0, "mean: empty tensor");
    return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor row_sum(const Tensor& x) {
    require(x.rank() == 2, "row_sum: expects rank-2 input");
    const int64_t n = x.rows(), f = x.cols();
    const auto xv = x.values();
    std::vector<float> out(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int64_t j = 0; j < f; ++j) acc += xv[static_cast<size_t>(i * f + j)];
        out[static_cast<size_t>(i)] = static_cast<float>(acc);
    }
    Tensor y({n}, std::move(out));
    if (tracking({&x})) {
        NodePtr xn = x.node(), on = y.node();
        record(y, [xn, on, n, f]() {
            if (on->grad.empty() || !xn->wants_grad()) return;
            auto& gx = xn->grad_buf();
            for (int64_t i = 0; i < n; ++i)
                for (int64_t j = 0; j < f; ++j) gx[static_cast<size_t>(i * f + j)] += on->grad[static_cast<size_t>(i)];
        });
    }
    return y;
}

Tensor col_max(const Tensor& x) {
    require(x.rank() == 2 && x.rows() >= 1, "col_max: expects rank-2 input with >= 1 row");
    const int64_t n = x.rows(), f = x.cols();
    const auto xv = x.values();
    std::vector<float> out(static_cast<size_t>(f));
    auto arg = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(f), 0);
    for (int64_t j = 0; j < f; ++j) {
        float best = xv[static_cast<size_t>(j)];
        int64_t bi = 0;
        for (int64_t i = 1; i < n; ++i) {
            const float v = xv[static_cast<size_t>(i * f + j)];
            if (v > best) {
                best = v;
                bi = i;
            }
        }
        out[static_cast<size_t>(j)] = best;
        (*arg)[static_cast<size_t>(j)] = bi;
    }
    Tensor y({f}, std::move(out));
    if (tracking({&x})) {
        NodePtr xn = x.node(), on = y.node();
        record(y, [xn, on, arg, f]() {
            if (on->grad.empty() || !xn->wants_grad()) return;
            auto& gx = xn->grad_buf();
            for (int64_t j = 0; j < f; ++j)
                gx[static_cast<size_t>((*arg)[static_cast<size_t>(j)] * f + j)] += on->grad[static_cast<size_t>(j)];
        });
    }
    return y;
}

Tensor col_mean(const Tensor& x) {
    require(x.rank() == 2 && x.rows() >= 1, "col_mean: expects rank-2 input with >= 1 row");
    const int64_t n = x.rows(), f = x.cols();
    const auto xv = x.values();
    std::vector<float> out(static_cast<size_t>(f));
    for (int64_t j = 0; j < f; ++j) {
        double acc = 0.0;
        for (int64_t i = 0; i < n; ++i) acc += xv[static_cast<size_t>(i * f + j)];
        out[static_cast<size_t>(j)] = static_cast<float>(acc / static_cast<double>(n));
    }
    Tensor y({f}, std::move(out));
    if (tracking({&x})) {
        NodePtr xn = x.node(), on = y.node();
        record(y, [xn, on, n, f]() {
            if (on->grad.empty() || !xn->wants_grad()) return;
            auto& gx = xn->grad_buf();
            const float inv = 1.0f / static_cast<float>(n);
            for (int64_t i = 0; i < n; ++i)
                for (int64_t j = 0; j < f; ++j)
                    gx[static_cast<size_t>(i * f + j)] += on->grad[static_cast<size_t>(j)] * inv;
        });
    }
    return y;
}

// --- gather / scatter -------------------------------------------------------

Tensor gather_rows(const Tensor& x, const std::vector<int64_t>& idx) {
    require(x.rank() == 2, "gather_rows: expects rank-2 input");
    const int64_t n = x.rows(), f = x.cols();
    for (int64_t i : idx)
        require(i >= 0 && i < n, "gather_rows: index " + std::to_string(i) + " out of range [0," +
                                     std::to_string(n) + ")");
    const int64_t m = static_cast<int64_t>(idx.size());
    const auto xv = x.values();
    std::vector<float> out(static_cast<size_t>(m * f));
    for (int64_t e = 0; e < m; ++e)
        std::copy_n(xv.data() + idx[static_cast<size_t>(e)] * f, f, out.data() + e * f);
    Tensor y({m, f}, std::move(out));
    if (tracking({&x})) {
        NodePtr xn = x.node(), on = y.node();
        auto ids = std::make_shared<std::vector<int64_t>>(idx);
        record(y, [xn, on, ids, f]() {
            if (on->grad.empty() || !xn->wants_grad()) return;
            auto& gx = xn->grad_buf();
            const float* gy = on->grad.data();
            for (size_t e = 0; e < ids->size(); ++e)
                for (int64_t j = 0; j < f; ++j)
                    gx[static_cast<size_t>((*ids)[e] * f + j)] += gy[e * static_cast<size_t>(f) + static_cast<size_t>(j)];
        });
    }
    return y;
}

Tensor scatter_add_rows(const Tensor& x, const std::vector<int64_t>& idx, int64_t n) {
    require(x.rank() == 2, "scatter_add_rows: expects rank-2 input");
    require(static_cast<int64_t>(idx.size()) == x.rows(),
            "scatter_add_rows: index count does not match rows");
    for (int64_t i : idx)
        require(i >= 0 && i < n, "scatter_add_rows: index " + std::to_string(i) +
                                     " out of range [0," + std::to_string(n) + ")");
    const int64_t m = x.rows(), f = x.cols();
    const auto xv = x.values();
    std::vector<float> out(static_cast<size_t>(n * f), 0.0f);
    for (int64_t e = 0; e < m; ++e)
        for (int64_t j = 0; j < f; ++j)
            out[static_cast<size_t>(idx[static_cast<size_t>(e)] * f + j)] += xv[static_cast<size_t>(e * f + j)];
    Tensor y({n, f}, std::move(out));
    if (tracking({&x})) {
        NodePtr xn = x.node(), on = y.node();
        auto ids = std::make_shared<std::vector<int64_t>>(idx);
        record(y, [xn, on, ids, f]() {
            if (on->grad.empty() || !xn->wants_grad()) return;
            auto& gx = xn->grad_buf();
            const float* gy = on->grad.data();
            for (size_t e = 0; e < ids->size(); ++e)
                for (int64_t j = 0; j < f; ++j)
                    gx[e * static_cast<size_t>(f) + static_cast<size_t>(j)] += gy[(*ids)[e] * f + j];
        });
    }
    return y;
}

Tensor scale_rows(const Tensor& x, const Tensor& s) {
    require(x.rank() == 2 && s.rank() == 1 && s.shape()[0] == x.rows(),
            "scale_rows: incompatible shapes " + shape_str(x.shape()) + " and " +
                shape_str(s.shape()));
    const int64_t m = x.rows(), f = x.cols();
    const auto xv = x.values(), sv = s.values();
    std::vector<float> out(xv.size());
    for (int64_t e = 0; e < m; ++e)
        for (int64_t j = 0; j < f; ++j)
            out[static_cast<size_t>(e * f + j)] = xv[static_cast<size_t>(e * f + j)] * sv[static_cast<size_t>(e)];
    Tensor y(x.shape(), std::move(out));
    if (tracking({&x, &s})) {
        NodePtr xn = x.node(), sn = s.node(), on = y.node();
        record(y, [xn, sn, on, m, f]() {
            if (on->grad.empty()) return;
            const float* gy = on->grad.data();
            if (xn->wants_grad()) {
                auto& gx = xn->grad_buf();
                for (int64_t e = 0; e < m; ++e)
                    for (int64_t j = 0; j < f; ++j)
                        gx[static_cast<size_t>(e * f + j)] += gy[e * f + j] * sn->values[static_cast<size_t>(e)];
            }
            if (sn->wants_grad()) {
                auto& gs = sn->grad_buf();
                for (int64_t e = 0; e < m; ++e) {
                    double acc = 0.0;
                    for (int64_t j = 0; j < f; ++j)
                        acc += static_cast<double>(gy[e * f + j]) * xn->values[static_cast<size_t>(e * f + j)];
                    gs[static_cast<size_t>(e)] += static_cast<float>(acc);
                }
            }
        });
    }
    return y;
}

// --- segment ops ------------------------------------------------------------

namespace {

void check_segments(const std::vector<int64_t>& seg, int64_t count, int64_t n, const char* op) {
    require(static_cast<int64_t>(seg.size()) == count,
            std::string(op) + ": segment map size does not match input");
    for (int64_t s : seg)
        require(s >= 0 && s < n, std::string(op) + ": segment id " + std::to_string(s) +
                                     " out of range [0," + std::to_string(n) + ")");
}

}  // namespace

Tensor segment_softmax(const Tensor& scores, const std::vector<int64_t>& segment_of, int64_t n) {
    require(scores.rank() == 1, "segment_softmax: scores must be rank-1");
    const int64_t e_count = scores.shape()[0];
    check_segments(segment_of, e_count, n, "segment_softmax");
    const auto sv = scores.values();
    for (float v : sv)
        if (!std::isfinite(v)) throw NumericError("segment_softmax: non-finite score");

    std::vector<double> seg_max(static_cast<size_t>(n), -std::numeric_limits<double>::infinity());
    for (int64_t e = 0; e < e_count; ++e) {
        const size_t s = static_cast<size_t>(segment_of[static_cast<size_t>(e)]);
        seg_max[s] = std::max(seg_max[s], static_cast<double>(sv[static_cast<size_t>(e)]));
    }
    std::vector<double> ex(static_cast<size_t>(e_count));
    std::vector<double> seg_sum(static_cast<size_t>(n), 0.0);
    for (int64_t e = 0; e < e_count; ++e) {
        const size_t s = static_cast<size_t>(segment_of[static_cast<size_t>(e)]);
        ex[static_cast<size_t>(e)] = std::exp(static_cast<double>(sv[static_cast<size_t>(e)]) - seg_max[s]);
        seg_sum[s] += ex[static_cast<size_t>(e)];
    }
    std::vector<float> out(static_cast<size_t>(e_count));
    for (int64_t e = 0; e < e_count; ++e) {
        const size_t s = static_cast<size_t>(segment_of[static_cast<size_t>(e)]);
        out[static_cast<size_t>(e)] = static_cast<float>(ex[static_cast<size_t>(e)] / seg_sum[s]);
    }
    Tensor y({e_count}, std::move(out));
    if (tracking({&scores})) {
        NodePtr xn = scores.node(), on = y.node();
        auto seg = std::make_shared<std::vector<int64_t>>(segment_of);
        record(y, [xn, on, seg, n]() {
            if (on->grad.empty() || !xn->wants_grad()) return;
            const float* gy = on->grad.data();
            const float* yv = on->values.data();
            std::vector<double> seg_dot(static_cast<size_t>(n), 0.0);
            for (size_t e = 0; e < seg->size(); ++e)
                seg_dot[static_cast<size_t>((*seg)[e])] += static_cast<double>(gy[e]) * yv[e];
            auto& gx = xn->grad_buf();
            for (size_t e = 0; e < seg->size(); ++e)
                gx[e] += static_cast<float>(yv[e] * (static_cast<double>(gy[e]) - seg_dot[static_cast<size_t>((*seg)[e])]));
        });
    }
    return y;
}

Tensor segment_max_rows(const Tensor& x, const std::vector<int64_t>& segment_of, int64_t n) {
    require(x.rank() == 2, "segment_max_rows: expects rank-2 input");
    const int64_t m = x.rows(), f = x.cols();
    check_segments(segment_of, m, n, "segment_max_rows");
    const auto xv = x.values();
    std::vector<float> out(static_cast<size_t>(n * f), 0.0f);
    auto arg = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(n * f), -1);
    for (int64_t e = 0; e < m; ++e) {
        const int64_t s = segment_of[static_cast<size_t>(e)];
        for (int64_t j = 0; j < f; ++j) {
            const size_t o = static_cast<size_t>(s * f + j);
            const float v = xv[static_cast<size_t>(e * f + j)];
            if ((*arg)[o] < 0 || v > out[o]) {
                out[o] = v;
                (*arg)[o] = e;
            }
        }
    }
    Tensor y({n, f}, std::move(out));
    if (tracking({&x})) {
        NodePtr xn = x.node(), on = y.node();
        record(y, [xn, on, arg, f, n]() {
            if (on->grad.empty() || !xn->wants_grad()) return;
            auto& gx = xn->grad_buf();
            const float* gy = on->grad.data();
            for (int64_t s = 0; s < n; ++s)
                for (int64_t j = 0; j < f; ++j) {
                    const int64_t e = (*arg)[static_cast<size_t>(s * f + j)];
                    if (e >= 0) gx[static_cast<size_t>(e * f + j)] += gy[s * f + j];
                }
        });
    }
    return y;
}

// --- row softmax family -----------------------------------------------------

Tensor softmax_rows(const Tensor& x) {
    require(x.rank() == 2, "softmax_rows: expects rank-2 input");
    const int64_t n = x.rows(), c = x.cols();
    const auto xv = x.values();
    std::vector<float> out(xv.size());
    for (int64_t i = 0; i < n; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int64_t j = 0; j < c; ++j) mx = std::max(mx, static_cast<double>(xv[static_cast<size_t>(i * c + j)]));
        double s = 0.0;
        for (int64_t j = 0; j < c; ++j) s += std::exp(static_cast<double>(xv[static_cast<size_t>(i * c + j)]) - mx);
        for (int64_t j = 0; j < c; ++j)
            out[static_cast<size_t>(i * c + j)] =
                static_cast<float>(std::exp(static_cast<double>(xv[static_cast<size_t>(i * c + j)]) - mx) / s);
    }
    Tensor y(x.shape(), std::move(out));
    if (tracking({&x})) {
        NodePtr xn = x.node(), on = y.node();
        record(y, [xn, on, n, c]() {
            if (on->grad.empty() || !xn->wants_grad()) return;
            auto& gx = xn->grad_buf();
            const float* gy = on->grad.data();
            const float* yv = on->values.data();
            for (int64_t i = 0; i < n; ++i) {
                double dot = 0.0;
                for (int64_t j = 0; j < c; ++j) dot += static_cast<double>(gy[i * c + j]) * yv[i * c + j];
                for (int64_t j = 0; j < c; ++j)
                    gx[static_cast<size_t>(i * c + j)] +=
                        static_cast<float>(yv[i * c + j] * (static_cast<double>(gy[i * c + j]) - dot));
            }
        });
    }
    return y;
}

Tensor log_softmax_rows(const Tensor& x) {
    require(x.rank() == 2, "log_softmax_rows: expects rank-2 input");
    const int64_t n = x.rows(), c = x.cols();
    const auto xv = x.values();
    std::vector<float> out(xv.size());
    for (int64_t i = 0; i < n; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int64_t j = 0; j < c; ++j) mx = std::max(mx, static_cast<double>(xv[static_cast<size_t>(i * c + j)]));
        double s = 0.0;
        for (int64_t j = 0; j < c; ++j) s += std::exp(static_cast<double>(xv[static_cast<size_t>(i * c + j)]) - mx);
        const double lse = mx + std::log(s);
        for (int64_t j = 0; j < c; ++j)
            out[static_cast<size_t>(i * c + j)] = static_cast<float>(static_cast<double>(xv[static_cast<size_t>(i * c + j)]) - lse);
    }
    Tensor y(x.shape(), std::move(out));
    if (tracking({&x})) {
        NodePtr xn = x.node(), on = y.node();
        record(y, [xn, on, n, c]() {
            if (on->grad.empty() || !xn->wants_grad()) return;
            auto& gx = xn->grad_buf();
            const float* gy = on->grad.data();
            const float* yv = on->values.data();
            for (int64_t i = 0; i < n; ++i) {
                double gsum = 0.0;
                for (int64_t j = 0; j < c; ++j) gsum += gy[i * c + j];
                for (int64_t j = 0; j < c; ++j)
                    gx[static_cast<size_t>(i * c + j)] +=
                        static_cast<float>(gy[i * c + j] - std::exp(static_cast<double>(yv[i * c + j])) * gsum);
            }
        });
    }
    return y;
}

Tensor pick_per_row(const Tensor& x, const std::vector<int64_t>& cols) {
    require(x.rank() == 2, "pick_per_row: expects rank-2 input");
    const int64_t n = x.rows(), c = x.cols();
    require(static_cast<int64_t>(cols.size()) == n, "pick_per_row: one column index per row required");
    for (int64_t j : cols)
        require(j >= 0 && j < c, "pick_per_row: column " + std::to_string(j) + " out of range");
    const auto xv = x.values();
    std::vector<float> out(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = xv[static_cast<size_t>(i * c + cols[static_cast<size_t>(i)])];
    Tensor y({n}, std::move(out));
    if (tracking({&x})) {
        NodePtr xn = x.node(), on = y.node();
        auto ids = std::make_shared<std::vector<int64_t>>(cols);
        record(y, [xn, on, ids, c]() {
            if (on->grad.empty() || !xn->wants_grad()) return;
            auto& gx = xn->grad_buf();
            for (size_t i = 0; i < ids->size(); ++i)
                gx[i * static_cast<size_t>(c) + static_cast<size_t>((*ids)[i])] += on->grad[i];
        });
    }
    return y;
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& targets) {
    check_same_shape(logits, targets, "bce_with_logits");
    const auto xv = logits.values(), tv = targets.values();
    for (float t : tv)
        require(t == 0.0f || t == 1.0f, "bce_with_logits: targets must be exactly 0 or 1");
    double acc = 0.0;
    for (size_t i = 0; i < xv.size(); ++i) {
        const double x = xv[i], t = tv[i];
        acc += std::max(x, 0.0) - x * t + std::log1p(std::exp(-std::fabs(x)));
    }
    const double n = static_cast<double>(xv.size());
    Tensor y = Tensor::scalar(static_cast<float>(acc / n));
    if (tracking({&logits})) {
        NodePtr xn = logits.node(), tn = targets.node(), on = y.node();
        record(y, [xn, tn, on, n]() {
            if (on->grad.empty() || !xn->wants_grad()) return;
            const float g = on->grad[0];
            auto& gx = xn->grad_buf();
            for (size_t i = 0; i < gx.size(); ++i) {
                const double x = xn->values[i];
                const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
                gx[i] += static_cast<float>(g * (s - tn->values[i]) / n);
            }
        });
    }
    return y;
}

Tensor dropout(const Tensor& x, double rate, Rng& rng) {
    require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0,1)");
    if (rate == 0.0) return x;
    const auto xv = x.values();
    auto mask = std::make_shared<std::vector<float>>(xv.size());
    const float keep_scale = static_cast<float>(1.0 / (1.0 - rate));
    std::vector<float> out(xv.size());
    for (size_t i = 0; i < xv.size(); ++i) {
        (*mask)[i] = rng.uniform() >= rate ? keep_scale : 0.0f;
        out[i] = xv[i] * (*mask)[i];
    }
    Tensor y(x.shape(), std::move(out));
    if (tracking({&x})) {
        NodePtr xn = x.node(), on = y.node();
        record(y, [xn, on, mask]() {
            if (on->grad.empty() || !xn->wants_grad()) return;
            auto& gx = xn->grad_buf();
            for (size_t i = 0; i < gx.size(); ++i) gx[i] += on->grad[i] * (*mask)[i];
        });
    }
    return y;
}

// --- gradient check ----------------------------------------------------------

double gradient_check(const std::function<Tensor()>& f, Tensor x, double step) {
    require(x.requires_grad(), "gradient_check: x must require grad");
    require(step >= 1e-5 && step <= 1e-2, "gradient_check: step must be in [1e-5, 1e-2]");
    Tape& tape = Tape::active();
    tape.clear();
    x.reset_grad();
    Tensor loss = f();
    require(loss.numel() == 1, "gradient_check: f must return a scalar");
    tape.backward(loss);
    std::vector<float> analytic(x.numel(), 0.0f);
    if (x.has_grad()) {
        auto g = x.grad();
        analytic.assign(g.begin(), g.end());
    }
    tape.clear();
    x.reset_grad();

    double worst = 0.0;
    NoGradGuard ng;
    auto vals = x.raw_values();
    for (size_t i = 0; i < vals.size(); ++i) {
        const float orig = vals[i];
        vals[i] = static_cast<float>(orig + step);
        const double fp = f().item();
        vals[i] = static_cast<float>(orig - step);
        const double fm = f().item();
        vals[i] = orig;
        const double numeric = (fp - fm) / (2.0 * step);
        const double err = std::fabs(analytic[i] - numeric) / std::max(1.0, std::fabs(numeric));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace lspgcn
