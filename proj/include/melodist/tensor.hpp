#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <memory>
#include <vector>

#include "melodist/common.hpp"
#include "melodist/rng.hpp"

namespace melodist {

template <typename T>
class Tape;

namespace detail {

template <typename T>
struct TensorImpl {
    std::vector<size_t> shape;
    std::vector<T> values;
    std::vector<T> grad;  // empty until backward touches this tensor
    bool requires_grad = false;

    size_t numel() const { return values.size(); }
    void ensure_grad() {
        if (grad.empty()) grad.assign(values.size(), T(0));
    }
};

}  // namespace detail

// Shared-handle n-d array. Values are immutable through the op API; only the
// optimizer/EMA paths write through values_mut(), and never while the tensor
// participates in an unconsumed tape. A default-constructed Tensor is the
// null sentinel (no shape, no data), used for "conditioning absent".
template <typename T>
class Tensor {
public:
    Tensor() : impl_(std::make_shared<detail::TensorImpl<T>>()) {}

    Tensor(std::vector<size_t> shape, std::vector<T> values, bool requires_grad = false)
        : impl_(std::make_shared<detail::TensorImpl<T>>()) {
        size_t n = 1;
        for (size_t d : shape) {
            if (d == 0) fail("Tensor: zero dimension in shape ", shape_str(shape));
            n *= d;
        }
        if (n != values.size())
            fail("Tensor: shape ", shape_str(shape), " needs ", n, " values, got ", values.size());
        impl_->shape = std::move(shape);
        impl_->values = std::move(values);
        impl_->requires_grad = requires_grad;
    }

    static Tensor zeros(std::vector<size_t> shape) {
        size_t n = 1;
        for (size_t d : shape) n *= d;
        return Tensor(std::move(shape), std::vector<T>(n, T(0)));
    }

    static Tensor full(std::vector<size_t> shape, T v) {
        size_t n = 1;
        for (size_t d : shape) n *= d;
        return Tensor(std::move(shape), std::vector<T>(n, v));
    }

    static Tensor scalar(T v) { return Tensor({1}, {v}); }

    bool defined() const { return !impl_->shape.empty(); }
    const std::vector<size_t>& shape() const { return impl_->shape; }
    size_t ndim() const { return impl_->shape.size(); }
    size_t numel() const { return impl_->values.size(); }
    size_t dim(size_t i) const { return impl_->shape.at(i); }

    const std::vector<T>& values() const { return impl_->values; }
    std::vector<T>& values_mut() { return impl_->values; }

    bool requires_grad() const { return impl_->requires_grad; }
    Tensor& set_requires_grad(bool b) {
        impl_->requires_grad = b;
        return *this;
    }

    bool has_grad() const { return !impl_->grad.empty(); }
    const std::vector<T>& grad() const {
        if (!has_grad()) fail("Tensor: grad requested but none populated");
        return impl_->grad;
    }
    void zero_grad() { impl_->grad.assign(impl_->values.size(), T(0)); }
    void clear_grad() { impl_->grad.clear(); }
    // allocates (zeroed) if absent; for optimizers mutating grads in place
    std::vector<T>& grad_mut() {
        if (!has_grad()) zero_grad();
        return impl_->grad;
    }

    T item() const {
        if (numel() != 1) fail("Tensor: item() on non-scalar shape ", shape_str(shape()));
        return impl_->values[0];
    }

    T at(std::initializer_list<size_t> idx) const {
        if (idx.size() != ndim()) fail("Tensor: at() rank mismatch");
        size_t off = 0;
        size_t d = 0;
        for (size_t i : idx) {
            if (i >= impl_->shape[d]) fail("Tensor: at() index out of range");
            off = off * impl_->shape[d] + i;
            ++d;
        }
        return impl_->values[off];
    }

    Tensor clone() const {
        Tensor t(impl_->shape, impl_->values, impl_->requires_grad);
        return t;
    }

    const std::shared_ptr<detail::TensorImpl<T>>& impl() const { return impl_; }

private:
    std::shared_ptr<detail::TensorImpl<T>> impl_;
};

// Ordered record of executed differentiable ops. Replayed once, backward, in
// reverse execution order (a valid reverse topological order by construction).
template <typename T>
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // RAII activation; ops record only while a tape is active on this thread.
    class Scope {
    public:
        explicit Scope(Tape& t) : prev_(active_) { active_ = &t; }
        ~Scope() { active_ = prev_; }
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        Tape* prev_;
    };

    static Tape* active() { return active_; }

    void record(std::function<void()> backward_step) { steps_.push_back(std::move(backward_step)); }

    size_t size() const { return steps_.size(); }
    bool consumed() const { return consumed_; }

    void backward(const Tensor<T>& loss) {
        if (consumed_) fail("Tape: backward on a consumed tape");
        if (loss.numel() != 1)
            fail("Tape: backward requires a scalar loss, got shape ", shape_str(loss.shape()));
        consumed_ = true;
        auto li = loss.impl();
        li->ensure_grad();
        li->grad[0] += T(1);
        for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
    }

private:
    std::vector<std::function<void()>> steps_;
    bool consumed_ = false;
    static thread_local Tape* active_;
};

template <typename T>
thread_local Tape<T>* Tape<T>::active_ = nullptr;

namespace detail {

template <typename T>
bool should_record(std::initializer_list<const Tensor<T>*> ins) {
    if (!Tape<T>::active()) return false;
    for (const Tensor<T>* t : ins)
        if (t->requires_grad()) return true;
    return false;
}

template <typename T>
void check_finite(const char* op, const std::vector<T>& out) {
    for (T v : out)
        if (!std::isfinite(static_cast<double>(v))) fail(op, ": non-finite value in output");
}

// Broadcast plan: numpy-style singleton expansion. Shapes are aligned at the
// trailing dimension; each aligned dim must match or be 1 in one operand.
struct BinPlan {
    std::vector<size_t> out_shape;
    std::vector<size_t> dims;  // padded rank
    std::vector<size_t> astr, bstr;
    size_t n = 1;
    bool same = false;
};

inline BinPlan make_bin_plan(const char* op, const std::vector<size_t>& a,
                             const std::vector<size_t>& b) {
    BinPlan p;
    if (a == b) {
        p.out_shape = a;
        p.same = true;
        p.n = 1;
        for (size_t d : a) p.n *= d;
        return p;
    }
    size_t rank = std::max(a.size(), b.size());
    std::vector<size_t> pa(rank, 1), pb(rank, 1);
    std::copy(a.begin(), a.end(), pa.begin() + (rank - a.size()));
    std::copy(b.begin(), b.end(), pb.begin() + (rank - b.size()));
    p.dims.resize(rank);
    for (size_t d = 0; d < rank; ++d) {
        if (pa[d] == pb[d])
            p.dims[d] = pa[d];
        else if (pa[d] == 1)
            p.dims[d] = pb[d];
        else if (pb[d] == 1)
            p.dims[d] = pa[d];
        else
            fail(op, ": shapes ", shape_str(a), " and ", shape_str(b),
                 " are not broadcast-compatible");
    }
    p.out_shape = p.dims;
    p.astr.assign(rank, 0);
    p.bstr.assign(rank, 0);
    size_t sa = 1, sb = 1;
    for (size_t d = rank; d-- > 0;) {
        p.astr[d] = (pa[d] == 1 && p.dims[d] > 1) ? 0 : sa;
        p.bstr[d] = (pb[d] == 1 && p.dims[d] > 1) ? 0 : sb;
        sa *= pa[d];
        sb *= pb[d];
    }
    p.n = 1;
    for (size_t d : p.dims) p.n *= d;
    return p;
}

// fn(out_index, a_offset, b_offset), row-major over the output
template <typename Fn>
void for_each_bc(const BinPlan& p, Fn&& fn) {
    if (p.same) {
        for (size_t i = 0; i < p.n; ++i) fn(i, i, i);
        return;
    }
    size_t rank = p.dims.size();
    std::vector<size_t> idx(rank, 0);
    size_t ao = 0, bo = 0;
    for (size_t i = 0; i < p.n; ++i) {
        fn(i, ao, bo);
        for (size_t d = rank; d-- > 0;) {
            if (++idx[d] < p.dims[d]) {
                ao += p.astr[d];
                bo += p.bstr[d];
                break;
            }
            idx[d] = 0;
            ao -= p.astr[d] * (p.dims[d] - 1);
            bo -= p.bstr[d] * (p.dims[d] - 1);
        }
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and linear ops. Each op validates shapes, checks the output for
// non-finite values, and records its backward step when an input requires
// grad and a tape is active.
// ---------------------------------------------------------------------------

namespace detail {

template <typename T, typename Combine>
Tensor<T> binary_forward(const char* op, const Tensor<T>& a, const Tensor<T>& b, Combine f,
                         BinPlan* plan_out) {
    BinPlan plan = make_bin_plan(op, a.shape(), b.shape());
    std::vector<T> out(plan.n);
    const auto& av = a.values();
    const auto& bv = b.values();
    for_each_bc(plan, [&](size_t i, size_t ai, size_t bi) { out[i] = f(av[ai], bv[bi]); });
    check_finite(op, out);
    if (plan_out) *plan_out = plan;
    return Tensor<T>(plan.out_shape, std::move(out));
}

}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    detail::BinPlan plan;
    Tensor<T> out = detail::binary_forward<T>("add", a, b, [](T x, T y) { return x + y; }, &plan);
    if (detail::should_record<T>({&a, &b})) {
        out.set_requires_grad(true);
        Tape<T>::active()->record([plan, ai = a.impl(), bi = b.impl(), oi = out.impl()]() {
            if (oi->grad.empty()) return;
            if (ai->requires_grad) ai->ensure_grad();
            if (bi->requires_grad) bi->ensure_grad();
            detail::for_each_bc(plan, [&](size_t i, size_t aj, size_t bj) {
                T g = oi->grad[i];
                if (ai->requires_grad) ai->grad[aj] += g;
                if (bi->requires_grad) bi->grad[bj] += g;
            });
        });
    }
    return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    detail::BinPlan plan;
    Tensor<T> out = detail::binary_forward<T>("sub", a, b, [](T x, T y) { return x - y; }, &plan);
    if (detail::should_record<T>({&a, &b})) {
        out.set_requires_grad(true);
        Tape<T>::active()->record([plan, ai = a.impl(), bi = b.impl(), oi = out.impl()]() {
            if (oi->grad.empty()) return;
            if (ai->requires_grad) ai->ensure_grad();
            if (bi->requires_grad) bi->ensure_grad();
            detail::for_each_bc(plan, [&](size_t i, size_t aj, size_t bj) {
                T g = oi->grad[i];
                if (ai->requires_grad) ai->grad[aj] += g;
                if (bi->requires_grad) bi->grad[bj] -= g;
            });
        });
    }
    return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::BinPlan plan;
    Tensor<T> out = detail::binary_forward<T>("mul", a, b, [](T x, T y) { return x * y; }, &plan);
    if (detail::should_record<T>({&a, &b})) {
        out.set_requires_grad(true);
        Tape<T>::active()->record([plan, ai = a.impl(), bi = b.impl(), oi = out.impl()]() {
            if (oi->grad.empty()) return;
            if (ai->requires_grad) ai->ensure_grad();
            if (bi->requires_grad) bi->ensure_grad();
            detail::for_each_bc(plan, [&](size_t i, size_t aj, size_t bj) {
                T g = oi->grad[i];
                if (ai->requires_grad) ai->grad[aj] += g * bi->values[bj];
                if (bi->requires_grad) bi->grad[bj] += g * ai->values[aj];
            });
        });
    }
    return out;
}

template <typename T>
Tensor<T> scalar_mul(const Tensor<T>& a, double s) {
    std::vector<T> out(a.numel());
    const auto& av = a.values();
    const T sv = static_cast<T>(s);
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * sv;
    detail::check_finite("scalar_mul", out);
    Tensor<T> o(a.shape(), std::move(out));
    if (detail::should_record<T>({&a})) {
        o.set_requires_grad(true);
        Tape<T>::active()->record([sv, ai = a.impl(), oi = o.impl()]() {
            if (oi->grad.empty()) return;
            ai->ensure_grad();
            for (size_t i = 0; i < ai->grad.size(); ++i) ai->grad[i] += sv * oi->grad[i];
        });
    }
    return o;
}

namespace detail {

template <typename T, typename FwdFn, typename GradFn>
Tensor<T> unary_op(const char* op, const Tensor<T>& a, FwdFn f, GradFn dfdy_from) {
    // GradFn(a_value, y_value) -> local derivative
    std::vector<T> out(a.numel());
    const auto& av = a.values();
    for (size_t i = 0; i < out.size(); ++i) out[i] = f(av[i]);
    check_finite(op, out);
    Tensor<T> o(a.shape(), std::move(out));
    if (should_record<T>({&a})) {
        o.set_requires_grad(true);
        Tape<T>::active()->record([dfdy_from, ai = a.impl(), oi = o.impl()]() {
            if (oi->grad.empty()) return;
            ai->ensure_grad();
            for (size_t i = 0; i < ai->grad.size(); ++i)
                ai->grad[i] += oi->grad[i] * dfdy_from(ai->values[i], oi->values[i]);
        });
    }
    return o;
}

}  // namespace detail

template <typename T>
Tensor<T> tanh(const Tensor<T>& a) {
    return detail::unary_op<T>(
        "tanh", a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
    return detail::unary_op<T>(
        "sigmoid", a, [](T x) { return T(1) / (T(1) + std::exp(-x)); },
        [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
    return detail::unary_op<T>(
        "relu", a, [](T x) { return x > T(0) ? x : T(0); },
        [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

// x * sigmoid(x), fused
template <typename T>
Tensor<T> silu(const Tensor<T>& a) {
    return detail::unary_op<T>(
        "silu", a,
        [](T x) {
            T s = T(1) / (T(1) + std::exp(-x));
            return x * s;
        },
        [](T x, T) {
            T s = T(1) / (T(1) + std::exp(-x));
            return s * (T(1) + x * (T(1) - s));
        });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.ndim() != 2 || b.ndim() != 2)
        fail("matmul: expects 2-d operands, got ", shape_str(a.shape()), " and ",
             shape_str(b.shape()));
    const size_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2)
        fail("matmul: inner dimensions differ, ", shape_str(a.shape()), " vs ",
             shape_str(b.shape()));
    std::vector<T> out(m * n, T(0));
    const auto& av = a.values();
    const auto& bv = b.values();
    for (size_t i = 0; i < m; ++i)
        for (size_t l = 0; l < k; ++l) {
            const T ail = av[i * k + l];
            const T* brow = bv.data() + l * n;
            T* orow = out.data() + i * n;
            for (size_t j = 0; j < n; ++j) orow[j] += ail * brow[j];
        }
    detail::check_finite("matmul", out);
    Tensor<T> o({m, n}, std::move(out));
    if (detail::should_record<T>({&a, &b})) {
        o.set_requires_grad(true);
        Tape<T>::active()->record([m, k, n, ai = a.impl(), bi = b.impl(), oi = o.impl()]() {
            if (oi->grad.empty()) return;
            const auto& go = oi->grad;
            if (ai->requires_grad) {
                ai->ensure_grad();
                for (size_t i = 0; i < m; ++i)
                    for (size_t l = 0; l < k; ++l) {
                        T acc = T(0);
                        const T* grow = go.data() + i * n;
                        const T* brow = bi->values.data() + l * n;
                        for (size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                        ai->grad[i * k + l] += acc;
                    }
            }
            if (bi->requires_grad) {
                bi->ensure_grad();
                for (size_t i = 0; i < m; ++i)
                    for (size_t l = 0; l < k; ++l) {
                        const T ail = ai->values[i * k + l];
                        const T* grow = go.data() + i * n;
                        T* brow = bi->grad.data() + l * n;
                        for (size_t j = 0; j < n; ++j) brow[j] += ail * grow[j];
                    }
            }
        });
    }
    return o;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
    T acc = T(0);
    for (T v : a.values()) acc += v;
    if (!std::isfinite(static_cast<double>(acc))) fail("sum: non-finite value in output");
    Tensor<T> o = Tensor<T>::scalar(acc);
    if (detail::should_record<T>({&a})) {
        o.set_requires_grad(true);
        Tape<T>::active()->record([ai = a.impl(), oi = o.impl()]() {
            if (oi->grad.empty()) return;
            ai->ensure_grad();
            const T g = oi->grad[0];
            for (size_t i = 0; i < ai->grad.size(); ++i) ai->grad[i] += g;
        });
    }
    return o;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
    if (a.numel() == 0) fail("mean: empty tensor");
    T acc = T(0);
    for (T v : a.values()) acc += v;
    acc /= static_cast<T>(a.numel());
    if (!std::isfinite(static_cast<double>(acc))) fail("mean: non-finite value in output");
    Tensor<T> o = Tensor<T>::scalar(acc);
    if (detail::should_record<T>({&a})) {
        o.set_requires_grad(true);
        Tape<T>::active()->record([ai = a.impl(), oi = o.impl()]() {
            if (oi->grad.empty()) return;
            ai->ensure_grad();
            const T g = oi->grad[0] / static_cast<T>(ai->values.size());
            for (size_t i = 0; i < ai->grad.size(); ++i) ai->grad[i] += g;
        });
    }
    return o;
}

// sum of squared entries
template <typename T>
Tensor<T> squared_l2(const Tensor<T>& a) {
    T acc = T(0);
    for (T v : a.values()) acc += v * v;
    if (!std::isfinite(static_cast<double>(acc))) fail("squared_l2: non-finite value in output");
    Tensor<T> o = Tensor<T>::scalar(acc);
    if (detail::should_record<T>({&a})) {
        o.set_requires_grad(true);
        Tape<T>::active()->record([ai = a.impl(), oi = o.impl()]() {
            if (oi->grad.empty()) return;
            ai->ensure_grad();
            const T g = oi->grad[0];
            for (size_t i = 0; i < ai->grad.size(); ++i)
                ai->grad[i] += T(2) * ai->values[i] * g;
        });
    }
    return o;
}

// Non-causal dilated 1-d convolution, cross-correlation convention (no kernel
// flip): y[o,f] = sum_{i,k} w[o,i,k] * x[i, f + (k-(K-1)/2)*dilation], with
// symmetric zero padding so the frame count is preserved.
template <typename T>
Tensor<T> conv1d_noncausal(const Tensor<T>& x, const Tensor<T>& w, int dilation) {
    if (x.ndim() != 2) fail("conv1d_noncausal: input must be [channels x frames], got ",
                            shape_str(x.shape()));
    if (w.ndim() != 3) fail("conv1d_noncausal: kernel must be [out x in x k], got ",
                            shape_str(w.shape()));
    const size_t cin = x.dim(0), frames = x.dim(1);
    const size_t cout = w.dim(0), win = w.dim(1), K = w.dim(2);
    if (win != cin)
        fail("conv1d_noncausal: kernel input channels ", win, " != input channels ", cin);
    if (K % 2 == 0) fail("conv1d_noncausal: kernel size must be odd, got ", K);
    if (dilation < 1) fail("conv1d_noncausal: dilation must be >= 1, got ", dilation);
    const long half = static_cast<long>(K / 2);
    const long F = static_cast<long>(frames);
    std::vector<T> out(cout * frames, T(0));
    const auto& xv = x.values();
    const auto& wv = w.values();
    for (size_t o = 0; o < cout; ++o)
        for (size_t i = 0; i < cin; ++i)
            for (size_t k = 0; k < K; ++k) {
                const T wk = wv[(o * cin + i) * K + k];
                const long off = (static_cast<long>(k) - half) * dilation;
                const long f0 = std::max(0L, -off);
                const long f1 = std::min(F, F - off);
                const T* xrow = xv.data() + i * frames;
                T* orow = out.data() + o * frames;
                for (long f = f0; f < f1; ++f) orow[f] += wk * xrow[f + off];
            }
    detail::check_finite("conv1d_noncausal", out);
    Tensor<T> y({cout, frames}, std::move(out));
    if (detail::should_record<T>({&x, &w})) {
        y.set_requires_grad(true);
        Tape<T>::active()->record(
            [cin, cout, K, frames, dilation, half, F, xi = x.impl(), wi = w.impl(),
             yi = y.impl()]() {
                if (yi->grad.empty()) return;
                const auto& gy = yi->grad;
                if (xi->requires_grad) {
                    xi->ensure_grad();
                    for (size_t o = 0; o < cout; ++o)
                        for (size_t i = 0; i < cin; ++i)
                            for (size_t k = 0; k < K; ++k) {
                                const T wk = wi->values[(o * cin + i) * K + k];
                                const long off = (static_cast<long>(k) - half) * dilation;
                                const long f0 = std::max(0L, -off);
                                const long f1 = std::min(F, F - off);
                                const T* grow = gy.data() + o * frames;
                                T* xg = xi->grad.data() + i * frames;
                                for (long f = f0; f < f1; ++f) xg[f + off] += wk * grow[f];
                            }
                }
                if (wi->requires_grad) {
                    wi->ensure_grad();
                    for (size_t o = 0; o < cout; ++o)
                        for (size_t i = 0; i < cin; ++i)
                            for (size_t k = 0; k < K; ++k) {
                                const long off = (static_cast<long>(k) - half) * dilation;
                                const long f0 = std::max(0L, -off);
                                const long f1 = std::min(F, F - off);
                                const T* grow = gy.data() + o * frames;
                                const T* xrow = xi->values.data() + i * frames;
                                T acc = T(0);
                                for (long f = f0; f < f1; ++f) acc += grow[f] * xrow[f + off];
                                wi->grad[(o * cin + i) * K + k] += acc;
                            }
                }
            });
    }
    return y;
}

// Concatenate 2-d tensors along dim 0 (rows); all parts share the column count.
template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) fail("concat_rows: no parts");
    size_t cols = 0, rows = 0;
    for (const auto& p : parts) {
        if (p.ndim() != 2) fail("concat_rows: parts must be 2-d, got ", shape_str(p.shape()));
        if (cols == 0)
            cols = p.dim(1);
        else if (p.dim(1) != cols)
            fail("concat_rows: column mismatch, ", p.dim(1), " vs ", cols);
        rows += p.dim(0);
    }
    std::vector<T> out;
    out.reserve(rows * cols);
    for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
    Tensor<T> o({rows, cols}, std::move(out));
    bool rec = false;
    if (Tape<T>::active())
        for (const auto& p : parts)
            if (p.requires_grad()) rec = true;
    if (rec) {
        o.set_requires_grad(true);
        std::vector<std::shared_ptr<detail::TensorImpl<T>>> impls;
        for (const auto& p : parts) impls.push_back(p.impl());
        Tape<T>::active()->record([impls, oi = o.impl()]() {
            if (oi->grad.empty()) return;
            size_t off = 0;
            for (auto& pi : impls) {
                const size_t n = pi->values.size();
                if (pi->requires_grad) {
                    pi->ensure_grad();
                    for (size_t i = 0; i < n; ++i) pi->grad[i] += oi->grad[off + i];
                }
                off += n;
            }
        });
    }
    return o;
}

// Row lookup into a [n x d] table; returns a [d x 1] column. Gradient
// scatters into the selected row.
template <typename T>
Tensor<T> embedding_row(const Tensor<T>& table, size_t id) {
    if (table.ndim() != 2) fail("embedding_row: table must be 2-d, got ", shape_str(table.shape()));
    const size_t n = table.dim(0), d = table.dim(1);
    if (id >= n) fail("embedding_row: id ", id, " out of range [0,", n, ")");
    std::vector<T> out(table.values().begin() + id * d, table.values().begin() + (id + 1) * d);
    Tensor<T> o({d, 1}, std::move(out));
    if (detail::should_record<T>({&table})) {
        o.set_requires_grad(true);
        Tape<T>::active()->record([id, d, ti = table.impl(), oi = o.impl()]() {
            if (oi->grad.empty()) return;
            ti->ensure_grad();
            for (size_t r = 0; r < d; ++r) ti->grad[id * d + r] += oi->grad[r];
        });
    }
    return o;
}

// i.i.d. standard normal entries; advances the rng
template <typename T>
Tensor<T> randn(Rng& rng, std::vector<size_t> shape) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    std::vector<T> v(n);
    for (size_t i = 0; i < n; ++i) v[i] = static_cast<T>(rng.normal());
    return Tensor<T>(std::move(shape), std::move(v));
}

}  // namespace melodist
