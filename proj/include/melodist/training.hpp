#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "melodist/denoiser.hpp"
#include "melodist/features.hpp"
#include "melodist/schedule.hpp"
#include "melodist/tensor.hpp"

namespace melodist {

template <typename T>
Tensor<T> to_precision(const Tensor<double>& src) {
    if (!src.defined()) return Tensor<T>();
    std::vector<T> v(src.numel());
    for (size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(src.values()[i]);
    return Tensor<T>(src.shape(), std::move(v));
}

// Produces the lower-noise point x̂_{t_n} from (x_{t_{n+1}}, t_{n+1}).
// Production: one teacher Euler step. Tests: the exact trajectory map.
template <typename T>
using SolverStepFn =
    std::function<Tensor<T>(const Tensor<T>& x_next, T t_next, T t_n, const Tensor<T>& cond)>;

template <typename T>
Tensor<T> add_noise(const Tensor<T>& x0, T t, Rng& rng) {
    if (t < T(0)) fail("add_noise: t must be >= 0, got ", t);
    Tensor<T> z = randn<T>(rng, x0.shape());
    return add(x0, scalar_mul(z, t));
}

template <typename T>
struct BatchItem {
    Tensor<T> x0;  // [bins x frames], normalized

    // raw conditioning streams; cond is assembled inside the loss so that
    // projection gradients flow (null content = conditioning disabled)
    Tensor<T> content;
    std::vector<double> f0;
    std::vector<double> loud;
    std::vector<uint8_t> vuv;
    size_t singer_id = 0;
};

// Builds the conditioning input for one item, or a null tensor when disabled.
template <typename T>
Tensor<T> item_cond(const DenoiserParams<T>& params, const BatchItem<T>& it) {
    if (!it.content.defined()) return Tensor<T>();
    return build_cond(params, it.content, it.f0, it.vuv, it.loud, it.singer_id);
}

// Weighted denoising loss: mean over batch elements of lambda(t) * (D - x0)^2,
// with x_t = x0 + t z drawn per item.
template <typename T>
Tensor<T> teacher_loss(const DenoiseFn<T>& D, const std::vector<BatchItem<T>>& batch,
                       const std::vector<Tensor<T>>& conds, const std::vector<T>& ts, Rng& rng,
                       const Precond<T>& p) {
    if (batch.empty()) fail("teacher_loss: empty batch");
    if (ts.size() != batch.size() || conds.size() != batch.size())
        fail("teacher_loss: batch/cond/t size mismatch");
    Tensor<T> total;
    size_t n_elems = 0;
    for (size_t i = 0; i < batch.size(); ++i) {
        const T t = ts[i];
        try {
            Tensor<T> x_t = add_noise(batch[i].x0, t, rng);
            Tensor<T> term =
                scalar_mul(squared_l2(sub(D(x_t, t, conds[i]), batch[i].x0)), loss_weight(t, p));
            total = total.defined() ? add(total, term) : term;
        } catch (const Error& e) {
            fail("teacher_loss: item ", i, " at t=", t, ": ", e.what());
        }
        n_elems += batch[i].x0.numel();
    }
    if (!std::isfinite(static_cast<double>(total.item())))
        fail("teacher_loss: non-finite loss");
    return scalar_mul(total, T(1) / static_cast<T>(n_elems));
}

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-2;
};

template <typename T>
struct AdamWState {
    DenoiserParams<T> m, v;
    uint64_t step = 0;
};

// Decoupled-weight-decay Adam with bias correction. Parameters that carry no
// gradient this step (frozen or unused) are left untouched. All gradients are
// validated finite before anything is mutated, so a bad step changes nothing.
template <typename T>
void adamw_step(DenoiserParams<T>& params, AdamWState<T>& st, T lr,
                const AdamWConfig& cfg = {}) {
    for (auto& [key, p] : params)
        if (p.requires_grad() && p.has_grad())
            for (T g : p.grad())
                if (!std::isfinite(static_cast<double>(g)))
                    fail("adamw_step: non-finite gradient in ", key);
    ++st.step;
    const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
    const T bc1 = T(1) - std::pow(b1, static_cast<T>(st.step));
    const T bc2 = T(1) - std::pow(b2, static_cast<T>(st.step));
    for (auto& [key, p] : params) {
        if (!p.requires_grad() || !p.has_grad()) continue;
        auto mit = st.m.find(key);
        if (mit == st.m.end()) {
            st.m[key] = Tensor<T>::zeros(p.shape());
            st.v[key] = Tensor<T>::zeros(p.shape());
            mit = st.m.find(key);
        }
        auto& m = mit->second.values_mut();
        auto& v = st.v[key].values_mut();
        auto& w = p.values_mut();
        const auto& g = p.grad();
        for (size_t i = 0; i < w.size(); ++i) {
            m[i] = b1 * m[i] + (T(1) - b1) * g[i];
            v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
            const T mhat = m[i] / bc1;
            const T vhat = v[i] / bc2;
            w[i] -= lr * (mhat / (std::sqrt(vhat) + static_cast<T>(cfg.eps)) +
                          static_cast<T>(cfg.weight_decay) * w[i]);
        }
    }
}

template <typename T>
void zero_all_grads(DenoiserParams<T>& params) {
    for (auto& [key, p] : params) p.clear_grad();
}

// Deep copy; requires_grad set per-parameter by the predicate.
template <typename T, typename Pred>
DenoiserParams<T> clone_params(const DenoiserParams<T>& src, Pred trainable) {
    DenoiserParams<T> out;
    for (const auto& [key, p] : src) {
        Tensor<T> c(p.shape(), p.values());
        c.set_requires_grad(trainable(key));
        out[key] = c;
    }
    return out;
}

template <typename T>
struct TrainState {
    WaveNetConfig cfg;
    DenoiserParams<T> params;
    AdamWState<T> opt;
    Precond<T> precond;
    NoiseLevelDist<T> noise;
    T lr;
    Rng rng;
    uint64_t step = 0;
};

// One teacher update; returns the loss value that was stepped on.
template <typename T>
T train_step(TrainState<T>& st, const std::vector<BatchItem<T>>& batch) {
    zero_all_grads(st.params);
    T loss_value;
    {
        Tape<T> tape;
        typename Tape<T>::Scope scope(tape);
        std::vector<T> ts(batch.size());
        for (auto& t : ts) t = sample_train_noise_level(st.rng, st.noise);
        std::vector<Tensor<T>> conds(batch.size());
        for (size_t i = 0; i < batch.size(); ++i) conds[i] = item_cond(st.params, batch[i]);
        Tensor<T> loss = teacher_loss<T>(network_denoise_fn(st.cfg, st.params, st.precond), batch,
                                         conds, ts, st.rng, st.precond);
        loss_value = loss.item();
        tape.backward(loss);
    }
    adamw_step(st.params, st.opt, st.lr);
    ++st.step;
    return loss_value;
}

// Single Euler step of the empirical flow from t_next down to t_n:
// x̂ = (t_n/t_next) x + ((t_next − t_n)/t_next) D(x, t_next).
template <typename T>
Tensor<T> euler_solver_step(const DenoiseFn<T>& D, const Tensor<T>& x_next, T t_next, T t_n,
                            const Tensor<T>& cond, T epsilon) {
    if (!(epsilon <= t_n) || !(t_n < t_next))
        fail("euler_solver_step: need epsilon <= t_n < t_next, got t_n=", t_n,
             " t_next=", t_next);
    Tensor<T> d = D(x_next, t_next, cond);
    return add(scalar_mul(x_next, t_n / t_next), scalar_mul(d, (t_next - t_n) / t_next));
}

template <typename T>
SolverStepFn<T> euler_step_fn(DenoiseFn<T> teacher, T epsilon) {
    return [teacher, epsilon](const Tensor<T>& x, T t_next, T t_n, const Tensor<T>& cond) {
        return euler_solver_step(teacher, x, t_next, t_n, cond, epsilon);
    };
}

// EMA: theta_minus <- mu * theta_minus + (1 - mu) * theta, raw values, no tape.
template <typename T>
void ema_update(DenoiserParams<T>& theta_minus, const DenoiserParams<T>& theta, T mu) {
    if (!(mu >= T(0)) || !(mu < T(1))) fail("ema_update: mu must be in [0,1), got ", mu);
    if (theta_minus.size() != theta.size())
        fail("ema_update: parameter sets differ in size");
    auto it = theta.begin();
    for (auto& [key, tm] : theta_minus) {
        if (it->first != key) fail("ema_update: parameter name mismatch at ", key);
        const Tensor<T>& th = it->second;
        if (tm.shape() != th.shape())
            fail("ema_update: shape mismatch at ", key, ": ", shape_str(tm.shape()), " vs ",
                 shape_str(th.shape()));
        auto& a = tm.values_mut();
        const auto& b = th.values();
        for (size_t i = 0; i < a.size(); ++i) a[i] = mu * a[i] + (T(1) - mu) * b[i];
        ++it;
    }
}

// Adjacent-grid-point consistency distance (Alg. 1 inner loss). n is drawn
// uniformly from [1, N-1]; the target branch must be gradient-free (enforced
// upstream by freezing its parameters).
template <typename T>
Tensor<T> consistency_loss(const DenoiseFn<T>& student, const DenoiseFn<T>& target,
                           const SolverStepFn<T>& step_to_tn,
                           const std::vector<BatchItem<T>>& batch,
                           const std::vector<Tensor<T>>& conds, const TimeGrid<T>& grid,
                           Rng& rng) {
    if (batch.empty()) fail("consistency_loss: empty batch");
    if (conds.size() != batch.size()) fail("consistency_loss: batch/cond size mismatch");
    const size_t N = static_cast<size_t>(grid.n_steps);
    if (N < 2) fail("consistency_loss: grid needs at least 2 steps");
    Tensor<T> total;
    for (size_t i = 0; i < batch.size(); ++i) {
        const size_t n = 1 + rng.uniform_int(N - 1);  // 1 .. N-1
        const T t_next = grid.times[n + 1];
        const T t_n = grid.times[n];
        Tensor<T> x_next = add_noise(batch[i].x0, t_next, rng);
        Tensor<T> x_hat = step_to_tn(x_next, t_next, t_n, conds[i]);
        Tensor<T> term =
            squared_l2(sub(student(x_next, t_next, conds[i]), target(x_hat, t_n, conds[i])));
        total = total.defined() ? add(total, term) : term;
    }
    return scalar_mul(total, T(1) / static_cast<T>(batch.size()));
}

template <typename T>
struct DistillState;

template <typename T>
Tensor<T> consistency_loss(const DistillState<T>& ds, const std::vector<BatchItem<T>>& batch,
                           const std::vector<Tensor<T>>& conds, Rng& rng);

template <typename T>
struct DistillState {
    WaveNetConfig cfg;
    DenoiserParams<T> theta;
    DenoiserParams<T> theta_minus;  // EMA target, never on a tape
    DenoiserParams<T> teacher_phi;  // frozen
    AdamWState<T> opt;
    TimeGrid<T> grid;
    Precond<T> precond;
    T mu = T(0.95);
    T lr;
    Rng rng;
    uint64_t step = 0;
};

// theta and theta_minus both start from the teacher; conditioning projections
// stay frozen (shared with the teacher) and only network weights train.
template <typename T>
DistillState<T> init_distill_state(const WaveNetConfig& cfg, const DenoiserParams<T>& teacher,
                                   const TimeGrid<T>& grid, const Precond<T>& p, T lr,
                                   uint64_t seed) {
    DistillState<T> ds;
    ds.cfg = cfg;
    ds.teacher_phi = clone_params(teacher, [](const std::string&) { return false; });
    ds.theta = clone_params(teacher,
                            [](const std::string& k) { return k.rfind("cond/", 0) != 0; });
    ds.theta_minus = clone_params(teacher, [](const std::string&) { return false; });
    ds.grid = grid;
    ds.precond = p;
    ds.lr = lr;
    ds.rng = Rng(seed);
    return ds;
}

// Default wiring: student = theta, target = theta_minus, step = one teacher
// Euler step. rng passed separately so the state stays const here.
template <typename T>
Tensor<T> consistency_loss(const DistillState<T>& ds, const std::vector<BatchItem<T>>& batch,
                           const std::vector<Tensor<T>>& conds, Rng& rng) {
    return consistency_loss<T>(
        network_denoise_fn(ds.cfg, ds.theta, ds.precond),
        network_denoise_fn(ds.cfg, ds.theta_minus, ds.precond),
        euler_step_fn<T>(network_denoise_fn(ds.cfg, ds.teacher_phi, ds.precond),
                         ds.precond.epsilon),
        batch, conds, ds.grid, rng);
}

// One distillation update: consistency loss -> AdamW on theta -> EMA on
// theta_minus. Returns the loss value.
template <typename T>
T distill_step(DistillState<T>& ds, const std::vector<BatchItem<T>>& batch) {
    zero_all_grads(ds.theta);
    T loss_value;
    {
        Tape<T> tape;
        typename Tape<T>::Scope scope(tape);
        std::vector<Tensor<T>> conds(batch.size());
        for (size_t i = 0; i < batch.size(); ++i) conds[i] = item_cond(ds.teacher_phi, batch[i]);
        Tensor<T> loss = consistency_loss<T>(ds, batch, conds, ds.rng);
        loss_value = loss.item();
        tape.backward(loss);
    }
    adamw_step(ds.theta, ds.opt, ds.lr);
    ema_update(ds.theta_minus, ds.theta, ds.mu);
    ++ds.step;
    return loss_value;
}

}  // namespace melodist
