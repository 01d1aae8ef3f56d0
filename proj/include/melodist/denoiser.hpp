#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>

#include "melodist/common.hpp"
#include "melodist/rng.hpp"
#include "melodist/schedule.hpp"
#include "melodist/tensor.hpp"

namespace melodist {

// Denoiser abstraction: the trained network, the EMA copy, and the analytic
// oracles all fit this shape, so losses and samplers take either.
template <typename T>
using DenoiseFn = std::function<Tensor<T>(const Tensor<T>& x, T t, const Tensor<T>& cond)>;

// Dilated-convolution stack configuration. Dilations cycle 1,2,4,...,
// 2^(dilation_cycle-1). cond_dim == 0 disables conditioning entirely (no cond
// kernels are created); that is the scalar-toy-data mode.
struct WaveNetConfig {
    int n_layers = 20;
    int residual_channels = 256;
    int dilation_cycle = 4;
    int kernel_size = 3;
    int cond_dim = 1024;
    int mel_bins = 80;
    int time_embed_dim = 256;

    static WaveNetConfig full(int mel_bins = 80, int cond_dim = 1024) {
        WaveNetConfig c;
        c.mel_bins = mel_bins;
        c.cond_dim = cond_dim;
        return c;
    }
    // small enough that 64-bit finite-difference sweeps stay fast
    static WaveNetConfig tiny(int mel_bins = 1, int cond_dim = 0) {
        WaveNetConfig c;
        c.n_layers = 4;
        c.residual_channels = 16;
        c.dilation_cycle = 2;
        c.kernel_size = 3;
        c.cond_dim = cond_dim;
        c.mel_bins = mel_bins;
        c.time_embed_dim = 8;
        return c;
    }

    void validate() const {
        if (n_layers < 1 || residual_channels < 1 || dilation_cycle < 1 || mel_bins < 1 ||
            time_embed_dim < 1 || cond_dim < 0)
            fail("WaveNetConfig: dimensions must be positive");
        if (kernel_size < 1 || kernel_size % 2 == 0)
            fail("WaveNetConfig: kernel_size must be odd, got ", kernel_size);
        if (time_embed_dim % 2 != 0)
            fail("WaveNetConfig: time_embed_dim must be even, got ", time_embed_dim);
    }
};

template <typename T>
using DenoiserParams = std::map<std::string, Tensor<T>>;

namespace detail {

inline std::string layer_key(int i, const char* suffix) {
    std::ostringstream os;
    os << "layer" << (i < 10 ? "0" : "") << i << "/" << suffix;
    return os.str();
}

}  // namespace detail

// Sinusoidal noise-level embedding: first half sin(c*w_k), second half
// cos(c*w_k), frequencies geometric in [1, 1000]. The 2-layer perceptron that
// maps this to the per-layer conditioning vector lives in f_forward (it owns
// parameters; this is pure input encoding).
template <typename T>
Tensor<T> time_embedding(T c_noise_value, int dim) {
    if (dim < 2 || dim % 2 != 0) fail("time_embedding: dim must be even and >= 2, got ", dim);
    const size_t half = static_cast<size_t>(dim) / 2;
    std::vector<T> v(static_cast<size_t>(dim));
    for (size_t k = 0; k < half; ++k) {
        const T w = half == 1 ? T(1)
                              : std::pow(T(1000), static_cast<T>(k) / static_cast<T>(half - 1));
        v[k] = std::sin(c_noise_value * w);
        v[half + k] = std::cos(c_noise_value * w);
    }
    return Tensor<T>({static_cast<size_t>(dim), 1}, std::move(v));
}

template <typename T>
DenoiserParams<T> init_denoiser_params(const WaveNetConfig& cfg, Rng& rng) {
    cfg.validate();
    const size_t ch = static_cast<size_t>(cfg.residual_channels);
    const size_t bins = static_cast<size_t>(cfg.mel_bins);
    const size_t k = static_cast<size_t>(cfg.kernel_size);
    const size_t ted = static_cast<size_t>(cfg.time_embed_dim);
    const size_t cd = static_cast<size_t>(cfg.cond_dim);

    DenoiserParams<T> p;
    auto w_init = [&](std::vector<size_t> shape, size_t fan_in) {
        Tensor<T> t = randn<T>(rng, std::move(shape));
        const T s = T(1) / std::sqrt(static_cast<T>(fan_in));
        for (auto& v : t.values_mut()) v *= s;
        t.set_requires_grad(true);
        return t;
    };
    auto zeros = [&](std::vector<size_t> shape) {
        Tensor<T> t = Tensor<T>::zeros(std::move(shape));
        t.set_requires_grad(true);
        return t;
    };

    p["input/w"] = w_init({ch, bins, 1}, bins);
    p["input/b"] = zeros({ch, 1});
    p["time_mlp/w1"] = w_init({ted, ted}, ted);
    p["time_mlp/b1"] = zeros({ted, 1});
    p["time_mlp/w2"] = w_init({ted, ted}, ted);
    p["time_mlp/b2"] = zeros({ted, 1});
    for (int i = 0; i < cfg.n_layers; ++i) {
        auto key = [&](const char* s) { return detail::layer_key(i, s); };
        p[key("filter_w")] = w_init({ch, ch, k}, ch * k);
        p[key("filter_b")] = zeros({ch, 1});
        p[key("gate_w")] = w_init({ch, ch, k}, ch * k);
        p[key("gate_b")] = zeros({ch, 1});
        if (cd > 0) {
            p[key("cond_filter_w")] = w_init({ch, cd, 1}, cd);
            p[key("cond_gate_w")] = w_init({ch, cd, 1}, cd);
        }
        p[key("time_filter_w")] = w_init({ch, ted}, ted);
        p[key("time_gate_w")] = w_init({ch, ted}, ted);
        if (i + 1 < cfg.n_layers) {  // last layer feeds the head via skip only
            p[key("res_w")] = w_init({ch, ch, 1}, ch);
            p[key("res_b")] = zeros({ch, 1});
        }
        p[key("skip_w")] = w_init({ch, ch, 1}, ch);
        p[key("skip_b")] = zeros({ch, 1});
    }
    p["output/w1"] = w_init({ch, ch, 1}, ch);
    p["output/b1"] = zeros({ch, 1});
    p["output/w2"] = zeros({bins, ch, 1});  // zero-init: F == 0 at step 0
    p["output/b2"] = zeros({bins, 1});
    return p;
}

// Raw network F(c_in*x, t_embed, cond): gated dilated convolutions with
// per-layer 1x1 conditioning and time injection, skip-accumulated output head.
template <typename T>
Tensor<T> f_forward(const WaveNetConfig& cfg, const DenoiserParams<T>& params,
                    const Tensor<T>& x_scaled, const Tensor<T>& t_embed, const Tensor<T>& cond) {
    cfg.validate();
    if (x_scaled.ndim() != 2 || x_scaled.dim(0) != static_cast<size_t>(cfg.mel_bins))
        fail("f_forward: input must be [", cfg.mel_bins, " x frames], got ",
             shape_str(x_scaled.shape()));
    const size_t frames = x_scaled.dim(1);
    if (cfg.cond_dim > 0) {
        if (!cond.defined()) fail("f_forward: config expects conditioning but none given");
        if (cond.dim(0) != static_cast<size_t>(cfg.cond_dim) || cond.dim(1) != frames)
            fail("f_forward: cond shape ", shape_str(cond.shape()), " does not match [",
                 cfg.cond_dim, " x ", frames, "]");
    } else if (cond.defined()) {
        fail("f_forward: conditioning given but config has cond_dim=0");
    }
    auto P = [&](const std::string& key) -> const Tensor<T>& {
        auto it = params.find(key);
        if (it == params.end()) fail("f_forward: missing parameter ", key);
        return it->second;
    };

    Tensor<T> t_h = silu(add(matmul(P("time_mlp/w1"), t_embed), P("time_mlp/b1")));
    Tensor<T> t_vec = add(matmul(P("time_mlp/w2"), t_h), P("time_mlp/b2"));

    Tensor<T> x = relu(add(conv1d_noncausal(x_scaled, P("input/w"), 1), P("input/b")));

    const T res_scale = T(1) / std::sqrt(T(2));
    Tensor<T> skip_sum;
    for (int i = 0; i < cfg.n_layers; ++i) {
        auto key = [&](const char* s) { return detail::layer_key(i, s); };
        const int dil = 1 << (i % cfg.dilation_cycle);
        Tensor<T> f = add(conv1d_noncausal(x, P(key("filter_w")), dil), P(key("filter_b")));
        Tensor<T> g = add(conv1d_noncausal(x, P(key("gate_w")), dil), P(key("gate_b")));
        if (cfg.cond_dim > 0) {
            f = add(f, conv1d_noncausal(cond, P(key("cond_filter_w")), 1));
            g = add(g, conv1d_noncausal(cond, P(key("cond_gate_w")), 1));
        }
        f = add(f, matmul(P(key("time_filter_w")), t_vec));
        g = add(g, matmul(P(key("time_gate_w")), t_vec));
        Tensor<T> h = mul(tanh(f), sigmoid(g));
        if (i + 1 < cfg.n_layers) {
            Tensor<T> res = add(conv1d_noncausal(h, P(key("res_w")), 1), P(key("res_b")));
            x = scalar_mul(add(x, res), res_scale);
        }
        Tensor<T> s = add(conv1d_noncausal(h, P(key("skip_w")), 1), P(key("skip_b")));
        skip_sum = skip_sum.defined() ? add(skip_sum, s) : s;
    }
    Tensor<T> skip = scalar_mul(skip_sum, T(1) / std::sqrt(static_cast<T>(cfg.n_layers)));
    Tensor<T> y = relu(add(conv1d_noncausal(skip, P("output/w1"), 1), P("output/b1")));
    return add(conv1d_noncausal(y, P("output/w2"), 1), P("output/b2"));
}

// Preconditioned denoiser D(x,t,cond) = c_skip*x + c_out*F(c_in*x, c_noise,
// cond); returns the estimate of clean data. Exact identity at t = epsilon
// because c_out is structurally zero there.
template <typename T>
Tensor<T> denoise(const WaveNetConfig& cfg, const DenoiserParams<T>& params, const Tensor<T>& x_t,
                  T t, const Tensor<T>& cond, const Precond<T>& p) {
    if (t < p.epsilon || t > p.t_max)
        fail("denoise: t=", t, " outside [", p.epsilon, ", ", p.t_max, "]");
    auto c = precond_coeffs(t, p);
    Tensor<T> x_in = scalar_mul(x_t, c.c_in);
    Tensor<T> t_emb = time_embedding<T>(c.c_noise, cfg.time_embed_dim);
    Tensor<T> F = f_forward(cfg, params, x_in, t_emb, cond);
    return add(scalar_mul(x_t, c.c_skip), scalar_mul(F, c.c_out));
}

template <typename T>
DenoiseFn<T> network_denoise_fn(const WaveNetConfig& cfg, const DenoiserParams<T>& params,
                                const Precond<T>& p) {
    // captures params by reference; caller keeps them alive
    return [&params, cfg, p](const Tensor<T>& x, T t, const Tensor<T>& cond) {
        return denoise(cfg, params, x, t, cond, p);
    };
}

}  // namespace melodist
