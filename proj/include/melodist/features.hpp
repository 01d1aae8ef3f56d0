#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "melodist/denoiser.hpp"
#include "melodist/rng.hpp"
#include "melodist/tensor.hpp"

namespace melodist {

// Matrices in this module are channels-first [dim x frames] in memory; disk
// formats are frames-major (see formats.hpp) and transposed on the way in/out.

struct Wave {
    std::vector<double> samples;  // in [-1, 1]
    int sample_rate = 24000;
};

struct MelSpec {
    Tensor<double> m;  // [bins x frames], natural-log magnitudes
    int hop = 128;
    int fft = 512;
    int win = 512;

    size_t bins() const { return m.defined() ? m.dim(0) : 0; }
    size_t frames() const { return m.defined() ? m.dim(1) : 0; }
};

struct FeatureSet {
    Tensor<double> content;        // [content_dim x frames]
    std::vector<double> f0;        // Hz, 0 where unvoiced
    std::vector<uint8_t> vuv;      // 1 = voiced
    std::vector<double> loudness;  // per-frame mean squared sample

    size_t frames() const { return f0.size(); }
};

struct MelParams {
    int sample_rate = 24000;
    int n_fft = 512;
    int win = 512;
    int hop = 128;
    int n_mels = 80;
    double log_floor = 1e-5;
};

// In-place radix-2 FFT; size must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& a);

// Triangular mel filterbank weights [n_mels x (n_fft/2+1)], slaney scale and
// normalization, spanning 0 Hz to Nyquist.
std::vector<std::vector<double>> mel_filterbank(const MelParams& mp);
// Center frequency (Hz) of each filter.
std::vector<double> mel_center_freqs(const MelParams& mp);

MelSpec mel_spectrogram(const Wave& w, const MelParams& mp = {});

// Per-frame mean of squared samples, framing identical to the mel transform
// (reflect-centered, frames = 1 + floor(len/hop)).
std::vector<double> loudness(const Wave& w, int hop, int win);

struct F0Result {
    std::vector<double> f0;
    std::vector<uint8_t> vuv;
};

// Normalized-autocorrelation pitch tracker; voiced iff peak correlation >= 0.5.
F0Result estimate_f0(const Wave& w, int hop, double f_min, double f_max);

// Truncate or edge-pad along frames to exactly `frames` columns.
Tensor<double> reconcile_frames(const Tensor<double>& m, size_t frames);

// Trainable conditioning projections + singer table, stored in the same named-
// parameter map as the network weights.
template <typename T>
void init_cond_params(DenoiserParams<T>& p, Rng& rng, int content_dim, int proj_dim,
                      int n_singers) {
    if (content_dim < 1 || proj_dim < 1 || n_singers < 1)
        fail("init_cond_params: dimensions must be positive");
    auto w_init = [&](std::vector<size_t> shape, size_t fan_in) {
        Tensor<T> t = randn<T>(rng, std::move(shape));
        const T s = T(1) / std::sqrt(static_cast<T>(fan_in));
        for (auto& v : t.values_mut()) v *= s;
        t.set_requires_grad(true);
        return t;
    };
    const size_t P = static_cast<size_t>(proj_dim);
    p["cond/content_w"] = w_init({P, static_cast<size_t>(content_dim)},
                                 static_cast<size_t>(content_dim));
    p["cond/content_b"] = Tensor<T>::zeros({P, 1}).set_requires_grad(true);
    p["cond/pitch_w"] = w_init({P, 2}, 2);
    p["cond/pitch_b"] = Tensor<T>::zeros({P, 1}).set_requires_grad(true);
    p["cond/loud_w"] = w_init({P, 1}, 1);
    p["cond/loud_b"] = Tensor<T>::zeros({P, 1}).set_requires_grad(true);
    p["cond/singer_table"] = w_init({static_cast<size_t>(n_singers), P}, P);
}

// Projected content/pitch/loudness streams plus a broadcast singer embedding,
// concatenated to [4*proj_dim x frames]. Differentiable w.r.t. projections.
// Pitch enters as (ln(1+f0), vuv), loudness as ln(1+loudness).
template <typename T>
Tensor<T> build_cond(const DenoiserParams<T>& params, const Tensor<T>& content,
                     const std::vector<double>& f0, const std::vector<uint8_t>& vuv,
                     const std::vector<double>& loud, size_t singer_id) {
    if (!content.defined() || content.ndim() != 2)
        fail("build_cond: content must be [dim x frames]");
    const size_t frames = content.dim(1);
    if (f0.size() != frames || vuv.size() != frames || loud.size() != frames)
        fail("build_cond: stream frame counts differ (content ", frames, ", f0 ", f0.size(),
             ", vuv ", vuv.size(), ", loudness ", loud.size(), ")");
    auto P = [&](const char* key) -> const Tensor<T>& {
        auto it = params.find(key);
        if (it == params.end()) fail("build_cond: missing parameter ", key);
        return it->second;
    };
    const Tensor<T>& table = P("cond/singer_table");
    if (singer_id >= table.dim(0))
        fail("build_cond: singer id ", singer_id, " out of range [0,", table.dim(0), ")");

    std::vector<T> pv(2 * frames), lv(frames);
    for (size_t f = 0; f < frames; ++f) {
        pv[f] = static_cast<T>(std::log1p(f0[f]));
        pv[frames + f] = static_cast<T>(vuv[f] ? 1 : 0);
        lv[f] = static_cast<T>(std::log1p(loud[f]));
    }
    Tensor<T> pitch({2, frames}, std::move(pv));
    Tensor<T> loudr({1, frames}, std::move(lv));

    Tensor<T> c = add(matmul(P("cond/content_w"), content), P("cond/content_b"));
    Tensor<T> pp = add(matmul(P("cond/pitch_w"), pitch), P("cond/pitch_b"));
    Tensor<T> ll = add(matmul(P("cond/loud_w"), loudr), P("cond/loud_b"));
    Tensor<T> emb = embedding_row(table, singer_id);
    Tensor<T> tiled = add(Tensor<T>::zeros({emb.dim(0), frames}), emb);
    return concat_rows<T>({c, pp, ll, tiled});
}

struct SynthSpec {
    int min_frames = 24;
    int max_frames = 48;
    int n_singers = 4;
    int content_dim = 16;
    int n_harmonics = 8;
    MelParams mel;
};

struct SynthContours {
    std::vector<double> f0;   // per output frame, Hz
    std::vector<double> amp;  // per output frame, peak amplitude of the stack
};

struct DatasetItem {
    MelSpec mel;
    FeatureSet feats;
    int singer_id = 0;
};

// Rendering is deterministic in (contours, singer_id): a harmonic stack whose
// per-harmonic weights follow a singer-specific spectral tilt, then the
// standard feature extractors run on the rendered audio.
DatasetItem synth_item(const SynthContours& c, int singer_id, const SynthSpec& spec);

std::vector<DatasetItem> synth_dataset(Rng& rng, int n_items, const SynthSpec& spec);

}  // namespace melodist
