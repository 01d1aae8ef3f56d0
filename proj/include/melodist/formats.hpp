#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "melodist/denoiser.hpp"
#include "melodist/features.hpp"
#include "melodist/tensor.hpp"

namespace melodist {

// ---- binary matrix files -------------------------------------------------
// Layout (little-endian): magic[4], version u32, frames u32, dim u32, then
// frames*dim float32, frame-major. In memory the matrix is [dim x frames].
// "COMF" holds conditioning features, "COMM" holds mel matrices.

void write_matrix(const std::string& path, const char magic[4], const Tensor<double>& m);
Tensor<double> read_matrix(const std::string& path, const char magic[4]);

inline void write_mel_file(const std::string& path, const Tensor<double>& m) {
    write_matrix(path, "COMM", m);
}
inline Tensor<double> read_mel_file(const std::string& path) { return read_matrix(path, "COMM"); }
inline void write_feature_file(const std::string& path, const Tensor<double>& m) {
    write_matrix(path, "COMF", m);
}
inline Tensor<double> read_feature_file(const std::string& path) {
    return read_matrix(path, "COMF");
}

// Feature matrices stack content rows first, then one row each of f0 (Hz),
// v/uv flags, and loudness.
Tensor<double> pack_features(const FeatureSet& f);
FeatureSet unpack_features(const Tensor<double>& m, int content_dim);

// ---- WAV (PCM 16-bit mono) -------------------------------------------------

Wave read_wav(const std::string& path);
void write_wav(const std::string& path, const Wave& w);

// ---- configuration ---------------------------------------------------------
// Flat key=value text, '#' comments; unknown keys are rejected.

struct Config {
    // schedule and preconditioning
    double epsilon = 0.002;
    double t_max = 80.0;
    double rho = 7.0;
    int n_steps = 50;
    double sigma_data = 1.0;
    double p_mean = -1.2;
    double p_std = 1.2;

    // network
    std::string preset = "tiny";  // {tiny, full}
    int mel_bins = 80;
    int use_cond = 1;     // 0 trains an unconditional toy model
    int content_dim = 16; // matches the synthetic data; 768 for real extractors
    int proj_dim = 8;     // per-stream projection width; cond_dim = 4*proj_dim
    int n_singers = 4;

    // training
    double lr_teacher = 1e-4;
    double lr_distill = 5e-5;
    double mu = 0.95;
    int batch_size = 48;
    int iters_teacher = 2000;
    int iters_distill = 2000;
    int ckpt_every = 500;
    int log_every = 50;

    // sampling
    int sample_steps = 1;
    std::string solver = "euler";  // {euler, heun}, teacher sampling only
    int use_ema = 1;               // student sampling reads theta_minus

    // synthetic data
    int n_items = 100;
    int min_frames = 24;
    int max_frames = 48;
    int n_harmonics = 8;

    // dataset mel statistics; gen-data records them, training snapshots them
    double mel_mean = 0.0;
    double mel_std = 1.0;

    uint64_t seed = 0;
    std::string precision = "f64";  // {f32, f64}
};

void apply_config_kv(Config& c, const std::string& key, const std::string& value);
Config parse_config_text(const std::string& text);
Config parse_config_file(const std::string& path);
std::string config_text(const Config& c);

WaveNetConfig net_config(const Config& c);
TimeGrid<double> config_grid(const Config& c);

// ---- checkpoints -----------------------------------------------------------
// "COMC" file: role tag, config snapshot, counters, rng state, and named
// float64 blobs. Parameter sets share the blob namespace via prefixes
// ("params/", "theta/", "ema/", "opt_m/", "opt_v/").

struct Checkpoint {
    std::string role;  // {teacher, student, ema}
    std::string config_snapshot;
    uint64_t step = 0;
    uint64_t opt_step = 0;
    uint64_t rng_seed = 0;
    uint64_t rng_counter = 0;
    std::map<std::string, Tensor<double>> blobs;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

// Copies "prefix/name" blobs into a parameter map keyed by "name".
std::map<std::string, Tensor<double>> extract_blob_set(
    const std::map<std::string, Tensor<double>>& blobs, const std::string& prefix);
void insert_blob_set(std::map<std::string, Tensor<double>>& blobs, const std::string& prefix,
                     const std::map<std::string, Tensor<double>>& params);

// Errors when two configs describe different network shapes (unfair to mix).
void require_same_network(const Config& a, const Config& b);

// ---- metrics ---------------------------------------------------------------

double mel_mse(const Tensor<double>& a, const Tensor<double>& b);

// Pearson correlation over frames voiced in both contours.
double f0_pearson(const std::vector<double>& ref, const std::vector<double>& gen,
                  const std::vector<uint8_t>& vuv_ref, const std::vector<uint8_t>& vuv_gen);

}  // namespace melodist
