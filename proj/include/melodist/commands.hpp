#pragma once

#include <string>
#include <vector>

#include "melodist/formats.hpp"

namespace melodist {

// Dataset directory listing: header key=value lines with the generation
// parameters and mel statistics, then one line per item.
struct Manifest {
    int n_items = 0;
    uint64_t seed = 0;
    int content_dim = 0;
    int n_singers = 0;
    int mel_bins = 0;
    int hop = 128;
    int sample_rate = 24000;
    double mel_mean = 0.0;
    double mel_std = 1.0;

    struct Item {
        int id = 0;
        int singer = 0;
        int frames = 0;
        std::string mel_path;   // resolved against the dataset directory
        std::string feat_path;
    };
    std::vector<Item> items;
};

Manifest read_manifest(const std::string& data_dir);

// Commands throw Error on failure; progress goes to stdout as key=value lines.

void cmd_gen_data(const Config& cfg, const std::string& out_dir);

// Fresh run when resume_ckpt is empty; otherwise continues that checkpoint
// (its config snapshot governs the network, schedule, and data statistics;
// iteration/logging cadence comes from cfg).
void cmd_train_teacher(const Config& cfg, const std::string& data_dir,
                       const std::string& out_ckpt, const std::string& resume_ckpt = "");

// Teacher snapshot governs network/schedule; distillation hyperparameters
// (lr_distill, mu, iters, batch, cadence, seed, precision) come from cfg.
void cmd_distill(const Config& cfg, const std::string& teacher_ckpt,
                 const std::string& data_dir, const std::string& out_ckpt);

struct SampleArgs {
    std::string ckpt;
    std::string features;  // COMF file driving the conditioning
    std::string out_mel;   // COMM output
    int singer_id = 0;
    int steps = 0;         // 0 = role default (teacher: n_steps, student: sample_steps)
    bool use_theta = false;  // student role: sample with theta instead of the EMA set
    uint64_t seed = 0;
    bool seed_set = false;  // false = seed from the checkpoint's config snapshot
};

void cmd_sample(const SampleArgs& args);

struct EvalArgs {
    std::vector<std::string> ref_mels;
    std::vector<std::string> gen_mels;
    std::vector<std::string> ref_feats;
    std::vector<std::string> gen_feats;
    int content_dim = 16;   // for unpacking the feature files
    double decode_ms = -1;  // >= 0 adds an rtf record (decode time / audio time)
};

void cmd_eval(const EvalArgs& args);

struct BenchArgs {
    std::string teacher_ckpt;
    std::string student_ckpt;
    std::string features;
    int singer_id = 0;
    int repeats = 5;
    uint64_t seed = 0;
};

void cmd_bench(const BenchArgs& args);

}  // namespace melodist
