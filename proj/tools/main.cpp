#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "melodist/commands.hpp"

using namespace melodist;

int main(int argc, char** argv) {
    CLI::App app{"consistency-model mel decoder: synthetic data, teacher training, "
                 "distillation, sampling, and benchmarks"};
    app.require_subcommand(1);

    std::string config_path, precision, out;
    uint64_t seed = 0;
    app.add_option("--config", config_path, "config file (key=value lines)");
    auto* seed_opt = app.add_option("--seed", seed, "override config seed");
    auto* prec_opt = app.add_option("--precision", precision, "compute precision")
                         ->check(CLI::IsMember({"f32", "f64"}));
    app.add_option("--out", out, "output path (directory or file, per command)");

    auto add_sub = [&](const char* name, const char* desc) {
        CLI::App* s = app.add_subcommand(name, desc);
        s->fallthrough();
        return s;
    };

    CLI::App* gen = add_sub("gen-data", "synthesize a dataset into --out directory");

    std::string data_dir, resume;
    CLI::App* teach = add_sub("train-teacher", "train the diffusion teacher; --out checkpoint");
    teach->add_option("--data", data_dir, "dataset directory (from gen-data)")->required();
    teach->add_option("--resume", resume, "continue from an earlier teacher checkpoint");

    std::string teacher_ckpt;
    CLI::App* dist = add_sub("distill", "distill a one-step student; --out checkpoint");
    dist->add_option("--teacher", teacher_ckpt, "teacher checkpoint")->required();
    dist->add_option("--data", data_dir, "dataset directory")->required();

    SampleArgs sa;
    CLI::App* samp = add_sub("sample", "generate a mel file from a checkpoint; --out mel");
    samp->add_option("--ckpt", sa.ckpt, "teacher or student checkpoint")->required();
    samp->add_option("--features", sa.features, "conditioning feature file (COMF)")->required();
    samp->add_option("--singer", sa.singer_id, "target singer id (conversion when != source)");
    samp->add_option("--steps", sa.steps, "sampling steps (0 = role default)");
    samp->add_flag("--use-theta", sa.use_theta, "student: sample with theta instead of EMA");

    EvalArgs ea;
    CLI::App* ev = add_sub("eval", "reconstruction MSE and F0 correlation over item lists");
    ev->add_option("--ref", ea.ref_mels, "reference mel files")->required()->delimiter(',');
    ev->add_option("--gen", ea.gen_mels, "generated mel files")->required()->delimiter(',');
    ev->add_option("--ref-feats", ea.ref_feats, "reference feature files")
        ->required()
        ->delimiter(',');
    ev->add_option("--gen-feats", ea.gen_feats, "generated feature files")
        ->required()
        ->delimiter(',');
    ev->add_option("--content-dim", ea.content_dim, "content rows in the feature files");
    ev->add_option("--decode-ms", ea.decode_ms, "decode wall time, adds an rtf record");

    BenchArgs ba;
    CLI::App* bench = add_sub("bench", "teacher (Euler, N steps) vs student (1 step) timing");
    bench->add_option("--teacher", ba.teacher_ckpt, "teacher checkpoint")->required();
    bench->add_option("--student", ba.student_ckpt, "student checkpoint")->required();
    bench->add_option("--features", ba.features, "conditioning feature file")->required();
    bench->add_option("--singer", ba.singer_id, "singer id");
    bench->add_option("--repeats", ba.repeats, "timing repeats (median reported)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    auto load_cfg = [&]() {
        Config c = config_path.empty() ? Config{} : parse_config_file(config_path);
        if (seed_opt->count()) c.seed = seed;
        if (prec_opt->count()) c.precision = precision;
        return c;
    };
    auto need_out = [&](const char* what) {
        if (out.empty()) fail(what, ": --out is required");
        return out;
    };

    try {
        if (app.got_subcommand(gen)) {
            cmd_gen_data(load_cfg(), need_out("gen-data"));
        } else if (app.got_subcommand(teach)) {
            cmd_train_teacher(load_cfg(), data_dir, need_out("train-teacher"), resume);
        } else if (app.got_subcommand(dist)) {
            cmd_distill(load_cfg(), teacher_ckpt, data_dir, need_out("distill"));
        } else if (app.got_subcommand(samp)) {
            sa.out_mel = need_out("sample");
            sa.seed = seed;
            sa.seed_set = seed_opt->count() > 0;
            cmd_sample(sa);
        } else if (app.got_subcommand(ev)) {
            cmd_eval(ea);
        } else if (app.got_subcommand(bench)) {
            if (seed_opt->count()) ba.seed = seed;
            cmd_bench(ba);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
