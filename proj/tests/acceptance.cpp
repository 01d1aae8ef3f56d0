// Acceptance gate: one line per criterion with the measured value and its
// pinned tolerance; exits nonzero if any criterion fails. Runs standalone
// (no test framework) so the output reads as a report.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "melodist/commands.hpp"
#include "melodist/features.hpp"
#include "melodist/formats.hpp"
#include "melodist/gradcheck.hpp"
#include "melodist/oracle.hpp"
#include "melodist/sampler.hpp"
#include "melodist/training.hpp"

namespace fs = std::filesystem;
using namespace melodist;
using Td = Tensor<double>;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

template <typename... A>
std::string str(A&&... a) {
    std::ostringstream os;
    os << std::setprecision(4);
    (os << ... << a);
    return os.str();
}

// Silences (and keeps) everything a command prints.
struct CoutCapture {
    std::ostringstream ss;
    std::streambuf* old;
    CoutCapture() : old(std::cout.rdbuf(ss.rdbuf())) {}
    ~CoutCapture() { std::cout.rdbuf(old); }
    std::string text() const { return ss.str(); }
};

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) fail("cannot open ", p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double parse_after(const std::string& text, const std::string& key) {
    const size_t pos = text.find(key);
    if (pos == std::string::npos) fail("missing '", key, "' in command output");
    return std::stod(text.substr(pos + key.size()));
}

std::vector<BatchItem<double>> scalar_batch(Rng& rng, size_t n, double mu, double sd) {
    std::vector<BatchItem<double>> batch(n);
    for (auto& it : batch) {
        Td z = randn<double>(rng, {1, 1});
        it.x0 = Td({1, 1}, {mu + sd * z.values()[0]});
    }
    return batch;
}

// ---------------------------------------------------------------- criterion 1

Outcome c1_boundary_identity() {
    Rng rng(101);
    double worst = 0.0;
    size_t draws = 0;
    auto probe = [&](const WaveNetConfig& cfg, double sigma_data, size_t frames) {
        Precond<double> p{sigma_data, 0.002};
        auto params = init_denoiser_params<double>(cfg, rng);
        // break the zero-initialized head so the identity is not trivial
        params["output/w2"] = randn<double>(rng, params["output/w2"].shape());
        params["output/b2"] = randn<double>(rng, params["output/b2"].shape());
        Td x = scalar_mul(randn<double>(rng, {static_cast<size_t>(cfg.mel_bins), frames}), 3.0);
        Td cond;
        if (cfg.cond_dim > 0)
            cond = randn<double>(rng, {static_cast<size_t>(cfg.cond_dim), frames});
        Td d = denoise(cfg, params, x, p.epsilon, cond, p);
        for (size_t i = 0; i < x.numel(); ++i)
            worst = std::max(worst, std::abs(d.values()[i] - x.values()[i]));
        ++draws;
    };
    const double sigmas[3] = {0.5, 1.0, 2.0};
    for (size_t i = 0; i < 998; ++i) {
        const int bins = 1 + static_cast<int>(rng.uniform_int(4));
        const int cond_dim = (i % 2 == 0) ? 0 : 4 * (1 + static_cast<int>(rng.uniform_int(3)));
        probe(WaveNetConfig::tiny(bins, cond_dim), sigmas[i % 3], 1 + rng.uniform_int(8));
    }
    probe(WaveNetConfig::full(80, 32), 1.0, 3);  // production-size preset
    probe(WaveNetConfig::full(80, 0), 0.5, 2);
    const bool pass = worst == 0.0 && draws == 1000;
    return {pass, str("max|D(x,eps,cond) - x| = ", worst, " over ", draws,
                      " random (x, cond, params) draws; required exactly 0 at 64-bit")};
}

// ---------------------------------------------------------------- criterion 2

Outcome c2_gradients() {
    // (a) full training loss on the tiny preset, conditioning enabled
    auto cfg = WaveNetConfig::tiny(2, 8);
    Precond<double> p{1.0, 0.002};
    Rng rng(42);
    auto params = init_denoiser_params<double>(cfg, rng);
    init_cond_params(params, rng, 3, 2, 3);
    params["output/w2"] = randn<double>(rng, {2, 16, 1});  // non-zero head
    params["output/w2"].set_requires_grad(true);

    std::vector<BatchItem<double>> batch(2);
    const size_t frames[2] = {3, 4};
    for (size_t i = 0; i < 2; ++i) {
        batch[i].x0 = randn<double>(rng, {2, frames[i]});
        batch[i].content = randn<double>(rng, {3, frames[i]});
        batch[i].f0.assign(frames[i], 220.0 + 10.0 * static_cast<double>(i));
        batch[i].loud.assign(frames[i], 0.25);
        batch[i].vuv.assign(frames[i], 1);
        batch[i].vuv[0] = 0;
        batch[i].singer_id = i == 0 ? 0 : 2;
    }
    const std::vector<double> ts = {0.8, 2.5};

    auto make_loss = [&]() {
        std::vector<Td> conds(batch.size());
        for (size_t i = 0; i < batch.size(); ++i) conds[i] = item_cond(params, batch[i]);
        Rng noise_rng(7);  // same noise draws on every evaluation
        return teacher_loss<double>(network_denoise_fn(cfg, params, p), batch, conds, ts,
                                    noise_rng, p);
    };
    std::vector<Td> leaves;
    for (auto& [k, v] : params) leaves.push_back(v);
    auto loss_res = grad_check<double>(make_loss, leaves, 1e-5);

    // (b) every differentiable op against central differences
    double op_worst = 0.0;
    size_t op_cases = 0;
    for (uint64_t trial = 0; trial < 3; ++trial) {
        Rng orng(300 + trial);
        Td a = randn<double>(orng, {2, 3});
        Td b = randn<double>(orng, {2, 3});
        Td col = randn<double>(orng, {2, 1});
        Td W = randn<double>(orng, {4, 2});
        Td x = randn<double>(orng, {2, 5});
        Td w3 = randn<double>(orng, {3, 2, 3});
        Td tab = randn<double>(orng, {4, 3});
        Td ar = randn<double>(orng, {2, 3});
        for (auto& v : ar.values_mut()) v += (v >= 0 ? 0.5 : -0.5);  // clear of relu kink
        const size_t id = trial % 4;
        const int dil = 1 + static_cast<int>(trial % 3);
        std::vector<std::pair<std::function<Td()>, std::vector<Td>>> probes = {
            {[&] { return sum(add(a, b)); }, {a, b}},
            {[&] { return sum(sub(a, b)); }, {a, b}},
            {[&] { return squared_l2(mul(a, b)); }, {a, b}},
            {[&] { return sum(mul(a, col)); }, {a, col}},
            {[&] { return sum(scalar_mul(a, -1.7)); }, {a}},
            {[&] { return mean(tanh(a)); }, {a}},
            {[&] { return mean(sigmoid(a)); }, {a}},
            {[&] { return sum(relu(ar)); }, {ar}},
            {[&] { return mean(silu(a)); }, {a}},
            {[&] { return squared_l2(matmul(W, x)); }, {W, x}},
            {[&] { return mean(conv1d_noncausal(x, w3, dil)); }, {x, w3}},
            {[&] { return squared_l2(concat_rows<double>({a, b})); }, {a, b}},
            {[&] { return sum(embedding_row(tab, id)); }, {tab}},
        };
        for (auto& [fn, ins] : probes) {
            op_worst = std::max(op_worst, grad_check<double>(fn, ins).max_rel_err);
            ++op_cases;
        }
    }

    const bool pass = loss_res.max_rel_err <= 1e-3 && op_worst <= 1e-4;
    return {pass, str("full-loss grad check rel err ", loss_res.max_rel_err, " over ",
                      loss_res.checked, " parameters (limit 1e-3, fd step 1e-5); per-op worst ",
                      op_worst, " over ", op_cases, " cases (limit 1e-4)")};
}

// ---------------------------------------------------------------- criterion 3

Outcome c3_teacher_vs_analytic() {
    const auto cfg = WaveNetConfig::tiny(1, 0);
    const Precond<double> p{1.0, 0.002};
    const NoiseLevelDist<double> noise{};
    Rng init_rng(1);
    TrainState<double> st{cfg, init_denoiser_params<double>(cfg, init_rng),
                          {}, p, noise, 1e-3, Rng(2), 0};
    const GaussianSpec<double> g = GaussianSpec<double>::scalar(0.0, 1.0);

    Rng data_rng(3);
    const size_t steps = 6000;
    for (size_t i = 0; i < steps; ++i) train_step(st, scalar_batch(data_rng, 32, 0.0, 1.0));

    auto D = network_denoise_fn(cfg, st.params, p);
    double err_sum = 0.0;
    size_t count = 0;
    const int nt = 21, nx = 21;
    for (int j = 0; j < nt; ++j) {
        const double t = 0.002 + (10.0 - 0.002) * j / (nt - 1);
        for (int k = 0; k < nx; ++k) {
            const double xv = -3.0 + 6.0 * k / (nx - 1);
            Td x({1, 1}, {xv});
            err_sum += std::abs(D(x, t, Td()).values()[0] -
                                analytic_denoiser(x, t, g).values()[0]);
            ++count;
        }
    }
    const double mean_err = err_sum / static_cast<double>(count);
    return {mean_err <= 0.05,
            str("mean |D_trained - D_analytic| = ", mean_err, " over ", nt, "x", nx,
                " grid t in [0.002,10], x in [-3,3] after ", steps,
                " steps (limit 0.05)")};
}

// ---------------------------------------------------------------- criterion 4

Outcome c4_solver_order() {
    const GaussianSpec<double> g = GaussianSpec<double>::scalar(0.7, 1.3);
    DenoiseFn<double> D = [&g](const Td& x, double t, const Td& cond) {
        (void)cond;
        return analytic_denoiser(x, t, g);
    };
    auto terminal_error = [&](int N) {
        auto grid = karras_grid<double>(N, 0.002, 80.0, 7.0);
        Rng rng(9);
        auto res = sample_teacher<double>(D, Td(), {1, 64}, grid, rng, TeacherSolver::euler);
        Rng rng2(9);
        Td x_T = scalar_mul(randn<double>(rng2, {1, 64}), grid.times.back());
        Td exact = analytic_trajectory(x_T, grid.times.back(), grid.epsilon, g);
        double s = 0.0;
        for (size_t i = 0; i < exact.numel(); ++i)
            s += std::abs(res.x.values()[i] - exact.values()[i]);
        return s / static_cast<double>(exact.numel());
    };
    const double e10 = terminal_error(10), e20 = terminal_error(20);
    const double e40 = terminal_error(40), e80 = terminal_error(80);
    const double r1 = e10 / e20, r2 = e20 / e40, r3 = e40 / e80;
    auto ok = [](double r) { return r >= 1.5 && r <= 2.5; };
    return {ok(r1) && ok(r2) && ok(r3),
            str("Euler terminal-error ratios err(N)/err(2N): ", r1, " (N=10), ", r2,
                " (N=20), ", r3, " (N=40); each required in [1.5, 2.5]")};
}

// ---------------------------------------------------------------- criterion 5

Outcome c5_distill_from_analytic() {
    const auto cfg = WaveNetConfig::tiny(1, 0);
    const Precond<double> p{1.0, 0.002};
    const auto grid = karras_grid<double>(50, 0.002, 80.0, 7.0);
    const GaussianSpec<double> g = GaussianSpec<double>::scalar(0.4, 1.0);
    DenoiseFn<double> analytic_fn = [&g](const Td& x, double t, const Td& cond) {
        (void)cond;
        return analytic_denoiser(x, t, g);
    };
    const auto step_fn = euler_step_fn<double>(analytic_fn, grid.epsilon);

    Rng init_rng(11);
    auto theta = init_denoiser_params<double>(cfg, init_rng);
    auto theta_minus = clone_params(theta, [](const std::string&) { return false; });
    AdamWState<double> opt;
    Rng train_rng(12), data_rng(13);

    const size_t steps = 3500;
    for (size_t i = 0; i < steps; ++i) {
        auto batch = scalar_batch(data_rng, 32, 0.4, 1.0);
        std::vector<Td> conds(batch.size());
        zero_all_grads(theta);
        {
            Tape<double> tape;
            Tape<double>::Scope scope(tape);
            Td loss = consistency_loss<double>(network_denoise_fn(cfg, theta, p),
                                               network_denoise_fn(cfg, theta_minus, p),
                                               step_fn, batch, conds, grid, train_rng);
            tape.backward(loss);
        }
        adamw_step(theta, opt, 1e-3);
        ema_update(theta_minus, theta, 0.95);
    }

    // (a) one-step generation vs the exact consistency map of the same noise
    auto D = network_denoise_fn(cfg, theta_minus, p);
    Rng eval_rng(500);
    double one_step_err = 0.0;
    const size_t n_eval = 200;
    for (size_t i = 0; i < n_eval; ++i) {
        Td x_T = scalar_mul(randn<double>(eval_rng, {1, 1}), grid.t_max);
        one_step_err += std::abs(D(x_T, grid.t_max, Td()).values()[0] -
                                 analytic_consistency(x_T, grid.t_max, g, grid.epsilon)
                                     .values()[0]);
    }
    one_step_err /= static_cast<double>(n_eval);

    // (b) outputs from five points on one exact trajectory must agree
    Td x_T = scalar_mul(randn<double>(eval_rng, {1, 1}), grid.t_max);
    const int picks[5] = {50, 35, 20, 10, 1};
    std::vector<double> outs;
    for (int idx : picks) {
        const double t = grid.times[static_cast<size_t>(idx)];
        Td x_t = analytic_trajectory(x_T, grid.t_max, t, g);
        outs.push_back(D(x_t, t, Td()).values()[0]);
    }
    double max_pair = 0.0;
    for (size_t i = 0; i < outs.size(); ++i)
        for (size_t j = i + 1; j < outs.size(); ++j)
            max_pair = std::max(max_pair, std::abs(outs[i] - outs[j]));

    const bool pass = one_step_err <= 0.1 && max_pair <= 0.15;
    return {pass, str("one-step output vs exact consistency map: mean abs err ", one_step_err,
                      " over ", n_eval, " draws (limit 0.1); max pairwise spread across 5 ",
                      "trajectory points ", max_pair, " (limit 0.15); ", steps,
                      " distillation steps, N=50 grid")};
}

// ---------------------------------------------------------------- criterion 6

Outcome c6_speed_ratio(const fs::path& work) {
    const fs::path dir = work / "bench";
    const fs::path data = dir / "data";
    fs::create_directories(dir);
    Config cfg;
    cfg.preset = "full";
    cfg.n_items = 2;
    cfg.min_frames = 24;
    cfg.max_frames = 24;
    cfg.batch_size = 2;
    cfg.iters_teacher = 0;
    cfg.iters_distill = 0;
    cfg.ckpt_every = 1000;
    cfg.log_every = 1000;
    cfg.seed = 5;
    const std::string teacher = (dir / "teacher.comc").string();
    const std::string student = (dir / "student.comc").string();
    std::string out;
    {
        CoutCapture cap;
        cmd_gen_data(cfg, data.string());
        cmd_train_teacher(cfg, data.string(), teacher);
        cmd_distill(cfg, teacher, data.string(), student);
        BenchArgs b;
        b.teacher_ckpt = teacher;
        b.student_ckpt = student;
        b.features = (data / "item_0000.comf").string();
        b.repeats = 3;
        b.seed = 77;
        cmd_bench(b);
        out = cap.text();
    }
    const double speedup = parse_after(out, "speedup=");
    const bool nfe_ok = out.find("method=teacher nfe=50") != std::string::npos &&
                        out.find("method=student nfe=1") != std::string::npos;
    return {speedup >= 10.0 && nfe_ok,
            str("production-size preset, one thread: student 1-step vs teacher 50-step ",
                "speedup = ", speedup, "x (limit >= 10x), NFE 50 vs 1 confirmed, ",
                "median of 3 repeats")};
}

// ---------------------------------------------------------------- criterion 7

Outcome c7_step_count_study(const fs::path& work) {
    const fs::path dir = work / "steps";
    const fs::path data = dir / "data";
    fs::create_directories(dir);
    Config cfg;
    cfg.preset = "tiny";
    cfg.mel_bins = 8;
    cfg.content_dim = 4;
    cfg.proj_dim = 4;
    cfg.n_singers = 2;
    cfg.n_items = 6;
    cfg.min_frames = 10;
    cfg.max_frames = 14;
    cfg.batch_size = 6;
    cfg.iters_teacher = 5000;
    cfg.iters_distill = 10000;
    cfg.lr_teacher = 1e-3;
    cfg.lr_distill = 5e-4;
    cfg.ckpt_every = 10000;
    cfg.log_every = 10000;
    cfg.seed = 21;
    const std::string teacher = (dir / "teacher.comc").string();
    const std::string student = (dir / "student.comc").string();
    {
        CoutCapture cap;
        cmd_gen_data(cfg, data.string());
        cmd_train_teacher(cfg, data.string(), teacher);
        cmd_distill(cfg, teacher, data.string(), student);
    }
    const Manifest man = read_manifest(data.string());

    auto reconstruction_mse = [&](const std::string& ckpt, int steps, const char* tag) {
        double total = 0.0;
        for (size_t i = 0; i < man.items.size(); ++i) {
            const fs::path gen = dir / str("gen_", tag, "_", i, ".comm");
            SampleArgs a;
            a.ckpt = ckpt;
            a.features = man.items[i].feat_path;
            a.out_mel = gen.string();
            a.singer_id = man.items[i].singer;
            a.steps = steps;
            a.seed = 900 + static_cast<uint64_t>(i);
            a.seed_set = true;
            {
                CoutCapture cap;
                cmd_sample(a);
            }
            total += mel_mse(read_mel_file(man.items[i].mel_path), read_mel_file(gen.string()));
        }
        return total / static_cast<double>(man.items.size());
    };

    const int step_counts[3] = {1, 2, 4};
    double mse[3] = {0, 0, 0};
    bool finite = true;
    for (int s = 0; s < 3; ++s) {
        mse[s] = reconstruction_mse(student, step_counts[s], str("s", step_counts[s]).c_str());
        if (!std::isfinite(mse[s])) finite = false;
    }
    const double teacher_mse = reconstruction_mse(teacher, 0, "teacher");
    const double lo = std::min({mse[0], mse[1], mse[2]});
    const double hi = std::max({mse[0], mse[1], mse[2]});
    const double variation = (hi - lo) / lo * 100.0;
    const char* trend = mse[2] < mse[0] ? "improves with more steps"
                        : mse[2] > mse[0] ? "degrades with more steps"
                                          : "flat";
    // completion and finiteness are the hard gate; the spread and its
    // direction are reported as the study's finding
    return {finite, str("steps {1,2,4} all completed and finite; reconstruction MSE = ",
                        mse[0], " / ", mse[1], " / ", mse[2], " (teacher 50-step baseline ",
                        teacher_mse, "), spread ", variation, "% (expected < 25%",
                        variation < 25.0 ? "" : ", exceeded", "); trend: ", trend)};
}

// ---------------------------------------------------------------- criterion 8

Outcome c8_signal_chain() {
    // framing: 1280 samples at 24 kHz -> 1 + 1280/128 = 11 frames x 80 bins
    Wave w1;
    w1.samples.resize(1280);
    for (size_t n = 0; n < w1.samples.size(); ++n) {
        const double ph = static_cast<double>(n) / 24000.0;
        w1.samples[n] = 0.3 * std::sin(2.0 * kPi * 310.0 * ph) +
                        0.2 * std::sin(2.0 * kPi * 1200.0 * ph);
    }
    const MelSpec mel = mel_spectrogram(w1);
    const bool shape_ok = mel.bins() == 80 && mel.frames() == 11;

    Wave w2;
    w2.samples.resize(12000);
    for (size_t n = 0; n < w2.samples.size(); ++n)
        w2.samples[n] = 0.6 * std::sin(2.0 * kPi * 440.0 * static_cast<double>(n) / 24000.0);
    const F0Result f0r = estimate_f0(w2, 128, 60.0, 1000.0);
    std::vector<double> voiced;
    for (size_t i = 0; i < f0r.f0.size(); ++i)
        if (f0r.vuv[i]) voiced.push_back(f0r.f0[i]);
    double f0_med = 0.0;
    if (!voiced.empty()) {
        std::sort(voiced.begin(), voiced.end());
        f0_med = voiced[voiced.size() / 2];
    }
    const double f0_rel = std::abs(f0_med / 440.0 - 1.0);
    const bool f0_ok = !voiced.empty() && f0_rel <= 0.01;

    Rng rng(8);
    std::vector<double> f0(60);
    std::vector<uint8_t> vuv(60, 1);
    for (size_t i = 0; i < f0.size(); ++i) {
        f0[i] = 200.0 + 40.0 * std::sin(static_cast<double>(i) / 5.0) + 3.0 * rng.normal();
        if (i % 7 == 3) {
            f0[i] = 0.0;
            vuv[i] = 0;
        }
    }
    const double fpc = f0_pearson(f0, f0, vuv, vuv);
    const bool fpc_ok = std::abs(fpc - 1.0) <= 1e-12;

    return {shape_ok && f0_ok && fpc_ok,
            str("mel of 1280 samples at 24 kHz: ", mel.frames(), " frames x ", mel.bins(),
                " bins (required 11x80); 440 Hz sine tracked at ", f0_med, " Hz (",
                f0_rel * 100.0, "% off, limit 1%); FPC(x,x) = ", std::setprecision(17), fpc,
                " (limit |fpc-1| <= 1e-12)")};
}

// ---------------------------------------------------------------- criterion 9

Outcome c9_repro_persistence(const fs::path& work) {
    const fs::path dir = work / "repro";
    const fs::path data = dir / "data";
    fs::create_directories(dir);
    Config cfg;
    cfg.preset = "tiny";
    cfg.mel_bins = 8;
    cfg.content_dim = 4;
    cfg.proj_dim = 2;
    cfg.n_singers = 2;
    cfg.n_items = 4;
    cfg.min_frames = 8;
    cfg.max_frames = 12;
    cfg.batch_size = 4;
    cfg.iters_teacher = 100;
    cfg.lr_teacher = 1e-3;
    cfg.ckpt_every = 1000;
    cfg.log_every = 1000;
    cfg.seed = 33;
    const fs::path a = dir / "a.comc", b = dir / "b.comc", rt = dir / "rt.comc";
    const fs::path part = dir / "part.comc", resumed = dir / "resumed.comc";
    {
        CoutCapture cap;
        cmd_gen_data(cfg, data.string());
        cmd_train_teacher(cfg, data.string(), a.string());
        cmd_train_teacher(cfg, data.string(), b.string());
        save_checkpoint(rt.string(), load_checkpoint(a.string()));
        Config half = cfg;
        half.iters_teacher = 50;
        cmd_train_teacher(half, data.string(), part.string());
        cmd_train_teacher(cfg, data.string(), resumed.string(), part.string());
    }
    const std::string bytes_a = file_bytes(a);
    const bool seeds_ok = bytes_a == file_bytes(b);
    const bool roundtrip_ok = bytes_a == file_bytes(rt);
    const bool resume_ok = bytes_a == file_bytes(resumed);
    return {seeds_ok && roundtrip_ok && resume_ok,
            str("100-step run at 64-bit: identical seeds bit-identical (", seeds_ok ? "yes" : "NO",
                "), checkpoint load->save bit-exact (", roundtrip_ok ? "yes" : "NO",
                "), resume 50+50 == uninterrupted 100 (", resume_ok ? "yes" : "NO", ")")};
}

}  // namespace

int main(int argc, char** argv) {
    // optional arg: run a single criterion by number (development aid)
    int only = 0;
    if (argc > 1) only = std::atoi(argv[1]);
    const fs::path work = fs::temp_directory_path() / "melodist_acceptance";
    std::error_code ec;
    fs::remove_all(work, ec);
    fs::create_directories(work);

    struct Entry {
        int id;
        const char* name;
        std::function<Outcome()> body;
    };
    const std::vector<Entry> entries = {
        {1, "boundary identity", c1_boundary_identity},
        {2, "gradient correctness", c2_gradients},
        {3, "teacher vs analytic denoiser", c3_teacher_vs_analytic},
        {4, "solver order", c4_solver_order},
        {5, "distillation vs exact consistency map", c5_distill_from_analytic},
        {6, "one-step speed ratio", [&] { return c6_speed_ratio(work); }},
        {7, "step-count study", [&] { return c7_step_count_study(work); }},
        {8, "signal chain", c8_signal_chain},
        {9, "reproducibility and persistence", [&] { return c9_repro_persistence(work); }},
    };

    bool all = true;
    for (const auto& e : entries) {
        if (only != 0 && e.id != only) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = e.body();
        } catch (const std::exception& ex) {
            out = {false, str("exception: ", ex.what())};
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        all = all && out.pass;
        std::cout << "criterion " << e.id << " (" << e.name << "): "
                  << (out.pass ? "PASS" : "FAIL") << " - " << out.detail << "  ["
                  << std::fixed << std::setprecision(1) << secs << "s]\n"
                  << std::defaultfloat << std::flush;
    }
    if (only == 0)
        std::cout << (all ? "acceptance: all 9 criteria passed" : "acceptance: FAILURES above")
                  << std::endl;
    return all ? 0 : 1;
}
