#include "melodist/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "melodist/sampler.hpp"
#include "melodist/training.hpp"

namespace melodist {

namespace fs = std::filesystem;

namespace {

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::string fmt(double v) {
    std::ostringstream o;
    o.precision(10);
    o << v;
    return o.str();
}

std::string fmt_exact(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// mel framing constants are fixed project-wide (24 kHz, hop 128)
constexpr double kAudioSecondsPerFrame = 128.0 / 24000.0;

int m_int(const std::string& key, const std::string& v) {
    try {
        size_t idx = 0;
        const int r = std::stoi(v, &idx);
        if (idx == v.size()) return r;
    } catch (const std::exception&) {
    }
    fail("manifest: field '", key, "' has bad integer '", v, "'");
}

uint64_t m_u64(const std::string& key, const std::string& v) {
    try {
        size_t idx = 0;
        const uint64_t r = std::stoull(v, &idx);
        if (idx == v.size()) return r;
    } catch (const std::exception&) {
    }
    fail("manifest: field '", key, "' has bad integer '", v, "'");
}

double m_double(const std::string& key, const std::string& v) {
    try {
        size_t idx = 0;
        const double r = std::stod(v, &idx);
        if (idx == v.size()) return r;
    } catch (const std::exception&) {
    }
    fail("manifest: field '", key, "' has bad number '", v, "'");
}

template <typename F>
void with_precision(const std::string& prec, F&& f) {
    if (prec == "f64") f(double{});
    else if (prec == "f32") f(float{});
    else fail("config: precision must be f32 or f64, got '", prec, "'");
}

TeacherSolver parse_solver(const std::string& s) {
    if (s == "euler") return TeacherSolver::euler;
    if (s == "heun") return TeacherSolver::heun;
    fail("config: solver must be euler or heun, got '", s, "'");
}

bool blob_set_present(const std::map<std::string, Tensor<double>>& blobs,
                      const std::string& prefix) {
    const std::string p = prefix + "/";
    for (const auto& [k, t] : blobs)
        if (k.rfind(p, 0) == 0) return true;
    return false;
}

template <typename T>
std::map<std::string, Tensor<double>> params_to_blobs(const DenoiserParams<T>& p) {
    std::map<std::string, Tensor<double>> out;
    for (const auto& [k, t] : p) {
        std::vector<double> v(t.numel());
        for (size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(t.values()[i]);
        out[k] = Tensor<double>(t.shape(), std::move(v));
    }
    return out;
}

template <typename T>
DenoiserParams<T> params_from_blobs(const std::map<std::string, Tensor<double>>& src,
                                    bool trainable) {
    DenoiserParams<T> out;
    for (const auto& [k, t] : src) {
        Tensor<T> c = to_precision<T>(t);
        c.set_requires_grad(trainable);
        out[k] = c;
    }
    return out;
}

template <typename T>
Precond<T> config_precond(const Config& c) {
    return Precond<T>{static_cast<T>(c.sigma_data), static_cast<T>(c.epsilon),
                      static_cast<T>(c.t_max)};
}

void check_dataset_match(const Config& cfg, const Manifest& mf, const char* ctx) {
    if (mf.mel_bins != cfg.mel_bins)
        fail(ctx, ": dataset has mel_bins=", mf.mel_bins, ", config says ", cfg.mel_bins);
    if (cfg.use_cond) {
        if (mf.content_dim != cfg.content_dim)
            fail(ctx, ": dataset has content_dim=", mf.content_dim, ", config says ",
                 cfg.content_dim);
        if (mf.n_singers != cfg.n_singers)
            fail(ctx, ": dataset has n_singers=", mf.n_singers, ", config says ", cfg.n_singers);
    }
}

// Loads every manifest item, normalizing mels with the config's statistics.
template <typename T>
std::vector<BatchItem<T>> load_batch_items(const Manifest& mf, const Config& cfg) {
    if (!(cfg.mel_std > 0)) fail("config: mel_std must be positive, got ", cfg.mel_std);
    std::vector<BatchItem<T>> out;
    out.reserve(mf.items.size());
    for (const auto& it : mf.items) {
        Tensor<double> mel = read_mel_file(it.mel_path);
        if (static_cast<int>(mel.dim(0)) != cfg.mel_bins)
            fail("dataset: ", it.mel_path, " has ", mel.dim(0), " mel bins, expected ",
                 cfg.mel_bins);
        FeatureSet f = unpack_features(read_feature_file(it.feat_path), mf.content_dim);
        if (f.frames() != mel.dim(1))
            fail("dataset: ", it.feat_path, " has ", f.frames(), " frames, mel has ",
                 mel.dim(1));
        std::vector<double> nv = mel.values();
        for (auto& v : nv) v = (v - cfg.mel_mean) / cfg.mel_std;
        BatchItem<T> b;
        b.x0 = to_precision<T>(Tensor<double>(mel.shape(), std::move(nv)));
        if (cfg.use_cond) b.content = to_precision<T>(f.content);
        b.f0 = f.f0;
        b.loud = f.loudness;
        b.vuv = f.vuv;
        b.singer_id = static_cast<size_t>(it.singer);
        out.push_back(std::move(b));
    }
    if (out.empty()) fail("dataset: no items in manifest");
    return out;
}

// Deterministic round-robin batching keyed on the step counter, so a resumed
// run sees exactly the batches the uninterrupted run would have.
template <typename T>
std::vector<BatchItem<T>> make_batch(const std::vector<BatchItem<T>>& items, uint64_t step,
                                     int batch_size) {
    std::vector<BatchItem<T>> b(static_cast<size_t>(batch_size));
    for (size_t j = 0; j < b.size(); ++j)
        b[j] = items[(step * static_cast<uint64_t>(batch_size) + j) % items.size()];
    return b;
}

}  // namespace

// ---- manifest -------------------------------------------------------------

Manifest read_manifest(const std::string& data_dir) {
    const fs::path dir(data_dir);
    const std::string mpath = (dir / "manifest.txt").string();
    std::ifstream in(mpath);
    if (!in) fail("manifest: cannot open ", mpath);
    Manifest mf;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("item=", 0) == 0) {
            Manifest::Item it;
            std::istringstream ls(line);
            std::string tok;
            while (ls >> tok) {
                const size_t eq = tok.find('=');
                if (eq == std::string::npos)
                    fail("manifest: bad token '", tok, "' on line ", lineno);
                const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
                if (key == "item") it.id = m_int(key, val);
                else if (key == "singer") it.singer = m_int(key, val);
                else if (key == "frames") it.frames = m_int(key, val);
                else if (key == "mel") it.mel_path = (dir / val).string();
                else if (key == "feats") it.feat_path = (dir / val).string();
                else fail("manifest: unknown item field '", key, "' on line ", lineno);
            }
            if (it.mel_path.empty() || it.feat_path.empty())
                fail("manifest: item on line ", lineno, " lacks mel/feats paths");
            mf.items.push_back(std::move(it));
        } else {
            const size_t eq = line.find('=');
            if (eq == std::string::npos)
                fail("manifest: line ", lineno, " is not key=value: '", line, "'");
            const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
            if (key == "n_items") mf.n_items = m_int(key, val);
            else if (key == "seed") mf.seed = m_u64(key, val);
            else if (key == "content_dim") mf.content_dim = m_int(key, val);
            else if (key == "n_singers") mf.n_singers = m_int(key, val);
            else if (key == "mel_bins") mf.mel_bins = m_int(key, val);
            else if (key == "hop") mf.hop = m_int(key, val);
            else if (key == "sample_rate") mf.sample_rate = m_int(key, val);
            else if (key == "mel_mean") mf.mel_mean = m_double(key, val);
            else if (key == "mel_std") mf.mel_std = m_double(key, val);
            else fail("manifest: unknown header key '", key, "' on line ", lineno);
        }
    }
    if (static_cast<int>(mf.items.size()) != mf.n_items)
        fail("manifest: header says ", mf.n_items, " items, found ", mf.items.size());
    return mf;
}

// ---- gen-data ---------------------------------------------------------------

void cmd_gen_data(const Config& cfg, const std::string& out_dir) {
    if (cfg.n_items < 1) fail("gen-data: n_items must be >= 1, got ", cfg.n_items);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) fail("gen-data: cannot create ", out_dir, ": ", ec.message());

    SynthSpec spec;
    spec.min_frames = cfg.min_frames;
    spec.max_frames = cfg.max_frames;
    spec.n_singers = cfg.n_singers;
    spec.content_dim = cfg.content_dim;
    spec.n_harmonics = cfg.n_harmonics;
    spec.mel.n_mels = cfg.mel_bins;

    Rng rng(cfg.seed);
    std::vector<DatasetItem> items = synth_dataset(rng, cfg.n_items, spec);

    double sum = 0.0;
    size_t n = 0;
    for (const auto& it : items) {
        for (double v : it.mel.m.values()) sum += v;
        n += it.mel.m.numel();
    }
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const auto& it : items)
        for (double v : it.mel.m.values()) ss += (v - mean) * (v - mean);
    double sd = std::sqrt(ss / static_cast<double>(n));
    if (!(sd > 0)) sd = 1.0;

    const fs::path dir(out_dir);
    std::ostringstream man;
    man << "n_items=" << cfg.n_items << "\n";
    man << "seed=" << cfg.seed << "\n";
    man << "content_dim=" << cfg.content_dim << "\n";
    man << "n_singers=" << cfg.n_singers << "\n";
    man << "mel_bins=" << cfg.mel_bins << "\n";
    man << "hop=" << spec.mel.hop << "\n";
    man << "sample_rate=" << spec.mel.sample_rate << "\n";
    man << "mel_mean=" << fmt_exact(mean) << "\n";
    man << "mel_std=" << fmt_exact(sd) << "\n";
    for (size_t i = 0; i < items.size(); ++i) {
        char base[32];
        std::snprintf(base, sizeof base, "item_%04zu", i);
        const std::string mel_name = std::string(base) + ".comm";
        const std::string feat_name = std::string(base) + ".comf";
        write_mel_file((dir / mel_name).string(), items[i].mel.m);
        write_feature_file((dir / feat_name).string(), pack_features(items[i].feats));
        man << "item=" << i << " singer=" << items[i].singer_id
            << " frames=" << items[i].mel.frames() << " mel=" << mel_name
            << " feats=" << feat_name << "\n";
    }
    const std::string mpath = (dir / "manifest.txt").string();
    std::ofstream out(mpath, std::ios::trunc);
    if (!out) fail("gen-data: cannot write ", mpath);
    out << man.str();
    out.flush();
    if (!out) fail("gen-data: write failed: ", mpath);
    std::cout << "done items=" << cfg.n_items << " mel_mean=" << fmt(mean)
              << " mel_std=" << fmt(sd) << " dir=" << out_dir << "\n";
}

// ---- train-teacher ------------------------------------------------------------

namespace {

template <typename T>
void run_teacher(const Config& cfg, const Manifest& mf, const std::string& out_ckpt,
                 const Checkpoint* resume) {
    if (cfg.batch_size < 1) fail("config: batch_size must be >= 1, got ", cfg.batch_size);
    if (cfg.iters_teacher < 0) fail("config: iters_teacher must be >= 0");
    const WaveNetConfig net = net_config(cfg);
    std::vector<BatchItem<T>> items = load_batch_items<T>(mf, cfg);

    TrainState<T> st;
    st.cfg = net;
    st.precond = config_precond<T>(cfg);
    st.noise = NoiseLevelDist<T>{static_cast<T>(cfg.p_mean), static_cast<T>(cfg.p_std),
                                 static_cast<T>(cfg.epsilon), static_cast<T>(cfg.t_max)};
    st.lr = static_cast<T>(cfg.lr_teacher);
    if (resume) {
        st.params = params_from_blobs<T>(extract_blob_set(resume->blobs, "params"), true);
        if (blob_set_present(resume->blobs, "opt_m")) {
            st.opt.m = params_from_blobs<T>(extract_blob_set(resume->blobs, "opt_m"), false);
            st.opt.v = params_from_blobs<T>(extract_blob_set(resume->blobs, "opt_v"), false);
        }
        st.opt.step = resume->opt_step;
        st.rng.restore(resume->rng_seed, resume->rng_counter);
        st.step = resume->step;
        if (st.step > static_cast<uint64_t>(cfg.iters_teacher))
            fail("train-teacher: checkpoint is at step ", st.step, ", beyond iters_teacher=",
                 cfg.iters_teacher);
    } else {
        st.rng = Rng(cfg.seed);
        st.params = init_denoiser_params<T>(net, st.rng);
        if (cfg.use_cond)
            init_cond_params(st.params, st.rng, cfg.content_dim, cfg.proj_dim, cfg.n_singers);
    }

    bool saved = false;
    auto save = [&]() {
        Checkpoint ck;
        ck.role = "teacher";
        ck.config_snapshot = config_text(cfg);
        ck.step = st.step;
        ck.opt_step = st.opt.step;
        ck.rng_seed = st.rng.seed();
        ck.rng_counter = st.rng.counter();
        insert_blob_set(ck.blobs, "params", params_to_blobs(st.params));
        insert_blob_set(ck.blobs, "opt_m", params_to_blobs(st.opt.m));
        insert_blob_set(ck.blobs, "opt_v", params_to_blobs(st.opt.v));
        save_checkpoint(out_ckpt, ck);
        saved = true;
    };

    std::cout << "start role=teacher items=" << items.size() << " steps=" << cfg.iters_teacher
              << " batch=" << cfg.batch_size << " lr=" << fmt(cfg.lr_teacher)
              << " precision=" << cfg.precision << " resume=" << (resume ? st.step : 0) << "\n";
    const uint64_t iters = static_cast<uint64_t>(cfg.iters_teacher);
    const int log_every = std::max(1, cfg.log_every);
    double last_loss = std::numeric_limits<double>::quiet_NaN();
    while (st.step < iters) {
        std::vector<BatchItem<T>> batch = make_batch(items, st.step, cfg.batch_size);
        const double t0 = now_ms();
        T loss;
        try {
            loss = train_step(st, batch);
        } catch (const Error& e) {
            fail("train-teacher: aborted at step ", st.step + 1, ": ", e.what(),
                 "; last good checkpoint: ", saved ? out_ckpt : "none");
        }
        const double wall = now_ms() - t0;
        last_loss = static_cast<double>(loss);
        if (st.step % static_cast<uint64_t>(log_every) == 0 || st.step == iters)
            std::cout << "step=" << st.step << " loss=" << fmt(last_loss)
                      << " wall_ms=" << fmt(wall) << "\n";
        if (cfg.ckpt_every > 0 && st.step % static_cast<uint64_t>(cfg.ckpt_every) == 0 &&
            st.step < iters)
            save();
    }
    save();
    std::cout << "done steps=" << st.step << " final_loss=" << fmt(last_loss)
              << " ckpt=" << out_ckpt << "\n";
}

}  // namespace

void cmd_train_teacher(const Config& cfg, const std::string& data_dir,
                       const std::string& out_ckpt, const std::string& resume_ckpt) {
    Manifest mf = read_manifest(data_dir);
    Config run = cfg;
    std::optional<Checkpoint> res;
    if (!resume_ckpt.empty()) {
        Checkpoint ck = load_checkpoint(resume_ckpt);
        if (ck.role != "teacher")
            fail("train-teacher: resume checkpoint role is '", ck.role, "', expected teacher");
        run = parse_config_text(ck.config_snapshot);
        require_same_network(cfg, run);
        run.iters_teacher = cfg.iters_teacher;  // cadence may be extended on resume
        run.ckpt_every = cfg.ckpt_every;
        run.log_every = cfg.log_every;
        res = std::move(ck);
    } else {
        run.mel_mean = mf.mel_mean;  // dataset statistics travel with the model
        run.mel_std = mf.mel_std;
    }
    check_dataset_match(run, mf, "train-teacher");
    with_precision(run.precision, [&](auto tag) {
        using T = decltype(tag);
        run_teacher<T>(run, mf, out_ckpt, res ? &*res : nullptr);
    });
}

// ---- distill --------------------------------------------------------------------

namespace {

template <typename T>
void run_distill(const Config& cfg, const Manifest& mf, const Checkpoint& teacher,
                 const std::string& out_ckpt) {
    if (cfg.batch_size < 1) fail("config: batch_size must be >= 1, got ", cfg.batch_size);
    const WaveNetConfig net = net_config(cfg);
    std::vector<BatchItem<T>> items = load_batch_items<T>(mf, cfg);
    DenoiserParams<T> phi = params_from_blobs<T>(extract_blob_set(teacher.blobs, "params"), false);

    DistillState<T> ds = init_distill_state<T>(
        net, phi, karras_grid<T>(cfg.n_steps, static_cast<T>(cfg.epsilon),
                                 static_cast<T>(cfg.t_max), static_cast<T>(cfg.rho)),
        config_precond<T>(cfg), static_cast<T>(cfg.lr_distill), cfg.seed);
    ds.mu = static_cast<T>(cfg.mu);

    bool saved = false;
    auto save = [&]() {
        Checkpoint ck;
        ck.role = "student";
        ck.config_snapshot = config_text(cfg);
        ck.step = ds.step;
        ck.opt_step = ds.opt.step;
        ck.rng_seed = ds.rng.seed();
        ck.rng_counter = ds.rng.counter();
        insert_blob_set(ck.blobs, "theta", params_to_blobs(ds.theta));
        insert_blob_set(ck.blobs, "ema", params_to_blobs(ds.theta_minus));
        insert_blob_set(ck.blobs, "opt_m", params_to_blobs(ds.opt.m));
        insert_blob_set(ck.blobs, "opt_v", params_to_blobs(ds.opt.v));
        save_checkpoint(out_ckpt, ck);
        saved = true;
    };

    std::cout << "start role=student items=" << items.size() << " steps=" << cfg.iters_distill
              << " batch=" << cfg.batch_size << " lr=" << fmt(cfg.lr_distill)
              << " mu=" << fmt(cfg.mu) << " precision=" << cfg.precision << "\n";
    const uint64_t iters = static_cast<uint64_t>(cfg.iters_distill);
    const int log_every = std::max(1, cfg.log_every);
    double last_loss = std::numeric_limits<double>::quiet_NaN();
    while (ds.step < iters) {
        std::vector<BatchItem<T>> batch = make_batch(items, ds.step, cfg.batch_size);
        const double t0 = now_ms();
        T loss;
        try {
            loss = distill_step(ds, batch);
        } catch (const Error& e) {
            fail("distill: aborted at step ", ds.step + 1, ": ", e.what(),
                 "; last good checkpoint: ", saved ? out_ckpt : "none");
        }
        const double wall = now_ms() - t0;
        last_loss = static_cast<double>(loss);
        if (!std::isfinite(last_loss))
            fail("distill: non-finite loss at step ", ds.step,
                 "; last good checkpoint: ", saved ? out_ckpt : "none");
        if (ds.step % static_cast<uint64_t>(log_every) == 0 || ds.step == iters)
            std::cout << "step=" << ds.step << " loss=" << fmt(last_loss)
                      << " wall_ms=" << fmt(wall) << " mu=" << fmt(cfg.mu) << "\n";
        if (cfg.ckpt_every > 0 && ds.step % static_cast<uint64_t>(cfg.ckpt_every) == 0 &&
            ds.step < iters)
            save();
    }
    save();
    std::cout << "done steps=" << ds.step << " final_loss=" << fmt(last_loss)
              << " ckpt=" << out_ckpt << "\n";
}

}  // namespace

void cmd_distill(const Config& cfg, const std::string& teacher_ckpt,
                 const std::string& data_dir, const std::string& out_ckpt) {
    Checkpoint teacher = load_checkpoint(teacher_ckpt);
    if (teacher.role != "teacher")
        fail("distill: ", teacher_ckpt, " role is '", teacher.role, "', expected teacher");
    Config run = parse_config_text(teacher.config_snapshot);
    require_same_network(cfg, run);
    // distillation hyperparameters come from the caller's config
    run.lr_distill = cfg.lr_distill;
    run.mu = cfg.mu;
    run.iters_distill = cfg.iters_distill;
    run.batch_size = cfg.batch_size;
    run.ckpt_every = cfg.ckpt_every;
    run.log_every = cfg.log_every;
    run.seed = cfg.seed;
    run.precision = cfg.precision;
    run.sample_steps = cfg.sample_steps;
    run.use_ema = cfg.use_ema;
    Manifest mf = read_manifest(data_dir);
    check_dataset_match(run, mf, "distill");
    with_precision(run.precision, [&](auto tag) {
        using T = decltype(tag);
        run_distill<T>(run, mf, teacher, out_ckpt);
    });
}

// ---- sample ---------------------------------------------------------------------

namespace {

template <typename T>
void run_sample(const Config& cfg, const Checkpoint& ck, const SampleArgs& args) {
    const WaveNetConfig net = net_config(cfg);
    const Precond<T> pc = config_precond<T>(cfg);
    std::string prefix;
    bool student_mode = true;
    if (ck.role == "teacher") {
        prefix = "params";
        student_mode = false;
    } else if (ck.role == "student") {
        prefix = (args.use_theta || !cfg.use_ema) ? "theta" : "ema";
    } else {
        prefix = "ema";  // bare EMA export still samples like a student
    }
    DenoiserParams<T> params = params_from_blobs<T>(extract_blob_set(ck.blobs, prefix), false);

    FeatureSet f = unpack_features(read_feature_file(args.features), cfg.content_dim);
    const size_t frames = f.frames();
    Tensor<T> cond;
    if (cfg.use_cond)
        cond = build_cond<T>(params, to_precision<T>(f.content), f.f0, f.vuv, f.loudness,
                             static_cast<size_t>(args.singer_id));

    const uint64_t seed = args.seed_set ? args.seed : cfg.seed;
    Rng rng(seed);
    DenoiseFn<T> D = network_denoise_fn<T>(net, params, pc);
    const std::vector<size_t> shape{static_cast<size_t>(cfg.mel_bins), frames};

    SampleResult<T> res;
    int steps;
    const double t0 = now_ms();
    if (student_mode) {
        steps = args.steps > 0 ? args.steps : cfg.sample_steps;
        const TimeGrid<T> grid = karras_grid<T>(cfg.n_steps, pc.epsilon, pc.t_max,
                                                static_cast<T>(cfg.rho));
        res = sample_student<T>(D, cond, shape, steps, grid, rng);
    } else {
        steps = args.steps > 0 ? args.steps : cfg.n_steps;
        const TimeGrid<T> grid =
            karras_grid<T>(steps, pc.epsilon, pc.t_max, static_cast<T>(cfg.rho));
        res = sample_teacher<T>(D, cond, shape, grid, rng, parse_solver(cfg.solver));
    }
    const double wall = now_ms() - t0;

    std::vector<double> out(res.x.numel());
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<double>(res.x.values()[i]) * cfg.mel_std + cfg.mel_mean;
    write_mel_file(args.out_mel, Tensor<double>(res.x.shape(), std::move(out)));

    const double audio_s = static_cast<double>(frames) * kAudioSecondsPerFrame;
    std::cout << "role=" << ck.role << " steps=" << steps << " nfe=" << res.nfe
              << " wall_ms=" << fmt(wall) << " rtf=" << fmt(wall / 1000.0 / audio_s)
              << " frames=" << frames << " singer=" << args.singer_id << " seed=" << seed
              << " out=" << args.out_mel << "\n";
}

}  // namespace

void cmd_sample(const SampleArgs& args) {
    Checkpoint ck = load_checkpoint(args.ckpt);
    const Config cfg = parse_config_text(ck.config_snapshot);
    with_precision(cfg.precision, [&](auto tag) {
        using T = decltype(tag);
        run_sample<T>(cfg, ck, args);
    });
}

// ---- eval ---------------------------------------------------------------------

void cmd_eval(const EvalArgs& args) {
    const size_t n = args.ref_mels.size();
    if (n == 0) fail("eval: no items given");
    if (args.gen_mels.size() != n || args.ref_feats.size() != n || args.gen_feats.size() != n)
        fail("eval: item count mismatch (ref_mels ", n, ", gen_mels ", args.gen_mels.size(),
             ", ref_feats ", args.ref_feats.size(), ", gen_feats ", args.gen_feats.size(), ")");
    double sum_mse = 0.0, sum_fpc = 0.0;
    size_t frames_total = 0;
    for (size_t i = 0; i < n; ++i) {
        Tensor<double> rm = read_mel_file(args.ref_mels[i]);
        Tensor<double> gm = read_mel_file(args.gen_mels[i]);
        const double mse = mel_mse(rm, gm);
        FeatureSet rf = unpack_features(read_feature_file(args.ref_feats[i]), args.content_dim);
        FeatureSet gf = unpack_features(read_feature_file(args.gen_feats[i]), args.content_dim);
        const double fpc = f0_pearson(rf.f0, gf.f0, rf.vuv, gf.vuv);
        frames_total += gm.dim(1);
        sum_mse += mse;
        sum_fpc += fpc;
        std::cout << "item=" << i << " mse=" << fmt(mse) << " fpc=" << fmt(fpc) << "\n";
    }
    std::cout << "mean_mse=" << fmt(sum_mse / static_cast<double>(n))
              << " mean_fpc=" << fmt(sum_fpc / static_cast<double>(n)) << "\n";
    if (args.decode_ms >= 0) {
        const double audio_s = static_cast<double>(frames_total) * kAudioSecondsPerFrame;
        std::cout << "rtf=" << fmt(args.decode_ms / 1000.0 / audio_s) << "\n";
    }
}

// ---- bench ----------------------------------------------------------------------

namespace {

template <typename T>
void run_bench(const Config& tc, const Config& sc, const Checkpoint& tck, const Checkpoint& sck,
               const BenchArgs& args) {
    const WaveNetConfig net = net_config(tc);
    const Precond<T> pc = config_precond<T>(tc);
    DenoiserParams<T> tparams = params_from_blobs<T>(extract_blob_set(tck.blobs, "params"), false);
    DenoiserParams<T> sparams =
        params_from_blobs<T>(extract_blob_set(sck.blobs, sc.use_ema ? "ema" : "theta"), false);

    FeatureSet f = unpack_features(read_feature_file(args.features), tc.content_dim);
    const size_t frames = f.frames();
    Tensor<T> tcond, scond;
    if (tc.use_cond) {
        Tensor<T> content = to_precision<T>(f.content);
        tcond = build_cond<T>(tparams, content, f.f0, f.vuv, f.loudness,
                              static_cast<size_t>(args.singer_id));
        scond = build_cond<T>(sparams, content, f.f0, f.vuv, f.loudness,
                              static_cast<size_t>(args.singer_id));
    }
    DenoiseFn<T> Dt = network_denoise_fn<T>(net, tparams, pc);
    DenoiseFn<T> Ds = network_denoise_fn<T>(net, sparams, pc);
    const TimeGrid<T> grid =
        karras_grid<T>(tc.n_steps, pc.epsilon, pc.t_max, static_cast<T>(tc.rho));
    const std::vector<size_t> shape{static_cast<size_t>(tc.mel_bins), frames};

    std::vector<double> twall, swall;
    int tnfe = 0, snfe = 0;
    for (int r = 0; r < args.repeats; ++r) {
        Rng rng_t(args.seed + static_cast<uint64_t>(r));
        double t0 = now_ms();
        SampleResult<T> rt = sample_teacher<T>(Dt, tcond, shape, grid, rng_t,
                                               TeacherSolver::euler);  // fairness: Euler, N grid
        twall.push_back(now_ms() - t0);
        tnfe = rt.nfe;

        Rng rng_s(args.seed + static_cast<uint64_t>(r));
        t0 = now_ms();
        SampleResult<T> rs = sample_student<T>(Ds, scond, shape, 1, grid, rng_s);
        swall.push_back(now_ms() - t0);
        snfe = rs.nfe;
    }
    const double mt = median(twall), ms = median(swall);
    const double audio_s = static_cast<double>(frames) * kAudioSecondsPerFrame;
    std::cout << "method=teacher nfe=" << tnfe << " wall_ms=" << fmt(mt)
              << " rtf=" << fmt(mt / 1000.0 / audio_s) << "\n";
    std::cout << "method=student nfe=" << snfe << " wall_ms=" << fmt(ms)
              << " rtf=" << fmt(ms / 1000.0 / audio_s) << "\n";
    std::cout << "speedup=" << fmt(mt / std::max(ms, 1e-9)) << " repeats=" << args.repeats
              << "\n";
}

}  // namespace

void cmd_bench(const BenchArgs& args) {
    if (args.repeats < 1) fail("bench: repeats must be >= 1, got ", args.repeats);
    Checkpoint tck = load_checkpoint(args.teacher_ckpt);
    Checkpoint sck = load_checkpoint(args.student_ckpt);
    if (tck.role != "teacher")
        fail("bench: ", args.teacher_ckpt, " role is '", tck.role, "', expected teacher");
    if (sck.role != "student")
        fail("bench: ", args.student_ckpt, " role is '", sck.role, "', expected student");
    const Config tc = parse_config_text(tck.config_snapshot);
    const Config sc = parse_config_text(sck.config_snapshot);
    require_same_network(tc, sc);
    if (tc.precision != sc.precision)
        fail("bench: precision mismatch (", tc.precision, " vs ", sc.precision, ")");
    with_precision(tc.precision, [&](auto tag) {
        using T = decltype(tag);
        run_bench<T>(tc, sc, tck, sck, args);
    });
}

}  // namespace melodist
