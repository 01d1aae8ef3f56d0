#include "melodist/formats.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace melodist {

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");
static_assert(std::numeric_limits<float>::is_iec559 && std::numeric_limits<double>::is_iec559,
              "file formats assume IEEE-754 floats");

namespace {

void put_bytes(std::ostream& out, const void* p, size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}
void put_u16(std::ostream& out, uint16_t v) { put_bytes(out, &v, 2); }
void put_u32(std::ostream& out, uint32_t v) { put_bytes(out, &v, 4); }
void put_u64(std::ostream& out, uint64_t v) { put_bytes(out, &v, 8); }
void put_str(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<uint32_t>(s.size()));
    put_bytes(out, s.data(), s.size());
}

void get_bytes(std::istream& in, void* p, size_t n, const char* ctx) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in.gcount()) != n) fail(ctx, ": truncated file");
}
uint16_t get_u16(std::istream& in, const char* ctx) {
    uint16_t v;
    get_bytes(in, &v, 2, ctx);
    return v;
}
uint32_t get_u32(std::istream& in, const char* ctx) {
    uint32_t v;
    get_bytes(in, &v, 4, ctx);
    return v;
}
uint64_t get_u64(std::istream& in, const char* ctx) {
    uint64_t v;
    get_bytes(in, &v, 8, ctx);
    return v;
}
std::string get_str(std::istream& in, const char* ctx, uint32_t max_len = 1u << 24) {
    uint32_t n = get_u32(in, ctx);
    if (n > max_len) fail(ctx, ": unreasonable string length ", n);
    std::string s(n, '\0');
    get_bytes(in, s.data(), n, ctx);
    return s;
}

std::ofstream open_out(const std::string& path, const char* ctx) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ctx, ": cannot open for writing: ", path);
    return out;
}
std::ifstream open_in(const std::string& path, const char* ctx) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ctx, ": cannot open: ", path);
    return in;
}

}  // namespace

// ---- matrix files ----------------------------------------------------------

void write_matrix(const std::string& path, const char magic[4], const Tensor<double>& m) {
    if (!m.defined() || m.ndim() != 2)
        fail("write_matrix: need a [dim x frames] matrix for ", path);
    std::ofstream out = open_out(path, "write_matrix");
    put_bytes(out, magic, 4);
    put_u32(out, 1);
    const uint32_t dim = static_cast<uint32_t>(m.dim(0));
    const uint32_t frames = static_cast<uint32_t>(m.dim(1));
    put_u32(out, frames);
    put_u32(out, dim);
    for (uint32_t f = 0; f < frames; ++f)
        for (uint32_t d = 0; d < dim; ++d) {
            const float v = static_cast<float>(m.values()[d * frames + f]);
            put_bytes(out, &v, 4);
        }
    out.flush();
    if (!out) fail("write_matrix: write failed: ", path);
}

Tensor<double> read_matrix(const std::string& path, const char magic[4]) {
    std::ifstream in = open_in(path, "read_matrix");
    char got[4];
    get_bytes(in, got, 4, "read_matrix");
    if (std::memcmp(got, magic, 4) != 0)
        fail("read_matrix: ", path, " has magic '", std::string(got, 4), "', expected '",
             std::string(magic, 4), "'");
    const uint32_t version = get_u32(in, "read_matrix");
    if (version != 1) fail("read_matrix: unsupported version ", version, " in ", path);
    const uint32_t frames = get_u32(in, "read_matrix");
    const uint32_t dim = get_u32(in, "read_matrix");
    if (frames == 0 || dim == 0) fail("read_matrix: empty matrix in ", path);
    std::vector<double> vals(static_cast<size_t>(frames) * dim);
    for (uint32_t f = 0; f < frames; ++f)
        for (uint32_t d = 0; d < dim; ++d) {
            float v;
            get_bytes(in, &v, 4, "read_matrix");
            vals[static_cast<size_t>(d) * frames + f] = static_cast<double>(v);
        }
    return Tensor<double>({dim, frames}, std::move(vals));
}

Tensor<double> pack_features(const FeatureSet& f) {
    if (!f.content.defined() || f.content.ndim() != 2)
        fail("pack_features: content must be [dim x frames]");
    const size_t frames = f.content.dim(1);
    if (f.f0.size() != frames || f.vuv.size() != frames || f.loudness.size() != frames)
        fail("pack_features: stream frame counts differ");
    const size_t cdim = f.content.dim(0);
    std::vector<double> vals((cdim + 3) * frames);
    std::copy(f.content.values().begin(), f.content.values().end(), vals.begin());
    for (size_t i = 0; i < frames; ++i) {
        vals[cdim * frames + i] = f.f0[i];
        vals[(cdim + 1) * frames + i] = static_cast<double>(f.vuv[i]);
        vals[(cdim + 2) * frames + i] = f.loudness[i];
    }
    return Tensor<double>({cdim + 3, frames}, std::move(vals));
}

FeatureSet unpack_features(const Tensor<double>& m, int content_dim) {
    if (!m.defined() || m.ndim() != 2) fail("unpack_features: need a matrix");
    const size_t cdim = static_cast<size_t>(content_dim);
    if (content_dim < 1 || m.dim(0) != cdim + 3)
        fail("unpack_features: matrix has ", m.dim(0), " rows, expected content_dim+3 = ",
             cdim + 3);
    const size_t frames = m.dim(1);
    FeatureSet f;
    std::vector<double> cv(m.values().begin(),
                           m.values().begin() + static_cast<std::ptrdiff_t>(cdim * frames));
    f.content = Tensor<double>({cdim, frames}, std::move(cv));
    f.f0.resize(frames);
    f.vuv.resize(frames);
    f.loudness.resize(frames);
    for (size_t i = 0; i < frames; ++i) {
        f.f0[i] = m.values()[cdim * frames + i];
        f.vuv[i] = m.values()[(cdim + 1) * frames + i] > 0.5 ? 1 : 0;
        f.loudness[i] = m.values()[(cdim + 2) * frames + i];
    }
    return f;
}

// ---- WAV ---------------------------------------------------------------------

Wave read_wav(const std::string& path) {
    std::ifstream in = open_in(path, "read_wav");
    char id[4];
    get_bytes(in, id, 4, "read_wav");
    if (std::memcmp(id, "RIFF", 4) != 0) fail("read_wav: ", path, " is not a RIFF file");
    get_u32(in, "read_wav");  // total size, unused
    get_bytes(in, id, 4, "read_wav");
    if (std::memcmp(id, "WAVE", 4) != 0) fail("read_wav: ", path, " is not a WAVE file");

    bool have_fmt = false;
    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t sample_rate = 0;
    std::vector<double> samples;
    bool have_data = false;

    while (in.peek() != EOF) {
        get_bytes(in, id, 4, "read_wav");
        const uint32_t size = get_u32(in, "read_wav");
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (size < 16) fail("read_wav: malformed fmt chunk in ", path);
            format = get_u16(in, "read_wav");
            channels = get_u16(in, "read_wav");
            sample_rate = get_u32(in, "read_wav");
            get_u32(in, "read_wav");  // byte rate
            get_u16(in, "read_wav");  // block align
            bits = get_u16(in, "read_wav");
            in.seekg(size - 16 + (size % 2), std::ios::cur);
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            if (!have_fmt) fail("read_wav: data chunk before fmt in ", path);
            if (format != 1 || channels != 1 || bits != 16)
                fail("read_wav: only PCM 16-bit mono is supported; ", path, " has format=",
                     format, " channels=", channels, " bits=", bits);
            const size_t n = size / 2;
            samples.resize(n);
            for (size_t i = 0; i < n; ++i) {
                int16_t s;
                get_bytes(in, &s, 2, "read_wav");
                samples[i] = static_cast<double>(s) / 32767.0;
            }
            if (size % 2) in.seekg(1, std::ios::cur);
            have_data = true;
        } else {
            in.seekg(size + (size % 2), std::ios::cur);
        }
    }
    if (!have_fmt || !have_data) fail("read_wav: missing fmt or data chunk in ", path);
    Wave w;
    w.samples = std::move(samples);
    w.sample_rate = static_cast<int>(sample_rate);
    return w;
}

void write_wav(const std::string& path, const Wave& w) {
    if (w.sample_rate <= 0) fail("write_wav: bad sample rate ", w.sample_rate);
    std::ofstream out = open_out(path, "write_wav");
    const uint32_t n = static_cast<uint32_t>(w.samples.size());
    const uint32_t data_bytes = n * 2;
    put_bytes(out, "RIFF", 4);
    put_u32(out, 36 + data_bytes);
    put_bytes(out, "WAVE", 4);
    put_bytes(out, "fmt ", 4);
    put_u32(out, 16);
    put_u16(out, 1);  // PCM
    put_u16(out, 1);  // mono
    put_u32(out, static_cast<uint32_t>(w.sample_rate));
    put_u32(out, static_cast<uint32_t>(w.sample_rate) * 2);
    put_u16(out, 2);
    put_u16(out, 16);
    put_bytes(out, "data", 4);
    put_u32(out, data_bytes);
    for (double v : w.samples) {
        const double c = std::max(-1.0, std::min(1.0, v));
        const int16_t s = static_cast<int16_t>(std::lrint(c * 32767.0));
        put_bytes(out, &s, 2);
    }
    out.flush();
    if (!out) fail("write_wav: write failed: ", path);
}

// ---- configuration -----------------------------------------------------------

namespace {

double parse_double(const std::string& key, const std::string& v) {
    size_t idx = 0;
    double d;
    try {
        d = std::stod(v, &idx);
    } catch (const std::exception&) {
        fail("config: key '", key, "' has non-numeric value '", v, "'");
    }
    if (idx != v.size()) fail("config: key '", key, "' has trailing junk in value '", v, "'");
    return d;
}

int parse_int(const std::string& key, const std::string& v) {
    size_t idx = 0;
    long long d;
    try {
        d = std::stoll(v, &idx);
    } catch (const std::exception&) {
        fail("config: key '", key, "' has non-integer value '", v, "'");
    }
    if (idx != v.size()) fail("config: key '", key, "' has trailing junk in value '", v, "'");
    if (d < std::numeric_limits<int>::min() || d > std::numeric_limits<int>::max())
        fail("config: key '", key, "' out of int range: ", v);
    return static_cast<int>(d);
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
    size_t idx = 0;
    unsigned long long d;
    try {
        d = std::stoull(v, &idx);
    } catch (const std::exception&) {
        fail("config: key '", key, "' has non-integer value '", v, "'");
    }
    if (idx != v.size()) fail("config: key '", key, "' has trailing junk in value '", v, "'");
    return static_cast<uint64_t>(d);
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void apply_config_kv(Config& c, const std::string& key, const std::string& value) {
    if (key == "epsilon") c.epsilon = parse_double(key, value);
    else if (key == "t_max") c.t_max = parse_double(key, value);
    else if (key == "rho") c.rho = parse_double(key, value);
    else if (key == "n_steps") c.n_steps = parse_int(key, value);
    else if (key == "sigma_data") c.sigma_data = parse_double(key, value);
    else if (key == "p_mean") c.p_mean = parse_double(key, value);
    else if (key == "p_std") c.p_std = parse_double(key, value);
    else if (key == "preset") c.preset = value;
    else if (key == "mel_bins") c.mel_bins = parse_int(key, value);
    else if (key == "use_cond") c.use_cond = parse_int(key, value);
    else if (key == "content_dim") c.content_dim = parse_int(key, value);
    else if (key == "proj_dim") c.proj_dim = parse_int(key, value);
    else if (key == "n_singers") c.n_singers = parse_int(key, value);
    else if (key == "lr_teacher") c.lr_teacher = parse_double(key, value);
    else if (key == "lr_distill") c.lr_distill = parse_double(key, value);
    else if (key == "mu") c.mu = parse_double(key, value);
    else if (key == "batch_size") c.batch_size = parse_int(key, value);
    else if (key == "iters_teacher") c.iters_teacher = parse_int(key, value);
    else if (key == "iters_distill") c.iters_distill = parse_int(key, value);
    else if (key == "ckpt_every") c.ckpt_every = parse_int(key, value);
    else if (key == "log_every") c.log_every = parse_int(key, value);
    else if (key == "sample_steps") c.sample_steps = parse_int(key, value);
    else if (key == "solver") c.solver = value;
    else if (key == "use_ema") c.use_ema = parse_int(key, value);
    else if (key == "n_items") c.n_items = parse_int(key, value);
    else if (key == "min_frames") c.min_frames = parse_int(key, value);
    else if (key == "max_frames") c.max_frames = parse_int(key, value);
    else if (key == "n_harmonics") c.n_harmonics = parse_int(key, value);
    else if (key == "mel_mean") c.mel_mean = parse_double(key, value);
    else if (key == "mel_std") c.mel_std = parse_double(key, value);
    else if (key == "seed") c.seed = parse_u64(key, value);
    else if (key == "precision") c.precision = value;
    else fail("config: unknown key '", key, "'");
}

Config parse_config_text(const std::string& text) {
    Config c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            fail("config: line ", lineno, " is not key=value: '", line, "'");
        apply_config_kv(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return c;
}

Config parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("config: cannot open ", path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string config_text(const Config& c) {
    std::ostringstream o;
    o << "epsilon=" << fmt_double(c.epsilon) << "\n";
    o << "t_max=" << fmt_double(c.t_max) << "\n";
    o << "rho=" << fmt_double(c.rho) << "\n";
    o << "n_steps=" << c.n_steps << "\n";
    o << "sigma_data=" << fmt_double(c.sigma_data) << "\n";
    o << "p_mean=" << fmt_double(c.p_mean) << "\n";
    o << "p_std=" << fmt_double(c.p_std) << "\n";
    o << "preset=" << c.preset << "\n";
    o << "mel_bins=" << c.mel_bins << "\n";
    o << "use_cond=" << c.use_cond << "\n";
    o << "content_dim=" << c.content_dim << "\n";
    o << "proj_dim=" << c.proj_dim << "\n";
    o << "n_singers=" << c.n_singers << "\n";
    o << "lr_teacher=" << fmt_double(c.lr_teacher) << "\n";
    o << "lr_distill=" << fmt_double(c.lr_distill) << "\n";
    o << "mu=" << fmt_double(c.mu) << "\n";
    o << "batch_size=" << c.batch_size << "\n";
    o << "iters_teacher=" << c.iters_teacher << "\n";
    o << "iters_distill=" << c.iters_distill << "\n";
    o << "ckpt_every=" << c.ckpt_every << "\n";
    o << "log_every=" << c.log_every << "\n";
    o << "sample_steps=" << c.sample_steps << "\n";
    o << "solver=" << c.solver << "\n";
    o << "use_ema=" << c.use_ema << "\n";
    o << "n_items=" << c.n_items << "\n";
    o << "min_frames=" << c.min_frames << "\n";
    o << "max_frames=" << c.max_frames << "\n";
    o << "n_harmonics=" << c.n_harmonics << "\n";
    o << "mel_mean=" << fmt_double(c.mel_mean) << "\n";
    o << "mel_std=" << fmt_double(c.mel_std) << "\n";
    o << "seed=" << c.seed << "\n";
    o << "precision=" << c.precision << "\n";
    return o.str();
}

WaveNetConfig net_config(const Config& c) {
    const int cd = c.use_cond ? 4 * c.proj_dim : 0;
    WaveNetConfig w;
    if (c.preset == "full") w = WaveNetConfig::full(c.mel_bins, cd);
    else if (c.preset == "tiny") w = WaveNetConfig::tiny(c.mel_bins, cd);
    else fail("config: unknown preset '", c.preset, "' (expected tiny or full)");
    w.validate();
    return w;
}

TimeGrid<double> config_grid(const Config& c) {
    return karras_grid(c.n_steps, c.epsilon, c.t_max, c.rho);
}

// ---- checkpoints ---------------------------------------------------------------

namespace {
void check_role(const std::string& role, const char* ctx) {
    if (role != "teacher" && role != "student" && role != "ema")
        fail(ctx, ": bad role tag '", role, "'");
}
}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    check_role(ck.role, "save_checkpoint");
    std::ofstream out = open_out(path, "save_checkpoint");
    put_bytes(out, "COMC", 4);
    put_u32(out, 1);
    put_str(out, ck.role);
    put_str(out, ck.config_snapshot);
    put_u64(out, ck.step);
    put_u64(out, ck.opt_step);
    put_u64(out, ck.rng_seed);
    put_u64(out, ck.rng_counter);
    put_u32(out, static_cast<uint32_t>(ck.blobs.size()));
    for (const auto& [name, t] : ck.blobs) {
        if (!t.defined()) fail("save_checkpoint: undefined blob '", name, "'");
        put_str(out, name);
        put_u32(out, static_cast<uint32_t>(t.ndim()));
        for (size_t d = 0; d < t.ndim(); ++d) put_u32(out, static_cast<uint32_t>(t.dim(d)));
        put_bytes(out, t.values().data(), t.numel() * sizeof(double));
    }
    out.flush();
    if (!out) fail("save_checkpoint: write failed: ", path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in = open_in(path, "load_checkpoint");
    char magic[4];
    get_bytes(in, magic, 4, "load_checkpoint");
    if (std::memcmp(magic, "COMC", 4) != 0)
        fail("load_checkpoint: ", path, " is not a checkpoint file");
    const uint32_t version = get_u32(in, "load_checkpoint");
    if (version != 1) fail("load_checkpoint: unsupported version ", version);
    Checkpoint ck;
    ck.role = get_str(in, "load_checkpoint");
    check_role(ck.role, "load_checkpoint");
    ck.config_snapshot = get_str(in, "load_checkpoint");
    ck.step = get_u64(in, "load_checkpoint");
    ck.opt_step = get_u64(in, "load_checkpoint");
    ck.rng_seed = get_u64(in, "load_checkpoint");
    ck.rng_counter = get_u64(in, "load_checkpoint");
    const uint32_t n_blobs = get_u32(in, "load_checkpoint");
    for (uint32_t b = 0; b < n_blobs; ++b) {
        std::string name = get_str(in, "load_checkpoint");
        const uint32_t ndim = get_u32(in, "load_checkpoint");
        if (ndim == 0 || ndim > 8) fail("load_checkpoint: blob '", name, "' has rank ", ndim);
        std::vector<size_t> shape(ndim);
        size_t numel = 1;
        for (auto& d : shape) {
            d = get_u32(in, "load_checkpoint");
            if (d == 0) fail("load_checkpoint: blob '", name, "' has a zero dimension");
            numel *= d;
        }
        if (numel > (1u << 28)) fail("load_checkpoint: blob '", name, "' is unreasonably big");
        std::vector<double> vals(numel);
        get_bytes(in, vals.data(), numel * sizeof(double), "load_checkpoint");
        ck.blobs.emplace(std::move(name), Tensor<double>(std::move(shape), std::move(vals)));
    }
    return ck;
}

std::map<std::string, Tensor<double>> extract_blob_set(
    const std::map<std::string, Tensor<double>>& blobs, const std::string& prefix) {
    std::map<std::string, Tensor<double>> out;
    const std::string p = prefix + "/";
    for (const auto& [name, t] : blobs)
        if (name.rfind(p, 0) == 0) out.emplace(name.substr(p.size()), t);
    if (out.empty()) fail("checkpoint has no '", prefix, "' parameter set");
    return out;
}

void insert_blob_set(std::map<std::string, Tensor<double>>& blobs, const std::string& prefix,
                     const std::map<std::string, Tensor<double>>& params) {
    for (const auto& [name, t] : params) blobs[prefix + "/" + name] = t;
}

void require_same_network(const Config& a, const Config& b) {
    auto mismatch = [](const char* field) {
        fail("config mismatch: checkpoints disagree on ", field);
    };
    if (a.preset != b.preset) mismatch("preset");
    if (a.mel_bins != b.mel_bins) mismatch("mel_bins");
    if (a.use_cond != b.use_cond) mismatch("use_cond");
    if (a.content_dim != b.content_dim) mismatch("content_dim");
    if (a.proj_dim != b.proj_dim) mismatch("proj_dim");
    if (a.n_singers != b.n_singers) mismatch("n_singers");
}

// ---- metrics --------------------------------------------------------------------

double mel_mse(const Tensor<double>& a, const Tensor<double>& b) {
    if (!a.defined() || !b.defined() || a.shape() != b.shape())
        fail("mel_mse: shapes differ: ", shape_str(a.shape()), " vs ", shape_str(b.shape()));
    double s = 0.0;
    for (size_t i = 0; i < a.numel(); ++i) {
        const double d = a.values()[i] - b.values()[i];
        s += d * d;
    }
    return s / static_cast<double>(a.numel());
}

double f0_pearson(const std::vector<double>& ref, const std::vector<double>& gen,
                  const std::vector<uint8_t>& vuv_ref, const std::vector<uint8_t>& vuv_gen) {
    if (ref.size() != gen.size() || ref.size() != vuv_ref.size() ||
        ref.size() != vuv_gen.size())
        fail("f0_pearson: length mismatch (ref ", ref.size(), ", gen ", gen.size(), ", vuv ",
             vuv_ref.size(), "/", vuv_gen.size(), ")");
    std::vector<double> x, y;
    for (size_t i = 0; i < ref.size(); ++i)
        if (vuv_ref[i] && vuv_gen[i]) {
            x.push_back(ref[i]);
            y.push_back(gen[i]);
        }
    if (x.size() < 2) fail("f0_pearson: fewer than 2 jointly voiced frames");
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, syy = 0, sxy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) fail("f0_pearson: constant F0 contour, correlation undefined");
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace melodist
