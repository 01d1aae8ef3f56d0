#include "melodist/features.hpp"

#include <algorithm>
#include <cmath>

namespace melodist {

namespace {

// reflect ("bounce") indexing: ..., 2, 1, 0, 1, 2, ..., n-1, n-2, ...
size_t reflect_index(long i, long n) {
    if (n == 1) return 0;
    const long period = 2 * (n - 1);
    long k = i % period;
    if (k < 0) k += period;
    if (k >= n) k = period - k;
    return static_cast<size_t>(k);
}

std::vector<double> hann_periodic(int n) {
    std::vector<double> w(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        w[static_cast<size_t>(i)] = 0.5 * (1.0 - std::cos(2.0 * kPi * i / n));
    return w;
}

double hz_to_mel(double f) {
    // slaney scale: linear below 1 kHz, logarithmic above
    const double f_sp = 200.0 / 3.0;
    const double min_log_hz = 1000.0;
    const double min_log_mel = min_log_hz / f_sp;
    const double logstep = std::log(6.4) / 27.0;
    return f < min_log_hz ? f / f_sp : min_log_mel + std::log(f / min_log_hz) / logstep;
}

double mel_to_hz(double m) {
    const double f_sp = 200.0 / 3.0;
    const double min_log_hz = 1000.0;
    const double min_log_mel = min_log_hz / f_sp;
    const double logstep = std::log(6.4) / 27.0;
    return m < min_log_mel ? m * f_sp : min_log_hz * std::exp(logstep * (m - min_log_mel));
}

std::vector<double> mel_band_edges(const MelParams& mp) {
    const double m_lo = hz_to_mel(0.0);
    const double m_hi = hz_to_mel(mp.sample_rate / 2.0);
    std::vector<double> f(static_cast<size_t>(mp.n_mels) + 2);
    for (size_t i = 0; i < f.size(); ++i)
        f[i] = mel_to_hz(m_lo + (m_hi - m_lo) * static_cast<double>(i) / (mp.n_mels + 1));
    return f;
}

void check_wave(const Wave& w) {
    if (w.samples.empty()) fail("features: empty signal");
    if (w.sample_rate <= 0) fail("features: sample_rate must be positive");
}

}  // namespace

void fft_radix2(std::vector<std::complex<double>>& a) {
    const size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) fail("fft_radix2: size must be a power of two, got ", n);
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * kPi / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                const auto u = a[i + k];
                const auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

std::vector<std::vector<double>> mel_filterbank(const MelParams& mp) {
    const size_t n_bins = static_cast<size_t>(mp.n_fft) / 2 + 1;
    const auto f = mel_band_edges(mp);
    std::vector<std::vector<double>> fb(static_cast<size_t>(mp.n_mels),
                                        std::vector<double>(n_bins, 0.0));
    for (int m = 0; m < mp.n_mels; ++m) {
        const double lo = f[static_cast<size_t>(m)];
        const double mid = f[static_cast<size_t>(m) + 1];
        const double hi = f[static_cast<size_t>(m) + 2];
        const double enorm = 2.0 / (hi - lo);  // slaney area normalization
        for (size_t k = 0; k < n_bins; ++k) {
            const double fk = static_cast<double>(k) * mp.sample_rate / mp.n_fft;
            const double up = (fk - lo) / (mid - lo);
            const double down = (hi - fk) / (hi - mid);
            fb[static_cast<size_t>(m)][k] = std::max(0.0, std::min(up, down)) * enorm;
        }
    }
    return fb;
}

std::vector<double> mel_center_freqs(const MelParams& mp) {
    const auto f = mel_band_edges(mp);
    return {f.begin() + 1, f.end() - 1};
}

MelSpec mel_spectrogram(const Wave& w, const MelParams& mp) {
    check_wave(w);
    if (w.sample_rate != mp.sample_rate)
        fail("mel_spectrogram: expected ", mp.sample_rate, " Hz input, got ", w.sample_rate);
    const long n = static_cast<long>(w.samples.size());
    const size_t frames = 1 + w.samples.size() / static_cast<size_t>(mp.hop);
    const auto window = hann_periodic(mp.win);
    const auto fb = mel_filterbank(mp);
    const size_t n_bins = static_cast<size_t>(mp.n_fft) / 2 + 1;

    std::vector<double> out(static_cast<size_t>(mp.n_mels) * frames);
    std::vector<std::complex<double>> buf(static_cast<size_t>(mp.n_fft));
    std::vector<double> power(n_bins);
    for (size_t fr = 0; fr < frames; ++fr) {
        const long center = static_cast<long>(fr) * mp.hop;
        for (int i = 0; i < mp.win; ++i) {
            const long idx = center - mp.win / 2 + i;
            buf[static_cast<size_t>(i)] =
                w.samples[reflect_index(idx, n)] * window[static_cast<size_t>(i)];
        }
        for (int i = mp.win; i < mp.n_fft; ++i) buf[static_cast<size_t>(i)] = 0.0;
        fft_radix2(buf);
        for (size_t k = 0; k < n_bins; ++k) power[k] = std::norm(buf[k]);
        for (int m = 0; m < mp.n_mels; ++m) {
            double acc = 0.0;
            for (size_t k = 0; k < n_bins; ++k) acc += fb[static_cast<size_t>(m)][k] * power[k];
            out[static_cast<size_t>(m) * frames + fr] = std::log(std::max(acc, mp.log_floor));
        }
    }
    MelSpec ms;
    ms.m = Tensor<double>({static_cast<size_t>(mp.n_mels), frames}, std::move(out));
    ms.hop = mp.hop;
    ms.fft = mp.n_fft;
    ms.win = mp.win;
    return ms;
}

std::vector<double> loudness(const Wave& w, int hop, int win) {
    check_wave(w);
    if (win < hop) fail("loudness: window must be >= hop");
    const long n = static_cast<long>(w.samples.size());
    const size_t frames = 1 + w.samples.size() / static_cast<size_t>(hop);
    std::vector<double> out(frames);
    for (size_t fr = 0; fr < frames; ++fr) {
        const long center = static_cast<long>(fr) * hop;
        double acc = 0.0;
        for (int i = 0; i < win; ++i) {
            const double s = w.samples[reflect_index(center - win / 2 + i, n)];
            acc += s * s;
        }
        out[fr] = acc / win;
    }
    return out;
}

F0Result estimate_f0(const Wave& w, int hop, double f_min, double f_max) {
    check_wave(w);
    if (!(f_min > 0) || !(f_min < f_max) || !(f_max < w.sample_rate / 2.0))
        fail("estimate_f0: need 0 < f_min < f_max < sample_rate/2, got ", f_min, ", ", f_max);
    const long n = static_cast<long>(w.samples.size());
    const size_t frames = 1 + w.samples.size() / static_cast<size_t>(hop);
    const long lag_min = std::max(2L, static_cast<long>(std::floor(w.sample_rate / f_max)));
    const long lag_max = static_cast<long>(std::ceil(w.sample_rate / f_min));
    const long win = std::max(1024L, 2 * lag_max + 64);

    F0Result r;
    r.f0.assign(frames, 0.0);
    r.vuv.assign(frames, 0);
    std::vector<double> x(static_cast<size_t>(win + lag_max));
    std::vector<double> corr(static_cast<size_t>(lag_max) + 1, 0.0);
    for (size_t fr = 0; fr < frames; ++fr) {
        const long center = static_cast<long>(fr) * hop;
        for (long i = 0; i < win + lag_max; ++i)
            x[static_cast<size_t>(i)] = w.samples[reflect_index(center - win / 2 + i, n)];

        double e0 = 0.0;
        for (long i = 0; i < win; ++i) e0 += x[static_cast<size_t>(i)] * x[static_cast<size_t>(i)];
        if (e0 < 1e-12) continue;  // silence: unvoiced

        double c_max = -1.0;
        long arg_max = 0;
        for (long lag = lag_min; lag <= lag_max; ++lag) {
            double dot = 0.0, e1 = 0.0;
            for (long i = 0; i < win; ++i) {
                const double a = x[static_cast<size_t>(i)];
                const double b = x[static_cast<size_t>(i + lag)];
                dot += a * b;
                e1 += b * b;
            }
            const double denom = std::sqrt(e0 * e1);
            const double c = denom > 0 ? dot / denom : 0.0;
            corr[static_cast<size_t>(lag)] = c;
            if (c > c_max) {
                c_max = c;
                arg_max = lag;
            }
        }
        if (c_max < 0.5) continue;

        // smallest-lag local maximum near the global peak height; guards
        // against locking onto an integer multiple of the period whose
        // correlation is marginally higher (octave error)
        const double thr = std::max(0.5, 0.98 * c_max);
        long best_lag = arg_max;
        for (long lag = lag_min; lag <= lag_max; ++lag) {
            const double c = corr[static_cast<size_t>(lag)];
            if (c < thr) continue;
            const double prev = lag > lag_min ? corr[static_cast<size_t>(lag) - 1] : -1.0;
            const double next = lag < lag_max ? corr[static_cast<size_t>(lag) + 1] : -1.0;
            if (c >= prev && c >= next) {
                best_lag = lag;
                break;
            }
        }

        // parabolic refinement around the integer peak
        double lag_ref = static_cast<double>(best_lag);
        if (best_lag > lag_min && best_lag < lag_max) {
            const double cm = corr[static_cast<size_t>(best_lag) - 1];
            const double c0 = corr[static_cast<size_t>(best_lag)];
            const double cp = corr[static_cast<size_t>(best_lag) + 1];
            const double denom = cm - 2.0 * c0 + cp;
            if (std::abs(denom) > 1e-12) {
                const double delta = 0.5 * (cm - cp) / denom;
                if (std::abs(delta) <= 1.0) lag_ref += delta;
            }
        }
        r.f0[fr] = w.sample_rate / lag_ref;
        r.vuv[fr] = 1;
    }
    return r;
}

Tensor<double> reconcile_frames(const Tensor<double>& m, size_t frames) {
    if (m.ndim() != 2) fail("reconcile_frames: expected [dim x frames], got ", shape_str(m.shape()));
    const size_t dim = m.dim(0), have = m.dim(1);
    if (have == frames) return m;
    std::vector<double> out(dim * frames);
    for (size_t d = 0; d < dim; ++d)
        for (size_t f = 0; f < frames; ++f)
            out[d * frames + f] = m.values()[d * have + std::min(f, have - 1)];
    return Tensor<double>({dim, frames}, std::move(out));
}

DatasetItem synth_item(const SynthContours& c, int singer_id, const SynthSpec& spec) {
    const size_t frames = c.f0.size();
    if (frames == 0 || c.amp.size() != frames) fail("synth_item: contour frame counts differ");
    if (singer_id < 0 || singer_id >= spec.n_singers)
        fail("synth_item: singer id ", singer_id, " out of range [0,", spec.n_singers, ")");
    const int hop = spec.mel.hop;
    const int sr = spec.mel.sample_rate;
    // length chosen so the framing rule gives back exactly `frames`
    const size_t n = (frames - 1) * static_cast<size_t>(hop) + static_cast<size_t>(hop) / 2;

    // singer-specific spectral tilt: harmonic k weighted k^(-tilt), normalized
    const double tilt = 0.5 + 2.5 * singer_id / std::max(1, spec.n_singers - 1);
    std::vector<double> hw(static_cast<size_t>(spec.n_harmonics));
    double wsum = 0.0;
    for (int k = 0; k < spec.n_harmonics; ++k) {
        hw[static_cast<size_t>(k)] = std::pow(k + 1.0, -tilt);
        wsum += hw[static_cast<size_t>(k)];
    }
    for (auto& v : hw) v /= wsum;

    Wave w;
    w.sample_rate = sr;
    w.samples.resize(n);
    double phase = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double fpos = static_cast<double>(i) / hop;
        const size_t f0i = std::min(static_cast<size_t>(fpos), frames - 1);
        const size_t f1i = std::min(f0i + 1, frames - 1);
        const double frac = fpos - std::floor(fpos);
        const double f0 = c.f0[f0i] * (1.0 - frac) + c.f0[f1i] * frac;
        const double amp = c.amp[f0i] * (1.0 - frac) + c.amp[f1i] * frac;
        phase += 2.0 * kPi * f0 / sr;
        double s = 0.0;
        for (int k = 0; k < spec.n_harmonics; ++k)
            s += hw[static_cast<size_t>(k)] * std::sin((k + 1) * phase);
        w.samples[i] = amp * s;
    }

    DatasetItem item;
    item.singer_id = singer_id;
    item.mel = mel_spectrogram(w, spec.mel);
    if (item.mel.frames() != frames)
        fail("synth_item: internal framing mismatch, got ", item.mel.frames(), " want ", frames);
    item.feats.loudness = loudness(w, hop, spec.mel.win);
    auto f0r = estimate_f0(w, hop, 60.0, 1000.0);
    item.feats.f0 = std::move(f0r.f0);
    item.feats.vuv = std::move(f0r.vuv);

    // smooth deterministic content curves derived from the contours
    std::vector<double> cv(static_cast<size_t>(spec.content_dim) * frames);
    for (int d = 0; d < spec.content_dim; ++d)
        for (size_t f = 0; f < frames; ++f) {
            const double t = static_cast<double>(f) / frames;
            cv[static_cast<size_t>(d) * frames + f] =
                std::sin(2.0 * kPi * (d + 1) * t + 0.01 * c.f0[f]) * 0.5;
        }
    item.feats.content = Tensor<double>({static_cast<size_t>(spec.content_dim), frames},
                                        std::move(cv));
    return item;
}

std::vector<DatasetItem> synth_dataset(Rng& rng, int n_items, const SynthSpec& spec) {
    if (n_items < 1) fail("synth_dataset: n_items must be positive");
    if (spec.min_frames < 2 || spec.max_frames < spec.min_frames)
        fail("synth_dataset: invalid frame range");
    std::vector<DatasetItem> items;
    items.reserve(static_cast<size_t>(n_items));
    for (int i = 0; i < n_items; ++i) {
        const size_t frames =
            static_cast<size_t>(spec.min_frames) +
            rng.uniform_int(static_cast<uint64_t>(spec.max_frames - spec.min_frames + 1));
        SynthContours c;
        c.f0.resize(frames);
        c.amp.resize(frames);
        const double base = 150.0 + 250.0 * rng.uniform();
        const double vib_rate = 2.0 + 3.0 * rng.uniform();
        const double vib_phase = 2.0 * kPi * rng.uniform();
        const double amp_base = 0.25 + 0.1 * rng.uniform();
        const double amp_rate = 0.5 + 2.0 * rng.uniform();
        const double amp_phase = 2.0 * kPi * rng.uniform();
        const double frame_dt = static_cast<double>(spec.mel.hop) / spec.mel.sample_rate;
        for (size_t f = 0; f < frames; ++f) {
            const double t = static_cast<double>(f) * frame_dt;
            c.f0[f] = base * (1.0 + 0.08 * std::sin(2.0 * kPi * vib_rate * t + vib_phase));
            c.amp[f] = amp_base * (1.0 + 0.5 * std::sin(2.0 * kPi * amp_rate * t + amp_phase));
        }
        items.push_back(synth_item(c, i % spec.n_singers, spec));
    }
    return items;
}

}  // namespace melodist
