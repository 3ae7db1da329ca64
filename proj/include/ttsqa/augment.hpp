#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ttsqa/audio_io.hpp"
#include "ttsqa/common.hpp"
#include "ttsqa/dsp_features.hpp"
#include "ttsqa/fft.hpp"

namespace ttsqa {

// ─── noise ───────────────────────────────────────────────────────────────

inline std::vector<double> white_noise(std::size_t n, std::uint64_t seed) {
    rng r(seed);
    std::vector<double> out(n);
    for (double& v : out) v = r.normal();
    return out;
}

// 1/f power spectrum: white noise shaped by f^(-1/2) gains in the frequency
// domain, DC excluded.
inline std::vector<double> pink_noise(std::size_t n, std::uint64_t seed) {
    require(n >= 2, errc::bad_argument, "pink_noise: need at least 2 samples");
    auto w = white_noise(n, seed);
    std::vector<fft::cplx> spec(n);
    for (std::size_t i = 0; i < n; ++i) spec[i] = fft::cplx(w[i], 0.0);
    spec = fft::transform(std::move(spec), false);
    spec[0] = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
        const std::size_t fold = std::min(k, n - k);  // keep conjugate symmetry
        spec[k] *= 1.0 / std::sqrt(static_cast<double>(fold));
    }
    spec = fft::transform(std::move(spec), true);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = spec[i].real();
    return out;
}

namespace detail {

inline waveform add_noise_at_snr(const waveform& w, std::vector<double> noise, double snr_db) {
    require(std::isfinite(snr_db), errc::bad_argument, "snr_db must be finite");
    const double p_signal = signal_power(w.samples);
    require(p_signal > 0.0, errc::zero_power_signal, "SNR undefined for zero-power signal");
    const double p_noise = signal_power(noise);
    const double target = p_signal / std::pow(10.0, snr_db / 10.0);
    const double scale = std::sqrt(target / p_noise);

    waveform out = w;
    for (std::size_t i = 0; i < out.samples.size(); ++i)
        out.samples[i] = std::clamp(out.samples[i] + scale * noise[i], -1.0, 1.0);
    return out;
}

}  // namespace detail

inline waveform add_white_noise(const waveform& w, double snr_db, std::uint64_t seed) {
    return detail::add_noise_at_snr(w, white_noise(w.samples.size(), seed), snr_db);
}

inline waveform add_pink_noise(const waveform& w, double snr_db, std::uint64_t seed) {
    return detail::add_noise_at_snr(w, pink_noise(w.samples.size(), seed), snr_db);
}

// ─── micro gaps ──────────────────────────────────────────────────────────

// Zeroes n_gaps non-overlapping segments of gap_ms with a 1 ms linear fade on
// both sides. Positions are uniform random; the length never changes.
inline waveform insert_micro_gaps(const waveform& w, std::size_t n_gaps, double gap_ms,
                                  std::uint64_t seed) {
    require(n_gaps >= 1, errc::bad_argument, "insert_micro_gaps: n_gaps must be >= 1");
    require(gap_ms >= 1.0 && gap_ms <= 100.0, errc::bad_argument,
            "insert_micro_gaps: gap_ms must be in [1, 100]");

    const std::size_t fade = static_cast<std::size_t>(w.sample_rate_hz / 1000);
    const std::size_t gap_len =
        static_cast<std::size_t>(std::lround(gap_ms * w.sample_rate_hz / 1000.0));
    const std::size_t block = gap_len + 2 * fade;
    require(block * n_gaps <= w.samples.size(), errc::clip_too_short,
            "insert_micro_gaps: clip too short for requested gaps");

    // place blocks without overlap via sorted uniform offsets into the slack
    const std::size_t slack = w.samples.size() - block * n_gaps;
    rng r(seed);
    std::vector<std::size_t> offsets(n_gaps);
    for (auto& o : offsets) o = static_cast<std::size_t>(r.integer(slack + 1));
    std::sort(offsets.begin(), offsets.end());

    waveform out = w;
    for (std::size_t g = 0; g < n_gaps; ++g) {
        const std::size_t start = offsets[g] + g * block;
        for (std::size_t i = 0; i < fade; ++i)
            out.samples[start + i] *= static_cast<double>(fade - 1 - i) / fade;
        std::fill(out.samples.begin() + start + fade, out.samples.begin() + start + fade + gap_len, 0.0);
        for (std::size_t i = 0; i < fade; ++i)
            out.samples[start + fade + gap_len + i] *= static_cast<double>(i + 1) / fade;
    }
    return out;
}

// ─── frequency response shaping ──────────────────────────────────────────

struct eq_band {
    double center_hz = 0.0;
    double gain_db = 0.0;
};

namespace detail {

// Piecewise-linear gain in (log2 f, dB): exact anchor values at anchor
// frequencies, interpolation between anchors, and a one-octave return to
// unity beyond the extreme anchors (flat 0 dB further out).
inline double eq_gain_db(double f, const std::vector<eq_band>& bands) {
    if (f <= 0.0) return 0.0;
    const double lf = std::log2(f);
    const double first = bands.front().center_hz, last = bands.back().center_hz;
    if (f <= first) {
        const double edge = std::log2(first) - 1.0;
        if (lf <= edge) return 0.0;
        return bands.front().gain_db * (lf - edge);
    }
    if (f >= last) {
        const double edge = std::log2(last) + 1.0;
        if (lf >= edge) return 0.0;
        return bands.back().gain_db * (edge - lf);
    }
    for (std::size_t i = 0; i + 1 < bands.size(); ++i) {
        const double f0 = bands[i].center_hz, f1 = bands[i + 1].center_hz;
        if (f >= f0 && f <= f1) {
            const double t = (lf - std::log2(f0)) / (std::log2(f1) - std::log2(f0));
            return bands[i].gain_db + t * (bands[i + 1].gain_db - bands[i].gain_db);
        }
    }
    return 0.0;
}

}  // namespace detail

// STFT-domain multiplication by a smooth gain curve; Hann analysis and
// synthesis windows at 75% overlap give exact reconstruction at unity gain.
inline waveform shape_freq_response(const waveform& w, std::vector<eq_band> bands) {
    require(!bands.empty() && bands.size() <= 16, errc::bad_argument,
            "shape_freq_response: need 1..16 bands");
    for (const auto& b : bands) {
        require(b.center_hz > 0.0 && b.center_hz < w.sample_rate_hz / 2.0, errc::bad_argument,
                "shape_freq_response: band center outside (0, nyquist)");
        require(b.gain_db >= -24.0 && b.gain_db <= 24.0, errc::bad_argument,
                "shape_freq_response: gain outside [-24, 24] dB");
    }
    std::sort(bands.begin(), bands.end(),
              [](const eq_band& a, const eq_band& b) { return a.center_hz < b.center_hz; });
    for (std::size_t i = 0; i + 1 < bands.size(); ++i)
        require(bands[i].center_hz != bands[i + 1].center_hz, errc::bad_argument,
                "shape_freq_response: duplicate band centers");

    constexpr std::size_t win = 1024, hop = win / 4, nfft = win;
    const auto window = hann_window(win);

    std::vector<double> gains(nfft / 2 + 1);
    for (std::size_t k = 0; k < gains.size(); ++k) {
        const double f = static_cast<double>(k) * w.sample_rate_hz / nfft;
        gains[k] = std::pow(10.0, detail::eq_gain_db(f, bands) / 20.0);
    }

    // pad one window on both sides so every input sample gets full overlap
    std::vector<double> padded(w.samples.size() + 2 * win, 0.0);
    std::copy(w.samples.begin(), w.samples.end(), padded.begin() + win);
    const std::size_t n_frames = (padded.size() - win) / hop + 1;

    std::vector<double> acc(padded.size() + win, 0.0);
    std::vector<double> buf(win);
    for (std::size_t t = 0; t < n_frames; ++t) {
        const std::size_t start = t * hop;
        for (std::size_t i = 0; i < win; ++i) buf[i] = padded[start + i] * window[i];
        auto spec = fft::rfft(buf, nfft);
        for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= gains[k];
        const auto frame = fft::irfft(spec, nfft);
        for (std::size_t i = 0; i < win; ++i) acc[start + i] += frame[i] * window[i];
    }

    // sum of squared Hann windows at hop = win/4 is exactly 1.5
    waveform out = w;
    for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] = acc[win + i] / 1.5;
    return out;
}

// ─── alignment tracks ────────────────────────────────────────────────────

struct phone_segment {
    std::string label;
    double start_s = 0.0;
    double end_s = 0.0;
};

struct alignment_track {
    std::string clip_id;
    std::vector<phone_segment> segments;
};

inline void validate_alignment(const alignment_track& a, double clip_duration_s) {
    double prev_end = 0.0;
    for (const auto& s : a.segments) {
        require(s.start_s >= prev_end && s.end_s > s.start_s && s.end_s <= clip_duration_s + 1e-9,
                errc::invalid_alignment,
                "alignment segment '" + s.label + "' out of range or overlapping");
        prev_end = s.end_s;
    }
}

// `clip_id<TAB>label<TAB>start_s<TAB>end_s` per line
inline std::map<std::string, alignment_track> load_alignment_file(const std::string& path) {
    std::map<std::string, alignment_track> out;
    std::size_t line_no = 0;
    for (const auto& line : split(read_text_file(path), '\n')) {
        ++line_no;
        if (trim(line).empty() || line[0] == '#') continue;
        const auto fields = split(line, '\t');
        require(fields.size() == 4, errc::malformed_row,
                path + ":" + std::to_string(line_no) + ": expected 4 tab-separated fields");
        alignment_track& track = out[fields[0]];
        track.clip_id = fields[0];
        try {
            track.segments.push_back({fields[1], std::stod(fields[2]), std::stod(fields[3])});
        } catch (const std::exception&) {
            fail(errc::malformed_row, path + ":" + std::to_string(line_no) + ": bad time value");
        }
    }
    return out;
}

// ─── WSOLA time stretch ──────────────────────────────────────────────────

namespace detail {

// Waveform-similarity overlap-add to an exact output length. Pitch is
// preserved; duration scales by target_len / len.
inline std::vector<double> wsola_to_length(const std::vector<double>& x, int sample_rate_hz,
                                           std::size_t target_len) {
    if (x.empty() || target_len == 0) return std::vector<double>(target_len, 0.0);

    const std::size_t win = std::max<std::size_t>(64, (static_cast<std::size_t>(sample_rate_hz) / 1000) * 25);
    if (x.size() <= win || target_len <= win) {
        // too short for overlap-add; fall back to band-limited rescale
        auto y = resample_ratio(x, static_cast<double>(target_len) / x.size());
        y.resize(target_len, 0.0);
        return y;
    }

    const std::size_t hop = win / 2;
    const std::int64_t tol = static_cast<std::int64_t>(win / 4);
    const double rate = static_cast<double>(x.size()) / static_cast<double>(target_len);
    const auto window = hann_window(win);
    const std::int64_t max_start = static_cast<std::int64_t>(x.size() - win);

    std::vector<double> out(target_len + win, 0.0);
    std::int64_t prev_src = 0;
    for (std::size_t k = 0;; ++k) {
        const std::size_t ps = k * hop;
        if (ps >= target_len) break;
        std::int64_t src;
        if (k == 0) {
            src = 0;
        } else {
            const std::int64_t nominal =
                std::clamp<std::int64_t>(std::llround(static_cast<double>(ps) * rate), 0, max_start);
            const std::int64_t natural = std::min(prev_src + static_cast<std::int64_t>(hop), max_start);
            // best cross-correlation with the natural continuation over the overlap half
            double best = -1e300;
            std::int64_t best_delta = 0;
            for (std::int64_t d = -tol; d <= tol; ++d) {
                const std::int64_t c = nominal + d;
                if (c < 0 || c > max_start) continue;
                double corr = 0.0;
                const double* a = x.data() + c;
                const double* b = x.data() + natural;
                for (std::size_t i = 0; i < hop; ++i) corr += a[i] * b[i];
                if (corr > best + 1e-15 || (std::abs(corr - best) <= 1e-15 && std::llabs(d) < std::llabs(best_delta))) {
                    best = corr;
                    best_delta = d;
                }
            }
            src = nominal + best_delta;
        }
        for (std::size_t i = 0; i < win; ++i)
            out[ps + i] += x[static_cast<std::size_t>(src) + i] * window[i];
        prev_src = src;
    }
    out.resize(target_len);
    return out;
}

}  // namespace detail

// WSOLA time stretch at speed `rate` (0.5 halves speed and doubles duration).
// With an alignment track, only the listed segments are stretched and the
// remainder is copied verbatim.
inline waveform time_stretch(const waveform& w, double rate,
                             const alignment_track* segments = nullptr) {
    require(rate >= 0.5 && rate <= 2.0, errc::bad_argument, "time_stretch: rate must be in [0.5, 2]");
    waveform out = w;
    if (segments == nullptr) {
        if (std::abs(rate - 1.0) < 1e-12) return out;
        const std::size_t target = static_cast<std::size_t>(
            std::max<std::int64_t>(1, std::llround(w.samples.size() / rate)));
        out.samples = detail::wsola_to_length(w.samples, w.sample_rate_hz, target);
        return out;
    }

    validate_alignment(*segments, w.duration_s());
    std::vector<double> assembled;
    std::size_t cursor = 0;
    auto to_idx = [&](double t) {
        return std::min(w.samples.size(),
                        static_cast<std::size_t>(std::llround(t * w.sample_rate_hz)));
    };
    for (const auto& seg : segments->segments) {
        const std::size_t lo = to_idx(seg.start_s), hi = to_idx(seg.end_s);
        assembled.insert(assembled.end(), w.samples.begin() + cursor, w.samples.begin() + lo);
        const std::vector<double> span(w.samples.begin() + lo, w.samples.begin() + hi);
        const std::size_t target = static_cast<std::size_t>(
            std::max<std::int64_t>(1, std::llround(span.size() / rate)));
        const auto stretched = detail::wsola_to_length(span, w.sample_rate_hz, target);
        assembled.insert(assembled.end(), stretched.begin(), stretched.end());
        cursor = hi;
    }
    assembled.insert(assembled.end(), w.samples.begin() + cursor, w.samples.end());
    out.samples = std::move(assembled);
    return out;
}

// ─── reverberation ───────────────────────────────────────────────────────

// FFT convolution truncated to the input length, peak-normalized to the
// input's peak.
inline waveform rir_convolve(const waveform& w, const waveform& rir) {
    require(!rir.samples.empty(), errc::empty_rir, "rir_convolve: empty RIR");
    require(rir.samples.size() <= static_cast<std::size_t>(rir.sample_rate_hz), errc::bad_argument,
            "rir_convolve: RIR longer than 1 s");
    auto full = fft::convolve(w.samples, rir.samples);
    full.resize(w.samples.size());

    const double in_peak = peak_abs(w.samples);
    const double out_peak = peak_abs(full);
    if (out_peak > 0.0 && in_peak > 0.0) {
        const double scale = in_peak / out_peak;
        for (double& v : full) v *= scale;
    }
    waveform out = w;
    out.samples = std::move(full);
    return out;
}

// direct path plus an exponentially decaying noise tail, peak-normalized
inline waveform synth_rir(int sample_rate_hz, double duration_s, double decay_s, std::uint64_t seed) {
    require(duration_s > 0.0 && duration_s <= 1.0, errc::bad_argument,
            "synth_rir: duration must be in (0, 1] s");
    require(decay_s > 0.0, errc::bad_argument, "synth_rir: decay must be positive");
    const std::size_t n = static_cast<std::size_t>(std::lround(duration_s * sample_rate_hz));
    waveform rir;
    rir.sample_rate_hz = sample_rate_hz;
    rir.samples.resize(std::max<std::size_t>(1, n));
    rng r(seed);
    rir.samples[0] = 1.0;
    for (std::size_t i = 1; i < rir.samples.size(); ++i)
        rir.samples[i] = 0.5 * r.normal() *
                         std::exp(-static_cast<double>(i) / (decay_s * sample_rate_hz));
    const double peak = peak_abs(rir.samples);
    for (double& v : rir.samples) v /= peak;
    return rir;
}

// ─── pitch shift ─────────────────────────────────────────────────────────

// Pitch moves by 2^(semitones/12); duration is preserved. Implemented as a
// WSOLA stretch followed by a band-limited rescale at the inverse factor.
inline waveform pitch_shift(const waveform& w, double semitones) {
    require(semitones >= -12.0 && semitones <= 12.0, errc::bad_argument,
            "pitch_shift: semitones must be in [-12, 12]");
    if (std::abs(semitones) < 1e-12) return w;
    const double factor = std::pow(2.0, semitones / 12.0);

    const std::size_t stretched_len = static_cast<std::size_t>(
        std::max<std::int64_t>(1, std::llround(w.samples.size() * factor)));
    const auto stretched = detail::wsola_to_length(w.samples, w.sample_rate_hz, stretched_len);

    waveform out = w;
    out.samples = resample_ratio(stretched, 1.0 / factor);
    for (double& v : out.samples) v = std::clamp(v, -1.0, 1.0);
    return out;
}

// ─── voiced/unvoiced consonant substitution ──────────────────────────────

namespace detail {

inline const std::map<std::string, std::string>& voicing_pairs() {
    static const std::map<std::string, std::string> pairs = {
        {"p", "b"}, {"t", "d"}, {"k", "g"}, {"f", "v"},
        {"s", "z"}, {"sh", "zh"}, {"ch", "jh"}, {"th", "dh"},
    };
    return pairs;
}

}  // namespace detail

// Swaps waveform spans of voiced/voiceless phone pairs (p<->b, s<->z, ...)
// labeled by the alignment track; each span is length-fitted to its new slot
// so the clip duration never changes. Requires an alignment; there is no
// pronunciation model to fall back on.
inline waveform substitute_consonants(const waveform& w, const alignment_track& align,
                                      std::uint64_t seed) {
    validate_alignment(align, w.duration_s());
    auto to_idx = [&](double t) {
        return std::min(w.samples.size(),
                        static_cast<std::size_t>(std::llround(t * w.sample_rate_hz)));
    };

    std::map<std::string, std::vector<std::size_t>> by_label;  // -> segment indices
    for (std::size_t i = 0; i < align.segments.size(); ++i)
        by_label[to_lower(align.segments[i].label)].push_back(i);

    rng r(seed);
    std::vector<std::pair<std::size_t, std::size_t>> swaps;
    for (const auto& [voiceless, voiced] : detail::voicing_pairs()) {
        auto a = by_label.find(voiceless);
        auto b = by_label.find(voiced);
        if (a == by_label.end() || b == by_label.end()) continue;
        auto lhs = a->second, rhs = b->second;
        r.shuffle(lhs);
        r.shuffle(rhs);
        for (std::size_t i = 0; i < std::min(lhs.size(), rhs.size()); ++i)
            swaps.emplace_back(lhs[i], rhs[i]);
    }

    // segment index -> index of the segment whose audio it receives
    std::map<std::size_t, std::size_t> replacement;
    for (const auto& [i, j] : swaps) {
        replacement[i] = j;
        replacement[j] = i;
    }

    waveform out = w;
    if (replacement.empty()) return out;
    std::vector<double> assembled;
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < align.segments.size(); ++i) {
        const std::size_t lo = to_idx(align.segments[i].start_s);
        const std::size_t hi = to_idx(align.segments[i].end_s);
        assembled.insert(assembled.end(), w.samples.begin() + cursor, w.samples.begin() + lo);
        auto it = replacement.find(i);
        if (it == replacement.end()) {
            assembled.insert(assembled.end(), w.samples.begin() + lo, w.samples.begin() + hi);
        } else {
            const auto& src_seg = align.segments[it->second];
            const std::vector<double> src(w.samples.begin() + to_idx(src_seg.start_s),
                                          w.samples.begin() + to_idx(src_seg.end_s));
            const auto fitted = detail::wsola_to_length(src, w.sample_rate_hz, hi - lo);
            assembled.insert(assembled.end(), fitted.begin(), fitted.end());
        }
        cursor = hi;
    }
    assembled.insert(assembled.end(), w.samples.begin() + cursor, w.samples.end());
    out.samples = std::move(assembled);
    return out;
}

// ─── pipeline ────────────────────────────────────────────────────────────

enum class augment_op {
    white_noise,
    pink_noise,
    micro_gap,
    freq_response,
    time_stretch,
    rir_convolve,
    pitch_shift,
    consonant_sub,
};

inline int augment_stage(augment_op op) {
    switch (op) {
        case augment_op::white_noise:
        case augment_op::pink_noise:
        case augment_op::micro_gap:
        case augment_op::freq_response:
            return 1;
        default:
            return 2;
    }
}

inline const char* augment_op_name(augment_op op) {
    switch (op) {
        case augment_op::white_noise: return "white_noise";
        case augment_op::pink_noise: return "pink_noise";
        case augment_op::micro_gap: return "micro_gap";
        case augment_op::freq_response: return "freq_response";
        case augment_op::time_stretch: return "time_stretch";
        case augment_op::rir_convolve: return "rir_convolve";
        case augment_op::pitch_shift: return "pitch_shift";
        case augment_op::consonant_sub: return "consonant_sub";
    }
    return "?";
}

inline std::optional<augment_op> augment_op_from_name(std::string_view name) {
    for (augment_op op : {augment_op::white_noise, augment_op::pink_noise, augment_op::micro_gap,
                          augment_op::freq_response, augment_op::time_stretch,
                          augment_op::rir_convolve, augment_op::pitch_shift,
                          augment_op::consonant_sub}) {
        if (name == augment_op_name(op)) return op;
    }
    return std::nullopt;
}

struct augment_spec {
    augment_op op = augment_op::white_noise;
    std::uint64_t seed = 0;

    double snr_db = 20.0;              // white_noise, pink_noise
    std::size_t n_gaps = 1;            // micro_gap
    double gap_ms = 20.0;              // micro_gap
    std::vector<eq_band> bands;        // freq_response
    double rate = 1.0;                 // time_stretch
    double semitones = 0.0;            // pitch_shift
    std::string rir_path;              // rir_convolve; empty -> synthetic
    double rir_duration_s = 0.25;      // rir_convolve (synthetic)
    double rir_decay_s = 0.08;         // rir_convolve (synthetic)
};

inline waveform apply_augment(const waveform& w, const augment_spec& spec,
                              const alignment_track* align = nullptr) {
    switch (spec.op) {
        case augment_op::white_noise:
            return add_white_noise(w, spec.snr_db, spec.seed);
        case augment_op::pink_noise:
            return add_pink_noise(w, spec.snr_db, spec.seed);
        case augment_op::micro_gap:
            return insert_micro_gaps(w, spec.n_gaps, spec.gap_ms, spec.seed);
        case augment_op::freq_response:
            return shape_freq_response(w, spec.bands);
        case augment_op::time_stretch:
            return time_stretch(w, spec.rate, align);
        case augment_op::rir_convolve: {
            const waveform rir = spec.rir_path.empty()
                                     ? synth_rir(w.sample_rate_hz, spec.rir_duration_s,
                                                 spec.rir_decay_s, spec.seed)
                                     : load_wav(spec.rir_path, w.sample_rate_hz);
            return rir_convolve(w, rir);
        }
        case augment_op::pitch_shift:
            return pitch_shift(w, spec.semitones);
        case augment_op::consonant_sub:
            require(align != nullptr, errc::invalid_alignment,
                    "consonant_sub requires a phone alignment");
            return substitute_consonants(w, *align, spec.seed);
    }
    fail(errc::bad_argument, "apply_augment: unknown op");
}

// Left-to-right composition. Signal-level ops (stage 1) must precede the
// phonetically motivated ops (stage 2).
inline waveform apply_pipeline(const waveform& w, const std::vector<augment_spec>& specs,
                               const alignment_track* align = nullptr) {
    int stage = 1;
    for (const auto& s : specs) {
        const int op_stage = augment_stage(s.op);
        require(op_stage >= stage, errc::stage_order_violation,
                std::string("apply_pipeline: stage-1 op '") + augment_op_name(s.op) +
                    "' after a stage-2 op");
        stage = op_stage;
    }
    waveform out = w;
    for (const auto& s : specs) out = apply_augment(out, s, align);
    return out;
}

}  // namespace ttsqa
