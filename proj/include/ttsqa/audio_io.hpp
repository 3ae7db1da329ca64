#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "ttsqa/common.hpp"

namespace ttsqa {

inline constexpr int kCanonicalRateHz = 16000;

// mono PCM signal, amplitudes in [-1, 1]
struct waveform {
    std::vector<double> samples;
    int sample_rate_hz = kCanonicalRateHz;
    std::string clip_id;

    double duration_s() const {
        return static_cast<double>(samples.size()) / sample_rate_hz;
    }
};

inline double signal_power(const std::vector<double>& x) {
    if (x.empty()) return 0.0;
    double s = 0.0;
    for (double v : x) s += v * v;
    return s / static_cast<double>(x.size());
}

inline double peak_abs(const std::vector<double>& x) {
    double p = 0.0;
    for (double v : x) p = std::max(p, std::abs(v));
    return p;
}

// ─── resampling ──────────────────────────────────────────────────────────

namespace detail {

// modified Bessel I0 by power series
inline double bessel_i0(double x) {
    double sum = 1.0, term = 1.0;
    const double half_sq = 0.25 * x * x;
    for (int k = 1; k < 200; ++k) {
        term *= half_sq / (static_cast<double>(k) * k);
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return sum;
}

inline double sinc(double x) {
    if (std::abs(x) < 1e-12) return 1.0;
    const double px = 3.14159265358979323846 * x;
    return std::sin(px) / px;
}

}  // namespace detail

// Band-limited arbitrary-ratio resampler: Kaiser-windowed sinc, beta = 8.6
// (~80 dB stopband), 64-tap kernel per output sample at unity ratio. Each
// output sample's tap weights are renormalized so DC gain is exactly 1.
// `ratio` is output samples per input sample.
inline std::vector<double> resample_ratio(const std::vector<double>& x, double ratio) {
    require(ratio > 0.0, errc::bad_argument, "resample_ratio: ratio must be positive");
    if (x.empty()) return {};

    const std::int64_t n_in = static_cast<std::int64_t>(x.size());
    const std::int64_t n_out = std::max<std::int64_t>(1, std::llround(n_in * ratio));

    const double cutoff = std::min(1.0, ratio);  // fraction of input Nyquist
    const double half_width = 32.0 / cutoff;
    const double beta = 8.6;
    const double i0_beta = detail::bessel_i0(beta);

    std::vector<double> out(static_cast<std::size_t>(n_out), 0.0);
    for (std::int64_t n = 0; n < n_out; ++n) {
        const double center = static_cast<double>(n) / ratio;
        const std::int64_t k_lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(center - half_width)));
        const std::int64_t k_hi = std::min<std::int64_t>(n_in - 1, static_cast<std::int64_t>(std::floor(center + half_width)));
        double acc = 0.0, wsum = 0.0;
        for (std::int64_t k = k_lo; k <= k_hi; ++k) {
            const double t = (static_cast<double>(k) - center) / half_width;  // in [-1, 1]
            const double win = detail::bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - t * t))) / i0_beta;
            const double w = detail::sinc(cutoff * (static_cast<double>(k) - center)) * win;
            acc += w * x[static_cast<std::size_t>(k)];
            wsum += w;
        }
        out[static_cast<std::size_t>(n)] = (wsum != 0.0) ? acc / wsum : 0.0;
    }
    return out;
}

inline waveform resample(const waveform& w, int target_hz) {
    require(target_hz > 0, errc::bad_argument, "resample: target rate must be positive");
    if (target_hz == w.sample_rate_hz) return w;
    waveform out;
    out.clip_id = w.clip_id;
    out.sample_rate_hz = target_hz;
    out.samples = resample_ratio(w.samples, static_cast<double>(target_hz) / w.sample_rate_hz);
    return out;
}

// ─── RIFF/WAVE files ─────────────────────────────────────────────────────

namespace detail {

inline std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void put_u32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u16(std::string& s, std::uint16_t v) {
    for (int i = 0; i < 2; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace detail

// Reads a PCM16 or IEEE float32 RIFF/WAVE file, downmixes to mono by channel
// mean, scales to [-1, 1], and resamples to the canonical 16 kHz rate.
inline waveform load_wav(const std::string& path, int target_hz = kCanonicalRateHz) {
    std::string raw;
    try {
        raw = read_text_file(path);
    } catch (const error&) {
        fail(errc::unreadable_file, "load_wav: cannot read " + path);
    }
    const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
    const std::size_t n = raw.size();

    if (n < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
        fail(errc::unsupported_codec, "load_wav: not a RIFF/WAVE file: " + path);

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    const unsigned char* data = nullptr;
    std::size_t data_len = 0;
    bool have_fmt = false;

    std::size_t pos = 12;
    while (pos + 8 <= n) {
        const char* id = raw.data() + pos;
        const std::uint32_t sz = detail::read_u32(p + pos + 4);
        pos += 8;
        if (pos + sz > n) fail(errc::unsupported_codec, "load_wav: truncated chunk in " + path);
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (sz < 16) fail(errc::unsupported_codec, "load_wav: short fmt chunk in " + path);
            format = detail::read_u16(p + pos);
            channels = detail::read_u16(p + pos + 2);
            rate = detail::read_u32(p + pos + 4);
            bits = detail::read_u16(p + pos + 14);
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            data = p + pos;
            data_len = sz;
        }
        pos += sz + (sz & 1);  // chunks are word aligned
    }

    if (!have_fmt || data == nullptr)
        fail(errc::unsupported_codec, "load_wav: missing fmt/data chunk in " + path);
    if (channels < 1 || channels > 2 || rate == 0)
        fail(errc::unsupported_codec, "load_wav: unsupported channel/rate layout in " + path);

    const bool pcm16 = (format == 1 && bits == 16);
    const bool float32 = (format == 3 && bits == 32);
    if (!pcm16 && !float32)
        fail(errc::unsupported_codec, "load_wav: only PCM16 and float32 supported: " + path);

    const std::size_t bytes_per_sample = pcm16 ? 2 : 4;
    const std::size_t frame_bytes = bytes_per_sample * channels;
    const std::size_t frames = data_len / frame_bytes;
    if (frames == 0) fail(errc::zero_length_audio, "load_wav: no audio samples in " + path);

    waveform w;
    w.sample_rate_hz = static_cast<int>(rate);
    w.samples.resize(frames);
    for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (std::uint16_t c = 0; c < channels; ++c) {
            const unsigned char* sp = data + i * frame_bytes + c * bytes_per_sample;
            if (pcm16) {
                const std::int16_t v = static_cast<std::int16_t>(detail::read_u16(sp));
                acc += static_cast<double>(v) / 32768.0;
            } else {
                float f;
                std::memcpy(&f, sp, 4);
                acc += static_cast<double>(f);
            }
        }
        w.samples[i] = std::clamp(acc / channels, -1.0, 1.0);
    }

    if (w.sample_rate_hz != target_hz) w = resample(w, target_hz);
    for (double& s : w.samples) s = std::clamp(s, -1.0, 1.0);
    return w;
}

// Writes 16-bit PCM mono at the waveform's own sample rate.
inline void save_wav(const waveform& w, const std::string& path) {
    require(!w.samples.empty(), errc::zero_length_audio, "save_wav: empty waveform");
    const std::uint32_t n = static_cast<std::uint32_t>(w.samples.size());
    const std::uint32_t rate = static_cast<std::uint32_t>(w.sample_rate_hz);

    std::string out;
    out.reserve(44 + 2 * n);
    out += "RIFF";
    detail::put_u32(out, 36 + 2 * n);
    out += "WAVEfmt ";
    detail::put_u32(out, 16);
    detail::put_u16(out, 1);  // PCM
    detail::put_u16(out, 1);  // mono
    detail::put_u32(out, rate);
    detail::put_u32(out, rate * 2);  // byte rate
    detail::put_u16(out, 2);         // block align
    detail::put_u16(out, 16);        // bits
    out += "data";
    detail::put_u32(out, 2 * n);
    for (double s : w.samples) {
        const long q = std::lround(std::clamp(s, -1.0, 1.0) * 32768.0);
        const std::int16_t v = static_cast<std::int16_t>(std::clamp<long>(q, -32768, 32767));
        detail::put_u16(out, static_cast<std::uint16_t>(v));
    }
    write_text_file(path, out);
}

}  // namespace ttsqa
