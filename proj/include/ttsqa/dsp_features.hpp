#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "ttsqa/audio_io.hpp"
#include "ttsqa/common.hpp"
#include "ttsqa/fft.hpp"

namespace ttsqa {

// T x D frame-level features; rows past valid_frames are padding
struct feature_matrix {
    matrix frames;
    double frame_hop_s = 0.0;
    std::size_t valid_frames = 0;
    int sample_rate_hz = kCanonicalRateHz;
};

struct utterance_embedding {
    std::vector<double> vec;
    std::string clip_id;
};

// ─── STFT ────────────────────────────────────────────────────────────────

inline std::vector<double> hann_window(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.5 - 0.5 * std::cos(2.0 * fft::kPi * static_cast<double>(i) / static_cast<double>(n));
    return w;
}

// Power spectrogram with Hann analysis window. The trailing partial frame is
// dropped: T = floor((len - win) / hop) + 1.
inline feature_matrix stft_power(const waveform& w, std::size_t win, std::size_t hop, std::size_t nfft) {
    require(hop >= 1, errc::bad_argument, "stft_power: hop must be >= 1");
    require(win <= nfft, errc::bad_argument, "stft_power: win must be <= nfft");
    require(w.samples.size() >= win, errc::clip_too_short,
            "stft_power: signal shorter than one window");

    const std::size_t n_frames = (w.samples.size() - win) / hop + 1;
    const std::size_t n_bins = nfft / 2 + 1;
    const auto window = hann_window(win);

    feature_matrix out;
    out.frames = matrix(n_frames, n_bins);
    out.frame_hop_s = static_cast<double>(hop) / w.sample_rate_hz;
    out.valid_frames = n_frames;
    out.sample_rate_hz = w.sample_rate_hz;

    std::vector<double> buf(win);
    for (std::size_t t = 0; t < n_frames; ++t) {
        const double* src = w.samples.data() + t * hop;
        for (std::size_t i = 0; i < win; ++i) buf[i] = src[i] * window[i];
        const auto spec = fft::rfft(buf, nfft);
        double* row = out.frames.row(t);
        for (std::size_t k = 0; k < n_bins; ++k) row[k] = std::norm(spec[k]);
    }
    return out;
}

// ─── mel filterbank ──────────────────────────────────────────────────────

namespace detail {

// Slaney mel scale: linear below 1 kHz, logarithmic above
inline double hz_to_mel(double hz) {
    constexpr double break_hz = 1000.0, break_mel = 15.0;
    constexpr double lin = 200.0 / 3.0;
    constexpr double log_step = 0.06875177742094912;  // ln(6.4) / 27
    if (hz < break_hz) return hz / lin;
    return break_mel + std::log(hz / break_hz) / log_step;
}

inline double mel_to_hz(double mel) {
    constexpr double break_hz = 1000.0, break_mel = 15.0;
    constexpr double lin = 200.0 / 3.0;
    constexpr double log_step = 0.06875177742094912;
    if (mel < break_mel) return mel * lin;
    return break_hz * std::exp((mel - break_mel) * log_step);
}

}  // namespace detail

// Triangular mel filterbank, n_mels x (nfft/2 + 1); each row normalized to
// sum to 1 so band energies are weighted averages of bin powers.
inline matrix mel_filterbank(std::size_t n_mels, std::size_t nfft, int sample_rate_hz,
                             double fmin, double fmax) {
    require(n_mels >= 4, errc::bad_argument, "mel_filterbank: n_mels must be >= 4");
    require(fmin < fmax && fmax <= sample_rate_hz / 2.0, errc::bad_argument,
            "mel_filterbank: need fmin < fmax <= nyquist");

    const std::size_t n_bins = nfft / 2 + 1;
    std::vector<double> corners(n_mels + 2);
    const double mel_lo = detail::hz_to_mel(fmin), mel_hi = detail::hz_to_mel(fmax);
    for (std::size_t i = 0; i < corners.size(); ++i)
        corners[i] = detail::mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                                    static_cast<double>(n_mels + 1));

    matrix fb(n_mels, n_bins);
    for (std::size_t m = 0; m < n_mels; ++m) {
        const double f0 = corners[m], f1 = corners[m + 1], f2 = corners[m + 2];
        double sum = 0.0;
        for (std::size_t k = 0; k < n_bins; ++k) {
            const double f = static_cast<double>(k) * sample_rate_hz / static_cast<double>(nfft);
            double v = 0.0;
            if (f > f0 && f < f1)
                v = (f - f0) / (f1 - f0);
            else if (f >= f1 && f < f2)
                v = (f2 - f) / (f2 - f1);
            fb(m, k) = v;
            sum += v;
        }
        require(sum > 0.0, errc::bad_argument,
                "mel_filterbank: filter " + std::to_string(m) + " covers no FFT bin");
        for (std::size_t k = 0; k < n_bins; ++k) fb(m, k) /= sum;
    }
    return fb;
}

// natural log of (mel energy + 1e-10)
inline feature_matrix log_mel(const feature_matrix& spec, std::size_t n_mels, double fmin, double fmax) {
    const std::size_t nfft = (spec.frames.cols - 1) * 2;
    const matrix fb = mel_filterbank(n_mels, nfft, spec.sample_rate_hz, fmin, fmax);

    feature_matrix out;
    out.frames = matrix(spec.frames.rows, n_mels);
    out.frame_hop_s = spec.frame_hop_s;
    out.valid_frames = spec.valid_frames;
    out.sample_rate_hz = spec.sample_rate_hz;

    for (std::size_t t = 0; t < spec.frames.rows; ++t) {
        const double* in = spec.frames.row(t);
        double* row = out.frames.row(t);
        for (std::size_t m = 0; m < n_mels; ++m) {
            double e = 0.0;
            const double* w = fb.row(m);
            for (std::size_t k = 0; k < spec.frames.cols; ++k) e += w[k] * in[k];
            row[m] = std::log(e + 1e-10);
        }
    }
    return out;
}

// ─── utterance embeddings ────────────────────────────────────────────────

// Temporal mean over the first valid_frames rows; padding never contributes.
// With a projection (D x E) the result is the projected mean.
inline utterance_embedding embed_utterance(const feature_matrix& f, const matrix* projection = nullptr,
                                           const std::string& clip_id = {}) {
    require(f.valid_frames >= 1, errc::bad_argument, "embed_utterance: no valid frames");
    require(f.valid_frames <= f.frames.rows, errc::bad_argument,
            "embed_utterance: valid_frames exceeds row count");

    std::vector<double> mean(f.frames.cols, 0.0);
    for (std::size_t t = 0; t < f.valid_frames; ++t) {
        const double* row = f.frames.row(t);
        for (std::size_t c = 0; c < f.frames.cols; ++c) mean[c] += row[c];
    }
    const double inv = 1.0 / static_cast<double>(f.valid_frames);
    for (double& v : mean) v *= inv;

    utterance_embedding e;
    e.clip_id = clip_id;
    if (projection != nullptr) {
        require(projection->rows == mean.size(), errc::dimension_mismatch,
                "embed_utterance: projection rows != feature dim");
        e.vec = matvec_t(*projection, mean);
    } else {
        e.vec = std::move(mean);
    }
    return e;
}

// Feature-hashed bag of lowercase word unigrams and bigrams with signed
// hashing, L2-normalized. Empty transcripts map to the zero vector.
inline utterance_embedding text_embed(const std::string& transcript, std::size_t dim,
                                      std::uint64_t seed, const std::string& clip_id = {}) {
    require(dim >= 8, errc::bad_argument, "text_embed: dim must be >= 8");

    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : transcript) {
        if (std::isalnum(static_cast<unsigned char>(ch))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));

    utterance_embedding e;
    e.clip_id = clip_id;
    e.vec.assign(dim, 0.0);

    const std::uint64_t base = fnv1a64(seed);
    auto add_term = [&](const std::string& term) {
        const std::uint64_t h = fnv1a64(term, base);
        const std::size_t bucket = static_cast<std::size_t>(h % dim);
        e.vec[bucket] += (h >> 63) ? -1.0 : 1.0;
    };
    for (const auto& t : tokens) add_term(t);
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) add_term(tokens[i] + "_" + tokens[i + 1]);

    const double norm = std::sqrt(dot(e.vec, e.vec));
    if (norm > 0.0)
        for (double& v : e.vec) v /= norm;
    return e;
}

// ─── front-end configuration ─────────────────────────────────────────────

struct feature_config {
    std::size_t win = 400;   // 25 ms at 16 kHz
    std::size_t hop = 160;   // 10 ms
    std::size_t nfft = 512;
    std::size_t n_mels = 40;
    double fmin = 20.0;
    double fmax = 7600.0;
    std::size_t text_dim = 64;
    std::uint64_t text_seed = 1;
};

inline feature_matrix log_mel_features(const waveform& w, const feature_config& cfg) {
    return log_mel(stft_power(w, cfg.win, cfg.hop, cfg.nfft), cfg.n_mels, cfg.fmin, cfg.fmax);
}

inline utterance_embedding embed_audio(const waveform& w, const feature_config& cfg) {
    return embed_utterance(log_mel_features(w, cfg), nullptr, w.clip_id);
}

// ─── precomputed-embedding files ─────────────────────────────────────────
//
// One record per line: clip_id<TAB>float,float,...

inline std::map<std::string, std::vector<double>> load_embedding_file(const std::string& path) {
    const std::string text = read_text_file(path);
    std::map<std::string, std::vector<double>> out;
    std::size_t dim = 0, line_no = 0;
    for (const auto& line : split(text, '\n')) {
        ++line_no;
        if (trim(line).empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        require(tab != std::string::npos, errc::malformed_row,
                path + ":" + std::to_string(line_no) + ": expected clip_id<TAB>values");
        const std::string clip_id = line.substr(0, tab);
        std::vector<double> vec;
        for (const auto& field : split(line.substr(tab + 1), ',')) {
            try {
                vec.push_back(std::stod(field));
            } catch (const std::exception&) {
                fail(errc::malformed_row, path + ":" + std::to_string(line_no) + ": bad float '" + field + "'");
            }
        }
        require(!vec.empty(), errc::malformed_row, path + ":" + std::to_string(line_no) + ": empty vector");
        if (dim == 0) dim = vec.size();
        require(vec.size() == dim, errc::dimension_mismatch,
                path + ":" + std::to_string(line_no) + ": dimension " + std::to_string(vec.size()) +
                    " != " + std::to_string(dim));
        out[clip_id] = std::move(vec);
    }
    return out;
}

inline void save_embedding_file(const std::string& path,
                                const std::map<std::string, std::vector<double>>& embeddings) {
    std::string out;
    for (const auto& [clip_id, vec] : embeddings) {
        out += clip_id;
        out += '\t';
        for (std::size_t i = 0; i < vec.size(); ++i) {
            if (i) out += ',';
            out += format_double(vec[i]);
        }
        out += '\n';
    }
    write_text_file(path, out);
}

}  // namespace ttsqa
