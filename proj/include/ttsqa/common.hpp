#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace ttsqa {

// ─── errors ──────────────────────────────────────────────────────────────

enum class errc {
    unreadable_file,
    unsupported_codec,
    zero_length_audio,
    unwritable_path,
    zero_power_signal,
    clip_too_short,
    invalid_alignment,
    stage_order_violation,
    empty_rir,
    malformed_row,
    empty_input,
    too_few_texts,
    no_multiply_rated_clip,
    insufficient_pairs,
    dimension_mismatch,
    missing_embedding,
    divergence,
    non_finite_value,
    singular_system,
    fold_too_small,
    zero_variance,
    single_class,
    bad_argument,
    bad_model_file,
};

class error : public std::runtime_error {
public:
    error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    errc code() const { return code_; }

private:
    errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw error(code, what); }

inline void require(bool ok, errc code, const std::string& what) {
    if (!ok) fail(code, what);
}

// ─── deterministic RNG ───────────────────────────────────────────────────
//
// All randomness in the library flows through this wrapper. Distributions
// are implemented by hand (not std::*_distribution) so that a given seed
// produces identical streams on every platform and standard library.

class rng {
public:
    explicit rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t raw() { return gen_(); }

    // uniform in [0, 1), 53-bit resolution
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller, one spare cached
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * uniform();
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    // uniform integer in [0, bound), rejection sampled
    std::uint64_t integer(std::uint64_t bound) {
        if (bound == 0) fail(errc::bad_argument, "rng.integer: bound must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t v = gen_();
        while (v >= limit) v = gen_();
        return v % bound;
    }

    bool coin() { return (gen_() & 1u) != 0; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[integer(i)]);
        }
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// ─── stable hashing ──────────────────────────────────────────────────────

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::uint64_t value, std::uint64_t h = 0xcbf29ce484222325ull) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((value >> (8 * i)) & 0xff);
    return fnv1a64(std::string_view(buf, 8), h);
}

// per-clip seed independent of scheduling order
inline std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view clip_id) {
    return fnv1a64(clip_id, fnv1a64(global_seed));
}

// ─── small dense matrix (row-major, double) ──────────────────────────────

struct matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    matrix() = default;
    matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    const double* row(std::size_t r) const { return data.data() + r * cols; }
    double* row(std::size_t r) { return data.data() + r * cols; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// y = M x
inline std::vector<double> matvec(const matrix& m, const std::vector<double>& x) {
    std::vector<double> y(m.rows, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double* mr = m.row(r);
        double s = 0.0;
        for (std::size_t c = 0; c < m.cols; ++c) s += mr[c] * x[c];
        y[r] = s;
    }
    return y;
}

// y = Mᵀ x
inline std::vector<double> matvec_t(const matrix& m, const std::vector<double>& x) {
    std::vector<double> y(m.cols, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double* mr = m.row(r);
        for (std::size_t c = 0; c < m.cols; ++c) y[c] += mr[c] * x[r];
    }
    return y;
}

// ─── per-item parallelism ────────────────────────────────────────────────

// Runs fn(i) for i in [0, n) across a small thread pool. Work items must be
// independent; results land in caller-owned slots so the outcome does not
// depend on scheduling. If several items throw, the lowest index wins.
template <typename F>
void parallel_for(std::size_t n, F&& fn) {
    const unsigned hw = std::thread::hardware_concurrency();
    const unsigned n_threads =
        static_cast<unsigned>(std::min<std::size_t>(n, hw == 0 ? 1 : hw));
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::size_t err_index = n;
    std::exception_ptr err;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (i < err_index) {
                    err_index = i;
                    err = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

// ─── text helpers ────────────────────────────────────────────────────────

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.emplace_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// shortest exact decimal representation of a double (round-trips bit-exactly)
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(errc::unreadable_file, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(errc::unwritable_path, "cannot write " + path);
    out << content;
    if (!out) fail(errc::unwritable_path, "write failed for " + path);
}

}  // namespace ttsqa
