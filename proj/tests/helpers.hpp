// Test-only oracles, deliberately independent of the library's FFT and
// metric implementations: spectral levels come from direct correlation with
// complex exponentials, metrics from naive quadratic loops.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "ttsqa/common.hpp"

namespace oracle {

inline constexpr double kPi = 3.14159265358979323846;

inline std::vector<double> make_tone(std::size_t n, double sample_rate, double freq,
                                     double amp = 0.5, double phase = 0.0) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = amp * std::sin(2.0 * kPi * freq * static_cast<double>(i) / sample_rate + phase);
    return x;
}

// magnitude of the projection onto exp(-i 2 pi f t): an O(n) single-bin DFT
inline double tone_level(const std::vector<double>& x, double sample_rate, double freq) {
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double ang = -2.0 * kPi * freq * static_cast<double>(i) / sample_rate;
        acc += x[i] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    return std::abs(acc) * 2.0 / static_cast<double>(x.size());
}

// dominant frequency in [f_lo, f_hi] by direct scan, refined by a golden-
// section style bisection around the best coarse candidate
inline double peak_frequency(const std::vector<double>& x, double sample_rate, double f_lo,
                             double f_hi, double coarse_step = 1.0) {
    double best_f = f_lo, best_level = -1.0;
    for (double f = f_lo; f <= f_hi; f += coarse_step) {
        const double level = tone_level(x, sample_rate, f);
        if (level > best_level) {
            best_level = level;
            best_f = f;
        }
    }
    double lo = best_f - coarse_step, hi = best_f + coarse_step;
    for (int it = 0; it < 40; ++it) {
        const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        if (tone_level(x, sample_rate, m1) < tone_level(x, sample_rate, m2))
            lo = m1;
        else
            hi = m2;
    }
    return 0.5 * (lo + hi);
}

inline double measured_snr_db(const std::vector<double>& clean, const std::vector<double>& noisy) {
    double p_sig = 0.0, p_noise = 0.0;
    for (std::size_t i = 0; i < clean.size(); ++i) {
        p_sig += clean[i] * clean[i];
        const double d = noisy[i] - clean[i];
        p_noise += d * d;
    }
    return 10.0 * std::log10(p_sig / p_noise);
}

inline double rms(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s / static_cast<double>(x.size()));
}

// least-squares slope of y against x
inline double regression_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

// ─── naive metric oracles ────────────────────────────────────────────────

inline double mse_loop(const std::vector<double>& p, const std::vector<double>& t) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - t[i]) * (p[i] - t[i]);
    return s / static_cast<double>(p.size());
}

inline double pearson_two_pass(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double num = 0.0, da = 0.0, db = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - ma) * (b[i] - mb);
        da += (a[i] - ma) * (a[i] - ma);
        db += (b[i] - mb) * (b[i] - mb);
    }
    return num / std::sqrt(da * db);
}

inline std::vector<double> mid_ranks_loop(const std::vector<double>& x) {
    std::vector<double> ranks(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double below = 0.0, equal = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            if (x[j] < x[i]) below += 1.0;
            if (x[j] == x[i]) equal += 1.0;
        }
        ranks[i] = below + 0.5 * (equal + 1.0);
    }
    return ranks;
}

inline double srcc_loop(const std::vector<double>& p, const std::vector<double>& t) {
    return pearson_two_pass(mid_ranks_loop(p), mid_ranks_loop(t));
}

// quadratic tau-b with explicit tie terms
inline double kendall_tau_loop(const std::vector<double>& p, const std::vector<double>& t) {
    double concordant = 0.0, discordant = 0.0, ties_p = 0.0, ties_t = 0.0;
    const std::size_t n = p.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dp = p[i] - p[j], dt = t[i] - t[j];
            if (dp == 0.0 && dt == 0.0) continue;
            if (dp == 0.0) {
                ties_p += 1.0;
            } else if (dt == 0.0) {
                ties_t += 1.0;
            } else if (dp * dt > 0.0) {
                concordant += 1.0;
            } else {
                discordant += 1.0;
            }
        }
    }
    const double n0 = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
    double joint = n0 - concordant - discordant - ties_p - ties_t;
    const double n1 = ties_p + joint, n2 = ties_t + joint;
    return (concordant - discordant) / std::sqrt((n0 - n1) * (n0 - n2));
}

inline double accuracy_loop(const std::vector<double>& scores, const std::vector<int>& labels,
                            double threshold) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if ((scores[i] > threshold ? 1 : 0) == labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(scores.size());
}

// pairwise Mann-Whitney with half credit for ties
inline double auc_pairwise(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0, total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            total += 1.0;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / total;
}

// ─── misc ────────────────────────────────────────────────────────────────

// central finite difference of f at x with step eps
template <typename F>
double central_diff(F&& f, double& x, double eps = 1e-5) {
    const double saved = x;
    x = saved + eps;
    const double hi = f();
    x = saved - eps;
    const double lo = f();
    x = saved;
    return (hi - lo) / (2.0 * eps);
}

inline std::string temp_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() / ("ttsqa_test_" + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

}  // namespace oracle
