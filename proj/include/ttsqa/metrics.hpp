#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "ttsqa/common.hpp"

namespace ttsqa::metrics {

namespace detail {

inline void check_paired(const std::vector<double>& a, const std::vector<double>& b) {
    require(a.size() == b.size(), errc::dimension_mismatch, "paired series length mismatch");
    require(a.size() >= 2, errc::empty_input, "paired series needs at least 2 points");
    for (double v : a) require(std::isfinite(v), errc::non_finite_value, "non-finite prediction");
    for (double v : b) require(std::isfinite(v), errc::non_finite_value, "non-finite target");
}

// average ranks for ties (1-based mid-ranks)
inline std::vector<double> mid_ranks(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

// strict inversions (a_i > a_j with i < j), counted by mergesort
inline std::uint64_t count_inversions(std::vector<double>& a) {
    const std::size_t n = a.size();
    if (n < 2) return 0;
    std::vector<double> tmp(n);
    std::uint64_t inv = 0;
    for (std::size_t width = 1; width < n; width *= 2) {
        for (std::size_t lo = 0; lo + width < n; lo += 2 * width) {
            const std::size_t mid = lo + width;
            const std::size_t hi = std::min(lo + 2 * width, n);
            std::size_t i = lo, j = mid, k = lo;
            while (i < mid && j < hi) {
                if (a[j] < a[i]) {
                    inv += mid - i;
                    tmp[k++] = a[j++];
                } else {
                    tmp[k++] = a[i++];
                }
            }
            while (i < mid) tmp[k++] = a[i++];
            while (j < hi) tmp[k++] = a[j++];
            std::copy(tmp.begin() + lo, tmp.begin() + hi, a.begin() + lo);
        }
    }
    return inv;
}

}  // namespace detail

// ─── error metrics ───────────────────────────────────────────────────────

inline double mse(const std::vector<double>& predictions, const std::vector<double>& targets) {
    detail::check_paired(predictions, targets);
    double s = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double d = predictions[i] - targets[i];
        s += d * d;
    }
    return s / static_cast<double>(predictions.size());
}

inline double rmse(const std::vector<double>& predictions, const std::vector<double>& targets) {
    return std::sqrt(mse(predictions, targets));
}

// ─── correlation ─────────────────────────────────────────────────────────

inline double lcc(const std::vector<double>& predictions, const std::vector<double>& targets) {
    detail::check_paired(predictions, targets);
    const std::size_t n = predictions.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += predictions[i];
        my += targets[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = predictions[i] - mx, dy = targets[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    require(sxx > 0.0 && syy > 0.0, errc::zero_variance, "lcc: zero-variance series");
    return sxy / std::sqrt(sxx * syy);
}

inline double srcc(const std::vector<double>& predictions, const std::vector<double>& targets) {
    detail::check_paired(predictions, targets);
    return lcc(detail::mid_ranks(predictions), detail::mid_ranks(targets));
}

// Tie-corrected tau-b, O(n log n) via mergesort inversion counting.
inline double kendall_tau(const std::vector<double>& predictions, const std::vector<double>& targets) {
    detail::check_paired(predictions, targets);
    const std::size_t n = predictions.size();

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (predictions[a] != predictions[b]) return predictions[a] < predictions[b];
        return targets[a] < targets[b];
    });

    const double n0 = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
    double n1 = 0.0, n3 = 0.0;
    {
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && predictions[idx[j + 1]] == predictions[idx[i]]) ++j;
            const double t = static_cast<double>(j - i + 1);
            n1 += 0.5 * t * (t - 1.0);
            // joint ties within the x-group
            std::size_t a = i;
            while (a <= j) {
                std::size_t b = a;
                while (b + 1 <= j && targets[idx[b + 1]] == targets[idx[a]]) ++b;
                const double u = static_cast<double>(b - a + 1);
                n3 += 0.5 * u * (u - 1.0);
                a = b + 1;
            }
            i = j + 1;
        }
    }
    double n2 = 0.0;
    {
        std::vector<double> sorted_y(targets);
        std::sort(sorted_y.begin(), sorted_y.end());
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && sorted_y[j + 1] == sorted_y[i]) ++j;
            const double t = static_cast<double>(j - i + 1);
            n2 += 0.5 * t * (t - 1.0);
            i = j + 1;
        }
    }
    require(n0 > n1 && n0 > n2, errc::zero_variance, "kendall_tau: all-tied series");

    std::vector<double> y_in_x_order(n);
    for (std::size_t i = 0; i < n; ++i) y_in_x_order[i] = targets[idx[i]];
    const double discordant = static_cast<double>(detail::count_inversions(y_in_x_order));

    const double numer = n0 - n1 - n2 + n3 - 2.0 * discordant;
    return numer / std::sqrt((n0 - n1) * (n0 - n2));
}

// ─── binary classification ───────────────────────────────────────────────

inline void check_binary(const std::vector<double>& scores, const std::vector<int>& labels) {
    require(scores.size() == labels.size(), errc::dimension_mismatch, "scores/labels length mismatch");
    require(!scores.empty(), errc::empty_input, "empty scored series");
    for (int l : labels)
        require(l == 0 || l == 1, errc::bad_argument, "labels must be 0 or 1");
}

// Scores exactly equal to the threshold predict class 0.
inline double accuracy(const std::vector<double>& scores, const std::vector<int>& labels,
                       double threshold = 0.5) {
    check_binary(scores, labels);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const int predicted = scores[i] > threshold ? 1 : 0;
        if (predicted == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(scores.size());
}

// Mann-Whitney AUC: ties between a positive and a negative score earn 0.5.
inline double auc_roc(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_binary(scores, labels);
    std::size_t n_pos = 0;
    for (int l : labels) n_pos += static_cast<std::size_t>(l);
    const std::size_t n_neg = labels.size() - n_pos;
    require(n_pos > 0 && n_neg > 0, errc::single_class, "auc_roc: both classes required");

    const auto ranks = detail::mid_ranks(scores);
    double pos_rank_sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (labels[i] == 1) pos_rank_sum += ranks[i];
    const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

// ─── reports ─────────────────────────────────────────────────────────────

struct report {
    std::vector<std::pair<std::string, double>> values;

    void add(const std::string& key, double v) { values.emplace_back(key, v); }

    std::string kv_text() const {
        std::string out;
        for (const auto& [k, v] : values) {
            out += k;
            out += ' ';
            out += format_double(v);
            out += '\n';
        }
        return out;
    }
};

inline report regression_report(const std::vector<double>& predictions,
                                const std::vector<double>& targets) {
    report r;
    const double m = mse(predictions, targets);
    r.add("mse", m);
    r.add("rmse", std::sqrt(m));
    r.add("lcc", lcc(predictions, targets));
    r.add("srcc", srcc(predictions, targets));
    r.add("kendall_tau", kendall_tau(predictions, targets));
    r.add("n", static_cast<double>(predictions.size()));
    return r;
}

inline report classification_report(const std::vector<double>& scores,
                                    const std::vector<int>& labels, double threshold = 0.5) {
    report r;
    r.add("accuracy", accuracy(scores, labels, threshold));
    r.add("auc_roc", auc_roc(scores, labels));
    r.add("n", static_cast<double>(scores.size()));
    return r;
}

}  // namespace ttsqa::metrics
