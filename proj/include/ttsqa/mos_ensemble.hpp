#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "ttsqa/common.hpp"
#include "ttsqa/dsp_features.hpp"

namespace ttsqa {

// concatenated audio + text embedding for one clip
struct stacked_feature {
    std::vector<double> vec;
    std::string clip_id;
};

// ─── ridge regression ────────────────────────────────────────────────────

struct ridge_params {
    std::vector<double> weights;
    double bias = 0.0;
    double lambda = 0.0;
};

namespace detail {

// Cholesky solve of A x = b for symmetric positive-definite A (in place).
inline std::vector<double> cholesky_solve(matrix a, std::vector<double> b) {
    const std::size_t n = a.rows;
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
        require(d > 0.0, errc::singular_system, "cholesky: matrix not positive definite");
        a(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
            a(i, j) = s / a(j, j);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {  // L y = b
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= a(i, k) * b[k];
        b[i] = s / a(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {  // L' x = y
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= a(k, i) * b[k];
        b[i] = s / a(i, i);
    }
    return b;
}

}  // namespace detail

// Solves (Xc' Xc + lambda I) w = Xc' yc on centered data; the bias comes from
// the centering, so lambda never shrinks it.
inline ridge_params fit_ridge(const matrix& x, const std::vector<double>& y, double lambda) {
    require(x.rows >= 1 && x.rows == y.size(), errc::bad_argument, "fit_ridge: bad shapes");
    require(lambda >= 0.0, errc::bad_argument, "fit_ridge: lambda must be >= 0");
    const std::size_t n = x.rows, d = x.cols;

    std::vector<double> x_mean(d, 0.0);
    double y_mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) x_mean[j] += x(i, j);
        y_mean += y[i];
    }
    for (double& v : x_mean) v /= static_cast<double>(n);
    y_mean /= static_cast<double>(n);

    matrix a(d, d);
    std::vector<double> b(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double yc = y[i] - y_mean;
        for (std::size_t j = 0; j < d; ++j) {
            const double xj = x(i, j) - x_mean[j];
            b[j] += xj * yc;
            for (std::size_t k = j; k < d; ++k) a(j, k) += xj * (x(i, k) - x_mean[k]);
        }
    }
    for (std::size_t j = 0; j < d; ++j) {
        a(j, j) += lambda;
        for (std::size_t k = j + 1; k < d; ++k) a(k, j) = a(j, k);
    }

    ridge_params p;
    p.lambda = lambda;
    p.weights = detail::cholesky_solve(std::move(a), std::move(b));
    p.bias = y_mean - dot(p.weights, x_mean);
    return p;
}

inline double predict_ridge(const ridge_params& p, const std::vector<double>& x) {
    return dot(p.weights, x) + p.bias;
}

// ─── linear support vector regression ────────────────────────────────────

struct svr_params {
    std::vector<double> weights;
    double bias = 0.0;
    double epsilon = 0.1;
    double c = 1.0;
    std::vector<double> objective_history;
};

inline double svr_objective(const svr_params& p, const matrix& x, const std::vector<double>& y) {
    double obj = 0.5 * dot(p.weights, p.weights);
    for (std::size_t i = 0; i < x.rows; ++i) {
        double r = p.bias - y[i];
        for (std::size_t j = 0; j < x.cols; ++j) r += p.weights[j] * x(i, j);
        obj += p.c * std::max(0.0, std::abs(r) - p.epsilon);
    }
    return obj;
}

// Minimizes 1/2 ||w||^2 + c * sum max(0, |w'x + b - y| - eps) by full-batch
// subgradient descent with a decaying step. Subgradient steps are not
// monotone, so the best iterate seen so far is kept and returned; the
// objective history tracks that kept iterate.
inline svr_params fit_svr(const matrix& x, const std::vector<double>& y, double epsilon, double c,
                          std::size_t epochs, double lr, std::uint64_t seed) {
    require(epsilon >= 0.0 && c > 0.0, errc::bad_argument, "fit_svr: need epsilon >= 0, c > 0");
    require(x.rows == y.size() && x.rows >= 1, errc::bad_argument, "fit_svr: bad shapes");
    const std::size_t n = x.rows, d = x.cols;

    svr_params p;
    p.epsilon = epsilon;
    p.c = c;
    rng r(seed);
    p.weights.resize(d);
    for (double& w : p.weights) w = r.uniform(-1e-3, 1e-3);

    std::vector<double> best_w = p.weights;
    double best_b = p.bias;
    double best_obj = svr_objective(p, x, y);

    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        std::vector<double> gw(p.weights);
        double gb = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double resid = p.bias - y[i];
            for (std::size_t j = 0; j < d; ++j) resid += p.weights[j] * x(i, j);
            if (std::abs(resid) <= epsilon) continue;
            const double sgn = resid > 0.0 ? c : -c;
            for (std::size_t j = 0; j < d; ++j) gw[j] += sgn * x(i, j);
            gb += sgn;
        }
        const double step = lr / (1.0 + 0.05 * static_cast<double>(epoch));
        for (std::size_t j = 0; j < d; ++j) p.weights[j] -= step * gw[j];
        p.bias -= step * gb;

        const double obj = svr_objective(p, x, y);
        require(std::isfinite(obj), errc::divergence, "fit_svr: objective diverged");
        if (obj < best_obj) {
            best_obj = obj;
            best_w = p.weights;
            best_b = p.bias;
        }
        p.objective_history.push_back(best_obj);
    }
    p.weights = std::move(best_w);
    p.bias = best_b;
    return p;
}

inline double predict_svr(const svr_params& p, const std::vector<double>& x) {
    return dot(p.weights, x) + p.bias;
}

// ─── CART regression tree ────────────────────────────────────────────────

struct tree_node {
    bool leaf = true;
    double value = 0.0;      // leaf mean
    std::size_t feature = 0;
    double threshold = 0.0;  // x[feature] <= threshold goes left
    int left = -1;
    int right = -1;
};

struct tree_params {
    std::vector<tree_node> nodes;  // nodes[0] is the root
    std::size_t max_depth = 6;
    std::size_t min_leaf = 1;
};

namespace detail {

struct tree_builder {
    const matrix& x;
    const std::vector<double>& y;
    std::size_t max_depth;
    std::size_t min_leaf;
    std::vector<tree_node> nodes;

    int build(std::vector<std::size_t> idx, std::size_t depth) {
        double sum = 0.0, sum_sq = 0.0;
        for (std::size_t i : idx) {
            sum += y[i];
            sum_sq += y[i] * y[i];
        }
        const double n = static_cast<double>(idx.size());
        const double node_sse = sum_sq - sum * sum / n;

        const int id = static_cast<int>(nodes.size());
        nodes.push_back({});
        nodes[id].value = sum / n;
        if (depth >= max_depth || idx.size() < 2 * min_leaf) return id;

        // greedy best split: largest SSE reduction, ties broken by lowest
        // feature index then lowest threshold (iteration order does both)
        double best_gain = 1e-12;
        std::size_t best_feature = 0;
        double best_threshold = 0.0;
        bool found = false;
        std::vector<std::size_t> sorted(idx);
        for (std::size_t f = 0; f < x.cols; ++f) {
            std::stable_sort(sorted.begin(), sorted.end(),
                             [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
            double left_sum = 0.0, left_sq = 0.0;
            for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
                const double yi = y[sorted[k]];
                left_sum += yi;
                left_sq += yi * yi;
                if (x(sorted[k], f) == x(sorted[k + 1], f)) continue;  // no boundary here
                const std::size_t nl = k + 1, nr = sorted.size() - nl;
                if (nl < min_leaf || nr < min_leaf) continue;
                const double right_sum = sum - left_sum, right_sq = sum_sq - left_sq;
                const double sse_l = left_sq - left_sum * left_sum / static_cast<double>(nl);
                const double sse_r = right_sq - right_sum * right_sum / static_cast<double>(nr);
                const double gain = node_sse - sse_l - sse_r;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = f;
                    // the midpoint of adjacent representable values can round
                    // up to the right value; keep the threshold strictly below
                    // it so the partition matches the counted split
                    const double lo = x(sorted[k], f), hi = x(sorted[k + 1], f);
                    const double mid = 0.5 * (lo + hi);
                    best_threshold = mid < hi ? mid : lo;
                    found = true;
                }
            }
        }
        if (!found) return id;

        std::vector<std::size_t> left_idx, right_idx;
        for (std::size_t i : idx)
            (x(i, best_feature) <= best_threshold ? left_idx : right_idx).push_back(i);

        nodes[id].leaf = false;
        nodes[id].feature = best_feature;
        nodes[id].threshold = best_threshold;
        const int l = build(std::move(left_idx), depth + 1);
        nodes[id].left = l;
        const int r = build(std::move(right_idx), depth + 1);
        nodes[id].right = r;
        return id;
    }
};

}  // namespace detail

inline tree_params fit_tree(const matrix& x, const std::vector<double>& y, std::size_t max_depth,
                            std::size_t min_leaf) {
    require(min_leaf >= 1, errc::bad_argument, "fit_tree: min_leaf must be >= 1");
    require(x.rows == y.size() && x.rows >= min_leaf, errc::bad_argument, "fit_tree: bad shapes");

    // canonical sample order: fitted tree is invariant to row permutations
    std::vector<std::size_t> idx(x.rows);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        for (std::size_t j = 0; j < x.cols; ++j) {
            if (x(a, j) != x(b, j)) return x(a, j) < x(b, j);
        }
        return y[a] < y[b];
    });

    detail::tree_builder builder{x, y, max_depth, min_leaf, {}};
    builder.build(std::move(idx), 0);
    tree_params p;
    p.nodes = std::move(builder.nodes);
    p.max_depth = max_depth;
    p.min_leaf = min_leaf;
    return p;
}

inline double predict_tree(const tree_params& p, const std::vector<double>& x) {
    require(!p.nodes.empty(), errc::bad_argument, "predict_tree: empty tree");
    int id = 0;
    while (!p.nodes[id].leaf)
        id = x[p.nodes[id].feature] <= p.nodes[id].threshold ? p.nodes[id].left : p.nodes[id].right;
    return p.nodes[id].value;
}

// ─── meta MLP (in -> h ReLU -> 1) ────────────────────────────────────────

struct meta_mlp {
    matrix w1;               // h x in
    std::vector<double> b1;  // h
    std::vector<double> w2;  // h
    double b2 = 0.0;

    std::size_t hidden() const { return w1.rows; }
    std::size_t input_dim() const { return w1.cols; }
};

struct mlp_gradients {
    double loss = 0.0;
    matrix gw1;
    std::vector<double> gb1;
    std::vector<double> gw2;
    double gb2 = 0.0;
};

inline double mlp_forward(const meta_mlp& m, const std::vector<double>& x) {
    require(x.size() == m.input_dim(), errc::dimension_mismatch, "mlp_forward: input dim mismatch");
    double out = m.b2;
    for (std::size_t h = 0; h < m.hidden(); ++h) {
        double pre = m.b1[h];
        const double* row = m.w1.row(h);
        for (std::size_t j = 0; j < m.input_dim(); ++j) pre += row[j] * x[j];
        if (pre > 0.0) out += m.w2[h] * pre;
    }
    return out;
}

// Mean-squared-error loss and exact gradients for all four parameter blocks.
// With dropout_p > 0 an inverted-dropout mask (from rng) is applied to the
// hidden layer; pass rng = nullptr for deterministic evaluation.
inline mlp_gradients mlp_loss_and_grad(const meta_mlp& m, const std::vector<std::vector<double>>& xs,
                                       const std::vector<double>& ys, double dropout_p = 0.0,
                                       rng* dropout_rng = nullptr) {
    require(!xs.empty() && xs.size() == ys.size(), errc::bad_argument, "mlp_loss_and_grad: bad batch");
    require(dropout_p >= 0.0 && dropout_p < 1.0, errc::bad_argument,
            "mlp_loss_and_grad: dropout must be in [0, 1)");
    const std::size_t h = m.hidden(), in = m.input_dim();
    mlp_gradients g;
    g.gw1 = matrix(h, in);
    g.gb1.assign(h, 0.0);
    g.gw2.assign(h, 0.0);

    const double inv_b = 1.0 / static_cast<double>(xs.size());
    std::vector<double> act(h), mask(h, 1.0);
    for (std::size_t s = 0; s < xs.size(); ++s) {
        const auto& x = xs[s];
        require(x.size() == in, errc::dimension_mismatch, "mlp_loss_and_grad: input dim mismatch");
        if (dropout_p > 0.0 && dropout_rng != nullptr) {
            for (std::size_t k = 0; k < h; ++k)
                mask[k] = dropout_rng->uniform() < dropout_p ? 0.0 : 1.0 / (1.0 - dropout_p);
        }
        double out = m.b2;
        for (std::size_t k = 0; k < h; ++k) {
            double pre = m.b1[k];
            const double* row = m.w1.row(k);
            for (std::size_t j = 0; j < in; ++j) pre += row[j] * x[j];
            act[k] = pre > 0.0 ? pre * mask[k] : 0.0;
            out += m.w2[k] * act[k];
        }
        const double err = out - ys[s];
        g.loss += err * err * inv_b;

        const double dout = 2.0 * err * inv_b;
        g.gb2 += dout;
        for (std::size_t k = 0; k < h; ++k) {
            g.gw2[k] += dout * act[k];
            if (act[k] > 0.0) {
                const double dpre = dout * m.w2[k] * mask[k];
                g.gb1[k] += dpre;
                double* row = g.gw1.row(k);
                for (std::size_t j = 0; j < in; ++j) row[j] += dpre * x[j];
            }
        }
    }
    return g;
}

struct mlp_train_config {
    std::size_t hidden = 16;
    double learning_rate = 1e-2;
    std::size_t epochs = 500;
    std::size_t batch_size = 32;
    double dropout = 0.0;
    std::uint64_t seed = 1;
};

inline meta_mlp train_mlp(const std::vector<std::vector<double>>& xs, const std::vector<double>& ys,
                          const mlp_train_config& cfg) {
    require(!xs.empty() && xs.size() == ys.size(), errc::bad_argument, "train_mlp: bad inputs");
    const std::size_t in = xs[0].size();
    rng r(cfg.seed);
    meta_mlp m;
    m.w1 = matrix(cfg.hidden, in);
    for (double& v : m.w1.data) v = r.uniform(-0.5, 0.5) / std::sqrt(static_cast<double>(in));
    m.b1.assign(cfg.hidden, 0.0);
    m.w2.assign(cfg.hidden, 0.0);
    for (double& v : m.w2) v = r.uniform(-0.5, 0.5) / std::sqrt(static_cast<double>(cfg.hidden));

    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t batch = std::max<std::size_t>(1, cfg.batch_size);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        r.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            std::vector<std::vector<double>> bx;
            std::vector<double> by;
            for (std::size_t k = start; k < std::min(order.size(), start + batch); ++k) {
                bx.push_back(xs[order[k]]);
                by.push_back(ys[order[k]]);
            }
            const auto g = mlp_loss_and_grad(m, bx, by, cfg.dropout, cfg.dropout > 0.0 ? &r : nullptr);
            require(std::isfinite(g.loss), errc::divergence, "train_mlp: loss diverged");
            for (std::size_t i = 0; i < m.w1.data.size(); ++i)
                m.w1.data[i] -= cfg.learning_rate * g.gw1.data[i];
            for (std::size_t k = 0; k < cfg.hidden; ++k) {
                m.b1[k] -= cfg.learning_rate * g.gb1[k];
                m.w2[k] -= cfg.learning_rate * g.gw2[k];
            }
            m.b2 -= cfg.learning_rate * g.gb2;
        }
    }
    return m;
}

// ─── stacking ensemble ───────────────────────────────────────────────────

struct weak_learner_set {
    ridge_params ridge;
    svr_params svr;
    tree_params tree;
};

struct stack_config {
    std::size_t k_folds = 5;
    double ridge_lambda = 1.0;
    double svr_epsilon = 0.1;
    double svr_c = 1.0;
    std::size_t svr_epochs = 400;
    double svr_lr = 2e-3;
    std::size_t tree_max_depth = 6;
    std::size_t tree_min_leaf = 5;
    mlp_train_config meta;
    bool include_raw_features = false;
    std::uint64_t seed = 1;
};

struct mos_ensemble_model {
    weak_learner_set weak;
    meta_mlp meta;
    std::size_t feature_dim = 0;
    bool include_raw_features = false;

    // out-of-fold bookkeeping kept for inspection: fold_assignment[i] is the
    // fold whose held-out predictions produced meta_features row i
    std::vector<std::size_t> fold_assignment;
    matrix oof_meta_features;  // N x 3
};

namespace detail {

inline std::vector<double> weak_predictions(const weak_learner_set& w, const std::vector<double>& x) {
    return {predict_ridge(w.ridge, x), predict_svr(w.svr, x), predict_tree(w.tree, x)};
}

inline weak_learner_set fit_weak_learners(const matrix& x, const std::vector<double>& y,
                                          const stack_config& cfg, std::uint64_t svr_seed) {
    weak_learner_set w;
    w.ridge = fit_ridge(x, y, cfg.ridge_lambda);
    w.svr = fit_svr(x, y, cfg.svr_epsilon, cfg.svr_c, cfg.svr_epochs, cfg.svr_lr, svr_seed);
    w.tree = fit_tree(x, y, cfg.tree_max_depth, cfg.tree_min_leaf);
    return w;
}

}  // namespace detail

// Out-of-fold stacking: each sample's meta-features come from weak learners
// that never saw it; the meta MLP trains on those, and the weak learners are
// refit on all data for inference.
inline mos_ensemble_model fit_stack(const std::vector<stacked_feature>& features,
                                    const std::map<std::string, double>& targets,
                                    const stack_config& cfg) {
    require(cfg.k_folds >= 2, errc::bad_argument, "fit_stack: k_folds must be >= 2");
    require(!features.empty(), errc::empty_input, "fit_stack: no features");
    const std::size_t n = features.size();
    const std::size_t d = features[0].vec.size();

    matrix x(n, d);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        require(features[i].vec.size() == d, errc::dimension_mismatch,
                "fit_stack: inconsistent feature dims");
        auto it = targets.find(features[i].clip_id);
        require(it != targets.end(), errc::bad_argument,
                "fit_stack: no target for clip '" + features[i].clip_id + "'");
        std::copy(features[i].vec.begin(), features[i].vec.end(), x.row(i));
        y[i] = it->second;
    }

    rng r(cfg.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    r.shuffle(order);
    std::vector<std::size_t> fold_of(n);
    for (std::size_t k = 0; k < n; ++k) fold_of[order[k]] = k % cfg.k_folds;
    for (std::size_t f = 0; f < cfg.k_folds; ++f) {
        const auto sz = static_cast<std::size_t>(std::count(fold_of.begin(), fold_of.end(), f));
        require(sz >= 2, errc::fold_too_small,
                "fit_stack: fold " + std::to_string(f) + " has fewer than 2 samples");
    }

    matrix oof(n, 3);
    for (std::size_t f = 0; f < cfg.k_folds; ++f) {
        std::vector<std::size_t> train_idx, held_idx;
        for (std::size_t i = 0; i < n; ++i) (fold_of[i] == f ? held_idx : train_idx).push_back(i);
        matrix xt(train_idx.size(), d);
        std::vector<double> yt(train_idx.size());
        for (std::size_t k = 0; k < train_idx.size(); ++k) {
            std::copy(x.row(train_idx[k]), x.row(train_idx[k]) + d, xt.row(k));
            yt[k] = y[train_idx[k]];
        }
        const auto weak = detail::fit_weak_learners(xt, yt, cfg, fnv1a64(f, cfg.seed));
        for (std::size_t i : held_idx) {
            const std::vector<double> xi(x.row(i), x.row(i) + d);
            const auto preds = detail::weak_predictions(weak, xi);
            for (std::size_t j = 0; j < 3; ++j) oof(i, j) = preds[j];
        }
    }

    std::vector<std::vector<double>> meta_in(n);
    for (std::size_t i = 0; i < n; ++i) {
        meta_in[i].assign(oof.row(i), oof.row(i) + 3);
        if (cfg.include_raw_features)
            meta_in[i].insert(meta_in[i].end(), x.row(i), x.row(i) + d);
    }
    mlp_train_config meta_cfg = cfg.meta;
    meta_cfg.seed = fnv1a64(cfg.seed, 0x6d657461);
    const meta_mlp meta = train_mlp(meta_in, y, meta_cfg);

    mos_ensemble_model model;
    model.weak = detail::fit_weak_learners(x, y, cfg, fnv1a64(cfg.k_folds, cfg.seed));
    model.meta = meta;
    model.feature_dim = d;
    model.include_raw_features = cfg.include_raw_features;
    model.fold_assignment = std::move(fold_of);
    model.oof_meta_features = std::move(oof);
    return model;
}

// meta-MLP output on the three weak predictions, clamped to the MOS range
inline double predict_mos(const mos_ensemble_model& model, const std::vector<double>& x) {
    require(x.size() == model.feature_dim, errc::dimension_mismatch,
            "predict_mos: feature dim mismatch");
    auto meta_in = detail::weak_predictions(model.weak, x);
    if (model.include_raw_features) meta_in.insert(meta_in.end(), x.begin(), x.end());
    return std::clamp(mlp_forward(model.meta, meta_in), 1.0, 5.0);
}

// ─── sequence pooling and batching ───────────────────────────────────────

// Per-utterance mean of per-frame scores over valid frames only; the values
// of padded frames never influence the result.
inline std::vector<double> masked_sequence_pool(const std::vector<std::vector<double>>& frame_scores,
                                                const std::vector<std::size_t>& valid_frames) {
    require(frame_scores.size() == valid_frames.size(), errc::dimension_mismatch,
            "masked_sequence_pool: batch size mismatch");
    std::vector<double> pooled(frame_scores.size());
    for (std::size_t i = 0; i < frame_scores.size(); ++i) {
        const std::size_t v = valid_frames[i];
        require(v >= 1 && v <= frame_scores[i].size(), errc::bad_argument,
                "masked_sequence_pool: invalid valid_frames");
        double s = 0.0;
        for (std::size_t t = 0; t < v; ++t) s += frame_scores[i][t];
        pooled[i] = s / static_cast<double>(v);
    }
    return pooled;
}

inline double sequence_mse(const std::vector<double>& pooled, const std::vector<double>& targets) {
    require(pooled.size() == targets.size() && !pooled.empty(), errc::bad_argument,
            "sequence_mse: bad shapes");
    double s = 0.0;
    for (std::size_t i = 0; i < pooled.size(); ++i) {
        const double d = pooled[i] - targets[i];
        s += d * d;
    }
    return s / static_cast<double>(pooled.size());
}

struct batch_plan {
    std::vector<std::vector<std::size_t>> batches;  // item indices
    double padding_ratio = 0.0;                     // padded frames / real frames
};

// Sorts items by length, chunks consecutively (so each batch holds
// similar-length items), then shuffles only the batch order.
inline batch_plan length_sorted_batches(const std::vector<std::size_t>& lengths,
                                        std::size_t batch_size, std::uint64_t seed) {
    require(batch_size >= 1, errc::bad_argument, "length_sorted_batches: batch_size must be >= 1");
    std::vector<std::size_t> idx(lengths.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return lengths[a] < lengths[b]; });

    batch_plan plan;
    for (std::size_t start = 0; start < idx.size(); start += batch_size)
        plan.batches.emplace_back(idx.begin() + start,
                                  idx.begin() + std::min(idx.size(), start + batch_size));
    rng r(seed);
    r.shuffle(plan.batches);

    std::size_t padded = 0, total = 0;
    for (const auto& b : plan.batches) {
        std::size_t longest = 0;
        for (std::size_t i : b) longest = std::max(longest, lengths[i]);
        for (std::size_t i : b) {
            padded += longest - lengths[i];
            total += lengths[i];
        }
    }
    plan.padding_ratio = total > 0 ? static_cast<double>(padded) / static_cast<double>(total) : 0.0;
    return plan;
}

inline std::size_t total_padded_frames(const std::vector<std::vector<std::size_t>>& batches,
                                       const std::vector<std::size_t>& lengths) {
    std::size_t padded = 0;
    for (const auto& b : batches) {
        std::size_t longest = 0;
        for (std::size_t i : b) longest = std::max(longest, lengths[i]);
        for (std::size_t i : b) padded += longest - lengths[i];
    }
    return padded;
}

// ─── mask-aware linear frame regressor ───────────────────────────────────
//
// Stand-in for a frame-level MOS network: score(frame) = w'frame + b, pooled
// over valid frames and trained with the sequence-level MSE.

struct frame_regressor {
    std::vector<double> weights;
    double bias = 0.0;
};

inline double predict_frame_regressor(const frame_regressor& fr, const feature_matrix& f) {
    double pooled = 0.0;
    for (std::size_t t = 0; t < f.valid_frames; ++t) {
        const double* row = f.frames.row(t);
        double s = fr.bias;
        for (std::size_t j = 0; j < f.frames.cols; ++j) s += fr.weights[j] * row[j];
        pooled += s;
    }
    return pooled / static_cast<double>(f.valid_frames);
}

inline frame_regressor train_frame_regressor(const std::vector<feature_matrix>& clips,
                                             const std::vector<double>& targets,
                                             std::size_t batch_size, std::size_t epochs, double lr,
                                             std::uint64_t seed) {
    require(!clips.empty() && clips.size() == targets.size(), errc::bad_argument,
            "train_frame_regressor: bad inputs");
    const std::size_t d = clips[0].frames.cols;
    frame_regressor fr;
    fr.weights.assign(d, 0.0);

    std::vector<std::size_t> lengths(clips.size());
    for (std::size_t i = 0; i < clips.size(); ++i) lengths[i] = clips[i].valid_frames;
    const auto plan = length_sorted_batches(lengths, batch_size, seed);

    // d(pooled)/dw is the masked mean frame, so the gradient only ever sees
    // valid frames
    std::vector<double> mean_frame(d);
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        for (const auto& batch : plan.batches) {
            std::vector<double> gw(d, 0.0);
            double gb = 0.0;
            const double inv_b = 1.0 / static_cast<double>(batch.size());
            for (std::size_t i : batch) {
                const auto& f = clips[i];
                std::fill(mean_frame.begin(), mean_frame.end(), 0.0);
                for (std::size_t t = 0; t < f.valid_frames; ++t) {
                    const double* row = f.frames.row(t);
                    for (std::size_t j = 0; j < d; ++j) mean_frame[j] += row[j];
                }
                const double inv_v = 1.0 / static_cast<double>(f.valid_frames);
                for (double& v : mean_frame) v *= inv_v;
                const double pooled = dot(fr.weights, mean_frame) + fr.bias;
                const double derr = 2.0 * (pooled - targets[i]) * inv_b;
                for (std::size_t j = 0; j < d; ++j) gw[j] += derr * mean_frame[j];
                gb += derr;
            }
            for (std::size_t j = 0; j < d; ++j) fr.weights[j] -= lr * gw[j];
            fr.bias -= lr * gb;
        }
    }
    return fr;
}

// ─── serialization ───────────────────────────────────────────────────────

inline void save_mos_model(const std::string& path, const mos_ensemble_model& m) {
    std::string out = "ttsqa-mos-model v1\n";
    out += "feature_dim " + std::to_string(m.feature_dim) + "\n";
    out += "include_raw " + std::to_string(m.include_raw_features ? 1 : 0) + "\n";

    auto put_vec = [&](const std::vector<double>& v) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) out += ' ';
            out += format_double(v[i]);
        }
        out += '\n';
    };

    out += "ridge lambda=" + format_double(m.weak.ridge.lambda) +
           " bias=" + format_double(m.weak.ridge.bias) + "\n";
    put_vec(m.weak.ridge.weights);
    out += "svr epsilon=" + format_double(m.weak.svr.epsilon) + " c=" + format_double(m.weak.svr.c) +
           " bias=" + format_double(m.weak.svr.bias) + "\n";
    put_vec(m.weak.svr.weights);
    out += "tree n_nodes=" + std::to_string(m.weak.tree.nodes.size()) +
           " max_depth=" + std::to_string(m.weak.tree.max_depth) +
           " min_leaf=" + std::to_string(m.weak.tree.min_leaf) + "\n";
    for (const auto& node : m.weak.tree.nodes) {
        if (node.leaf) {
            out += "leaf " + format_double(node.value) + "\n";
        } else {
            out += "split " + std::to_string(node.feature) + " " + format_double(node.threshold) +
                   " " + std::to_string(node.left) + " " + std::to_string(node.right) + "\n";
        }
    }
    out += "meta hidden=" + std::to_string(m.meta.hidden()) +
           " in=" + std::to_string(m.meta.input_dim()) + "\n";
    for (std::size_t h = 0; h < m.meta.hidden(); ++h)
        put_vec(std::vector<double>(m.meta.w1.row(h), m.meta.w1.row(h) + m.meta.input_dim()));
    put_vec(m.meta.b1);
    put_vec(m.meta.w2);
    out += format_double(m.meta.b2) + "\n";
    write_text_file(path, out);
}

inline mos_ensemble_model load_mos_model(const std::string& path) {
    const auto lines = split(read_text_file(path), '\n');
    require(!lines.empty() && lines[0] == "ttsqa-mos-model v1", errc::bad_model_file,
            path + ": not a ttsqa-mos-model v1 file");
    std::size_t li = 1;
    auto next = [&]() -> const std::string& {
        require(li < lines.size(), errc::bad_model_file, path + ": truncated model file");
        return lines[li++];
    };
    auto kv = [&](const std::string& line, const char* key, std::size_t field) -> std::string {
        const auto parts = split(line, ' ');
        require(parts.size() > field && parts[0] == key, errc::bad_model_file,
                path + ": expected " + key + " line");
        const auto eq = parts[field].find('=');
        return eq == std::string::npos ? parts[field] : parts[field].substr(eq + 1);
    };
    auto parse_vec = [&](std::size_t n) {
        const auto f = split(next(), ' ');
        require(f.size() == n, errc::bad_model_file, path + ": bad vector width");
        std::vector<double> v(n);
        for (std::size_t j = 0; j < n; ++j) v[j] = std::stod(f[j]);
        return v;
    };

    mos_ensemble_model m;
    m.feature_dim = std::stoul(kv(next(), "feature_dim", 1));
    m.include_raw_features = std::stoi(kv(next(), "include_raw", 1)) != 0;

    {
        const auto& line = next();
        m.weak.ridge.lambda = std::stod(kv(line, "ridge", 1));
        m.weak.ridge.bias = std::stod(kv(line, "ridge", 2));
        m.weak.ridge.weights = parse_vec(m.feature_dim);
    }
    {
        const auto& line = next();
        m.weak.svr.epsilon = std::stod(kv(line, "svr", 1));
        m.weak.svr.c = std::stod(kv(line, "svr", 2));
        m.weak.svr.bias = std::stod(kv(line, "svr", 3));
        m.weak.svr.weights = parse_vec(m.feature_dim);
    }
    {
        const auto& line = next();
        const std::size_t n_nodes = std::stoul(kv(line, "tree", 1));
        m.weak.tree.max_depth = std::stoul(kv(line, "tree", 2));
        m.weak.tree.min_leaf = std::stoul(kv(line, "tree", 3));
        for (std::size_t i = 0; i < n_nodes; ++i) {
            const auto f = split(next(), ' ');
            tree_node node;
            if (f.size() == 2 && f[0] == "leaf") {
                node.value = std::stod(f[1]);
            } else if (f.size() == 5 && f[0] == "split") {
                node.leaf = false;
                node.feature = std::stoul(f[1]);
                node.threshold = std::stod(f[2]);
                node.left = std::stoi(f[3]);
                node.right = std::stoi(f[4]);
            } else {
                fail(errc::bad_model_file, path + ": bad tree node line");
            }
            m.weak.tree.nodes.push_back(node);
        }
    }
    {
        const auto& line = next();
        const std::size_t hidden = std::stoul(kv(line, "meta", 1));
        const std::size_t in = std::stoul(kv(line, "meta", 2));
        m.meta.w1 = matrix(hidden, in);
        for (std::size_t h = 0; h < hidden; ++h) {
            const auto row = parse_vec(in);
            std::copy(row.begin(), row.end(), m.meta.w1.row(h));
        }
        m.meta.b1 = parse_vec(hidden);
        m.meta.w2 = parse_vec(hidden);
        m.meta.b2 = std::stod(next());
    }
    return m;
}

}  // namespace ttsqa
