#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "ttsqa/common.hpp"
#include "ttsqa/metrics.hpp"
#include "ttsqa/ratings.hpp"

namespace ttsqa {

// ─── model ───────────────────────────────────────────────────────────────

// Preference score s = z_a' W z_b - z_b' W z_a over utterance embeddings.
// W is stored dense and unconstrained; antisymmetry comes from the form of
// the score, so only the skew part (W - W') / 2 ever matters.
struct sbs_model_params {
    matrix W;           // d x d
    matrix projection;  // D x d; empty when embeddings are used directly
    std::size_t d = 0;
    std::vector<double> loss_history;

    bool has_projection() const { return projection.rows > 0; }
};

struct sbs_train_config {
    double learning_rate = 0.05;
    std::size_t epochs = 50;
    std::size_t batch_size = 32;
    double l2_weight = 0.0;
    std::uint64_t seed = 1;
    double init_scale = 0.01;
    std::size_t projection_dim = 0;  // 0: score raw embeddings
};

namespace detail {

inline double bilinear(const std::vector<double>& u, const matrix& w, const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.rows; ++i) {
        const double* row = w.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < w.cols; ++j) acc += row[j] * v[j];
        s += u[i] * acc;
    }
    return s;
}

inline std::vector<double> project(const sbs_model_params& p, const std::vector<double>& x) {
    if (!p.has_projection()) return x;
    require(x.size() == p.projection.rows, errc::dimension_mismatch,
            "sbs: embedding dim != projection input dim");
    return matvec_t(p.projection, x);
}

inline double sigmoid(double s) {
    if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
    const double e = std::exp(s);
    return e / (1.0 + e);
}

// log(1 + e^s) - y*s, computed without overflow
inline double bce_from_score(double s, int y) {
    const double softplus = s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
    return softplus - static_cast<double>(y) * s;
}

}  // namespace detail

inline double score(const sbs_model_params& p, const std::vector<double>& z_a,
                    const std::vector<double>& z_b) {
    require(z_a.size() == z_b.size(), errc::dimension_mismatch, "score: embedding dims differ");
    const auto u = detail::project(p, z_a);
    const auto v = detail::project(p, z_b);
    require(u.size() == p.d, errc::dimension_mismatch, "score: embedding dim != model d");
    // identical code path for both terms, so score(a, a) is exactly 0
    return detail::bilinear(u, p.W, v) - detail::bilinear(v, p.W, u);
}

inline double predict(const sbs_model_params& p, const std::vector<double>& z_a,
                      const std::vector<double>& z_b) {
    return detail::sigmoid(score(p, z_a, z_b));
}

// ─── training ────────────────────────────────────────────────────────────

struct sbs_batch_item {
    const std::vector<double>* z_a;
    const std::vector<double>* z_b;
    int label;  // 1 iff a preferred
};

struct sbs_gradients {
    double loss = 0.0;
    matrix grad_w;
    matrix grad_projection;
};

// Mean binary cross-entropy plus l2_weight * ||W||_F^2, with exact analytic
// gradients: dS/dW = u v' - v u', dS/dP = x_a (A v)' + x_b (A' u)' for
// A = W - W'.
inline sbs_gradients loss_and_grad(const sbs_model_params& p,
                                   const std::vector<sbs_batch_item>& batch, double l2_weight = 0.0) {
    require(!batch.empty(), errc::empty_input, "loss_and_grad: empty batch");

    sbs_gradients g;
    g.grad_w = matrix(p.d, p.d);
    if (p.has_projection()) g.grad_projection = matrix(p.projection.rows, p.projection.cols);

    matrix skew(p.d, p.d);
    if (p.has_projection()) {
        for (std::size_t i = 0; i < p.d; ++i)
            for (std::size_t j = 0; j < p.d; ++j) skew(i, j) = p.W(i, j) - p.W(j, i);
    }

    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (std::size_t bi = 0; bi < batch.size(); ++bi) {
        const auto& item = batch[bi];
        const auto u = detail::project(p, *item.z_a);
        const auto v = detail::project(p, *item.z_b);
        const double s = detail::bilinear(u, p.W, v) - detail::bilinear(v, p.W, u);
        const double prob = detail::sigmoid(s);
        const double loss_i = detail::bce_from_score(s, item.label);
        require(std::isfinite(loss_i), errc::non_finite_value,
                "loss_and_grad: non-finite loss at batch index " + std::to_string(bi));
        g.loss += loss_i * inv_b;

        const double dl_ds = (prob - static_cast<double>(item.label)) * inv_b;
        for (std::size_t i = 0; i < p.d; ++i)
            for (std::size_t j = 0; j < p.d; ++j)
                g.grad_w(i, j) += dl_ds * (u[i] * v[j] - v[i] * u[j]);

        if (p.has_projection()) {
            const auto av = matvec(skew, v);   // A v
            const auto atu = matvec_t(skew, u);  // A' u
            for (std::size_t m = 0; m < p.projection.rows; ++m)
                for (std::size_t k = 0; k < p.d; ++k)
                    g.grad_projection(m, k) +=
                        dl_ds * ((*item.z_a)[m] * av[k] + (*item.z_b)[m] * atu[k]);
        }
    }

    if (l2_weight > 0.0) {
        double frob = 0.0;
        for (double w : p.W.data) frob += w * w;
        g.loss += l2_weight * frob;
        for (std::size_t i = 0; i < p.W.data.size(); ++i)
            g.grad_w.data[i] += 2.0 * l2_weight * p.W.data[i];
    }
    return g;
}

inline sbs_model_params train_sbs(const std::vector<sbs_pair>& pairs,
                                  const std::map<std::string, std::vector<double>>& embeddings,
                                  const sbs_train_config& cfg) {
    require(!pairs.empty(), errc::empty_input, "train_sbs: no pairs");
    require(cfg.learning_rate > 0.0, errc::bad_argument, "train_sbs: learning_rate must be > 0");
    require(cfg.epochs >= 1, errc::bad_argument, "train_sbs: epochs must be >= 1");

    auto lookup = [&](const std::string& clip) -> const std::vector<double>* {
        auto it = embeddings.find(clip);
        require(it != embeddings.end(), errc::missing_embedding,
                "train_sbs: no embedding for clip '" + clip + "'");
        return &it->second;
    };
    for (const auto& p : pairs) {
        lookup(p.clip_a);
        lookup(p.clip_b);
    }
    const std::size_t input_dim = embeddings.begin()->second.size();

    rng r(cfg.seed);
    sbs_model_params params;
    params.d = cfg.projection_dim > 0 ? cfg.projection_dim : input_dim;
    params.W = matrix(params.d, params.d);
    for (double& w : params.W.data) w = r.uniform(-cfg.init_scale, cfg.init_scale);
    if (cfg.projection_dim > 0) {
        params.projection = matrix(input_dim, cfg.projection_dim);
        for (double& w : params.projection.data) w = r.uniform(-cfg.init_scale, cfg.init_scale);
    }

    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const std::size_t batch = std::max<std::size_t>(1, cfg.batch_size);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        r.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            std::vector<sbs_batch_item> items;
            for (std::size_t k = start; k < std::min(order.size(), start + batch); ++k) {
                const auto& p = pairs[order[k]];
                items.push_back({lookup(p.clip_a), lookup(p.clip_b), p.label});
            }
            const auto g = loss_and_grad(params, items, cfg.l2_weight);
            require(std::isfinite(g.loss), errc::divergence, "train_sbs: loss diverged");
            for (std::size_t i = 0; i < params.W.data.size(); ++i)
                params.W.data[i] -= cfg.learning_rate * g.grad_w.data[i];
            if (params.has_projection())
                for (std::size_t i = 0; i < params.projection.data.size(); ++i)
                    params.projection.data[i] -= cfg.learning_rate * g.grad_projection.data[i];
            epoch_loss += g.loss;
            ++n_batches;
        }
        params.loss_history.push_back(epoch_loss / static_cast<double>(n_batches));
    }
    return params;
}

struct sbs_eval {
    double accuracy = 0.0;
    double auc_roc = 0.0;
};

inline sbs_eval evaluate_sbs(const sbs_model_params& params, const std::vector<sbs_pair>& pairs,
                             const std::map<std::string, std::vector<double>>& embeddings) {
    require(!pairs.empty(), errc::empty_input, "evaluate_sbs: no pairs");
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& p : pairs) {
        auto a = embeddings.find(p.clip_a);
        auto b = embeddings.find(p.clip_b);
        require(a != embeddings.end() && b != embeddings.end(), errc::missing_embedding,
                "evaluate_sbs: missing embedding");
        scores.push_back(predict(params, a->second, b->second));
        labels.push_back(p.label);
    }
    return {metrics::accuracy(scores, labels, 0.5), metrics::auc_roc(scores, labels)};
}

// ─── serialization ───────────────────────────────────────────────────────

inline void save_sbs_model(const std::string& path, const sbs_model_params& p,
                           const sbs_train_config& cfg) {
    std::string out = "ttsqa-sbs-model v1\n";
    out += "d " + std::to_string(p.d) + "\n";
    out += "input_dim " + std::to_string(p.has_projection() ? p.projection.rows : 0) + "\n";
    out += "config lr=" + format_double(cfg.learning_rate) + " epochs=" + std::to_string(cfg.epochs) +
           " batch=" + std::to_string(cfg.batch_size) + " l2=" + format_double(cfg.l2_weight) +
           " seed=" + std::to_string(cfg.seed) + " init_scale=" + format_double(cfg.init_scale) + "\n";
    out += "W\n";
    for (std::size_t i = 0; i < p.d; ++i) {
        for (std::size_t j = 0; j < p.d; ++j) {
            if (j) out += ' ';
            out += format_double(p.W(i, j));
        }
        out += '\n';
    }
    if (p.has_projection()) {
        out += "P\n";
        for (std::size_t i = 0; i < p.projection.rows; ++i) {
            for (std::size_t j = 0; j < p.projection.cols; ++j) {
                if (j) out += ' ';
                out += format_double(p.projection(i, j));
            }
            out += '\n';
        }
    }
    write_text_file(path, out);
}

inline sbs_model_params load_sbs_model(const std::string& path) {
    const auto lines = split(read_text_file(path), '\n');
    require(!lines.empty() && lines[0] == "ttsqa-sbs-model v1", errc::bad_model_file,
            path + ": not a ttsqa-sbs-model v1 file");
    std::size_t li = 1;
    auto next = [&]() -> const std::string& {
        require(li < lines.size(), errc::bad_model_file, path + ": truncated model file");
        return lines[li++];
    };
    auto parse_row = [&](const std::string& line, std::size_t n, double* dst) {
        const auto f = split(line, ' ');
        require(f.size() == n, errc::bad_model_file, path + ": bad row width");
        for (std::size_t j = 0; j < n; ++j) dst[j] = std::stod(f[j]);
    };

    sbs_model_params p;
    {
        const auto f = split(next(), ' ');
        require(f.size() == 2 && f[0] == "d", errc::bad_model_file, path + ": expected d line");
        p.d = static_cast<std::size_t>(std::stoul(f[1]));
    }
    std::size_t input_dim = 0;
    {
        const auto f = split(next(), ' ');
        require(f.size() == 2 && f[0] == "input_dim", errc::bad_model_file,
                path + ": expected input_dim line");
        input_dim = static_cast<std::size_t>(std::stoul(f[1]));
    }
    require(next().rfind("config", 0) == 0, errc::bad_model_file, path + ": expected config line");
    require(next() == "W", errc::bad_model_file, path + ": expected W block");
    p.W = matrix(p.d, p.d);
    for (std::size_t i = 0; i < p.d; ++i) parse_row(next(), p.d, p.W.row(i));
    if (input_dim > 0) {
        require(next() == "P", errc::bad_model_file, path + ": expected P block");
        p.projection = matrix(input_dim, p.d);
        for (std::size_t i = 0; i < input_dim; ++i) parse_row(next(), p.d, p.projection.row(i));
    }
    require(p.W.all_finite() && p.projection.all_finite(), errc::bad_model_file,
            path + ": non-finite parameters");
    return p;
}

}  // namespace ttsqa
