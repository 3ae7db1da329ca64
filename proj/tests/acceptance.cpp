// Acceptance suite: one line per criterion, nonzero exit when any fails.
// Bounds and tolerances are fixed here, not tunable from outside.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include "corpus.hpp"
#include "helpers.hpp"
#include "ttsqa/augment.hpp"
#include "ttsqa/cli.hpp"
#include "ttsqa/dsp_features.hpp"
#include "ttsqa/metrics.hpp"
#include "ttsqa/mos_ensemble.hpp"
#include "ttsqa/ratings.hpp"
#include "ttsqa/sbs_model.hpp"

using namespace ttsqa;

namespace {

int g_failures = 0;

class criterion {
public:
    criterion(const char* id, const char* summary, double time_budget_s)
        : id_(id), summary_(summary), budget_s_(time_budget_s),
          start_(std::chrono::steady_clock::now()) {}

    void expect(bool ok, const std::string& what) {
        if (!ok) issues_.push_back(what);
    }

    void finish() {
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        if (budget_s_ > 0.0 && elapsed >= budget_s_)
            issues_.push_back("runtime " + format_double(elapsed) + " s exceeds " +
                              format_double(budget_s_) + " s");
        std::ostringstream line;
        line << (issues_.empty() ? "PASS" : "FAIL") << " " << id_ << " — " << summary_ << " ("
             << static_cast<int>(elapsed * 1000) << " ms)";
        std::cout << line.str() << "\n";
        for (const auto& i : issues_) std::cout << "       " << i << "\n";
        if (!issues_.empty()) ++g_failures;
    }

private:
    const char* id_;
    const char* summary_;
    double budget_s_;
    std::chrono::steady_clock::time_point start_;
    std::vector<std::string> issues_;
};

std::vector<double> random_vec(rng& r, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = r.uniform(-1.0, 1.0);
    return v;
}

// run a CLI command in-process with its stdout captured
int quiet_run(std::vector<std::string> args, std::string* captured = nullptr) {
    std::ostringstream sink;
    auto* old = std::cout.rdbuf(sink.rdbuf());
    const int code = cli::run(std::move(args));
    std::cout.rdbuf(old);
    if (captured != nullptr) *captured = sink.str();
    return code;
}

// ─── A1: antisymmetry ────────────────────────────────────────────────────

void a1_antisymmetry() {
    criterion c("A1", "antisymmetry suite, 10000 random (W, z_a, z_b), d in {2,8,64}", 5.0);
    rng r(1001);
    const std::size_t dims[] = {2, 8, 64};
    double worst_sum = 0.0, worst_skew = 0.0;
    bool diag_exact = true;
    for (int trial = 0; trial < 10000; ++trial) {
        const std::size_t d = dims[trial % 3];
        sbs_model_params p;
        p.d = d;
        p.W = matrix(d, d);
        for (double& w : p.W.data) w = r.uniform(-1.0, 1.0);
        const auto za = random_vec(r, d);
        const auto zb = random_vec(r, d);

        worst_sum = std::max(worst_sum, std::abs(predict(p, za, zb) + predict(p, zb, za) - 1.0));
        if (score(p, za, za) != 0.0) diag_exact = false;

        sbs_model_params skew = p;
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) skew.W(i, j) = 0.5 * (p.W(i, j) - p.W(j, i));
        worst_skew = std::max(worst_skew, std::abs(predict(p, za, zb) - predict(skew, za, zb)));
    }
    c.expect(worst_sum <= 1e-12, "max |p(a,b)+p(b,a)-1| = " + format_double(worst_sum));
    c.expect(diag_exact, "score(a,a) not exactly zero");
    c.expect(worst_skew <= 1e-12, "max skew-projection deviation = " + format_double(worst_skew));
    c.finish();
}

// ─── A2: clean vs augmented discrimination ───────────────────────────────

void a2_discrimination() {
    criterion c("A2", "clean-vs-augmented discrimination: accuracy >= 0.95, AUC >= 0.98", 180.0);
    feature_config feats;
    std::map<std::string, std::vector<double>> embeddings;
    std::map<std::string, double> mos;
    std::vector<manifest_entry> manifest;
    for (int i = 0; i < 200; ++i) {
        const auto clean = corpus::speechlike(fnv1a64(2000, i));
        auto noisy = add_white_noise(clean, 10.0, fnv1a64(2001, i));
        noisy = insert_micro_gaps(noisy, 3, 20.0, fnv1a64(2002, i));

        const std::string text = "t" + std::to_string(i);
        const std::string id_clean = "u" + std::to_string(i) + "c";
        const std::string id_aug = "u" + std::to_string(i) + "a";
        embeddings[id_clean] = embed_audio(clean, feats).vec;
        embeddings[id_aug] = embed_audio(noisy, feats).vec;
        mos[id_clean] = 4.5;
        mos[id_aug] = 2.5;
        manifest.push_back({id_clean, text, "", ""});
        manifest.push_back({id_aug, text, "", ""});
    }

    const auto split = split_by_text(manifest, 0.7, 42);
    std::vector<manifest_entry> train_m, test_m;
    for (const auto& e : manifest) (split.in_train(e.text_id) ? train_m : test_m).push_back(e);

    // one clean-vs-augmented pair per text
    const auto train_pairs = generate_pairs(mos, train_m, train_m.size() / 2, 0.0, true, 43);
    const auto test_pairs = generate_pairs(mos, test_m, test_m.size() / 2, 0.0, true, 44);

    sbs_train_config cfg;
    cfg.epochs = 60;
    cfg.learning_rate = 0.2;
    cfg.seed = 45;
    const auto params = train_sbs(train_pairs, embeddings, cfg);
    const auto eval = evaluate_sbs(params, test_pairs, embeddings);

    c.expect(eval.accuracy >= 0.95, "test accuracy = " + format_double(eval.accuracy));
    c.expect(eval.auc_roc >= 0.98, "test AUC = " + format_double(eval.auc_roc));
    c.finish();
}

// ─── A3: standardization recovery ────────────────────────────────────────

void a3_standardization() {
    criterion c("A3", "rater-bias panel: z moments, RMSE drop, LCC non-degradation", 10.0);
    rng r(3001);
    const int n_raters = 20, n_clips = 150, raters_per_clip = 4;

    std::vector<double> bias(n_raters), scale(n_raters);
    for (int i = 0; i < n_raters; ++i) {
        bias[i] = r.uniform(-1.0, 1.0);
        scale[i] = r.uniform(0.5, 1.5);
    }
    std::vector<double> latent(n_clips);
    for (double& q : latent) q = r.uniform(1.5, 4.5);

    std::vector<rating_record> records;
    for (int clip = 0; clip < n_clips; ++clip) {
        std::vector<std::size_t> raters(n_raters);
        for (int i = 0; i < n_raters; ++i) raters[i] = i;
        r.shuffle(raters);
        for (int k = 0; k < raters_per_clip; ++k) {
            const std::size_t rater = raters[k];
            const double y = std::clamp(
                3.0 + bias[rater] + scale[rater] * (latent[clip] - 3.0) + 0.15 * r.normal(), 1.0, 5.0);
            records.push_back({"r" + std::to_string(rater), "c" + std::to_string(clip), "s", y});
        }
    }

    const auto stats = compute_rater_stats(records);
    const auto std_records = standardize(records, stats, 0.25);

    // (i) per-rater z moments
    std::map<std::string, std::vector<double>> zs;
    for (const auto& s : std_records) zs[s.base.rater_id].push_back(s.z);
    double worst_mean = 0.0, worst_std = 0.0;
    for (const auto& [rater, z] : zs) {
        double mean = 0.0;
        for (double v : z) mean += v;
        mean /= static_cast<double>(z.size());
        double var = 0.0;
        for (double v : z) var += (v - mean) * (v - mean);
        var /= static_cast<double>(z.size());
        worst_mean = std::max(worst_mean, std::abs(mean));
        worst_std = std::max(worst_std, std::abs(std::sqrt(var) - 1.0));
    }
    c.expect(worst_mean <= 1e-9, "max |z mean| = " + format_double(worst_mean));
    c.expect(worst_std <= 1e-9, "max |z std - 1| = " + format_double(worst_std));

    // (ii) inter-rater RMSE must drop
    const double rmse_raw = inter_rater_rmse(records);
    const double rmse_std = inter_rater_rmse_std(std_records);
    c.expect(rmse_std < rmse_raw, "inter-rater RMSE " + format_double(rmse_raw) + " -> " +
                                      format_double(rmse_std));

    // (iii) correlation with the latent quality must not degrade
    const auto raw_mos = clip_mos(records);
    const auto std_mos = clip_mos_std(std_records);
    std::vector<double> truth, raw_pred, std_pred;
    for (int clip = 0; clip < n_clips; ++clip) {
        const std::string id = "c" + std::to_string(clip);
        truth.push_back(latent[clip]);
        raw_pred.push_back(raw_mos.at(id));
        std_pred.push_back(std_mos.at(id));
    }
    const double lcc_raw = metrics::lcc(raw_pred, truth);
    const double lcc_std = metrics::lcc(std_pred, truth);
    c.expect(lcc_std >= lcc_raw,
             "LCC raw " + format_double(lcc_raw) + " vs std " + format_double(lcc_std));
    c.finish();
}

// ─── A4: gradient checks ─────────────────────────────────────────────────

void a4_gradients() {
    criterion c("A4", "analytic gradients vs central differences, 20+ instances each", 30.0);
    rng r(4001);
    double worst = 0.0;
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };

    // SBS loss wrt W and projection
    for (int inst = 0; inst < 20; ++inst) {
        sbs_model_params p;
        p.d = 4;
        p.W = matrix(4, 4);
        for (double& w : p.W.data) w = r.uniform(-1.0, 1.0);
        p.projection = matrix(6, 4);
        for (double& w : p.projection.data) w = r.uniform(-1.0, 1.0);

        const auto xa = random_vec(r, 6), xb = random_vec(r, 6), xc = random_vec(r, 6);
        std::vector<sbs_batch_item> batch{{&xa, &xb, 1}, {&xb, &xc, 0}};
        const auto g = loss_and_grad(p, batch, 0.01);
        for (std::size_t i = 0; i < p.W.data.size(); ++i) {
            const double fd = oracle::central_diff(
                [&] { return loss_and_grad(p, batch, 0.01).loss; }, p.W.data[i]);
            worst = std::max(worst, rel(g.grad_w.data[i], fd));
        }
        for (std::size_t i = 0; i < p.projection.data.size(); ++i) {
            const double fd = oracle::central_diff(
                [&] { return loss_and_grad(p, batch, 0.01).loss; }, p.projection.data[i]);
            worst = std::max(worst, rel(g.grad_projection.data[i], fd));
        }
    }
    c.expect(worst <= 1e-4, "worst SBS gradient relative error = " + format_double(worst));

    // meta MLP wrt all four parameter blocks
    double worst_mlp = 0.0;
    for (int inst = 0; inst < 20; ++inst) {
        meta_mlp m;
        m.w1 = matrix(4, 3);
        for (double& v : m.w1.data) v = r.uniform(-1.0, 1.0);
        m.b1 = random_vec(r, 4);
        m.w2 = random_vec(r, 4);
        m.b2 = r.uniform(-1.0, 1.0);
        std::vector<std::vector<double>> xs;
        std::vector<double> ys;
        for (int i = 0; i < 5; ++i) {
            xs.push_back(random_vec(r, 3));
            ys.push_back(r.uniform(1.0, 5.0));
        }
        const auto g = mlp_loss_and_grad(m, xs, ys);
        auto probe = [&](double& param, double analytic) {
            const double fd =
                oracle::central_diff([&] { return mlp_loss_and_grad(m, xs, ys).loss; }, param);
            worst_mlp = std::max(worst_mlp, rel(analytic, fd));
        };
        for (std::size_t i = 0; i < m.w1.data.size(); ++i) probe(m.w1.data[i], g.gw1.data[i]);
        for (std::size_t k = 0; k < 4; ++k) probe(m.b1[k], g.gb1[k]);
        for (std::size_t k = 0; k < 4; ++k) probe(m.w2[k], g.gw2[k]);
        probe(m.b2, g.gb2);
    }
    c.expect(worst_mlp <= 1e-4, "worst MLP gradient relative error = " + format_double(worst_mlp));
    c.finish();
}

// ─── A5: metric-oracle equivalence ───────────────────────────────────────

void a5_metric_oracles() {
    criterion c("A5", "fast metrics equal naive oracles on 100 random tied datasets", 30.0);
    rng r(5001);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + r.integer(499);
        std::vector<double> p(n), t(n), scores(n);
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = std::floor(r.uniform(0.0, 12.0)) / 3.0;  // ties everywhere
            t[i] = std::floor(r.uniform(0.0, 12.0)) / 3.0;
            scores[i] = std::floor(r.uniform(0.0, 8.0)) / 7.0;
            labels[i] = r.coin() ? 1 : 0;
        }
        labels[0] = 0;
        if (n > 1) labels[1] = 1;
        t[0] = 0.0;
        t[1 % n] = 4.0;  // keep variance nonzero
        p[0] = 0.0;
        p[1 % n] = 4.0;

        worst = std::max(worst, std::abs(metrics::mse(p, t) - oracle::mse_loop(p, t)));
        worst = std::max(worst,
                         std::abs(metrics::rmse(p, t) - std::sqrt(oracle::mse_loop(p, t))));
        worst = std::max(worst, std::abs(metrics::lcc(p, t) - oracle::pearson_two_pass(p, t)));
        worst = std::max(worst, std::abs(metrics::srcc(p, t) - oracle::srcc_loop(p, t)));
        worst = std::max(worst,
                         std::abs(metrics::kendall_tau(p, t) - oracle::kendall_tau_loop(p, t)));
        worst = std::max(worst, std::abs(metrics::accuracy(scores, labels, 0.5) -
                                         oracle::accuracy_loop(scores, labels, 0.5)));
        worst = std::max(worst,
                         std::abs(metrics::auc_roc(scores, labels) - oracle::auc_pairwise(scores, labels)));
    }
    c.expect(worst <= 1e-12, "worst metric-oracle deviation = " + format_double(worst));
    c.finish();
}

// ─── A6: stacking sanity ─────────────────────────────────────────────────

void a6_stacking() {
    criterion c("A6", "stacked RMSE <= best weak learner + 0.02; OOF bookkeeping for K in {2,5}", 60.0);
    rng r(6001);
    const std::size_t n_train = 400, n_test = 200, d = 6;

    auto make_split = [&](std::size_t n, std::vector<stacked_feature>& fs,
                          std::map<std::string, double>& targets, const std::string& prefix) {
        for (std::size_t i = 0; i < n; ++i) {
            stacked_feature f;
            f.clip_id = prefix + std::to_string(i);
            f.vec = random_vec(r, d);
            targets[f.clip_id] =
                3.0 + 0.8 * f.vec[0] + (f.vec[3] > 0.0 ? 0.7 : -0.7) + 0.05 * r.normal();
            fs.push_back(std::move(f));
        }
    };
    std::vector<stacked_feature> train_fs, test_fs;
    std::map<std::string, double> targets;
    make_split(n_train, train_fs, targets, "tr");
    make_split(n_test, test_fs, targets, "te");

    stack_config cfg;
    cfg.seed = 7;
    cfg.meta.epochs = 600;
    const auto model = fit_stack(train_fs, targets, cfg);

    auto rmse_of = [&](auto&& predict_fn) {
        double sq = 0.0;
        for (const auto& f : test_fs) {
            const double dlt = predict_fn(f.vec) - targets.at(f.clip_id);
            sq += dlt * dlt;
        }
        return std::sqrt(sq / static_cast<double>(test_fs.size()));
    };
    const double rmse_ridge = rmse_of([&](const std::vector<double>& x) { return predict_ridge(model.weak.ridge, x); });
    const double rmse_svr = rmse_of([&](const std::vector<double>& x) { return predict_svr(model.weak.svr, x); });
    const double rmse_tree = rmse_of([&](const std::vector<double>& x) { return predict_tree(model.weak.tree, x); });
    const double rmse_stack = rmse_of([&](const std::vector<double>& x) { return predict_mos(model, x); });
    const double best_weak = std::min({rmse_ridge, rmse_svr, rmse_tree});
    c.expect(rmse_stack <= best_weak + 0.02,
             "stack " + format_double(rmse_stack) + " vs best weak " + format_double(best_weak) +
                 " (ridge " + format_double(rmse_ridge) + ", svr " + format_double(rmse_svr) +
                 ", tree " + format_double(rmse_tree) + ")");

    // OOF bookkeeping: held-out rows reproduce complement-trained learners
    for (std::size_t k : {2u, 5u}) {
        stack_config kcfg = cfg;
        kcfg.k_folds = k;
        const auto m = fit_stack(train_fs, targets, kcfg);
        bool ok = m.fold_assignment.size() == train_fs.size();
        for (std::size_t f = 0; ok && f < k; ++f) {
            std::vector<std::size_t> train_idx, held_idx;
            for (std::size_t i = 0; i < train_fs.size(); ++i)
                (m.fold_assignment[i] == f ? held_idx : train_idx).push_back(i);
            matrix xt(train_idx.size(), d);
            std::vector<double> yt;
            for (std::size_t q = 0; q < train_idx.size(); ++q) {
                std::copy(train_fs[train_idx[q]].vec.begin(), train_fs[train_idx[q]].vec.end(), xt.row(q));
                yt.push_back(targets.at(train_fs[train_idx[q]].clip_id));
            }
            const auto fold_ridge = fit_ridge(xt, yt, kcfg.ridge_lambda);
            for (std::size_t i : held_idx)
                if (std::abs(m.oof_meta_features(i, 0) - predict_ridge(fold_ridge, train_fs[i].vec)) > 1e-9)
                    ok = false;
        }
        c.expect(ok, "OOF bookkeeping broken for K=" + std::to_string(k));
    }
    c.finish();
}

// ─── A7: augmentation calibration ────────────────────────────────────────

void a7_augmentation() {
    criterion c("A7", "SNR within 0.1 dB; pink slope -10±1.5 dB/dec; pitch factor 2±2%; stretch pitch ±3 Hz", 60.0);

    double worst_white = 0.0, worst_pink = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        rng r(7100 + trial);
        const auto clean = corpus::speechlike(7000 + trial);
        const double snr = r.uniform(5.0, 35.0);
        const auto white = add_white_noise(clean, snr, 7200 + trial);
        worst_white = std::max(worst_white,
                               std::abs(oracle::measured_snr_db(clean.samples, white.samples) - snr));
        const auto pink = add_pink_noise(clean, snr, 7300 + trial);
        worst_pink = std::max(worst_pink,
                              std::abs(oracle::measured_snr_db(clean.samples, pink.samples) - snr));
    }
    c.expect(worst_white <= 0.1, "white noise SNR error = " + format_double(worst_white) + " dB");
    c.expect(worst_pink <= 0.1, "pink noise SNR error = " + format_double(worst_pink) + " dB");

    {
        std::vector<double> freqs;
        for (double f = 100.0; f <= 6000.0; f *= 1.12) freqs.push_back(f);
        std::vector<double> power(freqs.size(), 0.0);
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const auto noise = pink_noise(64000, 7400 + seed);
            for (std::size_t i = 0; i < freqs.size(); ++i) {
                const double level = oracle::tone_level(noise, 16000.0, freqs[i]);
                power[i] += level * level / 5.0;
            }
        }
        std::vector<double> lf, db;
        for (std::size_t i = 0; i < freqs.size(); ++i) {
            lf.push_back(std::log10(freqs[i]));
            db.push_back(10.0 * std::log10(power[i]));
        }
        const double slope = oracle::regression_slope(lf, db);
        c.expect(std::abs(slope + 10.0) <= 1.5,
                 "pink periodogram slope = " + format_double(slope) + " dB/decade");
    }

    {
        waveform tone;
        tone.samples = oracle::make_tone(24000, 16000.0, 220.0);
        const auto up = pitch_shift(tone, 12.0);
        const double peak_up = oracle::peak_frequency(up.samples, 16000.0, 380.0, 500.0, 0.5);
        c.expect(std::abs(peak_up / 220.0 - 2.0) <= 0.04,
                 "+12 st factor = " + format_double(peak_up / 220.0));

        waveform tone2;
        tone2.samples = oracle::make_tone(24000, 16000.0, 440.0);
        const auto down = pitch_shift(tone2, -12.0);
        const double peak_down = oracle::peak_frequency(down.samples, 16000.0, 180.0, 260.0, 0.5);
        c.expect(std::abs(peak_down / 440.0 - 0.5) <= 0.01,
                 "-12 st factor = " + format_double(peak_down / 440.0));

        for (double rate : {0.5, 1.5, 2.0}) {
            const auto stretched = time_stretch(tone2, rate);
            const double peak = oracle::peak_frequency(stretched.samples, 16000.0, 420.0, 460.0, 0.5);
            c.expect(std::abs(peak - 440.0) <= 3.0, "stretch rate " + format_double(rate) +
                                                        " moved the tone to " + format_double(peak));
        }
    }
    c.finish();
}

// ─── A8: batching and masking ────────────────────────────────────────────

void a8_batching() {
    criterion c("A8", "masked pooling exact; sorted batching beats reversed-order batching", 5.0);
    rng r(8001);

    // pooled scores must be bitwise independent of padding values
    std::vector<std::vector<double>> frame_scores;
    std::vector<std::size_t> valid;
    for (int i = 0; i < 16; ++i) {
        const std::size_t v = 3 + r.integer(20);
        std::vector<double> row(v + r.integer(10));
        for (std::size_t t = 0; t < row.size(); ++t)
            row[t] = t < v ? r.uniform(1.0, 5.0) : 0.0;
        frame_scores.push_back(row);
        valid.push_back(v);
    }
    const auto base = masked_sequence_pool(frame_scores, valid);
    auto junk = frame_scores;
    for (std::size_t i = 0; i < junk.size(); ++i)
        for (std::size_t t = valid[i]; t < junk[i].size(); ++t) junk[i][t] = 1e12;
    const auto poisoned = masked_sequence_pool(junk, valid);
    c.expect(base == poisoned, "padding values leaked into pooled scores");

    // equal-length corpus packs with zero padding
    const auto equal_plan = length_sorted_batches(std::vector<std::size_t>(24, 300), 4, 1);
    c.expect(equal_plan.padding_ratio == 0.0, "equal-length corpus had nonzero padding");

    // mixed corpus, interleaved short/long: sorted batching must beat
    // batching the items in reversed input order
    std::vector<std::size_t> lengths;
    for (int i = 0; i < 24; ++i) lengths.push_back(i % 2 == 0 ? 100 + r.integer(20) : 900 + r.integer(100));
    const auto sorted_plan = length_sorted_batches(lengths, 4, 2);
    std::vector<std::vector<std::size_t>> reversed_batches;
    std::vector<std::size_t> order(lengths.size());
    std::iota(order.begin(), order.end(), 0);
    std::reverse(order.begin(), order.end());
    for (std::size_t s = 0; s < order.size(); s += 4)
        reversed_batches.emplace_back(order.begin() + s, order.begin() + std::min(order.size(), s + 4));
    const std::size_t ours = total_padded_frames(sorted_plan.batches, lengths);
    const std::size_t theirs = total_padded_frames(reversed_batches, lengths);
    c.expect(ours < theirs, "sorted padding " + std::to_string(ours) + " not below reversed " +
                                std::to_string(theirs));
    c.finish();
}

// ─── A9: pipeline determinism ────────────────────────────────────────────

void a9_determinism() {
    criterion c("A9", "train-sbs and train-mos reruns produce byte-identical metrics JSON", 0.0);
    const auto dir = oracle::temp_dir("acceptance_a9");
    const auto paired = corpus::make_clean_vs_degraded(dir, 16, 9001);
    const auto graded = corpus::make_snr_graded(dir + "_graded", 40, 9002);

    auto run_sbs = [&](const std::string& out) {
        return quiet_run({"train-sbs", "--manifest", paired.manifest_path, "--ratings",
                          paired.ratings_path, "--audio-dir", dir, "--out-dir", out, "--seed", "7",
                          "--epochs", "40", "--lr", "0.2"});
    };
    auto run_mos = [&](const std::string& out) {
        return quiet_run({"train-mos", "--manifest", graded.manifest_path, "--ratings",
                          graded.ratings_path, "--audio-dir", dir + "_graded", "--out-dir", out,
                          "--seed", "7", "--k-folds", "4", "--meta-epochs", "300"});
    };
    c.expect(run_sbs(dir + "/s1") == 0, "train-sbs run 1 failed");
    c.expect(run_sbs(dir + "/s2") == 0, "train-sbs run 2 failed");
    c.expect(read_text_file(dir + "/s1/metrics.json") == read_text_file(dir + "/s2/metrics.json"),
             "train-sbs metrics JSON differs between reruns");

    c.expect(run_mos(dir + "/m1") == 0, "train-mos run 1 failed");
    c.expect(run_mos(dir + "/m2") == 0, "train-mos run 2 failed");
    c.expect(read_text_file(dir + "/m1/metrics.json") == read_text_file(dir + "/m2/metrics.json"),
             "train-mos metrics JSON differs between reruns");
    c.finish();
}

// ─── A10: gate contract ──────────────────────────────────────────────────

int run_binary(const std::string& cmd) {
    const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
    if (status == -1) return -1;
    return WEXITSTATUS(status);
}

void a10_gate() {
    criterion c("A10", "gate: self-comparison near 0.5 on 500+ pairs; degraded fails; exit codes {0,1,2}", 0.0);
    const auto dir = oracle::temp_dir("acceptance_a10");
    const auto paired = corpus::make_clean_vs_degraded(dir, 24, 10001);

    c.expect(quiet_run({"train-sbs", "--manifest", paired.manifest_path, "--ratings",
                        paired.ratings_path, "--audio-dir", dir, "--out-dir", dir + "/sbs",
                        "--seed", "7", "--epochs", "60", "--lr", "0.2"}) == 0,
             "training the gate model failed");

    std::vector<manifest_entry> clean, degraded;
    for (const auto& e : paired.manifest)
        (e.clip_id.find("_clean") != std::string::npos ? clean : degraded).push_back(e);
    save_manifest_csv(dir + "/clean.csv", clean);
    save_manifest_csv(dir + "/degraded.csv", degraded);

    // self comparison: 24 clips -> 24*23 = 552 ordered pairs, win rate ~0.5
    {
        std::string captured;
        const int code = quiet_run({"gate", "--mode", "sbs_winrate", "--model", dir + "/sbs/model.sbs",
                                    "--candidates", dir + "/clean.csv", "--baseline", dir + "/clean.csv",
                                    "--audio-dir", dir, "--threshold", "0.6"},
                                   &captured);
        c.expect(code == 1, "self-comparison at threshold 0.6 should exit 1, got " + std::to_string(code));

        double win_rate = -1.0;
        std::size_t n_pairs = 0;
        std::istringstream in(captured);
        std::string key;
        while (in >> key) {
            if (key == "win_rate") in >> win_rate;
            else if (key == "n_pairs") in >> n_pairs;
            else in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
        }
        c.expect(n_pairs >= 500, "self-comparison used " + std::to_string(n_pairs) + " pairs");
        c.expect(win_rate >= 0.45 && win_rate <= 0.55,
                 "self-comparison win rate = " + format_double(win_rate));
    }

    // degraded candidates vs clean baseline must fail at threshold 0.5,
    // exercised through the installed binary so the real exit code is seen
    const std::string bin = TTSQA_CLI_PATH;
    const int fail_code = run_binary(bin + " gate --mode sbs_winrate --model " + dir +
                                     "/sbs/model.sbs --candidates " + dir +
                                     "/degraded.csv --baseline " + dir + "/clean.csv --audio-dir " +
                                     dir + " --threshold 0.5");
    c.expect(fail_code == 1, "degraded gate exit code = " + std::to_string(fail_code));

    const int pass_code = run_binary(bin + " gate --mode sbs_winrate --model " + dir +
                                     "/sbs/model.sbs --candidates " + dir +
                                     "/clean.csv --baseline " + dir + "/degraded.csv --audio-dir " +
                                     dir + " --threshold 0.5");
    c.expect(pass_code == 0, "clean gate exit code = " + std::to_string(pass_code));

    const int err_code = run_binary(bin + " gate --mode sbs_winrate --model " + dir +
                                    "/nonexistent.sbs --candidates " + dir +
                                    "/clean.csv --baseline " + dir + "/degraded.csv --audio-dir " +
                                    dir + " --threshold 0.5");
    c.expect(err_code == 2, "operational-error gate exit code = " + std::to_string(err_code));
    c.finish();
}

}  // namespace

int main() {
    std::cout << "ttsqa acceptance suite\n";
    const std::pair<const char*, void (*)()> criteria[] = {
        {"A1", a1_antisymmetry}, {"A2", a2_discrimination}, {"A3", a3_standardization},
        {"A4", a4_gradients},    {"A5", a5_metric_oracles}, {"A6", a6_stacking},
        {"A7", a7_augmentation}, {"A8", a8_batching},       {"A9", a9_determinism},
        {"A10", a10_gate},
    };
    for (const auto& [id, fn] : criteria) {
        try {
            fn();
        } catch (const std::exception& e) {
            std::cout << "FAIL " << id << " — unexpected exception: " << e.what() << "\n";
            ++g_failures;
        }
    }
    std::cout << (g_failures == 0 ? "ALL CRITERIA PASSED" : "FAILURES: " + std::to_string(g_failures))
              << "\n";
    return g_failures == 0 ? 0 : 1;
}
