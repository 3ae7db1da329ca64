#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ttsqa/audio_io.hpp"
#include "ttsqa/augment.hpp"
#include "ttsqa/common.hpp"
#include "ttsqa/dsp_features.hpp"
#include "ttsqa/metrics.hpp"
#include "ttsqa/mos_ensemble.hpp"
#include "ttsqa/ratings.hpp"
#include "ttsqa/sbs_model.hpp"

namespace ttsqa::cli {

using nlohmann::json;

inline bool verbose() {
    const char* v = std::getenv("TTSQA_VERBOSE");
    return v != nullptr && std::string(v) != "0";
}

inline void log_info(const std::string& msg) {
    if (verbose()) std::cerr << "[ttsqa] " << msg << "\n";
}

// module errors propagate with a stage label
template <typename F>
auto with_stage(const char* stage, F&& fn) {
    try {
        return fn();
    } catch (const error& e) {
        throw error(e.code(), std::string(stage) + ": " + e.what());
    }
}

// ─── shared options ──────────────────────────────────────────────────────

struct feature_options {
    feature_config cfg;

    void attach(CLI::App& app) {
        app.add_option("--win", cfg.win, "STFT window, samples");
        app.add_option("--hop", cfg.hop, "STFT hop, samples");
        app.add_option("--nfft", cfg.nfft, "FFT size");
        app.add_option("--n-mels", cfg.n_mels, "mel bands");
        app.add_option("--fmin", cfg.fmin, "lowest mel edge, Hz");
        app.add_option("--fmax", cfg.fmax, "highest mel edge, Hz");
        app.add_option("--text-dim", cfg.text_dim, "hashed text embedding dim");
    }

    std::string key_string() const {
        return "win=" + std::to_string(cfg.win) + ";hop=" + std::to_string(cfg.hop) +
               ";nfft=" + std::to_string(cfg.nfft) + ";n_mels=" + std::to_string(cfg.n_mels) +
               ";fmin=" + format_double(cfg.fmin) + ";fmax=" + format_double(cfg.fmax) +
               ";text_dim=" + std::to_string(cfg.text_dim);
    }
};

inline std::string resolve_audio_path(const std::string& audio_dir, const std::string& path) {
    if (audio_dir.empty() || std::filesystem::path(path).is_absolute()) return path;
    return (std::filesystem::path(audio_dir) / path).string();
}

// content hash over the manifest, the front-end parameters, and every
// referenced audio file; drives the feature cache
inline std::string feature_cache_key(const std::vector<manifest_entry>& manifest,
                                     const std::string& audio_dir, const std::string& params) {
    std::uint64_t h = fnv1a64(params);
    for (const auto& e : manifest) {
        h = fnv1a64(e.clip_id, h);
        h = fnv1a64(read_text_file(resolve_audio_path(audio_dir, e.audio_path)), h);
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// audio embeddings for every manifest clip, honoring an optional precomputed
// embedding file and an optional on-disk cache
inline std::map<std::string, std::vector<double>> audio_embeddings(
    const std::vector<manifest_entry>& manifest, const std::string& audio_dir,
    const feature_config& cfg, const std::string& precomputed_path,
    const std::string& cache_path = {}) {
    if (!precomputed_path.empty()) {
        auto loaded = load_embedding_file(precomputed_path);
        for (const auto& e : manifest)
            require(loaded.count(e.clip_id) > 0, errc::missing_embedding,
                    "no precomputed embedding for clip '" + e.clip_id + "'");
        return loaded;
    }

    std::string key;
    if (!cache_path.empty()) {
        feature_options opts;
        opts.cfg = cfg;
        key = feature_cache_key(manifest, audio_dir, opts.key_string());
        if (std::filesystem::exists(cache_path)) {
            const auto text = read_text_file(cache_path);
            if (text.rfind("# key " + key, 0) == 0) {
                log_info("feature cache hit: " + cache_path);
                return load_embedding_file(cache_path);
            }
        }
    }

    std::vector<std::vector<double>> slots(manifest.size());
    parallel_for(manifest.size(), [&](std::size_t i) {
        auto w = load_wav(resolve_audio_path(audio_dir, manifest[i].audio_path));
        w.clip_id = manifest[i].clip_id;
        slots[i] = embed_audio(w, cfg).vec;
    });
    std::map<std::string, std::vector<double>> out;
    for (std::size_t i = 0; i < manifest.size(); ++i) out[manifest[i].clip_id] = std::move(slots[i]);
    if (!cache_path.empty()) {
        std::string body = "# key " + key + "\n";
        for (const auto& [clip, vec] : out) {
            body += clip + "\t";
            for (std::size_t i = 0; i < vec.size(); ++i) {
                if (i) body += ',';
                body += format_double(vec[i]);
            }
            body += '\n';
        }
        write_text_file(cache_path, body);
    }
    return out;
}

inline std::map<std::string, std::vector<double>> text_embeddings(
    const std::vector<manifest_entry>& manifest, const feature_config& cfg,
    const std::string& precomputed_path) {
    if (!precomputed_path.empty()) {
        auto loaded = load_embedding_file(precomputed_path);
        for (const auto& e : manifest)
            require(loaded.count(e.clip_id) > 0, errc::missing_embedding,
                    "no precomputed text embedding for clip '" + e.clip_id + "'");
        return loaded;
    }
    std::map<std::string, std::vector<double>> out;
    for (const auto& e : manifest)
        out[e.clip_id] = text_embed(e.transcript, cfg.text_dim, cfg.text_seed, e.clip_id).vec;
    return out;
}

inline json report_to_json(const metrics::report& rep) {
    json j = json::object();
    for (const auto& [k, v] : rep.values) j[k] = v;
    return j;
}

inline void ensure_out_dir(const std::string& dir) {
    require(!dir.empty(), errc::bad_argument, "output directory must be set");
    std::filesystem::create_directories(dir);
}

// ─── standardize ─────────────────────────────────────────────────────────

inline int cmd_standardize(const std::string& ratings_path, const std::string& out_dir,
                           double sigma_floor) {
    ensure_out_dir(out_dir);
    const auto records = with_stage("load-ratings", [&] { return load_ratings_csv(ratings_path); });
    const auto stats = compute_rater_stats(records);
    const auto std_records = with_stage("standardize", [&] { return standardize(records, stats, sigma_floor); });

    save_std_ratings_csv(out_dir + "/std_ratings.csv", std_records);

    std::string stats_csv = "rater_id,mu,sigma,count\n";
    for (const auto& [rater, s] : stats)
        stats_csv += csv::escape(rater) + "," + format_double(s.mu) + "," + format_double(s.sigma) +
                     "," + std::to_string(s.count) + "\n";
    write_text_file(out_dir + "/rater_stats.csv", stats_csv);

    const double rmse_raw = inter_rater_rmse(records);
    const double rmse_std = inter_rater_rmse_std(std_records);
    json j;
    j["inter_rater_rmse_raw"] = rmse_raw;
    j["inter_rater_rmse_std"] = rmse_std;
    j["n_records"] = records.size();
    j["n_raters"] = stats.size();
    j["sigma_floor"] = sigma_floor;
    write_text_file(out_dir + "/standardize_report.json", j.dump(2) + "\n");

    std::cout << "inter_rater_rmse_raw " << format_double(rmse_raw) << "\n"
              << "inter_rater_rmse_std " << format_double(rmse_std) << "\n";
    return 0;
}

// ─── featurize ───────────────────────────────────────────────────────────

inline int cmd_featurize(const std::string& manifest_path, const std::string& audio_dir,
                         const std::string& out_path, const std::string& text_out_path,
                         const feature_config& cfg) {
    const auto manifest = load_manifest_csv(manifest_path);
    const auto audio = with_stage("featurize-audio",
                                  [&] { return audio_embeddings(manifest, audio_dir, cfg, ""); });
    save_embedding_file(out_path, audio);
    if (!text_out_path.empty())
        save_embedding_file(text_out_path, text_embeddings(manifest, cfg, ""));
    std::cout << "featurized " << manifest.size() << " clips\n";
    return 0;
}

// ─── augment ─────────────────────────────────────────────────────────────

inline augment_spec parse_augment_spec(const json& j, std::uint64_t default_seed) {
    augment_spec spec;
    const auto op = augment_op_from_name(j.at("op").get<std::string>());
    require(op.has_value(), errc::bad_argument,
            "unknown augment op '" + j.at("op").get<std::string>() + "'");
    spec.op = *op;
    spec.seed = j.contains("seed") ? j.at("seed").get<std::uint64_t>() : default_seed;
    const json params = j.value("params", json::object());
    if (params.contains("snr_db")) spec.snr_db = params.at("snr_db").get<double>();
    if (params.contains("n_gaps")) spec.n_gaps = params.at("n_gaps").get<std::size_t>();
    if (params.contains("gap_ms")) spec.gap_ms = params.at("gap_ms").get<double>();
    if (params.contains("rate")) spec.rate = params.at("rate").get<double>();
    if (params.contains("semitones")) spec.semitones = params.at("semitones").get<double>();
    if (params.contains("rir_path")) spec.rir_path = params.at("rir_path").get<std::string>();
    if (params.contains("rir_duration_s")) spec.rir_duration_s = params.at("rir_duration_s").get<double>();
    if (params.contains("rir_decay_s")) spec.rir_decay_s = params.at("rir_decay_s").get<double>();
    if (params.contains("bands"))
        for (const auto& b : params.at("bands"))
            spec.bands.push_back({b.at(0).get<double>(), b.at(1).get<double>()});
    return spec;
}

// recipe: one JSON object per line, {"clip_id": ..., "specs": [{op, params, seed}, ...]}.
// Omitted seeds derive from (global seed, clip id, op position), so reruns
// are reproducible without spelling every seed out.
inline int cmd_augment(const std::string& manifest_path, const std::string& recipe_path,
                       const std::string& audio_dir, const std::string& out_dir,
                       const std::string& alignments_path, std::uint64_t global_seed) {
    ensure_out_dir(out_dir);
    const auto manifest = load_manifest_csv(manifest_path);
    std::map<std::string, manifest_entry> by_clip;
    for (const auto& e : manifest) by_clip[e.clip_id] = e;

    std::map<std::string, alignment_track> alignments;
    if (!alignments_path.empty()) alignments = load_alignment_file(alignments_path);

    struct job {
        std::size_t line_no;
        std::string clip_id;
        std::string audio_path;
        std::string out_path;
        std::string specs_json;
        std::vector<augment_spec> specs;
        const alignment_track* align = nullptr;
    };
    std::vector<job> jobs;
    std::size_t line_no = 0;
    for (const auto& line : split(read_text_file(recipe_path), '\n')) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            fail(errc::malformed_row, recipe_path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        job task;
        task.line_no = line_no;
        task.clip_id = j.at("clip_id").get<std::string>();
        auto it = by_clip.find(task.clip_id);
        require(it != by_clip.end(), errc::bad_argument,
                recipe_path + ":" + std::to_string(line_no) + ": clip '" + task.clip_id +
                    "' not in manifest");
        task.audio_path = resolve_audio_path(audio_dir, it->second.audio_path);

        const std::uint64_t clip_seed = derive_seed(global_seed, task.clip_id);
        std::size_t op_index = 0;
        for (const auto& sj : j.at("specs"))
            task.specs.push_back(parse_augment_spec(sj, fnv1a64(op_index++, clip_seed)));
        task.specs_json = j.at("specs").dump();

        char hash[20];
        std::snprintf(hash, sizeof(hash), "%08llx",
                      static_cast<unsigned long long>(fnv1a64(line, clip_seed) & 0xffffffffull));
        task.out_path = out_dir + "/" + task.clip_id + "_" + hash + ".wav";
        if (auto ait = alignments.find(task.clip_id); ait != alignments.end())
            task.align = &ait->second;
        jobs.push_back(std::move(task));
    }

    std::vector<waveform> rendered(jobs.size());
    parallel_for(jobs.size(), [&](std::size_t i) {
        auto w = load_wav(jobs[i].audio_path);
        w.clip_id = jobs[i].clip_id;
        try {
            rendered[i] = apply_pipeline(w, jobs[i].specs, jobs[i].align);
        } catch (const error& e) {
            throw error(e.code(),
                        recipe_path + ":" + std::to_string(jobs[i].line_no) + ": " + e.what());
        }
    });

    std::string out_manifest = "output_path,clip_id,specs\n";
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        save_wav(rendered[i], jobs[i].out_path);
        out_manifest += csv::escape(jobs[i].out_path) + "," + csv::escape(jobs[i].clip_id) + "," +
                        csv::escape(jobs[i].specs_json) + "\n";
    }
    write_text_file(out_dir + "/augment_manifest.csv", out_manifest);
    std::cout << "augmented " << jobs.size() << " clips\n";
    return 0;
}

// ─── pairs ───────────────────────────────────────────────────────────────

inline std::map<std::string, double> mos_targets(const std::vector<rating_record>& records,
                                                 bool use_std, double sigma_floor) {
    if (!use_std) return clip_mos(records);
    return clip_mos_std(standardize(records, compute_rater_stats(records), sigma_floor));
}

inline int cmd_pairs(const std::string& manifest_path, const std::string& ratings_path,
                     const std::string& out_path, std::size_t n_pairs, double min_margin,
                     bool any_text, bool use_std, double sigma_floor, std::uint64_t seed) {
    const auto manifest = load_manifest_csv(manifest_path);
    const auto records = load_ratings_csv(ratings_path);
    const auto mos = mos_targets(records, use_std, sigma_floor);
    const auto pairs = with_stage("generate-pairs", [&] {
        return generate_pairs(mos, manifest, n_pairs, min_margin, !any_text, seed);
    });
    save_pairs_csv(out_path, pairs);
    std::cout << "wrote " << pairs.size() << " pairs\n";
    return 0;
}

// ─── train-sbs ───────────────────────────────────────────────────────────

struct sbs_pipeline_options {
    std::string manifest_path;
    std::string ratings_path;
    std::string audio_dir;
    std::string embeddings_path;  // precomputed audio embeddings, optional
    std::string out_dir;
    double fraction = 0.7;
    std::size_t n_pairs = 0;  // 0: auto (all eligible, capped at four per clip)
    double min_margin = 0.0;
    bool any_text = false;
    bool use_std = false;
    double sigma_floor = 0.25;
    std::uint64_t seed = 1;
    feature_config features;
    sbs_train_config train;
};

inline int cmd_train_sbs(const sbs_pipeline_options& opt) {
    ensure_out_dir(opt.out_dir);
    const auto manifest = load_manifest_csv(opt.manifest_path);
    const auto records = load_ratings_csv(opt.ratings_path);

    const auto embeddings = with_stage("featurize", [&] {
        return audio_embeddings(manifest, opt.audio_dir, opt.features, opt.embeddings_path,
                                opt.out_dir + "/features_audio.tsv");
    });
    const auto split = with_stage("split", [&] { return split_by_text(manifest, opt.fraction, opt.seed); });
    save_split_file(opt.out_dir + "/split.csv", split);

    const auto mos = mos_targets(records, opt.use_std, opt.sigma_floor);

    std::vector<manifest_entry> train_manifest, test_manifest;
    for (const auto& e : manifest)
        (split.in_train(e.text_id) ? train_manifest : test_manifest).push_back(e);

    // n_pairs 0 means auto: every eligible pair on each side, capped at four
    // per clip
    std::size_t n_train_pairs, n_test_pairs;
    if (opt.n_pairs > 0) {
        n_train_pairs = static_cast<std::size_t>(
            std::max<double>(1.0, std::llround(opt.fraction * static_cast<double>(opt.n_pairs))));
        n_test_pairs = std::max<std::size_t>(1, opt.n_pairs - n_train_pairs);
    } else {
        n_train_pairs = std::min(count_eligible_pairs(mos, train_manifest, opt.min_margin, !opt.any_text),
                                 4 * train_manifest.size());
        n_test_pairs = std::min(count_eligible_pairs(mos, test_manifest, opt.min_margin, !opt.any_text),
                                4 * test_manifest.size());
        require(n_train_pairs >= 1 && n_test_pairs >= 1, errc::insufficient_pairs,
                "train-sbs: no eligible pairs on one split side");
    }

    // pairs generated within each side, so no text crosses the split
    const auto train_pairs = with_stage("generate-pairs", [&] {
        return generate_pairs(mos, train_manifest, n_train_pairs, opt.min_margin, !opt.any_text,
                              fnv1a64(opt.seed, 0x7472));
    });
    const auto test_pairs = with_stage("generate-pairs", [&] {
        return generate_pairs(mos, test_manifest, n_test_pairs, opt.min_margin, !opt.any_text,
                              fnv1a64(opt.seed, 0x7465));
    });
    save_pairs_csv(opt.out_dir + "/pairs_train.csv", train_pairs);
    save_pairs_csv(opt.out_dir + "/pairs_test.csv", test_pairs);

    sbs_train_config train_cfg = opt.train;
    train_cfg.seed = fnv1a64(opt.seed, 0x736273);
    const auto params = with_stage("train-sbs", [&] { return train_sbs(train_pairs, embeddings, train_cfg); });
    save_sbs_model(opt.out_dir + "/model.sbs", params, train_cfg);

    const auto train_eval = evaluate_sbs(params, train_pairs, embeddings);
    const auto test_eval = evaluate_sbs(params, test_pairs, embeddings);

    bool text_disjoint = true;
    for (const auto& p : test_pairs)
        if (split.in_train(p.text_id)) text_disjoint = false;

    json j;
    j["train"] = {{"accuracy", train_eval.accuracy}, {"auc_roc", train_eval.auc_roc},
                  {"n", train_pairs.size()}};
    j["test"] = {{"accuracy", test_eval.accuracy}, {"auc_roc", test_eval.auc_roc},
                 {"n", test_pairs.size()}};
    j["final_train_loss"] = params.loss_history.back();
    j["text_disjoint"] = text_disjoint;
    j["seed"] = opt.seed;
    j["use_std"] = opt.use_std;
    write_text_file(opt.out_dir + "/metrics.json", j.dump(2) + "\n");

    std::cout << "test_accuracy " << format_double(test_eval.accuracy) << "\n"
              << "test_auc_roc " << format_double(test_eval.auc_roc) << "\n";
    return 0;
}

// ─── train-mos ───────────────────────────────────────────────────────────

struct mos_pipeline_options {
    std::string manifest_path;
    std::string ratings_path;
    std::string audio_dir;
    std::string embeddings_path;       // precomputed audio embeddings
    std::string text_embeddings_path;  // precomputed text embeddings
    std::string out_dir;
    double fraction = 0.7;
    bool use_std = true;
    double sigma_floor = 0.25;
    std::uint64_t seed = 1;
    feature_config features;
    stack_config stack;
};

inline std::vector<stacked_feature> concat_features(
    const std::vector<manifest_entry>& manifest,
    const std::map<std::string, std::vector<double>>& audio,
    const std::map<std::string, std::vector<double>>& text) {
    std::vector<stacked_feature> out;
    for (const auto& e : manifest) {
        stacked_feature f;
        f.clip_id = e.clip_id;
        f.vec = audio.at(e.clip_id);
        const auto& t = text.at(e.clip_id);
        f.vec.insert(f.vec.end(), t.begin(), t.end());
        out.push_back(std::move(f));
    }
    return out;
}

inline int cmd_train_mos(const mos_pipeline_options& opt) {
    ensure_out_dir(opt.out_dir);
    const auto manifest = load_manifest_csv(opt.manifest_path);
    const auto records = load_ratings_csv(opt.ratings_path);

    const auto audio = with_stage("featurize", [&] {
        return audio_embeddings(manifest, opt.audio_dir, opt.features, opt.embeddings_path,
                                opt.out_dir + "/features_audio.tsv");
    });
    const auto text = with_stage("featurize-text", [&] {
        return text_embeddings(manifest, opt.features, opt.text_embeddings_path);
    });
    const auto targets = with_stage("standardize", [&] {
        return mos_targets(records, opt.use_std, opt.sigma_floor);
    });
    const auto split = with_stage("split", [&] { return split_by_text(manifest, opt.fraction, opt.seed); });
    save_split_file(opt.out_dir + "/split.csv", split);

    std::vector<manifest_entry> train_manifest, test_manifest;
    for (const auto& e : manifest) {
        if (!targets.count(e.clip_id)) continue;  // unrated clips don't train
        (split.in_train(e.text_id) ? train_manifest : test_manifest).push_back(e);
    }
    require(!train_manifest.empty() && !test_manifest.empty(), errc::empty_input,
            "train-mos: a split side has no rated clips");

    const auto train_features = concat_features(train_manifest, audio, text);
    stack_config stack_cfg = opt.stack;
    stack_cfg.seed = fnv1a64(opt.seed, 0x6d6f73);
    const auto model = with_stage("fit-stack", [&] { return fit_stack(train_features, targets, stack_cfg); });
    save_mos_model(opt.out_dir + "/model.mos", model);

    std::vector<double> predictions, truths;
    std::string per_clip = "clip_id,predicted,target\n";
    for (const auto& f : concat_features(test_manifest, audio, text)) {
        const double p = predict_mos(model, f.vec);
        predictions.push_back(p);
        truths.push_back(targets.at(f.clip_id));
        per_clip += csv::escape(f.clip_id) + "," + format_double(p) + "," +
                    format_double(targets.at(f.clip_id)) + "\n";
    }
    write_text_file(opt.out_dir + "/test_predictions.csv", per_clip);

    const auto rep = with_stage("evaluate", [&] { return metrics::regression_report(predictions, truths); });
    json j = report_to_json(rep);
    j["seed"] = opt.seed;
    j["use_std"] = opt.use_std;
    write_text_file(opt.out_dir + "/metrics.json", j.dump(2) + "\n");

    std::cout << rep.kv_text();
    return 0;
}

// ─── evaluate ────────────────────────────────────────────────────────────

inline int cmd_evaluate_mos(const std::string& model_path, const std::string& manifest_path,
                            const std::string& ratings_path, const std::string& audio_dir,
                            const std::string& embeddings_path, const std::string& text_embeddings_path,
                            bool use_std, double sigma_floor, const feature_config& features,
                            const std::string& json_out) {
    const auto model = load_mos_model(model_path);
    const auto manifest = load_manifest_csv(manifest_path);
    const auto records = load_ratings_csv(ratings_path);
    const auto targets = mos_targets(records, use_std, sigma_floor);

    const auto audio = audio_embeddings(manifest, audio_dir, features, embeddings_path);
    const auto text = text_embeddings(manifest, features, text_embeddings_path);

    std::vector<double> predictions, truths;
    for (const auto& e : manifest) {
        if (!targets.count(e.clip_id)) continue;
        std::vector<double> vec = audio.at(e.clip_id);
        const auto& t = text.at(e.clip_id);
        vec.insert(vec.end(), t.begin(), t.end());
        predictions.push_back(predict_mos(model, vec));
        truths.push_back(targets.at(e.clip_id));
    }
    const auto rep = metrics::regression_report(predictions, truths);
    std::cout << rep.kv_text();
    if (!json_out.empty()) write_text_file(json_out, report_to_json(rep).dump(2) + "\n");
    return 0;
}

inline int cmd_evaluate_sbs(const std::string& model_path, const std::string& pairs_path,
                            const std::string& embeddings_path, const std::string& json_out) {
    const auto model = load_sbs_model(model_path);
    const auto pairs = load_pairs_csv(pairs_path);
    const auto embeddings = load_embedding_file(embeddings_path);

    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& p : pairs) {
        auto a = embeddings.find(p.clip_a);
        auto b = embeddings.find(p.clip_b);
        require(a != embeddings.end() && b != embeddings.end(), errc::missing_embedding,
                "evaluate: pair references a clip without an embedding");
        scores.push_back(predict(model, a->second, b->second));
        labels.push_back(p.label);
    }
    const auto rep = metrics::classification_report(scores, labels);
    std::cout << rep.kv_text();
    if (!json_out.empty()) write_text_file(json_out, report_to_json(rep).dump(2) + "\n");
    return 0;
}

// ─── gate ────────────────────────────────────────────────────────────────

// exit contract: 0 pass, 1 fail, 2 operational error (handled by the caller)
inline int cmd_gate_mos(const std::string& model_path, const std::string& candidates_path,
                        const std::string& audio_dir, const std::string& embeddings_path,
                        const std::string& text_embeddings_path, double threshold,
                        const feature_config& features) {
    const auto model = load_mos_model(model_path);
    const auto manifest = load_manifest_csv(candidates_path);
    const auto audio = audio_embeddings(manifest, audio_dir, features, embeddings_path);
    const auto text = text_embeddings(manifest, features, text_embeddings_path);

    double mean = 0.0;
    for (const auto& e : manifest) {
        std::vector<double> vec = audio.at(e.clip_id);
        const auto& t = text.at(e.clip_id);
        vec.insert(vec.end(), t.begin(), t.end());
        const double p = predict_mos(model, vec);
        mean += p / static_cast<double>(manifest.size());
        std::cout << e.clip_id << " " << format_double(p) << "\n";
    }
    std::cout << "mean_mos " << format_double(mean) << "\n";
    std::cout << "threshold " << format_double(threshold) << "\n";
    const bool pass = mean >= threshold;
    std::cout << (pass ? "PASS" : "FAIL") << "\n";
    return pass ? 0 : 1;
}

inline int cmd_gate_sbs(const std::string& model_path, const std::string& candidates_path,
                        const std::string& baseline_path, const std::string& audio_dir,
                        const std::string& cand_embeddings, const std::string& base_embeddings,
                        double threshold, std::size_t max_pairs, std::uint64_t seed,
                        const feature_config& features) {
    const auto model = load_sbs_model(model_path);
    const auto candidates = load_manifest_csv(candidates_path);
    const auto baseline = load_manifest_csv(baseline_path);
    const auto cand_emb = audio_embeddings(candidates, audio_dir, features, cand_embeddings);
    const auto base_emb = audio_embeddings(baseline, audio_dir, features, base_embeddings);

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < candidates.size(); ++i)
        for (std::size_t j = 0; j < baseline.size(); ++j)
            if (candidates[i].clip_id != baseline[j].clip_id) pairs.emplace_back(i, j);
    require(!pairs.empty(), errc::empty_input, "gate: no candidate/baseline pairs");
    if (pairs.size() > max_pairs) {
        rng r(seed);
        r.shuffle(pairs);
        pairs.resize(max_pairs);
    }

    std::vector<double> per_cand_wins(candidates.size(), 0.0), per_cand_total(candidates.size(), 0.0);
    double wins = 0.0;
    for (const auto& [i, j] : pairs) {
        const double p = predict(model, cand_emb.at(candidates[i].clip_id),
                                 base_emb.at(baseline[j].clip_id));
        const bool win = p > 0.5;
        wins += win ? 1.0 : 0.0;
        per_cand_wins[i] += win ? 1.0 : 0.0;
        per_cand_total[i] += 1.0;
    }
    for (std::size_t i = 0; i < candidates.size(); ++i)
        if (per_cand_total[i] > 0.0)
            std::cout << candidates[i].clip_id << " "
                      << format_double(per_cand_wins[i] / per_cand_total[i]) << "\n";

    const double win_rate = wins / static_cast<double>(pairs.size());
    std::cout << "win_rate " << format_double(win_rate) << "\n";
    std::cout << "n_pairs " << pairs.size() << "\n";
    std::cout << "threshold " << format_double(threshold) << "\n";
    const bool pass = win_rate >= threshold;
    std::cout << (pass ? "PASS" : "FAIL") << "\n";
    return pass ? 0 : 1;
}

// ─── entry point ─────────────────────────────────────────────────────────

inline int dispatch(const std::string& command, std::vector<std::string> args) {
    std::reverse(args.begin(), args.end());  // CLI11's vector parse wants reversed args
    CLI::App app{"ttsqa " + command};
    app.set_config("--config", "", "flat key=value config file; command-line flags win");

    feature_options feats;
    std::string manifest, ratings, out_dir, out_path, audio_dir, recipe, alignments;
    std::string model_path, pairs_path, embeddings, text_embs, baseline, base_embeddings, json_out;
    double sigma_floor = 0.25, min_margin = 0.0, threshold = 0.0;
    bool any_text = false, use_std = false, no_std = false;
    std::size_t n_pairs = 0, max_pairs = 10000;
    std::uint64_t seed = 1;
    std::string mode;

    sbs_pipeline_options sbs_opt;
    mos_pipeline_options mos_opt;

    if (command == "standardize") {
        app.add_option("--ratings", ratings, "ratings CSV")->required();
        app.add_option("--out-dir", out_dir, "output directory")->required();
        app.add_option("--sigma-floor", sigma_floor, "sigma floor for degenerate raters");
        app.parse(args);
        return cmd_standardize(ratings, out_dir, sigma_floor);
    }
    if (command == "featurize") {
        std::string text_out;
        app.add_option("--manifest", manifest, "manifest CSV")->required();
        app.add_option("--audio-dir", audio_dir, "base directory for audio paths");
        app.add_option("--out", out_path, "audio embedding TSV")->required();
        app.add_option("--text-out", text_out, "text embedding TSV");
        feats.attach(app);
        app.parse(args);
        return cmd_featurize(manifest, audio_dir, out_path, text_out, feats.cfg);
    }
    if (command == "augment") {
        app.add_option("--manifest", manifest, "manifest CSV")->required();
        app.add_option("--recipe", recipe, "JSONL recipe file")->required();
        app.add_option("--audio-dir", audio_dir, "base directory for audio paths");
        app.add_option("--out-dir", out_dir, "output directory")->required();
        app.add_option("--alignments", alignments, "phone alignment file");
        app.add_option("--seed", seed, "seed for ops whose recipe omits one");
        app.parse(args);
        return cmd_augment(manifest, recipe, audio_dir, out_dir, alignments, seed);
    }
    if (command == "pairs") {
        app.add_option("--manifest", manifest, "manifest CSV")->required();
        app.add_option("--ratings", ratings, "ratings CSV")->required();
        app.add_option("--out", out_path, "pairs CSV")->required();
        app.add_option("--n-pairs", n_pairs, "pairs to emit")->required();
        app.add_option("--min-margin", min_margin, "discard pairs with |dMOS| <= margin");
        app.add_flag("--any-text", any_text, "allow cross-text pairs");
        app.add_flag("--use-std", use_std, "standardized MOS targets");
        app.add_option("--sigma-floor", sigma_floor, "sigma floor");
        app.add_option("--seed", seed, "random seed");
        app.parse(args);
        return cmd_pairs(manifest, ratings, out_path, n_pairs, min_margin, any_text, use_std,
                         sigma_floor, seed);
    }
    if (command == "train-sbs") {
        app.add_option("--manifest", sbs_opt.manifest_path, "manifest CSV")->required();
        app.add_option("--ratings", sbs_opt.ratings_path, "ratings CSV")->required();
        app.add_option("--audio-dir", sbs_opt.audio_dir, "base directory for audio paths");
        app.add_option("--embeddings", sbs_opt.embeddings_path, "precomputed audio embeddings TSV");
        app.add_option("--out-dir", sbs_opt.out_dir, "output directory")->required();
        app.add_option("--fraction", sbs_opt.fraction, "train fraction of texts");
        app.add_option("--n-pairs", sbs_opt.n_pairs, "total pairs (default 4 per clip)");
        app.add_option("--min-margin", sbs_opt.min_margin, "pair margin filter");
        app.add_flag("--any-text", sbs_opt.any_text, "allow cross-text pairs");
        app.add_flag("--use-std", sbs_opt.use_std, "standardized MOS targets");
        app.add_option("--sigma-floor", sbs_opt.sigma_floor, "sigma floor");
        app.add_option("--seed", sbs_opt.seed, "global seed");
        app.add_option("--lr", sbs_opt.train.learning_rate, "learning rate");
        app.add_option("--epochs", sbs_opt.train.epochs, "training epochs");
        app.add_option("--batch", sbs_opt.train.batch_size, "batch size");
        app.add_option("--l2", sbs_opt.train.l2_weight, "l2 weight on W");
        app.add_option("--init-scale", sbs_opt.train.init_scale, "init scale for W");
        app.add_option("--projection-dim", sbs_opt.train.projection_dim,
                       "train a projection to this dim (0: off)");
        feats.attach(app);
        app.parse(args);
        sbs_opt.features = feats.cfg;
        return cmd_train_sbs(sbs_opt);
    }
    if (command == "train-mos") {
        app.add_option("--manifest", mos_opt.manifest_path, "manifest CSV")->required();
        app.add_option("--ratings", mos_opt.ratings_path, "ratings CSV")->required();
        app.add_option("--audio-dir", mos_opt.audio_dir, "base directory for audio paths");
        app.add_option("--embeddings", mos_opt.embeddings_path, "precomputed audio embeddings TSV");
        app.add_option("--text-embeddings", mos_opt.text_embeddings_path,
                       "precomputed text embeddings TSV");
        app.add_option("--out-dir", mos_opt.out_dir, "output directory")->required();
        app.add_option("--fraction", mos_opt.fraction, "train fraction of texts");
        app.add_flag("--no-std", no_std, "raw MOS targets instead of standardized");
        app.add_option("--sigma-floor", mos_opt.sigma_floor, "sigma floor");
        app.add_option("--seed", mos_opt.seed, "global seed");
        app.add_option("--k-folds", mos_opt.stack.k_folds, "stacking folds");
        app.add_option("--ridge-lambda", mos_opt.stack.ridge_lambda, "ridge penalty");
        app.add_option("--svr-epsilon", mos_opt.stack.svr_epsilon, "SVR tube width");
        app.add_option("--svr-c", mos_opt.stack.svr_c, "SVR slack cost");
        app.add_option("--svr-epochs", mos_opt.stack.svr_epochs, "SVR epochs");
        app.add_option("--svr-lr", mos_opt.stack.svr_lr, "SVR learning rate");
        app.add_option("--tree-depth", mos_opt.stack.tree_max_depth, "tree max depth");
        app.add_option("--tree-min-leaf", mos_opt.stack.tree_min_leaf, "tree min leaf");
        app.add_option("--meta-hidden", mos_opt.stack.meta.hidden, "meta MLP hidden width");
        app.add_option("--meta-lr", mos_opt.stack.meta.learning_rate, "meta MLP learning rate");
        app.add_option("--meta-epochs", mos_opt.stack.meta.epochs, "meta MLP epochs");
        app.add_option("--dropout", mos_opt.stack.meta.dropout, "meta MLP dropout");
        app.add_flag("--include-raw-features", mos_opt.stack.include_raw_features,
                     "append raw features to the meta input");
        feats.attach(app);
        app.parse(args);
        mos_opt.use_std = !no_std;
        mos_opt.features = feats.cfg;
        return cmd_train_mos(mos_opt);
    }
    if (command == "evaluate") {
        app.add_option("--model", model_path, "model file (.sbs or .mos)")->required();
        app.add_option("--manifest", manifest, "manifest CSV (mos models)");
        app.add_option("--ratings", ratings, "ratings CSV (mos models)");
        app.add_option("--pairs", pairs_path, "pairs CSV (sbs models)");
        app.add_option("--embeddings", embeddings, "audio embeddings TSV");
        app.add_option("--text-embeddings", text_embs, "text embeddings TSV");
        app.add_option("--audio-dir", audio_dir, "base directory for audio paths");
        app.add_flag("--use-std", use_std, "standardized MOS targets");
        app.add_option("--sigma-floor", sigma_floor, "sigma floor");
        app.add_option("--json-out", json_out, "write the report as JSON here");
        feats.attach(app);
        app.parse(args);
        const auto head = read_text_file(model_path);
        if (head.rfind("ttsqa-sbs-model", 0) == 0)
            return cmd_evaluate_sbs(model_path, pairs_path, embeddings, json_out);
        return cmd_evaluate_mos(model_path, manifest, ratings, audio_dir, embeddings, text_embs,
                                use_std, sigma_floor, feats.cfg, json_out);
    }
    if (command == "gate") {
        app.add_option("--mode", mode, "mos_threshold or sbs_winrate")->required();
        app.add_option("--model", model_path, "trained model file")->required();
        app.add_option("--candidates", manifest, "candidate manifest CSV")->required();
        app.add_option("--baseline", baseline, "baseline manifest CSV (sbs_winrate)");
        app.add_option("--threshold", threshold, "gate threshold")->required();
        app.add_option("--audio-dir", audio_dir, "base directory for audio paths");
        app.add_option("--embeddings", embeddings, "candidate audio embeddings TSV");
        app.add_option("--baseline-embeddings", base_embeddings, "baseline audio embeddings TSV");
        app.add_option("--text-embeddings", text_embs, "text embeddings TSV (mos_threshold)");
        app.add_option("--max-pairs", max_pairs, "pair cap for sbs_winrate");
        app.add_option("--seed", seed, "seed for pair subsampling");
        feats.attach(app);
        app.parse(args);
        if (mode == "mos_threshold")
            return cmd_gate_mos(model_path, manifest, audio_dir, embeddings, text_embs, threshold,
                                feats.cfg);
        if (mode == "sbs_winrate") {
            require(!baseline.empty(), errc::bad_argument, "gate: sbs_winrate needs --baseline");
            return cmd_gate_sbs(model_path, manifest, baseline, audio_dir, embeddings,
                                base_embeddings, threshold, max_pairs, seed, feats.cfg);
        }
        fail(errc::bad_argument, "gate: unknown mode '" + mode + "'");
    }
    fail(errc::bad_argument, "unknown command '" + command + "'");
}

inline int run(std::vector<std::string> args) {
    static const char* usage =
        "usage: ttsqa <command> [options]\n"
        "commands: standardize featurize augment pairs train-sbs train-mos evaluate gate\n"
        "every command accepts --config FILE (flat key=value; flags win) and --help\n";
    if (args.empty() || args[0] == "--help" || args[0] == "-h") {
        std::cout << usage;
        return args.empty() ? 2 : 0;
    }
    const std::string command = args[0];
    args.erase(args.begin());
    const bool is_gate = command == "gate";
    try {
        return dispatch(command, std::move(args));
    } catch (const CLI::CallForHelp&) {
        std::cout << "see ttsqa " << command << " --help\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "ttsqa " << command << ": " << e.what() << "\n";
        return 2;
    } catch (const error& e) {
        std::cerr << "ttsqa " << command << ": " << e.what() << "\n";
        return is_gate ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "ttsqa " << command << ": " << e.what() << "\n";
        return is_gate ? 2 : 1;
    }
}

inline int run(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(std::move(args));
}

}  // namespace ttsqa::cli
