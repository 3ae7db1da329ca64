#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ttsqa/common.hpp"

namespace ttsqa {

// ─── record types ────────────────────────────────────────────────────────

struct rating_record {
    std::string rater_id;
    std::string clip_id;
    std::string system_id;
    double score = 0.0;  // in [1, 5]
};

struct rater_stats {
    double mu = 0.0;
    double sigma = 0.0;  // population (divisor N)
    std::size_t count = 0;
};

struct std_rating_record {
    rating_record base;
    double z = 0.0;
    double std_score = 0.0;  // z affinely rescaled to [1, 5]
};

struct manifest_entry {
    std::string clip_id;
    std::string text_id;
    std::string transcript;
    std::string audio_path;
};

struct sbs_pair {
    std::string clip_a;
    std::string clip_b;
    int label = 0;       // 1 iff clip_a preferred
    double margin = 0.0; // |mos_a - mos_b|, always > 0
    std::string text_id;
};

struct split_manifest {
    std::set<std::string> train_text_ids;
    std::set<std::string> test_text_ids;
    double fraction = 0.0;

    bool in_train(const std::string& text_id) const { return train_text_ids.count(text_id) > 0; }
};

// ─── rater standardization ───────────────────────────────────────────────

inline std::map<std::string, rater_stats> compute_rater_stats(const std::vector<rating_record>& records) {
    require(!records.empty(), errc::empty_input, "compute_rater_stats: no records");
    std::map<std::string, rater_stats> out;
    for (const auto& r : records) {
        auto& s = out[r.rater_id];
        s.mu += r.score;
        s.count += 1;
    }
    for (auto& [id, s] : out) s.mu /= static_cast<double>(s.count);
    for (const auto& r : records) {
        auto& s = out[r.rater_id];
        const double d = r.score - s.mu;
        s.sigma += d * d;
    }
    for (auto& [id, s] : out) s.sigma = std::sqrt(s.sigma / static_cast<double>(s.count));
    return out;
}

// z = (y - mu_r) / max(sigma_r, sigma_floor), then one global affine map
// sending [min_z, max_z] over the whole dataset to [1, 5].
inline std::vector<std_rating_record> standardize(const std::vector<rating_record>& records,
                                                  const std::map<std::string, rater_stats>& stats,
                                                  double sigma_floor = 0.25) {
    require(!records.empty(), errc::empty_input, "standardize: no records");
    require(sigma_floor > 0.0, errc::bad_argument, "standardize: sigma_floor must be positive");

    std::vector<std_rating_record> out;
    out.reserve(records.size());
    double min_z = 0.0, max_z = 0.0;
    bool first = true;
    for (const auto& r : records) {
        auto it = stats.find(r.rater_id);
        require(it != stats.end(), errc::bad_argument,
                "standardize: rater '" + r.rater_id + "' missing from stats");
        const double denom = std::max(it->second.sigma, sigma_floor);
        const double z = (r.score - it->second.mu) / denom;
        out.push_back({r, z, 0.0});
        if (first || z < min_z) min_z = z;
        if (first || z > max_z) max_z = z;
        first = false;
    }
    const double span = max_z - min_z;
    for (auto& s : out)
        s.std_score = (span > 0.0) ? 1.0 + 4.0 * (s.z - min_z) / span : 3.0;
    return out;
}

// ─── per-clip MOS ────────────────────────────────────────────────────────

inline std::map<std::string, double> clip_mos(const std::vector<rating_record>& records) {
    require(!records.empty(), errc::empty_input, "clip_mos: no records");
    std::map<std::string, std::pair<double, std::size_t>> acc;
    for (const auto& r : records) {
        acc[r.clip_id].first += r.score;
        acc[r.clip_id].second += 1;
    }
    std::map<std::string, double> out;
    for (const auto& [clip, sc] : acc) out[clip] = sc.first / static_cast<double>(sc.second);
    return out;
}

inline std::map<std::string, double> clip_mos_std(const std::vector<std_rating_record>& records) {
    std::vector<rating_record> flat;
    flat.reserve(records.size());
    for (const auto& r : records) flat.push_back({r.base.rater_id, r.base.clip_id, r.base.system_id, r.std_score});
    return clip_mos(flat);
}

// ─── inter-rater baseline ────────────────────────────────────────────────

// RMSE between each rating and the leave-one-out mean of the other ratings
// on the same clip, over all ratings of multiply-rated clips.
inline double inter_rater_rmse(const std::vector<std::pair<std::string, double>>& clip_scores) {
    std::map<std::string, std::vector<double>> by_clip;
    for (const auto& [clip, score] : clip_scores) by_clip[clip].push_back(score);

    double sq_sum = 0.0;
    std::size_t n = 0;
    for (const auto& [clip, scores] : by_clip) {
        if (scores.size() < 2) continue;
        double total = 0.0;
        for (double s : scores) total += s;
        for (double s : scores) {
            const double others_mean = (total - s) / static_cast<double>(scores.size() - 1);
            const double d = s - others_mean;
            sq_sum += d * d;
            ++n;
        }
    }
    require(n > 0, errc::no_multiply_rated_clip, "inter_rater_rmse: no multiply-rated clip");
    return std::sqrt(sq_sum / static_cast<double>(n));
}

inline double inter_rater_rmse(const std::vector<rating_record>& records) {
    std::vector<std::pair<std::string, double>> flat;
    flat.reserve(records.size());
    for (const auto& r : records) flat.emplace_back(r.clip_id, r.score);
    return inter_rater_rmse(flat);
}

inline double inter_rater_rmse_std(const std::vector<std_rating_record>& records) {
    std::vector<std::pair<std::string, double>> flat;
    flat.reserve(records.size());
    for (const auto& r : records) flat.emplace_back(r.base.clip_id, r.std_score);
    return inter_rater_rmse(flat);
}

// ─── text-disjoint split ─────────────────────────────────────────────────

inline split_manifest split_by_text(const std::vector<manifest_entry>& manifest, double fraction,
                                    std::uint64_t seed) {
    require(fraction > 0.0 && fraction < 1.0, errc::bad_argument,
            "split_by_text: fraction must be in (0, 1)");
    std::vector<std::string> texts;
    std::set<std::string> seen;
    for (const auto& e : manifest)
        if (seen.insert(e.text_id).second) texts.push_back(e.text_id);
    require(texts.size() >= 2, errc::too_few_texts, "split_by_text: fewer than 2 distinct text ids");

    std::sort(texts.begin(), texts.end());  // independent of manifest row order
    rng r(seed);
    r.shuffle(texts);

    const std::size_t n_train = static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(texts.size())));
    split_manifest out;
    out.fraction = fraction;
    for (std::size_t i = 0; i < texts.size(); ++i)
        (i < n_train ? out.train_text_ids : out.test_text_ids).insert(texts[i]);
    return out;
}

// ─── SBS pair generation ─────────────────────────────────────────────────

namespace detail {

struct pair_pool {
    std::vector<manifest_entry> clips;
    std::vector<std::pair<std::size_t, std::size_t>> eligible;
};

inline pair_pool eligible_pairs(const std::map<std::string, double>& mos,
                                const std::vector<manifest_entry>& manifest, double min_margin,
                                bool same_text_only) {
    pair_pool pool;
    for (const auto& e : manifest)
        if (mos.count(e.clip_id)) pool.clips.push_back(e);
    std::sort(pool.clips.begin(), pool.clips.end(),
              [](const manifest_entry& a, const manifest_entry& b) { return a.clip_id < b.clip_id; });

    std::map<std::string, std::size_t> text_count;
    for (const auto& c : pool.clips) text_count[c.text_id] += 1;

    for (std::size_t i = 0; i < pool.clips.size(); ++i) {
        for (std::size_t j = i + 1; j < pool.clips.size(); ++j) {
            if (same_text_only) {
                const bool same = pool.clips[i].text_id == pool.clips[j].text_id;
                const bool fallback = text_count[pool.clips[i].text_id] < 2 ||
                                      text_count[pool.clips[j].text_id] < 2;
                if (!same && !fallback) continue;
            }
            const double margin =
                std::abs(mos.at(pool.clips[i].clip_id) - mos.at(pool.clips[j].clip_id));
            if (margin <= min_margin) continue;
            pool.eligible.emplace_back(i, j);
        }
    }
    return pool;
}

}  // namespace detail

inline std::size_t count_eligible_pairs(const std::map<std::string, double>& mos,
                                        const std::vector<manifest_entry>& manifest,
                                        double min_margin, bool same_text_only) {
    return detail::eligible_pairs(mos, manifest, min_margin, same_text_only).eligible.size();
}

// Uniform sampling without replacement over unordered eligible clip pairs:
// same-text pairs when the flag is set (clips whose text has fewer than two
// clips fall back to unrestricted pairing), with |mos_a - mos_b| > min_margin.
// Order within a pair is randomized so labels come out roughly balanced.
inline std::vector<sbs_pair> generate_pairs(const std::map<std::string, double>& mos,
                                            const std::vector<manifest_entry>& manifest,
                                            std::size_t n_pairs, double min_margin,
                                            bool same_text_only, std::uint64_t seed) {
    require(n_pairs >= 1, errc::bad_argument, "generate_pairs: n_pairs must be >= 1");
    require(min_margin >= 0.0, errc::bad_argument, "generate_pairs: min_margin must be >= 0");

    auto pool = detail::eligible_pairs(mos, manifest, min_margin, same_text_only);
    auto& clips = pool.clips;
    auto& eligible = pool.eligible;
    require(eligible.size() >= n_pairs, errc::insufficient_pairs,
            "generate_pairs: only " + std::to_string(eligible.size()) + " eligible pairs for " +
                std::to_string(n_pairs) + " requested");

    rng r(seed);
    r.shuffle(eligible);
    eligible.resize(n_pairs);

    std::vector<sbs_pair> out;
    out.reserve(n_pairs);
    for (const auto& [i, j] : eligible) {
        std::size_t a = i, b = j;
        if (r.coin()) std::swap(a, b);
        sbs_pair p;
        p.clip_a = clips[a].clip_id;
        p.clip_b = clips[b].clip_id;
        const double ma = mos.at(p.clip_a), mb = mos.at(p.clip_b);
        p.label = ma > mb ? 1 : 0;
        p.margin = std::abs(ma - mb);
        p.text_id = clips[a].text_id == clips[b].text_id
                        ? clips[a].text_id
                        : clips[a].text_id + "|" + clips[b].text_id;
        out.push_back(std::move(p));
    }
    return out;
}

// ─── CSV formats ─────────────────────────────────────────────────────────

namespace csv {

inline std::vector<std::string> parse_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

inline std::string escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

}  // namespace csv

// header: rater_id,clip_id,system_id,score
inline std::vector<rating_record> load_ratings_csv(const std::string& path) {
    std::vector<rating_record> out;
    std::set<std::pair<std::string, std::string>> seen;
    std::size_t line_no = 0;
    bool saw_data = false;
    for (const auto& line : split(read_text_file(path), '\n')) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto f = csv::parse_line(line);
        if (line_no == 1 && !f.empty() && f[0] == "rater_id") continue;  // header
        require(f.size() == 4, errc::malformed_row,
                path + ":" + std::to_string(line_no) + ": expected 4 fields, got " +
                    std::to_string(f.size()));
        rating_record r;
        r.rater_id = f[0];
        r.clip_id = f[1];
        r.system_id = f[2];
        try {
            r.score = std::stod(f[3]);
        } catch (const std::exception&) {
            fail(errc::malformed_row, path + ":" + std::to_string(line_no) + ": bad score '" + f[3] + "'");
        }
        require(r.score >= 1.0 && r.score <= 5.0, errc::malformed_row,
                path + ":" + std::to_string(line_no) + ": score outside [1, 5]");
        require(seen.emplace(r.rater_id, r.clip_id).second, errc::malformed_row,
                path + ":" + std::to_string(line_no) + ": duplicate (rater_id, clip_id) pair");
        out.push_back(std::move(r));
        saw_data = true;
    }
    require(saw_data, errc::empty_input, path + ": no rating rows");
    return out;
}

inline void save_ratings_csv(const std::string& path, const std::vector<rating_record>& records) {
    std::string out = "rater_id,clip_id,system_id,score\n";
    for (const auto& r : records)
        out += csv::escape(r.rater_id) + "," + csv::escape(r.clip_id) + "," +
               csv::escape(r.system_id) + "," + format_double(r.score) + "\n";
    write_text_file(path, out);
}

inline void save_std_ratings_csv(const std::string& path, const std::vector<std_rating_record>& records) {
    std::string out = "rater_id,clip_id,system_id,score,z,std_score\n";
    for (const auto& r : records)
        out += csv::escape(r.base.rater_id) + "," + csv::escape(r.base.clip_id) + "," +
               csv::escape(r.base.system_id) + "," + format_double(r.base.score) + "," +
               format_double(r.z) + "," + format_double(r.std_score) + "\n";
    write_text_file(path, out);
}

// header: clip_id,text_id,transcript,audio_path
inline std::vector<manifest_entry> load_manifest_csv(const std::string& path) {
    std::vector<manifest_entry> out;
    std::size_t line_no = 0;
    for (const auto& line : split(read_text_file(path), '\n')) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto f = csv::parse_line(line);
        if (line_no == 1 && !f.empty() && f[0] == "clip_id") continue;
        require(f.size() == 4, errc::malformed_row,
                path + ":" + std::to_string(line_no) + ": expected 4 fields, got " +
                    std::to_string(f.size()));
        out.push_back({f[0], f[1], f[2], f[3]});
    }
    require(!out.empty(), errc::empty_input, path + ": no manifest rows");
    return out;
}

inline void save_manifest_csv(const std::string& path, const std::vector<manifest_entry>& manifest) {
    std::string out = "clip_id,text_id,transcript,audio_path\n";
    for (const auto& e : manifest)
        out += csv::escape(e.clip_id) + "," + csv::escape(e.text_id) + "," +
               csv::escape(e.transcript) + "," + csv::escape(e.audio_path) + "\n";
    write_text_file(path, out);
}

inline void save_pairs_csv(const std::string& path, const std::vector<sbs_pair>& pairs) {
    std::string out = "clip_a,clip_b,label,margin,text_id\n";
    for (const auto& p : pairs)
        out += csv::escape(p.clip_a) + "," + csv::escape(p.clip_b) + "," + std::to_string(p.label) +
               "," + format_double(p.margin) + "," + csv::escape(p.text_id) + "\n";
    write_text_file(path, out);
}

inline std::vector<sbs_pair> load_pairs_csv(const std::string& path) {
    std::vector<sbs_pair> out;
    std::size_t line_no = 0;
    for (const auto& line : split(read_text_file(path), '\n')) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto f = csv::parse_line(line);
        if (line_no == 1 && !f.empty() && f[0] == "clip_a") continue;
        require(f.size() == 5, errc::malformed_row,
                path + ":" + std::to_string(line_no) + ": expected 5 fields");
        try {
            out.push_back({f[0], f[1], std::stoi(f[2]), std::stod(f[3]), f[4]});
        } catch (const std::exception&) {
            fail(errc::malformed_row, path + ":" + std::to_string(line_no) + ": bad numeric field");
        }
    }
    require(!out.empty(), errc::empty_input, path + ": no pair rows");
    return out;
}

inline void save_split_file(const std::string& path, const split_manifest& split) {
    std::string out = "text_id,split\n";
    for (const auto& t : split.train_text_ids) out += csv::escape(t) + ",train\n";
    for (const auto& t : split.test_text_ids) out += csv::escape(t) + ",test\n";
    write_text_file(path, out);
}

inline split_manifest load_split_file(const std::string& path) {
    split_manifest out;
    std::size_t line_no = 0;
    for (const auto& line : split(read_text_file(path), '\n')) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto f = csv::parse_line(line);
        if (line_no == 1 && !f.empty() && f[0] == "text_id") continue;
        require(f.size() == 2 && (f[1] == "train" || f[1] == "test"), errc::malformed_row,
                path + ":" + std::to_string(line_no) + ": expected text_id,train|test");
        (f[1] == "train" ? out.train_text_ids : out.test_text_ids).insert(f[0]);
    }
    require(!out.train_text_ids.empty() || !out.test_text_ids.empty(), errc::empty_input,
            path + ": empty split file");
    return out;
}

}  // namespace ttsqa
