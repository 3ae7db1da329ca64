// Synthetic desk-scale corpora: speech-like filtered noise clips with
// manifests and rating panels, written to disk for pipeline-level tests.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "ttsqa/audio_io.hpp"
#include "ttsqa/augment.hpp"
#include "ttsqa/ratings.hpp"

namespace corpus {

// Low-passed noise with a syllable-rate amplitude contour. Kept well below
// full scale so SNR-calibrated noise never hits the clipping limit.
inline ttsqa::waveform speechlike(std::uint64_t seed, double seconds = 1.0, double amp = 0.12) {
    ttsqa::rng r(seed);
    ttsqa::waveform w;
    w.samples.resize(static_cast<std::size_t>(seconds * 16000));
    double state = 0.0;
    const double mod_rate = r.uniform(2.5, 4.5), mod_phase = r.uniform(0.0, 6.28);
    const double pole = r.uniform(0.9, 0.97);
    for (std::size_t i = 0; i < w.samples.size(); ++i) {
        state = pole * state + (1.0 - pole) * 6.0 * r.normal();
        const double t = static_cast<double>(i) / 16000.0;
        const double env = 0.55 + 0.45 * std::sin(2.0 * oracle::kPi * mod_rate * t + mod_phase);
        w.samples[i] = std::clamp(amp * env * state, -0.95, 0.95);
    }
    return w;
}

inline ttsqa::waveform degrade(const ttsqa::waveform& clean, std::uint64_t seed) {
    auto noisy = ttsqa::add_white_noise(clean, 10.0, seed);
    return ttsqa::insert_micro_gaps(noisy, 3, 20.0, seed + 1);
}

struct paired_corpus {
    std::string dir;
    std::string manifest_path;
    std::string ratings_path;
    std::vector<ttsqa::manifest_entry> manifest;
    std::vector<ttsqa::rating_record> ratings;
};

// n_texts texts, each with a clean clip and its degraded twin; three raters
// agree that clean beats degraded
inline paired_corpus make_clean_vs_degraded(const std::string& dir, std::size_t n_texts,
                                            std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    paired_corpus c;
    c.dir = dir;
    for (std::size_t i = 0; i < n_texts; ++i) {
        const auto clean = speechlike(ttsqa::fnv1a64(seed, i));
        const auto bad = degrade(clean, ttsqa::fnv1a64(seed, 1000 + i));
        const std::string text = "text" + std::to_string(i);
        const std::string clean_id = "u" + std::to_string(i) + "_clean";
        const std::string bad_id = "u" + std::to_string(i) + "_aug";
        ttsqa::save_wav(clean, dir + "/" + clean_id + ".wav");
        ttsqa::save_wav(bad, dir + "/" + bad_id + ".wav");
        c.manifest.push_back({clean_id, text, "sample sentence " + std::to_string(i), clean_id + ".wav"});
        c.manifest.push_back({bad_id, text, "sample sentence " + std::to_string(i), bad_id + ".wav"});
        for (int rater = 0; rater < 3; ++rater) {
            c.ratings.push_back({"r" + std::to_string(rater), clean_id, "clean", rater == 1 ? 4.0 : 5.0});
            c.ratings.push_back({"r" + std::to_string(rater), bad_id, "aug", rater == 1 ? 3.0 : 2.0});
        }
    }
    c.manifest_path = dir + "/manifest.csv";
    c.ratings_path = dir + "/ratings.csv";
    ttsqa::save_manifest_csv(c.manifest_path, c.manifest);
    ttsqa::save_ratings_csv(c.ratings_path, c.ratings);
    return c;
}

// MOS is a monotone function of the injected SNR
inline paired_corpus make_snr_graded(const std::string& dir, std::size_t n_clips,
                                     std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    paired_corpus c;
    c.dir = dir;
    for (std::size_t i = 0; i < n_clips; ++i) {
        const double snr_db = 30.0 * static_cast<double>(i) / static_cast<double>(n_clips - 1);
        const double mos = 1.0 + 4.0 * snr_db / 30.0;
        auto clip = speechlike(ttsqa::fnv1a64(seed, i));
        clip = ttsqa::add_white_noise(clip, snr_db, ttsqa::fnv1a64(seed, 500 + i));
        const std::string id = "clip" + std::to_string(i);
        ttsqa::save_wav(clip, dir + "/" + id + ".wav");
        c.manifest.push_back({id, "text" + std::to_string(i), "graded sentence " + std::to_string(i),
                              id + ".wav"});
        c.ratings.push_back({"r0", id, "sys", mos});
        c.ratings.push_back({"r1", id, "sys", std::clamp(mos + 0.1, 1.0, 5.0)});
    }
    c.manifest_path = dir + "/manifest.csv";
    c.ratings_path = dir + "/ratings.csv";
    ttsqa::save_manifest_csv(c.manifest_path, c.manifest);
    ttsqa::save_ratings_csv(c.ratings_path, c.ratings);
    return c;
}

}  // namespace corpus
