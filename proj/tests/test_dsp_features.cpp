#include <catch2/catch_amalgamated.hpp>

#include <complex>

#include "helpers.hpp"
#include "ttsqa/dsp_features.hpp"

using namespace ttsqa;
using Catch::Approx;

TEST_CASE("fft transform matches a naive DFT") {
    rng r(31);
    for (std::size_t n : {8u, 16u, 12u, 37u, 100u}) {  // pow2 and Bluestein paths
        std::vector<fft::cplx> x(n);
        for (auto& v : x) v = fft::cplx(r.uniform(-1.0, 1.0), r.uniform(-1.0, 1.0));
        const auto got = fft::transform(x, false);
        for (std::size_t k = 0; k < n; ++k) {
            fft::cplx expect(0.0, 0.0);
            for (std::size_t t = 0; t < n; ++t) {
                const double ang = -2.0 * oracle::kPi * static_cast<double>(k * t) / static_cast<double>(n);
                expect += x[t] * fft::cplx(std::cos(ang), std::sin(ang));
            }
            REQUIRE(std::abs(got[k] - expect) < 1e-9 * (1.0 + std::abs(expect)));
        }
        // inverse round trip
        const auto back = fft::transform(got, true);
        for (std::size_t t = 0; t < n; ++t) REQUIRE(std::abs(back[t] - x[t]) < 1e-10);
    }
}

TEST_CASE("fft convolution and real transforms") {
    rng r(36);

    SECTION("convolve matches the direct O(nm) sum") {
        std::vector<double> a(37), b(12);
        for (double& v : a) v = r.uniform(-1.0, 1.0);
        for (double& v : b) v = r.uniform(-1.0, 1.0);
        const auto fast = fft::convolve(a, b);
        REQUIRE(fast.size() == a.size() + b.size() - 1);
        for (std::size_t k = 0; k < fast.size(); ++k) {
            double direct = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i)
                if (k >= i && k - i < b.size()) direct += a[i] * b[k - i];
            REQUIRE(fast[k] == Approx(direct).margin(1e-9));
        }
    }

    SECTION("rfft and irfft round trip") {
        std::vector<double> x(256);
        for (double& v : x) v = r.uniform(-1.0, 1.0);
        const auto back = fft::irfft(fft::rfft(x, 256), 256);
        for (std::size_t i = 0; i < x.size(); ++i)
            REQUIRE(back[i] == Approx(x[i]).margin(1e-10));
    }
}

TEST_CASE("stft_power") {
    waveform w;
    w.samples = oracle::make_tone(16000, 16000.0, 1000.0);

    SECTION("1 kHz tone peaks at bin round(1000 * nfft / 16000)") {
        const auto spec = stft_power(w, 400, 160, 512);
        const std::size_t expected_bin = 32;  // 1000 * 512 / 16000
        for (std::size_t t = 0; t < spec.frames.rows; ++t) {
            const double* row = spec.frames.row(t);
            std::size_t argmax = 0;
            for (std::size_t k = 1; k < spec.frames.cols; ++k)
                if (row[k] > row[argmax]) argmax = k;
            REQUIRE(argmax == expected_bin);
        }
        CHECK(spec.frames.rows == (16000 - 400) / 160 + 1);
        CHECK(spec.valid_frames == spec.frames.rows);
        CHECK(spec.frame_hop_s == Approx(0.01));
    }

    SECTION("zero signal gives an all-zero matrix") {
        waveform z;
        z.samples.assign(1000, 0.0);
        const auto spec = stft_power(z, 400, 160, 512);
        for (double v : spec.frames.data) REQUIRE(v == 0.0);
    }

    SECTION("Parseval: one-sided power sums to windowed-frame energy") {
        rng r(32);
        waveform n;
        n.samples.resize(600);
        for (double& s : n.samples) s = r.uniform(-0.8, 0.8);
        const std::size_t win = 512, nfft = 512;
        const auto spec = stft_power(n, win, 160, nfft);
        const auto window = hann_window(win);
        const auto& row0 = spec.frames;
        // time-domain oracle for frame 0
        double energy = 0.0;
        for (std::size_t i = 0; i < win; ++i) {
            const double v = n.samples[i] * window[i];
            energy += v * v;
        }
        double spectral = row0(0, 0) + row0(0, nfft / 2);
        for (std::size_t k = 1; k < nfft / 2; ++k) spectral += 2.0 * row0(0, k);
        spectral /= static_cast<double>(nfft);
        CHECK(spectral == Approx(energy).epsilon(1e-6));
    }

    SECTION("signal shorter than a window is rejected") {
        waveform tiny;
        tiny.samples.assign(100, 0.1);
        CHECK_THROWS_AS(stft_power(tiny, 400, 160, 512), error);
    }
}

TEST_CASE("mel filterbank and log_mel") {
    SECTION("rows sum to 1 after area normalization") {
        const auto fb = mel_filterbank(40, 512, 16000, 20.0, 7600.0);
        for (std::size_t m = 0; m < fb.rows; ++m) {
            double s = 0.0;
            for (std::size_t k = 0; k < fb.cols; ++k) s += fb(m, k);
            REQUIRE(s == Approx(1.0).margin(1e-6));
        }
    }

    SECTION("zero signal maps every entry to log(1e-10)") {
        waveform z;
        z.samples.assign(1600, 0.0);
        const auto lm = log_mel(stft_power(z, 400, 160, 512), 40, 20.0, 7600.0);
        for (double v : lm.frames.data) REQUIRE(v == Approx(std::log(1e-10)));
    }

    SECTION("white noise has a near-flat band profile") {
        for (int trial = 0; trial < 20; ++trial) {
            rng r(100 + trial);
            waveform n;
            n.samples.resize(160000);  // 10 s
            for (double& s : n.samples) s = 0.3 * r.normal();
            const auto lm = log_mel(stft_power(n, 400, 160, 512), 40, 20.0, 7600.0);
            std::vector<double> band_mean(40, 0.0);
            for (std::size_t t = 0; t < lm.frames.rows; ++t)
                for (std::size_t m = 0; m < 40; ++m)
                    band_mean[m] += std::exp(lm.frames(t, m));
            const auto [lo, hi] = std::minmax_element(band_mean.begin(), band_mean.end());
            REQUIRE(*hi / *lo < 3.0);
        }
    }

    SECTION("scaling the waveform never decreases a log-mel entry") {
        rng r(33);
        waveform w;
        w.samples.resize(4000);
        for (double& s : w.samples) s = 0.2 * r.normal();
        waveform scaled = w;
        for (double& s : scaled.samples) s *= 1.7;
        const auto a = log_mel(stft_power(w, 400, 160, 512), 40, 20.0, 7600.0);
        const auto b = log_mel(stft_power(scaled, 400, 160, 512), 40, 20.0, 7600.0);
        for (std::size_t i = 0; i < a.frames.data.size(); ++i)
            REQUIRE(b.frames.data[i] >= a.frames.data[i] - 1e-12);
    }
}

TEST_CASE("embed_utterance") {
    SECTION("constant rows embed to the row value") {
        feature_matrix f;
        f.frames = matrix(5, 3);
        for (std::size_t t = 0; t < 5; ++t)
            for (std::size_t c = 0; c < 3; ++c) f.frames(t, c) = 2.0 + static_cast<double>(c);
        f.valid_frames = 5;
        const auto e = embed_utterance(f);
        CHECK(e.vec == std::vector<double>{2.0, 3.0, 4.0});
    }

    SECTION("valid_frames = 1 picks the first row") {
        feature_matrix f;
        f.frames = matrix(4, 2);
        f.frames(0, 0) = 7.0;
        f.frames(0, 1) = -1.0;
        f.frames(1, 0) = 99.0;
        f.valid_frames = 1;
        const auto e = embed_utterance(f);
        CHECK(e.vec == std::vector<double>{7.0, -1.0});
    }

    SECTION("padded junk rows never contribute") {
        rng r(34);
        feature_matrix clean;
        clean.frames = matrix(6, 4);
        for (double& v : clean.frames.data) v = r.uniform(-1.0, 1.0);
        clean.valid_frames = 6;

        feature_matrix padded = clean;
        padded.frames = matrix(10, 4);
        for (std::size_t t = 0; t < 6; ++t)
            for (std::size_t c = 0; c < 4; ++c) padded.frames(t, c) = clean.frames(t, c);
        for (std::size_t t = 6; t < 10; ++t)
            for (std::size_t c = 0; c < 4; ++c) padded.frames(t, c) = 1e9;
        padded.valid_frames = 6;

        const auto a = embed_utterance(clean);
        const auto b = embed_utterance(padded);
        for (std::size_t i = 0; i < a.vec.size(); ++i)
            REQUIRE(std::abs(a.vec[i] - b.vec[i]) <= 1e-12);
    }

    SECTION("mean pooling is permutation invariant over frames") {
        rng r(35);
        feature_matrix f;
        f.frames = matrix(32, 5);
        for (double& v : f.frames.data) v = r.uniform(-2.0, 2.0);
        f.valid_frames = 32;
        const auto base = embed_utterance(f);

        // rotate the frame order
        feature_matrix rotated = f;
        for (std::size_t t = 0; t < 32; ++t)
            for (std::size_t c = 0; c < 5; ++c) rotated.frames(t, c) = f.frames((t + 11) % 32, c);
        const auto rot = embed_utterance(rotated);
        for (std::size_t i = 0; i < base.vec.size(); ++i)
            REQUIRE(rot.vec[i] == Approx(base.vec[i]).margin(1e-12));
    }

    SECTION("projection maps the mean") {
        feature_matrix f;
        f.frames = matrix(2, 2);
        f.frames(0, 0) = 1.0;
        f.frames(0, 1) = 3.0;
        f.frames(1, 0) = 3.0;
        f.frames(1, 1) = 5.0;  // mean = (2, 4)
        f.valid_frames = 2;
        matrix proj(2, 1);
        proj(0, 0) = 0.5;
        proj(1, 0) = 2.0;
        const auto e = embed_utterance(f, &proj);
        REQUIRE(e.vec.size() == 1);
        CHECK(e.vec[0] == Approx(2.0 * 0.5 + 4.0 * 2.0));
    }
}

TEST_CASE("text_embed") {
    SECTION("empty transcript gives the zero vector") {
        const auto e = text_embed("", 16, 7);
        for (double v : e.vec) REQUIRE(v == 0.0);
    }

    SECTION("deterministic for a fixed seed") {
        const auto a = text_embed("the quick brown fox", 64, 7);
        const auto b = text_embed("the quick brown fox", 64, 7);
        REQUIRE(a.vec == b.vec);
        const auto c = text_embed("the quick brown fox", 64, 8);
        CHECK(a.vec != c.vec);
    }

    SECTION("bigram sensitivity: 'a b' differs from 'b a'") {
        const auto a = text_embed("a b", 64, 7);
        const auto b = text_embed("b a", 64, 7);
        const double cosine = dot(a.vec, b.vec);
        CHECK(cosine < 1.0 - 1e-9);  // both are unit vectors
    }

    SECTION("unit norm for non-empty input") {
        const auto e = text_embed("hello world again", 32, 3);
        CHECK(dot(e.vec, e.vec) == Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("embedding files") {
    const auto dir = oracle::temp_dir("dsp_embed");

    SECTION("round trip") {
        std::map<std::string, std::vector<double>> m{
            {"clip_a", {1.0, 2.5, -3.25}},
            {"clip_b", {0.125, 1e-7, 42.0}},
        };
        const auto path = dir + "/emb.tsv";
        save_embedding_file(path, m);
        const auto back = load_embedding_file(path);
        REQUIRE(back == m);
    }

    SECTION("dimension mismatch rejected") {
        const auto path = dir + "/bad.tsv";
        write_text_file(path, "a\t1,2,3\nb\t1,2\n");
        try {
            load_embedding_file(path);
            FAIL("expected error");
        } catch (const error& e) {
            CHECK(e.code() == errc::dimension_mismatch);
        }
    }
}
