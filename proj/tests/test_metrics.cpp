#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "segrefine/metrics.hpp"
#include "segrefine/synthetic.hpp"
#include "support/oracles.hpp"

using namespace segrefine;

namespace {

Frame noisy(const Frame& f, float amplitude, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> d(-amplitude, amplitude);
    Frame g = f;
    for (float& v : g.values()) v = std::clamp(v + d(rng), 0.0f, 1.0f);
    return g;
}

}  // namespace

TEST(Psnr, ClosedForms) {
    EXPECT_NEAR(psnr(Frame(3, 4, 4, 0.0f), Frame(3, 4, 4, 0.5f)), 10.0 * std::log10(4.0), 1e-4);
    EXPECT_NEAR(psnr(Frame(3, 4, 4, 0.0f), Frame(3, 4, 4, 1.0f / 255.0f)), 20.0 * std::log10(255.0),
                1e-3);
    EXPECT_NEAR(psnr(Frame(3, 4, 4, 0.0f), Frame(3, 4, 4, 0.5f)), 6.0206, 1e-3);
    EXPECT_NEAR(psnr(Frame(3, 4, 4, 0.0f), Frame(3, 4, 4, 1.0f / 255.0f)), 48.1308, 1e-3);
}

TEST(Psnr, IdenticalIsInfinite) {
    std::mt19937_64 rng(1);
    const Frame f = oracle::random_tensor(3, 8, 8, rng, 0.0f, 1.0f);
    EXPECT_EQ(psnr(f, f), kPsnrIdentical);
    EXPECT_TRUE(std::isinf(psnr(f, f)));
}

TEST(Psnr, ShapeMismatchRejected) {
    EXPECT_THROW(psnr(Frame(3, 4, 4), Frame(3, 4, 5)), std::invalid_argument);
}

TEST(Ssim, IdenticalIsOne) {
    std::mt19937_64 rng(2);
    const Frame f = oracle::random_tensor(3, 20, 24, rng, 0.0f, 1.0f);
    EXPECT_NEAR(ssim(f, f), 1.0, 1e-12);
}

TEST(Ssim, InvertedPatternScoresLowAndMatchesOracle) {
    std::mt19937_64 rng(3);
    const Frame a = oracle::random_tensor(3, 32, 32, rng, 0.0f, 1.0f);
    Frame b = a;
    for (float& v : b.values()) v = 1.0f - v;
    const double s = ssim(a, b);
    EXPECT_LT(s, 0.5);
    EXPECT_NEAR(s, oracle::naive_ssim(oracle::gray_of(a), oracle::gray_of(b)).ssim, 1e-6);
}

TEST(Ssim, ConstantFramesClosedForm) {
    // Zero variance: ssim reduces to the luminance term.
    const double x = 0.2, y = 0.6, c1 = 1e-4;
    const double expected = (2 * x * y + c1) / (x * x + y * y + c1);
    EXPECT_NEAR(ssim(Frame(3, 16, 16, float(x)), Frame(3, 16, 16, float(y))), expected, 1e-6);
}

TEST(Ssim, SymmetricAndBounded) {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 5; ++i) {
        const Frame a = oracle::random_tensor(3, 15, 17, rng, 0.0f, 1.0f);
        const Frame b = oracle::random_tensor(3, 15, 17, rng, 0.0f, 1.0f);
        EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
        EXPECT_LE(ssim(a, b), 1.0 + 1e-12);
        EXPECT_GE(ssim(a, b), -1.0 - 1e-12);
    }
}

TEST(Ssim, FrameSmallerThanWindowRejected) {
    EXPECT_THROW(ssim(Frame(3, 10, 40), Frame(3, 10, 40)), std::invalid_argument);
}

TEST(MsSsim, ScaleCounts) {
    EXPECT_EQ(ms_ssim_scale_count(11, 11), 1u);
    EXPECT_EQ(ms_ssim_scale_count(22, 22), 2u);
    EXPECT_EQ(ms_ssim_scale_count(44, 44), 3u);
    EXPECT_EQ(ms_ssim_scale_count(88, 88), 4u);
    EXPECT_EQ(ms_ssim_scale_count(176, 176), 5u);
    EXPECT_EQ(ms_ssim_scale_count(175, 400), 4u);
    EXPECT_EQ(ms_ssim_scale_count(4000, 4000), 5u);
    EXPECT_EQ(ms_ssim_scale_count(10, 100), 0u);
    EXPECT_THROW(ms_ssim(Frame(3, 10, 10), Frame(3, 10, 10)), std::invalid_argument);
}

TEST(MsSsim, MatchesOracleAtFullScale) {
    const auto seq = synthetic::moving_pattern(1, 256, 256, 6);
    const Frame& a = seq.frames[0];
    const Frame b = noisy(a, 0.15f, 9);
    const auto r = ms_ssim_detail(a, b);
    EXPECT_EQ(r.scales, 5u);
    EXPECT_NEAR(r.value, oracle::naive_ms_ssim(a, b), 1e-6);
}

TEST(MsSsim, MatchesOracleWithFewerScales) {
    std::mt19937_64 rng(10);
    const Frame a = oracle::random_tensor(3, 50, 61, rng, 0.0f, 1.0f);
    const Frame b = noisy(a, 0.3f, 11);
    const auto r = ms_ssim_detail(a, b);
    EXPECT_EQ(r.scales, 3u);
    EXPECT_NEAR(r.value, oracle::naive_ms_ssim(a, b), 1e-6);
}

TEST(MsSsim, DecreasesWithNoise) {
    const Frame a = synthetic::moving_pattern(1, 96, 96, 2).frames[0];
    double prev = ms_ssim(a, a);
    EXPECT_NEAR(prev, 1.0, 1e-12);
    for (float amp : {0.02f, 0.08f, 0.2f, 0.4f}) {
        const double v = ms_ssim(a, noisy(a, amp, 17));
        EXPECT_LT(v, prev) << amp;
        EXPECT_GE(v, 0.0);
        prev = v;
    }
}

TEST(Evaluate, PerFrameAndSegmentMeans) {
    FrameSequence o, d, r;
    for (int t = 0; t < 5; ++t) {
        o.frames.push_back(Frame(3, 12, 12, 0.0f));
        d.frames.push_back(Frame(3, 12, 12, 0.5f));
        r.frames.push_back(Frame(3, 12, 12, t < 3 ? 1.0f / 255.0f : 0.0f));
    }
    const auto rep = evaluate(o, d, r, 300, 3);
    ASSERT_EQ(rep.frames.size(), 5u);
    EXPECT_EQ(rep.frames[0].frame, 1u);
    EXPECT_NEAR(rep.frames[0].psnr_degraded, 6.0206, 1e-3);
    EXPECT_NEAR(rep.frames[0].psnr_refined, 48.1308, 1e-3);
    EXPECT_TRUE(std::isinf(rep.frames[4].psnr_refined));
    EXPECT_NEAR(rep.mean_psnr_degraded, 6.0206, 1e-3);
    ASSERT_EQ(rep.segments.size(), 2u);
    EXPECT_NEAR(rep.segments[0].mean_psnr_refined, 48.1308, 1e-3);
    EXPECT_EQ(rep.segments[1].segment.start_frame, 4u);
    EXPECT_EQ(rep.sidecar_bytes, 300u);
    EXPECT_NEAR(rep.sidecar_bpp, 300.0 * 8 / (5 * 144), 1e-12);
}

TEST(Evaluate, MismatchedInputsRejected) {
    FrameSequence o, d;
    o.frames.assign(3, Frame(3, 12, 12));
    d.frames.assign(2, Frame(3, 12, 12));
    EXPECT_THROW(evaluate(o, d, o, 0), std::invalid_argument);
    EXPECT_THROW(evaluate(FrameSequence{}, FrameSequence{}, FrameSequence{}, 0), std::invalid_argument);
}

TEST(QualityReportFormat, HeaderRowsAndSummary) {
    FrameSequence o, d;
    o.frames.assign(2, Frame(3, 12, 12, 0.0f));
    d.frames.assign(2, Frame(3, 12, 12, 0.5f));
    auto rep = evaluate(o, d, d, 100);
    rep.encoded_bytes = 50;
    std::ostringstream os;
    write_quality_report(os, rep);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "frame\tpsnr_degraded\tpsnr_refined\tms_ssim_degraded\tms_ssim_refined");
    std::getline(is, line);
    EXPECT_EQ(line.substr(0, 9), "1\t6.0206\t");
    const std::string s = os.str();
    EXPECT_NE(s.find("# summary\n"), std::string::npos);
    EXPECT_NE(s.find("psnr_gain_db\t0.0000\n"), std::string::npos);
    EXPECT_NE(s.find("sidecar_bytes\t100\n"), std::string::npos);
    EXPECT_NE(s.find("total_bits\t1200\n"), std::string::npos);
}
