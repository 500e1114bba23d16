#include <gtest/gtest.h>

#include <random>

#include "segrefine/synthetic.hpp"
#include "segrefine/trainer.hpp"
#include "support/oracles.hpp"

using namespace segrefine;

namespace {

RefinerTopology small_topology() { return RefinerTopology::from_kernels(std::vector<std::size_t>{3, 3}, 4); }

FrameSequence offset_pair_original(std::size_t frames, std::size_t h, std::size_t w,
                                   std::uint64_t seed) {
    return synthetic::uniform_noise(frames, h, w, 0.05f, 0.75f, seed);
}

}  // namespace

TEST(MakeTrainingExamples, ResidualTargetIsDegradedMinusOriginal) {
    std::mt19937_64 rng(1);
    std::vector<Frame> o{oracle::random_tensor(3, 4, 5, rng, 0.0f, 1.0f)};
    std::vector<Frame> d{oracle::random_tensor(3, 4, 5, rng, 0.0f, 1.0f)};
    const auto res = make_training_examples(o, d, RefineMode::Residual, 7);
    ASSERT_EQ(res.size(), 1u);
    EXPECT_EQ(res[0].frame_index, 7u);
    EXPECT_EQ(res[0].input, d[0]);
    for (std::size_t j = 0; j < o[0].size(); ++j) EXPECT_FLOAT_EQ(res[0].target[j], d[0][j] - o[0][j]);
    const auto dir = make_training_examples(o, d, RefineMode::Direct);
    EXPECT_EQ(dir[0].target, o[0]);
}

TEST(MakeTrainingExamples, MismatchesRejected) {
    std::vector<Frame> o{Frame(3, 4, 4), Frame(3, 4, 4)};
    std::vector<Frame> d{Frame(3, 4, 4)};
    EXPECT_THROW(make_training_examples(o, d, RefineMode::Residual), std::invalid_argument);
    std::vector<Frame> d2{Frame(3, 4, 4), Frame(3, 4, 5)};
    EXPECT_THROW(make_training_examples(o, d2, RefineMode::Residual), std::invalid_argument);
}

TEST(TrainingConfig, Validation) {
    TrainingConfig c;
    c.epochs = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.learning_rate = 0.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c.learning_rate = -1.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(TrainSegment, StepCountIsEpochsTimesFrames) {
    const auto o = offset_pair_original(5, 6, 6, 3);
    const auto d = synthetic::brightness_offset(o, 0.1f);
    const auto ex = make_training_examples(o.frames, d.frames, RefineMode::Residual);
    TrainingConfig cfg;
    cfg.epochs = 4;
    std::size_t calls = 0;
    auto [p, r] = train_segment(ex, small_topology(), cfg, 0, [&](const StepRecord&) { ++calls; });
    EXPECT_EQ(r.steps, 20u);
    EXPECT_EQ(r.step_losses.size(), 20u);
    EXPECT_EQ(calls, 20u);
    EXPECT_EQ(p.values.size(), parameter_count(small_topology()));

    cfg.epochs = 1;
    std::vector<TrainingExample> one{ex[0]};
    EXPECT_EQ(train_segment(one, small_topology(), cfg).second.steps, 1u);
}

TEST(TrainSegment, EmptyExamplesRejected) {
    EXPECT_THROW(train_segment({}, small_topology(), TrainingConfig{}), std::invalid_argument);
}

TEST(TrainSegment, LossDecreasesOnOffsetFixture) {
    const auto o = offset_pair_original(4, 8, 8, 5);
    const auto d = synthetic::brightness_offset(o, 0.2f);
    const auto ex = make_training_examples(o.frames, d.frames, RefineMode::Residual);
    TrainingConfig cfg;
    cfg.learning_rate = 3e-2;
    cfg.epochs = 30;
    auto [p, r] = train_segment(ex, small_topology(), cfg);
    EXPECT_LT(r.mean_epoch_loss(cfg.epochs - 1, ex.size()), 0.5 * r.mean_epoch_loss(0, ex.size()));
    EXPECT_GT(r.post_psnr_db, r.pre_psnr_db);
    EXPECT_GE(r.wall_time_s, 0.0);
}

TEST(TrainSegment, DivergenceRaisesNumericFailure) {
    const auto o = offset_pair_original(3, 8, 8, 9);
    const auto d = synthetic::brightness_offset(o, 0.3f);
    const auto ex = make_training_examples(o.frames, d.frames, RefineMode::Direct);
    TrainingConfig cfg;
    cfg.learning_rate = 1e6;
    cfg.epochs = 50;
    EXPECT_THROW(train_segment(ex, small_topology(), cfg), NumericFailure);
}

TEST(TrainSegment, SameSeedIsDeterministic) {
    const auto o = offset_pair_original(4, 6, 6, 2);
    const auto d = synthetic::brightness_offset(o, -0.1f);
    const auto ex = make_training_examples(o.frames, d.frames, RefineMode::Residual);
    TrainingConfig cfg;
    cfg.epochs = 3;
    cfg.seed = 77;
    const auto a = train_segment(ex, small_topology(), cfg);
    const auto b = train_segment(ex, small_topology(), cfg);
    EXPECT_EQ(a.first.values, b.first.values);
    EXPECT_EQ(a.second.step_losses, b.second.step_losses);
}

TEST(TrainVideo, OneParameterSetPerSegment) {
    const auto o = offset_pair_original(120, 4, 4, 11);
    const auto d = synthetic::brightness_offset(o, 0.05f);
    TrainingConfig cfg;
    cfg.epochs = 1;
    const auto res = train_video(o, d, SegmentationConfig{50}, cfg, small_topology(), 2);
    ASSERT_EQ(res.array.size(), 3u);
    EXPECT_EQ(res.array[2].segment.start_frame, 101u);
    EXPECT_EQ(res.array[2].segment.end_frame, 120u);
    ASSERT_EQ(res.reports.size(), 3u);
    EXPECT_EQ(res.reports[0].steps, 50u);
    EXPECT_EQ(res.reports[2].steps, 20u);
    EXPECT_EQ(res.reports[1].segment_index, 1u);
}

TEST(TrainVideo, IdenticalInputsAreFinite) {
    const auto o = offset_pair_original(6, 6, 6, 4);
    TrainingConfig cfg;
    cfg.epochs = 2;
    const auto res = train_video(o, o, SegmentationConfig{3}, cfg, small_topology());
    for (const auto& r : res.reports) {
        EXPECT_TRUE(std::isfinite(r.final_loss));
        EXPECT_EQ(r.pre_psnr_db, kPsnrIdentical);
        EXPECT_EQ(r.post_psnr_db, kPsnrIdentical);
        EXPECT_EQ(r.final_loss, 0.0);
    }
}

TEST(TrainVideo, ParallelMatchesSerial) {
    const auto o = offset_pair_original(12, 6, 6, 8);
    const auto d = synthetic::brightness_offset(o, 0.1f);
    TrainingConfig cfg;
    cfg.epochs = 2;
    cfg.seed = 5;
    const auto serial = train_video(o, d, SegmentationConfig{4}, cfg, small_topology(), 1);
    const auto parallel = train_video(o, d, SegmentationConfig{4}, cfg, small_topology(), 3);
    EXPECT_EQ(serial.array, parallel.array);
}

TEST(TrainVideo, SegmentsTrainIndependently) {
    // Changing frames of segment 2 must leave segment 1's parameters untouched.
    const auto o = offset_pair_original(8, 6, 6, 21);
    auto d = synthetic::brightness_offset(o, 0.1f);
    TrainingConfig cfg;
    cfg.epochs = 2;
    const auto a = train_video(o, d, SegmentationConfig{4}, cfg, small_topology());
    for (std::size_t t = 4; t < 8; ++t) d.frames[t] = synthetic::brightness_offset(o.frames[t], -0.2f);
    const auto b = train_video(o, d, SegmentationConfig{4}, cfg, small_topology());
    EXPECT_EQ(a.array[0].params.values, b.array[0].params.values);
    EXPECT_NE(a.array[1].params.values, b.array[1].params.values);
}

TEST(TrainVideo, FailureNamesSegment) {
    const auto o = offset_pair_original(6, 8, 8, 13);
    const auto d = synthetic::brightness_offset(o, 0.3f);
    TrainingConfig cfg;
    cfg.learning_rate = 1e6;
    cfg.epochs = 30;
    cfg.mode = RefineMode::Direct;
    try {
        train_video(o, d, SegmentationConfig{3}, cfg, small_topology());
        FAIL() << "expected NumericFailure";
    } catch (const NumericFailure& e) {
        EXPECT_NE(std::string(e.what()).find("segment 0"), std::string::npos) << e.what();
    }
}

TEST(TrainVideo, GeometryMismatchRejected) {
    const auto o = offset_pair_original(4, 6, 6, 1);
    const auto d = offset_pair_original(5, 6, 6, 1);
    EXPECT_THROW(train_video(o, d, SegmentationConfig{50}, TrainingConfig{}, small_topology()),
                 std::invalid_argument);
}

TEST(Fixtures, OffsetFixtureIsPureShift) {
    const auto fx = synthetic::offset_fixture();
    ASSERT_EQ(fx.original.size(), 8u);
    EXPECT_EQ(fx.original.width(), 16u);
    for (std::size_t t = 0; t < 8; ++t)
        for (std::size_t j = 0; j < fx.original.frames[t].size(); ++j)
            EXPECT_NEAR(fx.degraded.frames[t][j] - fx.original.frames[t][j], 0.2f, 1e-6);
}

TEST(Fixtures, BrightenDarkenSigns) {
    const auto fx = synthetic::brighten_darken_fixture(3);
    ASSERT_EQ(fx.degraded.size(), 6u);
    EXPECT_GT(fx.degraded.frames[0][0], fx.original.frames[0][0]);
    EXPECT_LT(fx.degraded.frames[5][0], fx.original.frames[5][0]);
}
