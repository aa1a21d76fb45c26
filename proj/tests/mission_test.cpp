#include "sartrack/mission.hpp"
#include "transition_table.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <array>

using namespace sartrack;
using namespace sartrack::mission;

using namespace sartrack::testing;

TEST(TransitionTable, ExhaustiveEnumeration)
{
    const auto report = check_transition_table();
    EXPECT_EQ(report.cases, 5 * 5 * 6);
    for (const auto& m : report.mismatches) {
        ADD_FAILURE() << m;
    }
}

TEST(TransitionTable, ModeNamesRoundTrip)
{
    for (Mode m : all_modes) {
        EXPECT_EQ(mode_from_string(to_string(m)), m);
    }
    for (Button b : all_buttons) {
        EXPECT_EQ(button_from_string(to_string(b)), b);
    }
    EXPECT_FALSE(mode_from_string("Hover").has_value());
}

// ---------------------------------------------------------------------------
// Per-mode behaviour

TEST(Free, ManualCommandIsClampedAndPassedThrough)
{
    const auto ctx = make_context();
    auto s = initial_state(ctx, make_bank());
    OperatorInput in;
    in.manual = VelocityCommand{0.5, -3.0, 0.2, 0.4};
    const auto out = mission_step(ctx, s, nullptr, {}, in, 0.0, dt);
    EXPECT_EQ(out.command, (VelocityCommand{0.5, -1.0, 0.2, 0.4}));
}

TEST(Free, CaptureTemplateTakesNearestCenteredFace)
{
    const auto ctx = make_context();
    auto s = initial_state(ctx, make_bank());
    OperatorInput in;
    in.button = Button::capture_template;
    in.capture_label = "zoe";
    auto out = mission_step(ctx, s, nullptr, {}, in, 0.0, dt);
    EXPECT_EQ(out.state.pending_capture, "zoe");
    EXPECT_FALSE(out.capture.has_value());

    auto near = person(4, 150.0, {650.0, 250.0});
    near.embedding = EmbeddingValues{};
    (*near.embedding)[0] = 1.0;
    auto far = person(5, 150.0, {1100.0, 250.0});
    far.embedding = EmbeddingValues{};
    const auto f = frame_with({far, near});
    out = mission_step(ctx, out.state, &f, {}, {}, dt, dt);
    ASSERT_TRUE(out.capture.has_value());
    EXPECT_EQ(out.capture->label, "zoe");
    EXPECT_EQ(out.capture->embedding[0], 1.0);
    EXPECT_EQ(out.state.target_label, "zoe");
    EXPECT_FALSE(out.state.pending_capture.has_value());
    EXPECT_TRUE(has_event(out, "template-captured"));
}

TEST(Search, YawNeverExceedsCap)
{
    auto ctx = make_context();
    ctx.config.search_yaw_rate = 5.0; // deliberately above the cap
    auto s = initial_state(ctx, make_bank(), Mode::Search);
    for (int i = 0; i < 30; ++i) {
        const auto out = mission_step(ctx, s, nullptr, {}, {}, i * dt, dt);
        EXPECT_LE(std::abs(out.command.yaw_rate), 0.7854);
        EXPECT_GT(out.command.yaw_rate, 0.0);
        s = out.state;
    }
}

TEST(Search, MultipleMatchesLockFirstInDetectionOrder)
{
    auto ctx = make_context();
    ctx.config.target_label.reset();
    auto s = initial_state(ctx, make_bank(), Mode::Search);
    const auto f = frame_with({person(7), person(8)});
    const std::vector<FaceMatch> faces{face(7, "x", 0.7), face(8, "bob"), face(9, "carol")};
    const auto out = mission_step(ctx, s, &f, faces, {}, 0.0, dt);
    EXPECT_EQ(out.state.mode, Mode::AwaitConfirm);
    EXPECT_EQ(out.state.target_track_id, 8);
    EXPECT_EQ(out.state.target_label, "bob");
    EXPECT_EQ(out.command, VelocityCommand{});
}

TEST(Search, IgnoresMatchesForOtherLabels)
{
    const auto ctx = make_context();
    auto s = initial_state(ctx, make_bank(), Mode::Search);
    const std::vector<FaceMatch> faces{face(3, "bob")};
    EXPECT_EQ(mission_step(ctx, s, nullptr, faces, {}, 0.0, dt).state.mode, Mode::Search);
}

TEST(AwaitConfirm, CentersWithoutForwardMotion)
{
    const auto ctx = make_context();
    auto s = initial_state(ctx, make_bank(), Mode::AwaitConfirm);
    s.target_track_id = 1;
    const auto f = frame_with({person(1, 176.4, {800.0, 300.0})});
    const auto out = mission_step(ctx, s, &f, {}, {}, 0.0, dt);
    EXPECT_EQ(out.command.vx, 0.0);
    EXPECT_LT(out.command.yaw_rate, 0.0); // target right of center: turn right
    EXPECT_GT(out.command.vz, 0.0);       // target above center: climb
}

TEST(Track, GuardHoldForcesZeroForward)
{
    const auto ctx = make_context();
    auto s = initial_state(ctx, make_bank(), Mode::Track);
    s.target_track_id = 1;
    // Far target: forward command.
    const auto far = frame_with({person(1, 130.0)});
    auto out = mission_step(ctx, s, &far, {}, {}, 0.0, dt);
    EXPECT_GT(out.command.vx, 0.0);
    EXPECT_FALSE(out.state.motion_hold);
    // Torso suddenly 40% shorter: implied jump far beyond the closing-speed limit.
    const auto shrunk = frame_with({person(1, 78.0)});
    for (int i = 1; i <= 5; ++i) {
        out = mission_step(ctx, out.state, &shrunk, {}, {}, i * dt, dt);
        EXPECT_TRUE(out.state.motion_hold);
        EXPECT_EQ(out.command.vx, 0.0);
        EXPECT_EQ(has_event(out, "motion-hold"), i == 1);
    }
}

TEST(Track, RangeErrorSignDrivesForwardMotion)
{
    const auto ctx = make_context();
    auto s = initial_state(ctx, make_bank(), Mode::Track);
    s.target_track_id = 1;
    const auto near = frame_with({person(1, 230.0)});
    EXPECT_LT(mission_step(ctx, s, &near, {}, {}, 0.0, dt).command.vx, 0.0);
    const auto at = frame_with({person(1, 176.4)});
    EXPECT_NEAR(mission_step(ctx, s, &at, {}, {}, 0.0, dt).command.vx, 0.0, 0.01);
}

TEST(Track, LossAfterLossFramesEntersReconfirm)
{
    const auto ctx = make_context();
    auto s = initial_state(ctx, make_bank(), Mode::Track);
    s.target_track_id = 1;
    for (int i = 0; i < ctx.config.loss_frames - 1; ++i) {
        const auto out = mission_step(ctx, s, nullptr, {}, {}, i * dt, dt);
        ASSERT_EQ(out.state.mode, Mode::Track) << i;
        s = out.state;
    }
    const auto out = mission_step(ctx, s, nullptr, {}, {}, 1.0, dt);
    EXPECT_EQ(out.state.mode, Mode::Reconfirm);
    EXPECT_TRUE(has_event(out, "target-lost"));
    ASSERT_TRUE(out.state.reconfirm_deadline.has_value());
    EXPECT_DOUBLE_EQ(*out.state.reconfirm_deadline, 1.0 + ctx.config.reconfirm_timeout_s);
    EXPECT_EQ(out.command, VelocityCommand{});
}

TEST(Reconfirm, ReacquiresWithNewTrackId)
{
    const auto ctx = make_context();
    auto s = initial_state(ctx, make_bank(), Mode::Reconfirm);
    s.target_track_id = 1;
    s.target_label = "alice";
    s.reconfirm_deadline = 10.0;
    const auto f = frame_with({person(1001)});
    const std::vector<FaceMatch> faces{face(1001, "alice")};
    const auto out = mission_step(ctx, s, &f, faces, {}, 2.0, dt);
    EXPECT_EQ(out.state.mode, Mode::Track);
    EXPECT_EQ(out.state.target_track_id, 1001);
    EXPECT_TRUE(has_event(out, "reacquired"));
}

TEST(Reconfirm, HoversUntilTimeout)
{
    const auto ctx = make_context();
    auto s = initial_state(ctx, make_bank(), Mode::Reconfirm);
    s.target_track_id = 1;
    s.reconfirm_deadline = 1.0;
    auto out = mission_step(ctx, s, nullptr, {}, {}, 0.5, dt);
    EXPECT_EQ(out.state.mode, Mode::Reconfirm);
    EXPECT_EQ(out.command, VelocityCommand{});
    out = mission_step(ctx, out.state, nullptr, {}, {}, 1.0, dt);
    EXPECT_EQ(out.state.mode, Mode::Search);
    EXPECT_TRUE(has_event(out, "reconfirm-timeout"));
    EXPECT_FALSE(out.state.target_track_id.has_value());
}

TEST(GoFree, ClearsTargetFromEveryMode)
{
    const auto ctx = make_context();
    for (Mode m : {Mode::Search, Mode::AwaitConfirm, Mode::Track, Mode::Reconfirm}) {
        auto s = initial_state(ctx, make_bank(), m);
        s.target_track_id = 3;
        OperatorInput in;
        in.button = Button::go_free;
        const auto out = mission_step(ctx, s, nullptr, {}, in, 0.0, dt);
        EXPECT_EQ(out.state.mode, Mode::Free);
        EXPECT_FALSE(out.state.target_track_id.has_value());
    }
}
