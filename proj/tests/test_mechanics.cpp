#include "tipslip/mechanics.hpp"

#include <gtest/gtest.h>

using namespace tipslip;

namespace
{

ContactLayout single_node()
{
    SensorDesign d;
    d.ring_radii = {0.0};
    d.nodes_per_ring = {1};
    return build_layout(d);
}

SimState one_node_state(double normal, Vec2 offset)
{
    SimState s;
    s.nodes.resize(1);
    s.nodes[0].normal_force = normal;
    s.nodes[0].attachment_offset = offset;
    return s;
}

FrictionField friction(std::size_t n, double mu_s, double mu_k)
{
    return {std::vector<double>(n, mu_s), std::vector<double>(n, mu_k)};
}

}  // namespace

TEST(SolveEquilibrium, BelowStaticConeStaysStuck)
{
    const auto layout = single_node();
    const double k = layout.design.anchor_stiffness;
    SimState s = one_node_state(1.0, {0.3 / k, 0.0});
    solve_equilibrium(s, layout, friction(1, 0.5, 0.45), 0.0, PlateMode::Held);
    EXPECT_EQ(s.nodes[0].regime, Regime::Stuck);
    EXPECT_NEAR(s.nodes[0].tangential_force.norm(), 0.3, 1e-9);
    // the contact point has not moved relative to the plate
    EXPECT_NEAR(s.nodes[0].position.x, 0.3 / k, 1e-12);
    EXPECT_NEAR(s.nodes[0].attachment_offset.x, 0.3 / k, 1e-12);
}

TEST(SolveEquilibrium, AboveStaticConeSlipsAtKineticLimit)
{
    const auto layout = single_node();
    const double k = layout.design.anchor_stiffness;
    SimState s = one_node_state(1.0, {0.6 / k, 0.0});
    solve_equilibrium(s, layout, friction(1, 0.5, 0.45), 0.0, PlateMode::Held);
    EXPECT_EQ(s.nodes[0].regime, Regime::Slipping);
    EXPECT_NEAR(s.nodes[0].tangential_force.norm(), 0.45, 1e-9);
    EXPECT_NEAR(s.nodes[0].position.x, 0.45 / k, 1e-9);
}

TEST(SolveEquilibrium, SymmetricTwoNodeSolutionIsMirrored)
{
    SensorDesign d;
    d.ring_radii = {0.0, 4.0};
    d.nodes_per_ring = {0, 2};
    const auto layout = build_layout(d);
    SimState s;
    s.nodes.resize(2);
    for (auto& n : s.nodes) n.normal_force = 0.4;
    for (std::size_t i = 0; i < 2; ++i) s.nodes[i].position = layout.nodes[i].rest;
    solve_equilibrium(s, layout, friction(2, 1.0, 0.5), 0.1, PlateMode::Free);
    EXPECT_NEAR(s.nodes[0].position.x, -s.nodes[1].position.x, 1e-9);
    EXPECT_NEAR(s.nodes[0].position.y, s.nodes[1].position.y, 1e-9);
    EXPECT_LT(s.plate.height, 0.0);
}

TEST(SolveEquilibrium, StuckNodesRespectFrictionCone)
{
    const auto traj = run_retraction(SensorDesign::ridged(), StimulusSpec{}, 0.3, 5);
    const auto layout = build_layout(SensorDesign::ridged());
    const auto f = jittered_friction(layout.size(), StimulusSpec{}, SimParams{}.mu_jitter, 5);
    for (const auto& frame : traj.frames)
        for (std::size_t i = 0; i < frame.nodes.size(); ++i) {
            const auto& n = frame.nodes[i];
            if (n.regime == Regime::Stuck) {
                EXPECT_LE(n.tangential_force.norm(), f.mu_static[i] * n.normal_force + 1e-6);
            }
            if (n.regime == Regime::OutOfContact) {
                EXPECT_EQ(n.tangential_force.norm(), 0.0);
            }
        }
}

TEST(ClassifyRegime, Definitions)
{
    SimState s;
    s.nodes.resize(3);
    EXPECT_EQ(classify_regime(s), SlipRegime::AllStuck);
    s.nodes[1].regime = Regime::Slipping;
    EXPECT_EQ(classify_regime(s), SlipRegime::Incipient);
    s.plate.falling = true;
    EXPECT_EQ(classify_regime(s), SlipRegime::Gross);
    for (auto& n : s.nodes) n.regime = Regime::Stuck;
    EXPECT_EQ(classify_regime(s), SlipRegime::Gross);
}

TEST(Step, ZeroSpeedLeavesStateUnchanged)
{
    const auto layout = build_layout(SensorDesign::ridged());
    const StimulusSpec stimulus;
    Simulator sim(layout, stimulus, FrictionField::uniform(layout.size(), stimulus), SimParams{});
    const SimState s0 = sim.initial_state();
    const SimState s1 = sim.step(s0, 1.0 / 30.0, 0.0);
    EXPECT_EQ(s1.retraction, s0.retraction);
    EXPECT_NEAR(s1.plate.height, s0.plate.height, 1e-8);
    for (std::size_t i = 0; i < s0.nodes.size(); ++i) {
        EXPECT_NEAR((s1.nodes[i].position - s0.nodes[i].position).norm(), 0.0, 1e-8);
        EXPECT_EQ(s1.nodes[i].regime, s0.nodes[i].regime);
    }
}

TEST(Step, RejectsNonPositiveTimeStep)
{
    const auto layout = build_layout(SensorDesign::ridged());
    const StimulusSpec stimulus;
    Simulator sim(layout, stimulus, FrictionField::uniform(layout.size(), stimulus), SimParams{});
    EXPECT_THROW((void)sim.step(sim.initial_state(), 0.0, 0.1), InvalidArgument);
}

TEST(Step, CapacityAboveWeightHoldsPlate)
{
    const auto layout = single_node();
    StimulusSpec stimulus;
    stimulus.mass = 0.01;
    // mu_s * N = 1.1 m g at the press depth
    stimulus.press_depth = 1.1 * stimulus.weight() / (stimulus.mu_static * layout.design.contact_stiffness);
    Simulator sim(layout, stimulus, FrictionField::uniform(1, stimulus), SimParams{});
    const SimState s0 = sim.initial_state();
    const SimState s1 = sim.step(s0, 1.0 / 30.0, 0.0);
    EXPECT_FALSE(s1.plate.falling);
    EXPECT_NEAR(s1.plate.height, 0.0, 1e-8);
    EXPECT_EQ(s1.regime_summary, SlipRegime::AllStuck);
}

TEST(Step, CapacityBelowWeightFallsWithinOneStep)
{
    const auto layout = single_node();
    StimulusSpec stimulus;
    stimulus.mass = 0.01;
    stimulus.press_depth = 1.1 * stimulus.weight() / (stimulus.mu_static * layout.design.contact_stiffness);
    Simulator sim(layout, stimulus, FrictionField::uniform(1, stimulus), SimParams{});
    // one step removes 20% of the indentation: capacity 0.88 m g
    const double dt = 1.0 / 30.0;
    const SimState s1 = sim.step(sim.initial_state(), dt, 0.2 * stimulus.press_depth / dt);
    EXPECT_TRUE(s1.plate.falling);
    EXPECT_EQ(s1.regime_summary, SlipRegime::Gross);
    EXPECT_LT(s1.plate.height, 0.0);
}

TEST(RunRetraction, RidgedWindowAtCalibratedSpeed)
{
    const auto traj = run_retraction(SensorDesign::ridged(), StimulusSpec{}, 0.2, 1);
    ASSERT_TRUE(traj.events.incipient_retraction.has_value());
    ASSERT_TRUE(traj.events.gross_retraction.has_value());
    EXPECT_LE(*traj.events.incipient_time, *traj.events.gross_time);
    EXPECT_GE(traj.incipient_window(), 0.4);
    EXPECT_LE(traj.incipient_window(), 1.6);
}

TEST(RunRetraction, RidgedWindowAtLeastPointFourAtEverySpeed)
{
    for (double v : {0.1, 0.2, 0.3, 0.4, 0.5}) {
        const auto traj = run_retraction(SensorDesign::ridged(), StimulusSpec{}, v, 11);
        EXPECT_GE(traj.incipient_window(), 0.4) << v;
    }
}

TEST(RunRetraction, SmoothVariantHasNoIncipientWindow)
{
    for (double v : {0.1, 0.3, 0.5}) {
        const auto traj = run_retraction(SensorDesign::smooth(), StimulusSpec{}, v, 3);
        ASSERT_TRUE(traj.events.gross_time.has_value());
        EXPECT_LT(traj.incipient_window(), 0.05) << v;
    }
}

TEST(RunRetraction, SameSeedIsBitIdentical)
{
    const auto a = run_retraction(SensorDesign::ridged(), StimulusSpec{}, 0.4, 9);
    const auto b = run_retraction(SensorDesign::ridged(), StimulusSpec{}, 0.4, 9);
    ASSERT_EQ(a.frames.size(), b.frames.size());
    for (std::size_t k = 0; k < a.frames.size(); ++k) {
        EXPECT_EQ(a.frames[k].plate.height, b.frames[k].plate.height);
        for (std::size_t i = 0; i < a.frames[k].nodes.size(); ++i) {
            EXPECT_EQ(a.frames[k].nodes[i].position.x, b.frames[k].nodes[i].position.x);
            EXPECT_EQ(a.frames[k].nodes[i].position.y, b.frames[k].nodes[i].position.y);
            EXPECT_EQ(a.frames[k].nodes[i].regime, b.frames[k].nodes[i].regime);
        }
    }
}

TEST(RunRetraction, RejectsSpeedOutsideRange)
{
    EXPECT_THROW(run_retraction(SensorDesign::ridged(), StimulusSpec{}, 0.0, 1), InvalidArgument);
    EXPECT_THROW(run_retraction(SensorDesign::ridged(), StimulusSpec{}, 1.5, 1), InvalidArgument);
}

TEST(RunRetraction, PlateAndNodeMotionAreContinuous)
{
    for (const auto& stimulus : StimulusSpec::test_set()) {
        const double v = 0.3;
        const auto traj = run_retraction(SensorDesign::ridged(), stimulus, v, 2);
        const double step = v / traj.frame_rate;
        bool fell = false;
        for (std::size_t k = 1; k < traj.frames.size(); ++k) {
            const auto& a = traj.frames[k - 1];
            const auto& b = traj.frames[k];
            EXPECT_LE(b.plate.height, a.plate.height + 1e-9);
            if (fell) {
                EXPECT_TRUE(b.plate.falling);
            }
            fell = b.plate.falling;
            if (b.plate.falling) continue;
            for (std::size_t i = 0; i < b.nodes.size(); ++i)
                EXPECT_LT((b.nodes[i].position - a.nodes[i].position).norm(), 10.0 * step) << stimulus.name;
        }
    }
}

TEST(RunRetraction, OuterHorizontalMarkersSlipFirst)
{
    const auto layout = build_layout(SensorDesign::ridged());
    int ok = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto traj = run_retraction(SensorDesign::ridged(), StimulusSpec{}, 0.2, seed);
        const auto order = slip_ordering(traj, layout);
        ok += order.outer_first && order.top_last;
    }
    EXPECT_GE(ok, 9);
}

TEST(RunRetraction, OutermostRingLosesContactFirst)
{
    const auto layout = build_layout(SensorDesign::ridged());
    const auto traj = run_retraction(SensorDesign::ridged(), StimulusSpec{}, 0.2, 4);
    double ring4 = std::numeric_limits<double>::infinity();
    double inner = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const double t = traj.events.dropout_time[i].value_or(std::numeric_limits<double>::infinity());
        if (layout.nodes[i].ring == 4) ring4 = std::min(ring4, t);
        else inner = std::min(inner, t);
    }
    EXPECT_LT(ring4, inner);
}
