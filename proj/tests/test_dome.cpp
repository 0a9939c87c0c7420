#include "tipslip/dome.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace tipslip;

namespace
{

std::vector<double> ring_forces(const ContactLayout& layout, const std::vector<double>& forces)
{
    std::vector<double> per_ring(layout.design.ring_radii.size(), -1.0);
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const auto ring = static_cast<std::size_t>(layout.nodes[i].ring);
        per_ring[ring] = std::max(per_ring[ring], forces[i]);
    }
    return per_ring;
}

}  // namespace

TEST(BuildLayout, SingleRingOfZeroRadiusIsOneNodeAtOrigin)
{
    SensorDesign d;
    d.ring_radii = {0.0};
    d.nodes_per_ring = {1};
    const auto layout = build_layout(d);
    ASSERT_EQ(layout.size(), 1u);
    EXPECT_EQ(layout.nodes[0].rest.x, 0.0);
    EXPECT_EQ(layout.nodes[0].rest.y, 0.0);
}

TEST(BuildLayout, DefaultDesignHasCentreAndFourRings)
{
    const auto layout = build_layout(SensorDesign::ridged());
    const auto& d = layout.design;
    ASSERT_EQ(layout.size(), static_cast<std::size_t>(std::accumulate(d.nodes_per_ring.begin(), d.nodes_per_ring.end(), 0)));
    EXPECT_EQ(layout.nodes[0].rest.norm(), 0.0);
    std::vector<int> count(d.ring_radii.size(), 0);
    for (const auto& n : layout.nodes) {
        EXPECT_NEAR(n.rest.norm(), d.ring_radii[static_cast<std::size_t>(n.ring)], 1e-12);
        ++count[static_cast<std::size_t>(n.ring)];
    }
    EXPECT_EQ(d.ring_radii, (std::vector<double>{0, 4, 8, 12, 16}));
    for (std::size_t r = 0; r < count.size(); ++r) EXPECT_EQ(count[r], d.nodes_per_ring[r]);
}

TEST(BuildLayout, TwoNodesOnRingFourAreEightApart)
{
    SensorDesign d;
    d.ring_radii = {0.0, 4.0};
    d.nodes_per_ring = {0, 2};
    const auto layout = build_layout(d);
    ASSERT_EQ(layout.size(), 2u);
    EXPECT_NEAR(layout.nodes[0].rest.x, 4.0, 1e-12);
    EXPECT_NEAR(layout.nodes[0].rest.y, 0.0, 1e-12);
    EXPECT_NEAR(layout.nodes[1].rest.x, -4.0, 1e-12);
    EXPECT_NEAR(layout.nodes[1].rest.y, 0.0, 1e-12);
    EXPECT_NEAR((layout.nodes[0].rest - layout.nodes[1].rest).norm(), 8.0, 1e-12);
}

TEST(BuildLayout, RejectsInvalidRings)
{
    SensorDesign empty;
    empty.ring_radii.clear();
    empty.nodes_per_ring.clear();
    EXPECT_THROW(build_layout(empty), InvalidArgument);

    SensorDesign flat_step;
    flat_step.ring_radii = {0.0, 4.0, 4.0, 12.0, 16.0};
    EXPECT_THROW(build_layout(flat_step), InvalidArgument);

    SensorDesign no_centre;
    no_centre.ring_radii = {1.0, 4.0, 8.0, 12.0, 16.0};
    EXPECT_THROW(build_layout(no_centre), InvalidArgument);
}

TEST(BuildLayout, IsDeterministic)
{
    const auto a = build_layout(SensorDesign::ridged());
    const auto b = build_layout(SensorDesign::ridged());
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a.nodes[i].rest.x, b.nodes[i].rest.x);
        EXPECT_EQ(a.nodes[i].rest.y, b.nodes[i].rest.y);
        EXPECT_EQ(a.neighbours[i], b.neighbours[i]);
    }
}

TEST(BuildLayout, NineTrackedMarkersInACross)
{
    const auto layout = build_layout(SensorDesign::ridged());
    const auto tracked = layout.tracked_markers();
    EXPECT_EQ(tracked.size(), 9u);
    EXPECT_EQ(layout.markers(true).size(), 13u);
    for (std::size_t id : layout.markers(true)) {
        const Vec2 p = layout.nodes[id].rest;
        EXPECT_TRUE(p.x == 0.0 || p.y == 0.0);
    }
}

TEST(SmoothDesign, SatisfiesCouplingInvariant)
{
    const auto s = SensorDesign::smooth();
    EXPECT_NO_THROW(s.validate());
    EXPECT_GE(s.skin_coupling, 20.0 * SensorDesign::ridged().skin_coupling);
    SensorDesign weak = s;
    weak.skin_coupling = SensorDesign::ridged().skin_coupling;
    EXPECT_THROW(weak.validate(), InvalidArgument);
}

TEST(NormalForce, ZeroIndentationGivesNoForce)
{
    const auto layout = build_layout(SensorDesign::ridged());
    for (double f : normal_force(layout, StimulusSpec{}, 0.0, 0.0)) EXPECT_EQ(f, 0.0);
}

TEST(NormalForce, NegativeIndentationRejected)
{
    const auto layout = build_layout(SensorDesign::ridged());
    EXPECT_THROW(normal_force(layout, StimulusSpec{}, -0.1, 0.0), InvalidArgument);
}

TEST(NormalForce, NonIncreasingInRingRadiusWithoutShear)
{
    const auto layout = build_layout(SensorDesign::ridged());
    for (const auto& stimulus : StimulusSpec::test_set())
        for (double delta = 0.0; delta <= 3.0; delta += 0.05) {
            const auto per_ring = ring_forces(layout, normal_force(layout, stimulus, delta, 0.0));
            for (std::size_t r = 1; r < per_ring.size(); ++r) EXPECT_LE(per_ring[r], per_ring[r - 1]);
        }
}

TEST(NormalForce, ShearTiltsLoadByClosedFormFactor)
{
    const auto layout = build_layout(SensorDesign::ridged());
    const double shear = 0.2;
    const double beta = layout.design.shear_asymmetry_gain * shear;
    const auto f = normal_force(layout, StimulusSpec{}, 1.8, shear);
    const auto f0 = normal_force(layout, StimulusSpec{}, 1.8, 0.0);
    int pairs = 0;
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const Vec2 p = layout.nodes[i].rest;
        if (p.y <= 0.0 || f0[i] <= 0.0) continue;
        for (std::size_t j = 0; j < layout.size(); ++j) {
            const Vec2 q = layout.nodes[j].rest;
            if (std::abs(q.x - p.x) > 1e-9 || std::abs(q.y + p.y) > 1e-9) continue;
            const double ratio = (1.0 + beta * p.y / layout.max_radius()) / (1.0 - beta * p.y / layout.max_radius());
            EXPECT_NEAR(f[i] / f[j], ratio, 1e-12);
            EXPECT_GT(f[i], f[j]);
            ++pairs;
        }
    }
    EXPECT_GT(pairs, 0);
}

TEST(NormalForce, TotalForceNonIncreasingAsIndentationShrinks)
{
    const auto layout = build_layout(SensorDesign::ridged());
    for (const auto& stimulus : StimulusSpec::test_set()) {
        double prev = std::numeric_limits<double>::infinity();
        for (double delta = 3.0; delta >= 0.0; delta -= 0.01) {
            const auto f = normal_force(layout, stimulus, std::max(delta, 0.0), 0.0);
            const double total = std::accumulate(f.begin(), f.end(), 0.0);
            EXPECT_LE(total, prev + 1e-12);
            prev = total;
        }
    }
}

TEST(ContactSet, AllZeroForcesGiveEmptySet)
{
    const std::vector<double> zeros(10, 0.0);
    EXPECT_TRUE(contact_set(zeros).empty());
}

TEST(ContactSet, FlatPressTouchesEveryNode)
{
    const auto layout = build_layout(SensorDesign::ridged());
    const StimulusSpec flat;
    EXPECT_EQ(contact_set(normal_force(layout, flat, flat.press_depth, 0.0)).size(), layout.size());
}

TEST(ContactSet, CurvedPressTouchesWholeInnerRings)
{
    const auto layout = build_layout(SensorDesign::ridged());
    for (const auto& stimulus : StimulusSpec::test_set()) {
        const auto set = contact_set(normal_force(layout, stimulus, stimulus.press_depth, 0.0));
        ASSERT_FALSE(set.empty()) << stimulus.name;
        int outer = 0;
        for (std::size_t i : set) outer = std::max(outer, static_cast<int>(layout.nodes[i].ring));
        for (std::size_t i = 0; i < layout.size(); ++i)
            EXPECT_EQ(set.count(i) == 1, static_cast<int>(layout.nodes[i].ring) <= outer) << stimulus.name;
    }
}

TEST(ContactSet, OutermostRingDropsOutFirst)
{
    const auto layout = build_layout(SensorDesign::ridged());
    const StimulusSpec flat;
    bool saw_partial = false;
    for (double delta = flat.press_depth; delta > 0.0; delta -= 0.01) {
        const auto set = contact_set(normal_force(layout, flat, delta, 0.0));
        int innermost_lost = 99;
        int outermost_kept = -1;
        for (std::size_t i = 0; i < layout.size(); ++i) {
            if (set.count(i)) outermost_kept = std::max(outermost_kept, layout.nodes[i].ring);
            else innermost_lost = std::min(innermost_lost, layout.nodes[i].ring);
        }
        EXPECT_LT(outermost_kept, innermost_lost);
        if (outermost_kept >= 0 && innermost_lost == 4) saw_partial = true;
    }
    EXPECT_TRUE(saw_partial);
}

TEST(ContactSet, ShrinksMonotonicallyWithIndentation)
{
    const auto layout = build_layout(SensorDesign::ridged());
    for (const auto& stimulus : StimulusSpec::test_set())
        for (double d1 = 0.05; d1 <= 2.5; d1 += 0.05) {
            const auto big = contact_set(normal_force(layout, stimulus, d1, 0.1));
            const auto small = contact_set(normal_force(layout, stimulus, d1 - 0.05, 0.1));
            for (std::size_t id : small) EXPECT_TRUE(big.count(id));
        }
}

TEST(StimulusSpec, ValidatesFriction)
{
    StimulusSpec s;
    s.mu_kinetic = 1.5;
    EXPECT_THROW(s.validate(), InvalidArgument);
    s = StimulusSpec{};
    s.mass = 0.0;
    EXPECT_THROW(s.validate(), InvalidArgument);
    EXPECT_NO_THROW(StimulusSpec{}.validate());
}
