#pragma once

#include "tipslip/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace tipslip
{

enum class Variant
{
    Ridged,
    Smooth
};

inline std::string to_string(Variant v) { return v == Variant::Ridged ? "ridged" : "smooth"; }

inline Variant variant_from_string(const std::string& s)
{
    if (s == "ridged") return Variant::Ridged;
    if (s == "smooth") return Variant::Smooth;
    throw InvalidArgument("unknown sensor variant '" + s + "'");
}

/// Geometry and material constants of the dome. Stiffnesses act on node
/// displacements in the contact plane; `contact_stiffness` maps indentation
/// past a node's height deficit to normal force.
struct SensorDesign
{
    std::vector<double> ring_radii{0.0, 4.0, 8.0, 12.0, 16.0};  // mm
    std::vector<int> nodes_per_ring{1, 8, 12, 16, 20};
    double ridge_height{2.0};         // mm
    double skin_coupling{0.108};      // N/mm, node-to-neighbour
    double anchor_stiffness{0.148};   // N/mm, node-to-sensor frame
    double dome_radius{116.0};        // mm, curvature of the ridge crests
    double contact_stiffness{0.291};  // N/mm per node
    double shear_asymmetry_gain{0.83};  // beta per newton of shear load
    double stimulus_curvature_weight{0.5};  // share of the stimulus curvature the skin does not absorb
    Variant variant{Variant::Ridged};

    static SensorDesign ridged() { return {}; }

    /// Same dome without ridges: thick skin, no traction differential.
    static SensorDesign smooth()
    {
        SensorDesign d;
        d.variant = Variant::Smooth;
        d.ridge_height = 0.0;
        d.skin_coupling = 25.0 * ridged().skin_coupling;
        return d;
    }

    void validate() const
    {
        if (ring_radii.empty()) throw InvalidArgument("design has no rings");
        if (ring_radii.size() != nodes_per_ring.size())
            throw InvalidArgument("ring_radii and nodes_per_ring differ in length");
        if (ring_radii.front() != 0.0)
            throw InvalidArgument("first ring must have zero radius");
        for (std::size_t i = 1; i < ring_radii.size(); ++i)
            if (!(ring_radii[i] > ring_radii[i - 1]))
                throw InvalidArgument("ring radii must be strictly increasing");
        if (nodes_per_ring.front() > 1)
            throw InvalidArgument("the zero-radius ring holds at most one node");
        for (int n : nodes_per_ring)
            if (n < 0) throw InvalidArgument("negative node count");
        if (!(skin_coupling > 0.0) || !(anchor_stiffness > 0.0) || !(contact_stiffness > 0.0))
            throw InvalidArgument("stiffnesses must be positive");
        if (!(dome_radius > 0.0)) throw InvalidArgument("dome radius must be positive");
        if (stimulus_curvature_weight < 0.0) throw InvalidArgument("curvature weight must be non-negative");
        if (ridge_height < 0.0 || shear_asymmetry_gain < 0.0)
            throw InvalidArgument("ridge height and shear gain must be non-negative");
        if (variant == Variant::Smooth && skin_coupling < 20.0 * ridged().skin_coupling)
            throw InvalidArgument("smooth variant needs skin coupling >= 20x the ridged default");
    }
};

/// Test object pressed against the dome.
struct StimulusSpec
{
    std::string name{"flat"};
    double radius_of_curvature{std::numeric_limits<double>::infinity()};  // mm
    double mass{0.03};      // kg
    double mu_static{1.0};
    double mu_kinetic{0.5};
    double press_depth{1.8};  // mm of indentation before retraction starts

    [[nodiscard]] bool flat() const noexcept { return std::isinf(radius_of_curvature); }

    void validate() const
    {
        if (!(mass > 0.0)) throw InvalidArgument("stimulus mass must be positive");
        if (!(mu_kinetic > 0.0) || mu_kinetic > mu_static)
            throw InvalidArgument("friction must satisfy 0 < mu_kinetic <= mu_static");
        if (!(radius_of_curvature > 0.0)) throw InvalidArgument("radius of curvature must be positive");
        if (!(press_depth > 0.0)) throw InvalidArgument("press depth must be positive");
    }

    /// The four test objects, flat first. Press depths put each object's
    /// outermost contacting ring at a comparable distance from dropout.
    static std::vector<StimulusSpec> test_set()
    {
        auto make = [](std::string name, double roc, double depth) {
            StimulusSpec s;
            s.name = std::move(name);
            s.radius_of_curvature = roc;
            s.press_depth = depth;
            return s;
        };
        return {make("flat", std::numeric_limits<double>::infinity(), 1.8), make("roc80", 80.0, 1.6),
                make("roc40", 40.0, 2.2), make("roc20", 20.0, 1.9)};
    }

    [[nodiscard]] double weight() const noexcept { return mass * kGravity; }
};

enum class MarkerRole : std::uint8_t
{
    None,
    Tracked,
    Droppable  // marked on the skin but ignored once its ring loses contact
};

struct LayoutNode
{
    Vec2 rest;
    int ring{0};
    MarkerRole marker{MarkerRole::None};
};

/// Node placement plus the skin graph. Node ids are dense and ring-major,
/// angles ascending from +x.
struct ContactLayout
{
    SensorDesign design;
    std::vector<LayoutNode> nodes;
    std::vector<std::vector<std::size_t>> neighbours;

    [[nodiscard]] std::size_t size() const noexcept { return nodes.size(); }
    [[nodiscard]] double max_radius() const noexcept { return design.ring_radii.back(); }

    [[nodiscard]] std::vector<std::size_t> markers(bool include_droppable) const
    {
        std::vector<std::size_t> ids;
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i].marker == MarkerRole::Tracked
                || (include_droppable && nodes[i].marker == MarkerRole::Droppable))
                ids.push_back(i);
        return ids;
    }

    /// Nine markers followed through a trial.
    [[nodiscard]] std::vector<std::size_t> tracked_markers() const { return markers(false); }
};

namespace detail
{

inline void link(std::vector<std::vector<std::size_t>>& adj, std::size_t a, std::size_t b)
{
    if (a == b) return;
    if (std::find(adj[a].begin(), adj[a].end(), b) == adj[a].end()) adj[a].push_back(b);
    if (std::find(adj[b].begin(), adj[b].end(), a) == adj[b].end()) adj[b].push_back(a);
}

}  // namespace detail

/// Places nodes at equal angular spacing on each ring and builds the skin
/// graph (angular neighbours on a ring, nearest node on each adjacent ring).
/// Markers form a cross on the centre and the first three rings; the third
/// ring's markers are droppable.
inline ContactLayout build_layout(const SensorDesign& design)
{
    design.validate();
    ContactLayout layout;
    layout.design = design;

    std::vector<std::vector<std::size_t>> ring_members(design.ring_radii.size());
    for (std::size_t ring = 0; ring < design.ring_radii.size(); ++ring) {
        const double r = design.ring_radii[ring];
        const int n = design.nodes_per_ring[ring];
        for (int j = 0; j < n; ++j) {
            const double angle = 2.0 * std::numbers::pi * j / n;
            LayoutNode node;
            node.rest = r == 0.0 ? Vec2{} : Vec2{r * std::cos(angle), r * std::sin(angle)};
            // snap the axis-aligned nodes exactly so mirror symmetry is exact
            if (std::abs(node.rest.x) < 1e-12) node.rest.x = 0.0;
            if (std::abs(node.rest.y) < 1e-12) node.rest.y = 0.0;
            node.ring = static_cast<int>(ring);
            const bool on_cross = (4 * j) % n == 0;
            if (ring == 0) node.marker = MarkerRole::Tracked;
            else if (ring <= 2 && on_cross) node.marker = MarkerRole::Tracked;
            else if (ring == 3 && on_cross) node.marker = MarkerRole::Droppable;
            ring_members[ring].push_back(layout.nodes.size());
            layout.nodes.push_back(node);
        }
    }

    layout.neighbours.assign(layout.nodes.size(), {});
    for (const auto& members : ring_members) {
        if (members.size() == 2) detail::link(layout.neighbours, members[0], members[1]);
        if (members.size() > 2)
            for (std::size_t k = 0; k < members.size(); ++k)
                detail::link(layout.neighbours, members[k], members[(k + 1) % members.size()]);
    }
    auto nearest = [&](std::size_t from, const std::vector<std::size_t>& candidates) {
        std::size_t best = candidates.front();
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c : candidates) {
            const double d = (layout.nodes[c].rest - layout.nodes[from].rest).squared_norm();
            if (d < best_d - 1e-12) {
                best_d = d;
                best = c;
            }
        }
        return best;
    };
    std::size_t prev = ring_members.size();
    for (std::size_t ring = 0; ring < ring_members.size(); ++ring) {
        if (ring_members[ring].empty()) continue;
        if (prev != ring_members.size()) {
            for (std::size_t id : ring_members[ring])
                detail::link(layout.neighbours, id, nearest(id, ring_members[prev]));
            for (std::size_t id : ring_members[prev])
                detail::link(layout.neighbours, id, nearest(id, ring_members[ring]));
        }
        prev = ring;
    }
    for (auto& adj : layout.neighbours) std::sort(adj.begin(), adj.end());
    return layout;
}

/// Height of a node's crest below the deepest point of contact: a spherical
/// cap whose curvature adds the dome's and part of the stimulus's.
inline double height_deficit(double radius, const SensorDesign& design, const StimulusSpec& stimulus)
{
    double curvature = 1.0 / design.dome_radius;
    if (!stimulus.flat()) curvature += design.stimulus_curvature_weight / stimulus.radius_of_curvature;
    return radius * radius * curvature / 2.0;
}

/// Per-node normal force in newtons, indexed by node id.
///
/// Ridged: N_i = k_n * max(0, indentation - h(r_i)) * (1 + beta * y_i / r_max)
/// with beta = gain * shear_load. The ridges separate the contact into
/// patches that each carry their own load; shear tilts that load toward +y.
/// Smooth: the thick continuous skin conforms and spreads the same total force
/// evenly over every node, so there is no traction differential.
inline std::vector<double> normal_force(const ContactLayout& layout, const StimulusSpec& stimulus,
                                        double indentation, double shear_load)
{
    if (indentation < 0.0) throw InvalidArgument("indentation must be non-negative");
    const SensorDesign& d = layout.design;
    const double r_max = layout.max_radius() > 0.0 ? layout.max_radius() : 1.0;
    const double beta = std::clamp(d.shear_asymmetry_gain * std::max(shear_load, 0.0), 0.0, 0.95);

    std::vector<double> forces(layout.size(), 0.0);
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const auto& node = layout.nodes[i];
        const double r = d.ring_radii[static_cast<std::size_t>(node.ring)];
        const double pen = indentation - height_deficit(r, d, stimulus);
        if (pen <= 0.0) continue;
        forces[i] = d.contact_stiffness * pen;
    }
    if (d.variant == Variant::Smooth) {
        const double total = std::accumulate(forces.begin(), forces.end(), 0.0);
        std::fill(forces.begin(), forces.end(), total / static_cast<double>(forces.size()));
        return forces;
    }
    for (std::size_t i = 0; i < layout.size(); ++i)
        forces[i] = std::max(0.0, forces[i] * (1.0 + beta * layout.nodes[i].rest.y / r_max));
    return forces;
}

/// Ids carrying a positive normal force.
inline std::set<std::size_t> contact_set(std::span<const double> forces)
{
    std::set<std::size_t> ids;
    for (std::size_t i = 0; i < forces.size(); ++i)
        if (forces[i] > 0.0) ids.insert(i);
    return ids;
}

}  // namespace tipslip
