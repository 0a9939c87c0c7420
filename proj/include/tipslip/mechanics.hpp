#pragma once

#include "tipslip/core.hpp"
#include "tipslip/dome.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace tipslip
{

enum class Regime : std::uint8_t
{
    Stuck,
    Slipping,
    OutOfContact
};

enum class SlipRegime : std::uint8_t
{
    AllStuck,
    Incipient,
    Gross
};

inline std::string to_string(Regime r)
{
    switch (r) {
    case Regime::Stuck: return "stuck";
    case Regime::Slipping: return "slipping";
    case Regime::OutOfContact: return "out";
    }
    return "?";
}

inline std::string to_string(SlipRegime r)
{
    switch (r) {
    case SlipRegime::AllStuck: return "all_stuck";
    case SlipRegime::Incipient: return "incipient";
    case SlipRegime::Gross: return "gross";
    }
    return "?";
}

struct NodeState
{
    Vec2 position;           // mm, contact plane
    Vec2 attachment_offset;  // contact point relative to the plate frame, minus rest position
    Regime regime{Regime::Stuck};
    Vec2 tangential_force;   // friction exerted by the plate on the node, N
    double normal_force{0.0};
};

struct PlateState
{
    double height{0.0};    // mm, 0 at the start of recording, negative downward
    double velocity{0.0};  // mm/s
    bool falling{false};
};

struct SimState
{
    double time{0.0};
    double retraction{0.0};
    std::vector<NodeState> nodes;
    PlateState plate;
    SlipRegime regime_summary{SlipRegime::AllStuck};
};

/// Incipient iff part, but not all, of the contact is slipping.
inline SlipRegime classify_regime(const SimState& state)
{
    if (state.plate.falling) return SlipRegime::Gross;
    bool any_stuck = false;
    bool any_slipping = false;
    for (const auto& n : state.nodes) {
        any_stuck |= n.regime == Regime::Stuck;
        any_slipping |= n.regime == Regime::Slipping;
    }
    return any_stuck && any_slipping ? SlipRegime::Incipient : SlipRegime::AllStuck;
}

struct SolverSettings
{
    double tolerance{1e-9};  // mm, max position update
    int max_iterations{10000};
};

/// Per-node friction coefficients. Trials perturb them slightly per seed.
struct FrictionField
{
    std::vector<double> mu_static;
    std::vector<double> mu_kinetic;

    static FrictionField uniform(std::size_t n, const StimulusSpec& s)
    {
        return {std::vector<double>(n, s.mu_static), std::vector<double>(n, s.mu_kinetic)};
    }
};

enum class PlateMode
{
    Held,  // plate position is prescribed
    Free   // plate position solves the vertical force balance
};

struct SolveReport
{
    int iterations{0};
    double residual{0.0};
    bool lost_hold{false};  // free plate: no contact node left to hold the load
};

namespace detail
{

inline double effective_stiffness(const ContactLayout& layout, std::size_t i)
{
    return layout.design.anchor_stiffness
           + layout.design.skin_coupling * static_cast<double>(layout.neighbours[i].size());
}

inline Vec2 free_position(const ContactLayout& layout, std::span<const NodeState> nodes, std::size_t i)
{
    Vec2 sum;
    for (std::size_t j : layout.neighbours[i])
        sum += nodes[j].position - layout.nodes[j].rest;
    return (layout.design.skin_coupling / effective_stiffness(layout, i)) * sum;
}

}  // namespace detail

/// Quasi-static equilibrium of the node network against the plate.
///
/// Projected Gauss-Seidel sweeps in node-id order. Each node is a return map:
/// its displacement sits at the stuck point (attachment offset + plate
/// displacement) if the friction needed to hold it there lies inside the
/// static cone, otherwise it is projected onto the kinetic cone around its
/// free (neighbour-only) equilibrium. Nodes that start the solve slipping use
/// the kinetic cone throughout. In `Free` mode every sweep also applies a
/// rigid correction to the plate so the friction balances `weight`.
///
/// On return, slipping nodes have their attachment offsets moved to where
/// they came to rest.
inline SolveReport solve_equilibrium(SimState& state, const ContactLayout& layout,
                                     const FrictionField& friction, double weight, PlateMode mode,
                                     const SolverSettings& settings = {})
{
    auto& nodes = state.nodes;
    const std::size_t n = nodes.size();
    if (n != layout.size()) throw InvalidArgument("state and layout disagree on node count");
    const double k_a = layout.design.anchor_stiffness;
    const double k_c = layout.design.skin_coupling;

    std::vector<bool> kinetic(n);
    std::vector<bool> holding(n);
    for (std::size_t i = 0; i < n; ++i) kinetic[i] = nodes[i].regime == Regime::Slipping;

    double plate = state.plate.height;
    SolveReport report;
    for (int iter = 1; iter <= settings.max_iterations; ++iter) {
        double max_update = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            auto& node = nodes[i];
            const Vec2 rest = layout.nodes[i].rest;
            const Vec2 old = node.position - rest;
            const Vec2 free = detail::free_position(layout, nodes, i);
            const double stiff = detail::effective_stiffness(layout, i);
            Vec2 disp;
            if (node.normal_force <= 0.0) {
                disp = free;
                node.tangential_force = {};
                holding[i] = false;
            } else {
                const Vec2 target = node.attachment_offset + Vec2{0.0, plate};
                const Vec2 demand = stiff * (target - free);
                const double need = demand.norm();
                if (!kinetic[i] && need <= friction.mu_static[i] * node.normal_force) {
                    disp = target;
                    node.tangential_force = demand;
                    holding[i] = true;
                } else {
                    kinetic[i] = true;
                    const double cap = friction.mu_kinetic[i] * node.normal_force;
                    if (need <= cap) {
                        disp = target;
                        node.tangential_force = demand;
                        holding[i] = true;
                    } else {
                        disp = free + (cap / need) * (target - free);
                        node.tangential_force = (cap / need) * demand;
                        holding[i] = false;
                    }
                }
            }
            node.position = rest + disp;
            max_update = std::max(max_update, (disp - old).norm());
        }

        if (mode == PlateMode::Free) {
            // Balance the plate by translating every holding node with it.
            double friction_y = 0.0;
            double stiffness = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                friction_y += nodes[i].tangential_force.y;
                if (!holding[i]) continue;
                double k = k_a;
                for (std::size_t j : layout.neighbours[i])
                    if (!holding[j]) k += k_c;
                stiffness += k;
            }
            if (stiffness == 0.0) {
                report.lost_hold = true;
                report.iterations = iter;
                break;
            }
            const double shift = (-weight - friction_y) / stiffness;
            plate += shift;
            for (std::size_t i = 0; i < n; ++i)
                if (holding[i]) nodes[i].position.y += shift;
            max_update = std::max(max_update, std::abs(shift));
        }

        report.iterations = iter;
        report.residual = max_update;
        if (max_update < settings.tolerance) break;
    }
    if (!report.lost_hold && report.residual >= settings.tolerance)
        throw ConvergenceError(report.residual, report.iterations);

    state.plate.height = plate;
    for (std::size_t i = 0; i < n; ++i) {
        auto& node = nodes[i];
        if (node.normal_force <= 0.0) {
            node.regime = Regime::OutOfContact;
            node.tangential_force = {};
            // re-attach wherever it is if contact resumes
            node.attachment_offset = node.position - layout.nodes[i].rest - Vec2{0.0, plate};
        } else if (holding[i]) {
            node.regime = Regime::Stuck;
        } else {
            node.regime = Regime::Slipping;
            node.attachment_offset = node.position - layout.nodes[i].rest - Vec2{0.0, plate};
        }
    }
    return report;
}

/// Run-level constants of the retraction experiment.
struct SimParams
{
    double frame_rate{30.0};          // Hz
    double fall_threshold{0.5};       // mm of plate drop labelled as gross slip
    double runway{50.0};              // mm the plate may fall before the run ends
    double max_time{400.0};           // s
    double mu_jitter{0.03};           // relative half-width of per-node friction scatter
    SolverSettings solver{};
};

/// Thin orchestration over `solve_equilibrium` for one sensor/stimulus pair.
class Simulator
{
public:
    Simulator(ContactLayout layout, StimulusSpec stimulus, FrictionField friction, SimParams params)
        : layout_(std::move(layout)), stimulus_(std::move(stimulus)),
          friction_(std::move(friction)), params_(params)
    {
        stimulus_.validate();
        if (friction_.mu_static.size() != layout_.size() || friction_.mu_kinetic.size() != layout_.size())
            throw InvalidArgument("friction field does not match layout");
    }

    [[nodiscard]] const ContactLayout& layout() const noexcept { return layout_; }
    [[nodiscard]] const StimulusSpec& stimulus() const noexcept { return stimulus_; }
    [[nodiscard]] const SimParams& params() const noexcept { return params_; }
    [[nodiscard]] const FrictionField& friction() const noexcept { return friction_; }

    [[nodiscard]] double indentation(double retraction) const noexcept
    {
        return std::max(0.0, stimulus_.press_depth - retraction);
    }

    /// Pressed, then loaded by the plate weight. The sag taken up here is
    /// folded into the attachment offsets so the recorded height starts at 0.
    [[nodiscard]] SimState initial_state() const
    {
        SimState s;
        s.nodes.resize(layout_.size());
        for (std::size_t i = 0; i < layout_.size(); ++i) s.nodes[i].position = layout_.nodes[i].rest;
        apply_normal_forces(s);
        for (auto& node : s.nodes)
            if (node.normal_force <= 0.0) node.regime = Regime::OutOfContact;
        const auto report =
            solve_equilibrium(s, layout_, friction_, stimulus_.weight(), PlateMode::Free, params_.solver);
        if (report.lost_hold) throw InvalidArgument("initial grasp cannot hold the stimulus");
        const double sag = s.plate.height;
        for (auto& node : s.nodes) node.attachment_offset.y += sag;
        s.plate.height = 0.0;
        s.regime_summary = classify_regime(s);
        if (s.regime_summary != SlipRegime::AllStuck)
            throw InvalidArgument("initial grasp already slipping; raise the press depth");
        return s;
    }

    [[nodiscard]] SimState step(const SimState& prev, double dt, double retraction_speed) const
    {
        if (!(dt > 0.0)) throw InvalidArgument("time step must be positive");
        SimState s = prev;
        s.time += dt;
        s.retraction += retraction_speed * dt;
        apply_normal_forces(s);

        if (!s.plate.falling) {
            const auto report =
                solve_equilibrium(s, layout_, friction_, stimulus_.weight(), PlateMode::Free, params_.solver);
            double stuck_capacity = 0.0;
            double kinetic_support = 0.0;
            for (std::size_t i = 0; i < s.nodes.size(); ++i) {
                const auto& node = s.nodes[i];
                if (node.regime == Regime::Stuck) stuck_capacity += friction_.mu_static[i] * node.normal_force;
                if (node.regime == Regime::Slipping) kinetic_support += friction_.mu_kinetic[i] * node.normal_force;
            }
            if (report.lost_hold || stuck_capacity < stimulus_.weight() - kinetic_support) {
                s = prev;
                s.time += dt;
                s.retraction += retraction_speed * dt;
                apply_normal_forces(s);
                s.plate.falling = true;
                for (auto& node : s.nodes)
                    if (node.regime == Regime::Stuck) node.regime = Regime::Slipping;
            }
        }
        if (s.plate.falling) fall(s, dt);
        s.regime_summary = classify_regime(s);
        return s;
    }

private:
    void apply_normal_forces(SimState& s) const
    {
        const auto forces = normal_force(layout_, stimulus_, indentation(s.retraction), stimulus_.weight());
        for (std::size_t i = 0; i < s.nodes.size(); ++i) s.nodes[i].normal_force = forces[i];
    }

    // Plate accelerates under gravity less kinetic drag; nodes are dragged along.
    void fall(SimState& s, double dt) const
    {
        double drag = 0.0;
        for (std::size_t i = 0; i < s.nodes.size(); ++i) drag += friction_.mu_kinetic[i] * s.nodes[i].normal_force;
        const double accel = -1000.0 * std::max(0.0, stimulus_.weight() - drag) / stimulus_.mass;  // mm/s^2
        constexpr int substeps = 10;
        const double h = dt / substeps;
        for (int k = 0; k < substeps; ++k) {
            s.plate.velocity += accel * h;
            s.plate.height += s.plate.velocity * h;
        }
        for (auto& node : s.nodes)
            if (node.normal_force > 0.0) node.regime = Regime::Slipping;
        solve_equilibrium(s, layout_, friction_, stimulus_.weight(), PlateMode::Held, params_.solver);
        for (auto& node : s.nodes)
            if (node.regime == Regime::Stuck) node.regime = Regime::Slipping;
    }

    ContactLayout layout_;
    StimulusSpec stimulus_;
    FrictionField friction_;
    SimParams params_;
};

/// Ground-truth events extracted from regime transitions. Times in seconds,
/// retractions in mm.
struct TrajectoryEvents
{
    std::optional<double> incipient_time;
    std::optional<double> incipient_retraction;
    std::optional<double> gross_time;
    std::optional<double> gross_retraction;
    std::vector<std::optional<double>> dropout_time;  // per node, first contact loss
    std::vector<std::optional<double>> first_slip_time;  // per node, before gross only
};

struct Trajectory
{
    double speed{0.0};
    std::uint64_t seed{0};
    double frame_rate{30.0};
    std::vector<SimState> frames;
    TrajectoryEvents events;

    [[nodiscard]] std::optional<std::size_t> incipient_frame() const { return frame_at(events.incipient_time); }
    [[nodiscard]] std::optional<std::size_t> gross_frame() const { return frame_at(events.gross_time); }

    /// Incipient-to-gross retraction distance; 0 when no incipient phase occurred.
    [[nodiscard]] double incipient_window() const
    {
        if (!events.gross_retraction) return 0.0;
        if (!events.incipient_retraction) return 0.0;
        return *events.gross_retraction - *events.incipient_retraction;
    }

private:
    [[nodiscard]] std::optional<std::size_t> frame_at(std::optional<double> t) const
    {
        if (!t) return std::nullopt;
        for (std::size_t k = 0; k < frames.size(); ++k)
            if (frames[k].time >= *t - 1e-12) return k;
        return std::nullopt;
    }
};

inline FrictionField jittered_friction(std::size_t n, const StimulusSpec& stimulus, double jitter,
                                       std::uint64_t seed)
{
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> u(-jitter, jitter);
    FrictionField f = FrictionField::uniform(n, stimulus);
    for (std::size_t i = 0; i < n; ++i) {
        const double scale = 1.0 + (jitter > 0.0 ? u(rng) : 0.0);
        f.mu_static[i] *= scale;
        f.mu_kinetic[i] *= scale;
    }
    return f;
}

inline TrajectoryEvents extract_events(std::span<const SimState> frames)
{
    TrajectoryEvents ev;
    if (frames.empty()) return ev;
    const std::size_t n = frames.front().nodes.size();
    ev.dropout_time.assign(n, std::nullopt);
    ev.first_slip_time.assign(n, std::nullopt);
    for (std::size_t k = 0; k < frames.size(); ++k) {
        const auto& f = frames[k];
        if (!ev.gross_time && f.plate.falling) {
            ev.gross_time = f.time;
            ev.gross_retraction = f.retraction;
        }
        if (!ev.incipient_time && !ev.gross_time && f.regime_summary == SlipRegime::Incipient) {
            ev.incipient_time = f.time;
            ev.incipient_retraction = f.retraction;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const Regime r = f.nodes[i].regime;
            if (!ev.gross_time && !ev.first_slip_time[i] && r == Regime::Slipping) ev.first_slip_time[i] = f.time;
            if (!ev.dropout_time[i] && r == Regime::OutOfContact && k > 0
                && frames[k - 1].nodes[i].regime != Regime::OutOfContact)
                ev.dropout_time[i] = f.time;
        }
    }
    return ev;
}

struct SlipOrdering
{
    bool outer_first{false};  // along the horizontal marker line, slip spreads inward
    bool top_last{false};     // the two upper markers slip after every other marker, or never
};

/// Checks the marker slip order of a trajectory against ground-truth
/// first-slip times. Markers that never slip count as slipping at +inf;
/// top markers pass when no slipping marker slips strictly after them.
inline SlipOrdering slip_ordering(const Trajectory& traj, const ContactLayout& layout)
{
    const double never = std::numeric_limits<double>::infinity();
    auto t = [&](std::size_t id) { return traj.events.first_slip_time.at(id).value_or(never); };
    std::vector<std::pair<double, double>> line;  // (|x|, first slip) on y = 0
    std::vector<std::size_t> top;
    std::vector<std::size_t> others;
    for (std::size_t id : layout.tracked_markers()) {
        const Vec2 p = layout.nodes[id].rest;
        if (p.y == 0.0) line.emplace_back(std::abs(p.x), t(id));
        if (p.x == 0.0 && p.y > 0.0) top.push_back(id);
        else others.push_back(id);
    }
    SlipOrdering out;
    std::sort(line.begin(), line.end());
    out.outer_first = line.size() >= 2 && line.back().second < never;
    for (std::size_t k = 1; k < line.size(); ++k)
        if (line[k].first > line[k - 1].first && line[k].second > line[k - 1].second) out.outer_first = false;
    double latest_other = -never;
    for (std::size_t id : others)
        if (t(id) < never) latest_other = std::max(latest_other, t(id));
    out.top_last = !top.empty();
    for (std::size_t id : top)
        if (t(id) < never && t(id) < latest_other) out.top_last = false;
    return out;
}

/// Retracts at constant speed from the initial indentation until the plate
/// has fallen its runway. The seed perturbs per-node friction.
inline Trajectory run_retraction(const SensorDesign& design, const StimulusSpec& stimulus, double speed,
                                 std::uint64_t seed, const SimParams& params = {})
{
    if (!(speed > 0.0) || speed > 1.0) throw InvalidArgument("retraction speed must lie in (0, 1] mm/s");
    ContactLayout layout = build_layout(design);
    FrictionField friction = jittered_friction(layout.size(), stimulus, params.mu_jitter, seed);
    Simulator sim(std::move(layout), stimulus, std::move(friction), params);

    Trajectory traj;
    traj.speed = speed;
    traj.seed = seed;
    traj.frame_rate = params.frame_rate;
    const double dt = 1.0 / params.frame_rate;
    traj.frames.push_back(sim.initial_state());
    while (traj.frames.back().plate.height > -params.runway) {
        if (traj.frames.back().time > params.max_time)
            throw TimeoutError("no gross slip within " + std::to_string(params.max_time) + " s");
        traj.frames.push_back(sim.step(traj.frames.back(), dt, speed));
    }
    traj.events = extract_events(traj.frames);
    return traj;
}

}  // namespace tipslip
