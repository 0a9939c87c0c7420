#pragma once

#include "tipslip/changepoint.hpp"
#include "tipslip/core.hpp"
#include "tipslip/detector.hpp"
#include "tipslip/dome.hpp"
#include "tipslip/mechanics.hpp"
#include "tipslip/sensing.hpp"
#include "tipslip/tracking.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace tipslip
{

using Json = nlohmann::json;

namespace detail
{

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(const std::string& s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v)
{
    std::ostringstream s;
    s << std::hex;
    s.width(16);
    s.fill('0');
    s << v;
    return s.str();
}

inline Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

inline std::optional<double> json_optional(const Json& j)
{
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

inline void ensure_dir(const std::string& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw FormatError("cannot create directory " + dir + ": " + ec.message());
}

// Shortest decimal that round-trips, as nlohmann prints doubles.
inline std::string num(double v) { return Json(v).dump(); }

}  // namespace detail

// ---- configuration --------------------------------------------------------

struct OnlineSettings
{
    double step{0.2};             // mm of retraction between classifier evaluations
    std::size_t trials_per_stimulus{20};
    std::size_t hold_frames{10};  // static frames recorded after pressing
    double threshold{0.5};
};

/// Everything a run depends on. Defaults reproduce the calibrated testbed.
struct ExperimentConfig
{
    SensorDesign design{SensorDesign::ridged()};
    std::string training_stimulus{"flat"};
    std::vector<StimulusSpec> stimuli{StimulusSpec::test_set()};
    std::vector<double> speeds{0.1, 0.2, 0.3, 0.4, 0.5};  // mm/s
    std::size_t repeats{20};
    std::uint64_t seed{1};
    SimParams sim{};
    double marker_noise{0.002};  // mm
    PinModel pins{};
    RenderSettings render{};
    ThresholdSettings threshold{};
    std::size_t stacks_per_trial{16};
    TrainSettings training{};
    OnlineSettings online{};

    void validate() const
    {
        design.validate();
        if (speeds.empty()) throw InvalidArgument("no retraction speeds");
        for (double v : speeds)
            if (!(v > 0.0) || v > 1.0) throw InvalidArgument("speeds must lie in (0, 1] mm/s");
        if (repeats < 1) throw InvalidArgument("repeats must be at least 1");
        if (stimuli.empty()) throw InvalidArgument("no stimuli");
        for (const auto& s : stimuli) s.validate();
        (void)stimulus(training_stimulus);
        if (!(sim.frame_rate > 0.0) || !(sim.fall_threshold > 0.0)) throw InvalidArgument("invalid simulation settings");
        if (marker_noise < 0.0) throw InvalidArgument("marker noise must be non-negative");
        if (!(render.scale > 0.0) || !(render.disc_radius > 0.0)) throw InvalidArgument("invalid render settings");
        if (stacks_per_trial < 1) throw InvalidArgument("stacks_per_trial must be at least 1");
        if (!(online.step > 0.0) || online.trials_per_stimulus < 1) throw InvalidArgument("invalid online settings");
    }

    [[nodiscard]] const StimulusSpec& stimulus(const std::string& name) const
    {
        for (const auto& s : stimuli)
            if (s.name == name) return s;
        throw InvalidArgument("unknown stimulus '" + name + "'");
    }
};

inline Json to_json(const StimulusSpec& s)
{
    return {{"name", s.name},
            {"radius_of_curvature", s.flat() ? Json(nullptr) : Json(s.radius_of_curvature)},
            {"mass", s.mass},
            {"mu_static", s.mu_static},
            {"mu_kinetic", s.mu_kinetic},
            {"press_depth", s.press_depth}};
}

inline Json to_json(const ExperimentConfig& c)
{
    const auto& d = c.design;
    Json stimuli = Json::array();
    for (const auto& s : c.stimuli) stimuli.push_back(to_json(s));
    return {
        {"design",
         {{"variant", to_string(d.variant)},
          {"ring_radii", d.ring_radii},
          {"nodes_per_ring", d.nodes_per_ring},
          {"ridge_height", d.ridge_height},
          {"skin_coupling", d.skin_coupling},
          {"anchor_stiffness", d.anchor_stiffness},
          {"dome_radius", d.dome_radius},
          {"contact_stiffness", d.contact_stiffness},
          {"shear_asymmetry_gain", d.shear_asymmetry_gain},
          {"stimulus_curvature_weight", d.stimulus_curvature_weight}}},
        {"training_stimulus", c.training_stimulus},
        {"stimuli", stimuli},
        {"speeds", c.speeds},
        {"repeats", c.repeats},
        {"seed", c.seed},
        {"simulation",
         {{"frame_rate", c.sim.frame_rate},
          {"fall_threshold", c.sim.fall_threshold},
          {"runway", c.sim.runway},
          {"max_time", c.sim.max_time},
          {"mu_jitter", c.sim.mu_jitter},
          {"solver_tolerance", c.sim.solver.tolerance},
          {"solver_max_iterations", c.sim.solver.max_iterations}}},
        {"marker_noise", c.marker_noise},
        {"pins", {{"own_gain", c.pins.own_gain}, {"pivot_gain", c.pins.pivot_gain}, {"noise", c.pins.noise}}},
        {"render", {{"scale", c.render.scale}, {"disc_radius", c.render.disc_radius}}},
        {"threshold", {{"window", c.threshold.window}, {"offset", c.threshold.offset}}},
        {"stacks_per_trial", c.stacks_per_trial},
        {"training",
         {{"epochs", c.training.epochs},
          {"learning_rate", c.training.learning_rate},
          {"optimizer", c.training.optimizer == Optimizer::Adam ? "adam" : "momentum"},
          {"momentum", c.training.momentum},
          {"second_moment", c.training.second_moment},
          {"epsilon", c.training.epsilon},
          {"batch_size", c.training.batch_size},
          {"augment", c.training.augment}}},
        {"online",
         {{"step", c.online.step},
          {"trials_per_stimulus", c.online.trials_per_stimulus},
          {"hold_frames", c.online.hold_frames},
          {"threshold", c.online.threshold}}},
    };
}

namespace detail
{

template <class T>
void read_field(const Json& obj, const char* key, T& out)
{
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

inline void reject_unknown(const Json& obj, std::initializer_list<const char*> keys, const std::string& where)
{
    for (const auto& [k, v] : obj.items())
        if (std::find_if(keys.begin(), keys.end(), [&](const char* key) { return k == key; }) == keys.end())
            throw InvalidArgument("unknown key '" + k + "' in " + where);
}

}  // namespace detail

inline StimulusSpec stimulus_from_json(const Json& j)
{
    detail::reject_unknown(j, {"name", "radius_of_curvature", "mass", "mu_static", "mu_kinetic", "press_depth"},
                           "stimulus");
    StimulusSpec s;
    detail::read_field(j, "name", s.name);
    if (j.contains("radius_of_curvature") && !j.at("radius_of_curvature").is_null())
        s.radius_of_curvature = j.at("radius_of_curvature").get<double>();
    detail::read_field(j, "mass", s.mass);
    detail::read_field(j, "mu_static", s.mu_static);
    detail::read_field(j, "mu_kinetic", s.mu_kinetic);
    detail::read_field(j, "press_depth", s.press_depth);
    s.validate();
    return s;
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline ExperimentConfig config_from_json(const Json& j)
{
    if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
    detail::reject_unknown(j,
                           {"design", "training_stimulus", "stimuli", "speeds", "repeats", "seed", "simulation",
                            "marker_noise", "pins", "render", "threshold", "stacks_per_trial", "training", "online"},
                           "config");
    ExperimentConfig c;
    try {
        if (j.contains("design")) {
            const Json& d = j.at("design");
            detail::reject_unknown(d,
                                   {"variant", "ring_radii", "nodes_per_ring", "ridge_height", "skin_coupling",
                                    "anchor_stiffness", "dome_radius", "contact_stiffness", "shear_asymmetry_gain",
                                    "stimulus_curvature_weight"},
                                   "design");
            if (d.contains("variant") && variant_from_string(d.at("variant").get<std::string>()) == Variant::Smooth)
                c.design = SensorDesign::smooth();
            detail::read_field(d, "ring_radii", c.design.ring_radii);
            detail::read_field(d, "nodes_per_ring", c.design.nodes_per_ring);
            detail::read_field(d, "ridge_height", c.design.ridge_height);
            detail::read_field(d, "skin_coupling", c.design.skin_coupling);
            detail::read_field(d, "anchor_stiffness", c.design.anchor_stiffness);
            detail::read_field(d, "dome_radius", c.design.dome_radius);
            detail::read_field(d, "contact_stiffness", c.design.contact_stiffness);
            detail::read_field(d, "shear_asymmetry_gain", c.design.shear_asymmetry_gain);
            detail::read_field(d, "stimulus_curvature_weight", c.design.stimulus_curvature_weight);
        }
        detail::read_field(j, "training_stimulus", c.training_stimulus);
        if (j.contains("stimuli")) {
            c.stimuli.clear();
            for (const auto& s : j.at("stimuli")) c.stimuli.push_back(stimulus_from_json(s));
        }
        detail::read_field(j, "speeds", c.speeds);
        detail::read_field(j, "repeats", c.repeats);
        detail::read_field(j, "seed", c.seed);
        if (j.contains("simulation")) {
            const Json& s = j.at("simulation");
            detail::reject_unknown(s,
                                   {"frame_rate", "fall_threshold", "runway", "max_time", "mu_jitter",
                                    "solver_tolerance", "solver_max_iterations"},
                                   "simulation");
            detail::read_field(s, "frame_rate", c.sim.frame_rate);
            detail::read_field(s, "fall_threshold", c.sim.fall_threshold);
            detail::read_field(s, "runway", c.sim.runway);
            detail::read_field(s, "max_time", c.sim.max_time);
            detail::read_field(s, "mu_jitter", c.sim.mu_jitter);
            detail::read_field(s, "solver_tolerance", c.sim.solver.tolerance);
            detail::read_field(s, "solver_max_iterations", c.sim.solver.max_iterations);
        }
        detail::read_field(j, "marker_noise", c.marker_noise);
        if (j.contains("pins")) {
            const Json& p = j.at("pins");
            detail::reject_unknown(p, {"own_gain", "pivot_gain", "noise"}, "pins");
            detail::read_field(p, "own_gain", c.pins.own_gain);
            detail::read_field(p, "pivot_gain", c.pins.pivot_gain);
            detail::read_field(p, "noise", c.pins.noise);
        }
        if (j.contains("render")) {
            const Json& r = j.at("render");
            detail::reject_unknown(r, {"scale", "disc_radius"}, "render");
            detail::read_field(r, "scale", c.render.scale);
            detail::read_field(r, "disc_radius", c.render.disc_radius);
        }
        if (j.contains("threshold")) {
            const Json& t = j.at("threshold");
            detail::reject_unknown(t, {"window", "offset"}, "threshold");
            detail::read_field(t, "window", c.threshold.window);
            detail::read_field(t, "offset", c.threshold.offset);
        }
        detail::read_field(j, "stacks_per_trial", c.stacks_per_trial);
        if (j.contains("training")) {
            const Json& t = j.at("training");
            detail::reject_unknown(t,
                                   {"epochs", "learning_rate", "optimizer", "momentum", "second_moment", "epsilon",
                                    "batch_size", "augment"},
                                   "training");
            detail::read_field(t, "epochs", c.training.epochs);
            detail::read_field(t, "learning_rate", c.training.learning_rate);
            if (t.contains("optimizer")) {
                const auto name = t.at("optimizer").get<std::string>();
                if (name == "adam") c.training.optimizer = Optimizer::Adam;
                else if (name == "momentum") c.training.optimizer = Optimizer::Momentum;
                else throw InvalidArgument("unknown optimizer '" + name + "'");
            }
            detail::read_field(t, "momentum", c.training.momentum);
            detail::read_field(t, "second_moment", c.training.second_moment);
            detail::read_field(t, "epsilon", c.training.epsilon);
            detail::read_field(t, "batch_size", c.training.batch_size);
            detail::read_field(t, "augment", c.training.augment);
        }
        if (j.contains("online")) {
            const Json& o = j.at("online");
            detail::reject_unknown(o, {"step", "trials_per_stimulus", "hold_frames", "threshold"}, "online");
            detail::read_field(o, "step", c.online.step);
            detail::read_field(o, "trials_per_stimulus", c.online.trials_per_stimulus);
            detail::read_field(o, "hold_frames", c.online.hold_frames);
            detail::read_field(o, "threshold", c.online.threshold);
        }
    } catch (const Json::exception& e) {
        throw InvalidArgument(std::string("malformed config: ") + e.what());
    }
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw FormatError("cannot read " + path);
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::exception& e) {
        throw FormatError(path + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

inline std::string config_hash(const ExperimentConfig& c) { return detail::hex64(detail::fnv1a(to_json(c).dump())); }

/// Seed of trial `index` in a run seeded with `base`.
inline std::uint64_t trial_seed(std::uint64_t base, std::uint64_t index)
{
    return detail::splitmix64(detail::splitmix64(base) ^ index);
}

// ---- trajectory persistence -----------------------------------------------

/// JSON Lines: an `events` header record, then one `frame` record per frame.
inline void write_trajectory_jsonl(const Trajectory& traj, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    Json dropouts = Json::array();
    Json first_slips = Json::array();
    for (const auto& d : traj.events.dropout_time) dropouts.push_back(detail::optional_json(d));
    for (const auto& d : traj.events.first_slip_time) first_slips.push_back(detail::optional_json(d));
    Json header = {{"record", "events"},
                   {"speed", traj.speed},
                   {"seed", traj.seed},
                   {"frame_rate", traj.frame_rate},
                   {"incipient_time", detail::optional_json(traj.events.incipient_time)},
                   {"incipient_retraction", detail::optional_json(traj.events.incipient_retraction)},
                   {"gross_time", detail::optional_json(traj.events.gross_time)},
                   {"gross_retraction", detail::optional_json(traj.events.gross_retraction)},
                   {"dropout_time", dropouts},
                   {"first_slip_time", first_slips}};
    out << header.dump() << '\n';
    for (const auto& f : traj.frames) {
        Json x = Json::array(), y = Json::array(), normal = Json::array(), regime = Json::array();
        for (const auto& n : f.nodes) {
            x.push_back(n.position.x);
            y.push_back(n.position.y);
            normal.push_back(n.normal_force);
            regime.push_back(to_string(n.regime));
        }
        Json rec = {{"record", "frame"},
                    {"time", f.time},
                    {"retraction", f.retraction},
                    {"plate_height", f.plate.height},
                    {"plate_velocity", f.plate.velocity},
                    {"falling", f.plate.falling},
                    {"regime", to_string(f.regime_summary)},
                    {"x", x},
                    {"y", y},
                    {"normal_force", normal},
                    {"node_regime", regime}};
        out << rec.dump() << '\n';
    }
}

inline Trajectory read_trajectory_jsonl(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw FormatError("cannot read " + path);
    Trajectory traj;
    std::string line;
    auto regime_of = [](const std::string& s) {
        if (s == "stuck") return Regime::Stuck;
        if (s == "slipping") return Regime::Slipping;
        if (s == "out") return Regime::OutOfContact;
        throw FormatError("unknown node regime '" + s + "'");
    };
    auto summary_of = [](const std::string& s) {
        if (s == "all_stuck") return SlipRegime::AllStuck;
        if (s == "incipient") return SlipRegime::Incipient;
        if (s == "gross") return SlipRegime::Gross;
        throw FormatError("unknown regime '" + s + "'");
    };
    bool header = false;
    try {
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const Json j = Json::parse(line);
            const std::string kind = j.at("record").get<std::string>();
            if (kind == "events") {
                header = true;
                traj.speed = j.at("speed").get<double>();
                traj.seed = j.at("seed").get<std::uint64_t>();
                traj.frame_rate = j.at("frame_rate").get<double>();
                traj.events.incipient_time = detail::json_optional(j.at("incipient_time"));
                traj.events.incipient_retraction = detail::json_optional(j.at("incipient_retraction"));
                traj.events.gross_time = detail::json_optional(j.at("gross_time"));
                traj.events.gross_retraction = detail::json_optional(j.at("gross_retraction"));
                for (const auto& d : j.at("dropout_time")) traj.events.dropout_time.push_back(detail::json_optional(d));
                for (const auto& d : j.at("first_slip_time"))
                    traj.events.first_slip_time.push_back(detail::json_optional(d));
            } else if (kind == "frame") {
                SimState s;
                s.time = j.at("time").get<double>();
                s.retraction = j.at("retraction").get<double>();
                s.plate.height = j.at("plate_height").get<double>();
                s.plate.velocity = j.at("plate_velocity").get<double>();
                s.plate.falling = j.at("falling").get<bool>();
                s.regime_summary = summary_of(j.at("regime").get<std::string>());
                const auto& x = j.at("x");
                const auto& y = j.at("y");
                const auto& nf = j.at("normal_force");
                const auto& nr = j.at("node_regime");
                if (y.size() != x.size() || nf.size() != x.size() || nr.size() != x.size())
                    throw FormatError(path + ": frame arrays differ in length");
                s.nodes.resize(x.size());
                for (std::size_t i = 0; i < x.size(); ++i) {
                    s.nodes[i].position = {x[i].get<double>(), y[i].get<double>()};
                    s.nodes[i].normal_force = nf[i].get<double>();
                    s.nodes[i].regime = regime_of(nr[i].get<std::string>());
                }
                traj.frames.push_back(std::move(s));
            } else {
                throw FormatError(path + ": unknown record '" + kind + "'");
            }
        }
    } catch (const Json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
    if (!header) throw FormatError(path + " has no events record");
    return traj;
}

// ---- offline collection ---------------------------------------------------

/// Labels and bookkeeping for one collected trial. Frame indices count from 0.
struct TrialLabel
{
    std::size_t trial{0};
    double speed{0.0};
    std::uint64_t seed{0};
    std::optional<std::size_t> onset_frame;        // PELT label
    std::optional<std::size_t> gross_frame;        // plate-height label
    std::optional<std::size_t> truth_onset_frame;  // simulator ground truth
    std::optional<std::size_t> truth_gross_frame;
    double window{0.0};                            // ground-truth incipient window, mm
    std::vector<std::size_t> label_markers;        // layout node ids
    std::size_t frames{0};                         // frames before the gross label
    std::size_t stacks{0};
    std::string error;                             // nonempty when the trial failed
};

struct CollectResult
{
    LabeledDataset dataset;
    std::vector<TrialLabel> trials;
    std::vector<TrackedSequence> tracks;  // per trial, tracked-marker positions (mm) up to the gross label
};

/// First frame whose plate has dropped by at least the threshold.
inline std::optional<std::size_t> gross_label(const Trajectory& traj, double fall_threshold)
{
    for (std::size_t k = 0; k < traj.frames.size(); ++k)
        if (traj.frames[k].plate.height <= -fall_threshold) return k;
    return std::nullopt;
}

/// End frames of the sampled stacks: evenly spaced over [9, gross), at most
/// `per_trial`, windows never overlapping.
inline std::vector<std::size_t> stack_end_frames(std::size_t gross, std::size_t per_trial)
{
    std::vector<std::size_t> ends;
    if (gross < kStackFrames) return ends;
    const std::size_t candidates = gross - (kStackFrames - 1);
    const std::size_t step = std::max(kStackFrames, (candidates + per_trial - 1) / per_trial);
    for (std::size_t f = kStackFrames - 1; f < gross; f += step) ends.push_back(f);
    return ends;
}

/// Labels one trajectory: observes the tracked markers up to the gross label,
/// finds the onset with PELT and fills the ground-truth fields. `rng` drives
/// the marker noise and is left ready for pin observation.
inline void label_trajectory(const ExperimentConfig& config, const ContactLayout& layout, const Trajectory& traj,
                             TrialLabel& label, TrackedSequence& tracks, std::mt19937_64& rng)
{
    label.truth_onset_frame = traj.incipient_frame();
    label.truth_gross_frame = traj.gross_frame();
    label.window = traj.incipient_window();
    label.gross_frame = gross_label(traj, config.sim.fall_threshold);
    const std::size_t gross = label.gross_frame.value_or(traj.frames.size());
    label.frames = gross;

    const auto marker_ids = layout.tracked_markers();
    std::vector<std::vector<Vec2>> by_marker(marker_ids.size());
    tracks.clear();
    for (std::size_t k = 0; k < gross; ++k) {
        MarkerFrame mf = observe_markers(traj.frames[k], layout, config.marker_noise, rng);
        for (std::size_t m = 0; m < mf.positions.size(); ++m) by_marker[m].push_back(mf.positions[m]);
        tracks.push_back(std::move(mf.positions));
    }
    const auto onset = changepoint::label_onset(by_marker);
    label.onset_frame = onset.onset;
    label.label_markers.clear();
    for (std::size_t m : onset.markers) label.label_markers.push_back(marker_ids[m]);
}

/// Marker and pin noise stream of a trial.
inline std::mt19937_64 observation_rng(std::uint64_t trial_seed) { return std::mt19937_64(trial_seed ^ 0xa0761d6478bd642fULL); }

/// One trial of the collection protocol: simulate, observe markers and pins,
/// label onset with PELT and gross slip by plate drop, build stacks.
inline void collect_trial(const ExperimentConfig& config, const StimulusSpec& stimulus, const ContactLayout& layout,
                          TrialLabel& label, LabeledDataset& dataset, TrackedSequence& tracks)
{
    const Trajectory traj = run_retraction(config.design, stimulus, label.speed, label.seed, config.sim);
    auto rng = observation_rng(label.seed);
    label_trajectory(config, layout, traj, label, tracks, rng);
    const std::size_t gross = label.frames;

    const auto ends = stack_end_frames(gross, config.stacks_per_trial);
    std::vector<bool> needed(gross, false);
    for (std::size_t f : ends)
        for (std::size_t j = f + 1 - kStackFrames; j <= f; ++j) needed[j] = true;
    std::vector<std::vector<double>> reduced(gross);
    for (std::size_t k = 0; k < gross; ++k) {
        // pins are observed every frame so the noise stream does not depend on sampling
        const PinFrame pf = observe_pins(traj.frames[k], traj.frames.front(), layout, config.pins, rng);
        if (needed[k]) reduced[k] = reduce_frame(render_frame(pf, config.render), config.threshold);
    }
    for (std::size_t f : ends) {
        LabeledStack item;
        item.stack = stack_from_reduced(std::span(reduced).subspan(f + 1 - kStackFrames, kStackFrames));
        item.incipient = label.onset_frame && f >= *label.onset_frame;
        item.speed = label.speed;
        item.trial = label.trial;
        item.end_frame = f;
        dataset.push_back(std::move(item));
    }
    label.stacks = ends.size();
}

/// Speeds x repeats trials on the training stimulus. Failed trials are
/// recorded with their error and contribute no stacks.
inline CollectResult collect_dataset(const ExperimentConfig& config)
{
    config.validate();
    const StimulusSpec& stimulus = config.stimulus(config.training_stimulus);
    const ContactLayout layout = build_layout(config.design);
    CollectResult result;
    std::size_t index = 0;
    for (double speed : config.speeds)
        for (std::size_t r = 0; r < config.repeats; ++r, ++index) {
            TrialLabel label;
            label.trial = index;
            label.speed = speed;
            label.seed = trial_seed(config.seed, index);
            TrackedSequence tracks;
            LabeledDataset stacks;
            try {
                collect_trial(config, stimulus, layout, label, stacks, tracks);
            } catch (const Error& e) {
                label.error = e.code() + ": " + e.what();
                stacks.clear();
                label.stacks = 0;
            }
            for (auto& s : stacks) result.dataset.push_back(std::move(s));
            result.trials.push_back(std::move(label));
            result.tracks.push_back(std::move(tracks));
        }
    return result;
}

inline Json to_json(const TrialLabel& t, double frame_rate)
{
    auto frame = [](const std::optional<std::size_t>& f) { return f ? Json(*f) : Json(nullptr); };
    auto gap = [&](const std::optional<std::size_t>& a, const std::optional<std::size_t>& b) {
        if (!a || !b) return Json(nullptr);
        return Json((static_cast<double>(*a) - static_cast<double>(*b)) / frame_rate);
    };
    Json j = {{"trial", t.trial},
              {"speed", t.speed},
              {"seed", t.seed},
              {"onset_frame", frame(t.onset_frame)},
              {"gross_frame", frame(t.gross_frame)},
              {"truth_onset_frame", frame(t.truth_onset_frame)},
              {"truth_gross_frame", frame(t.truth_gross_frame)},
              {"onset_error_s", gap(t.onset_frame, t.truth_onset_frame)},
              {"gross_error_s", gap(t.gross_frame, t.truth_gross_frame)},
              {"window_mm", t.window},
              {"label_markers", t.label_markers},
              {"frames", t.frames},
              {"stacks", t.stacks}};
    if (!t.error.empty()) j["error"] = t.error;
    return j;
}

/// Labelling report: per-trial labels plus the fraction of pre-gross frames
/// labelled incipient.
inline Json labeling_report(const std::vector<TrialLabel>& trials, const ExperimentConfig& config)
{
    Json arr = Json::array();
    std::size_t frames = 0;
    std::size_t incipient = 0;
    for (const auto& t : trials) {
        arr.push_back(to_json(t, config.sim.frame_rate));
        frames += t.frames;
        if (t.onset_frame && *t.onset_frame < t.frames) incipient += t.frames - *t.onset_frame;
    }
    return {{"config_hash", config_hash(config)},
            {"seed", config.seed},
            {"frame_rate", config.sim.frame_rate},
            {"incipient_frame_fraction", frames ? static_cast<double>(incipient) / static_cast<double>(frames) : 0.0},
            {"trials", arr}};
}

inline void write_dataset_index(const LabeledDataset& data, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    out << "stack,trial,speed,end_frame,label\n";
    for (std::size_t i = 0; i < data.size(); ++i)
        out << i << ',' << data[i].trial << ',' << detail::num(data[i].speed) << ',' << data[i].end_frame << ','
            << (data[i].incipient ? "incipient" : "not") << '\n';
}

/// Reads `stacks.bin` and `index.csv` as written by `save_dataset`.
inline LabeledDataset load_dataset(const std::string& dir)
{
    const auto stacks = read_stacks(dir + "/stacks.bin");
    std::ifstream in(dir + "/index.csv");
    if (!in) throw FormatError("cannot read " + dir + "/index.csv");
    std::string line;
    std::getline(in, line);
    if (line != "stack,trial,speed,end_frame,label") throw FormatError(dir + "/index.csv has an unexpected header");
    LabeledDataset data;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string cell[5];
        for (auto& c : cell)
            if (!std::getline(row, c, ',')) throw FormatError("short row in " + dir + "/index.csv");
        LabeledStack item;
        try {
            const std::size_t idx = std::stoul(cell[0]);
            if (idx != data.size() || idx >= stacks.size()) throw FormatError("index.csv does not match stacks.bin");
            item.stack = stacks[idx];
            item.trial = std::stoul(cell[1]);
            item.speed = std::stod(cell[2]);
            item.end_frame = std::stoul(cell[3]);
        } catch (const std::logic_error&) {
            throw FormatError("malformed row in " + dir + "/index.csv");
        }
        if (cell[4] != "incipient" && cell[4] != "not") throw FormatError("unknown label '" + cell[4] + "'");
        item.incipient = cell[4] == "incipient";
        data.push_back(std::move(item));
    }
    if (data.size() != stacks.size()) throw FormatError("index.csv does not match stacks.bin");
    return data;
}

/// Writes stacks.bin, index.csv, labels.json and tracks/trial_NNN.csv.
inline void save_dataset(const CollectResult& result, const ExperimentConfig& config, const std::string& dir)
{
    detail::ensure_dir(dir);
    std::vector<Stack> stacks;
    stacks.reserve(result.dataset.size());
    for (const auto& item : result.dataset) stacks.push_back(item.stack);
    write_stacks(stacks, dir + "/stacks.bin");
    write_dataset_index(result.dataset, dir + "/index.csv");
    std::ofstream(dir + "/labels.json") << labeling_report(result.trials, config).dump(2) << '\n';
    detail::ensure_dir(dir + "/tracks");
    for (std::size_t t = 0; t < result.tracks.size(); ++t) {
        char name[32];
        std::snprintf(name, sizeof name, "/trial_%03zu.csv", t);
        write_tracks_csv(result.tracks[t], dir + "/tracks" + name);
    }
}

// ---- splitting -------------------------------------------------------------

struct Split
{
    std::vector<std::size_t> train, validation, test;  // trial ids, ascending
};

/// 50/25/25 at trial granularity within each speed stratum. Every configured
/// speed must contribute at least four trials.
inline Split split_trials(const std::vector<std::pair<std::size_t, double>>& trials, const std::vector<double>& speeds,
                          std::uint64_t seed)
{
    Split split;
    std::mt19937_64 rng(detail::splitmix64(seed ^ 0x243f6a8885a308d3ULL));
    for (double v : speeds) {
        std::vector<std::size_t> ids;
        for (const auto& [id, speed] : trials)
            if (speed == v) ids.push_back(id);
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        if (ids.size() < 4)
            throw InvalidArgument("speed " + detail::num(v) + " has " + std::to_string(ids.size())
                                  + " trials; a 50/25/25 split needs at least 4 per speed");
        std::shuffle(ids.begin(), ids.end(), rng);
        const std::size_t n_train = ids.size() / 2;
        const std::size_t n_val = ids.size() / 4;
        split.train.insert(split.train.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
        split.validation.insert(split.validation.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_train),
                                ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
        split.test.insert(split.test.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), ids.end());
    }
    for (auto* part : {&split.train, &split.validation, &split.test}) std::sort(part->begin(), part->end());
    return split;
}

struct DatasetSplit
{
    Split trials;
    LabeledDataset train, validation, test;
};

inline DatasetSplit split_dataset(const LabeledDataset& data, const std::vector<double>& speeds, std::uint64_t seed)
{
    std::vector<std::pair<std::size_t, double>> trials;
    for (const auto& item : data) trials.emplace_back(item.trial, item.speed);
    DatasetSplit out;
    out.trials = split_trials(trials, speeds, seed);
    auto in = [](const std::vector<std::size_t>& ids, std::size_t t) { return std::binary_search(ids.begin(), ids.end(), t); };
    for (const auto& item : data) {
        if (in(out.trials.train, item.trial)) out.train.push_back(item);
        else if (in(out.trials.validation, item.trial)) out.validation.push_back(item);
        else if (in(out.trials.test, item.trial)) out.test.push_back(item);
    }
    return out;
}

// ---- online experiment -----------------------------------------------------

struct TrialRecord
{
    std::string stimulus;
    double speed{0.0};
    std::uint64_t seed{0};
    std::optional<std::size_t> detection_step;  // step index (1-based) of the first incipient prediction
    std::size_t fall_step{0};                   // step during which the plate fell
    double step{0.2};                           // mm per step
    std::optional<double> detection_retraction;
    double fall_retraction{0.0};
    bool detected_before_fall{false};
};

/// Fall minus detection on the step grid; empty when nothing was detected.
inline std::optional<double> compute_margin(const TrialRecord& r)
{
    if (!r.detection_step) return std::nullopt;
    const double steps = static_cast<double>(r.fall_step) - static_cast<double>(*r.detection_step);
    return steps * r.step;
}

/// Finalises derived fields from the step indices.
inline void settle_record(TrialRecord& r)
{
    r.fall_retraction = static_cast<double>(r.fall_step) * r.step;
    r.detection_retraction.reset();
    if (r.detection_step) r.detection_retraction = static_cast<double>(*r.detection_step) * r.step;
    const auto m = compute_margin(r);
    r.detected_before_fall = m && *m > 0.0;
}

/// Press, hold, then retract in fixed steps. After each step that leaves the
/// plate in place, the classifier sees the latest ten frames; the first
/// incipient prediction is the detection. Retraction continues until the
/// plate has dropped by the fall threshold.
inline TrialRecord run_online_trial(const Weights& weights, const ExperimentConfig& config,
                                    const StimulusSpec& stimulus, double speed, std::uint64_t seed)
{
    if (!(speed > 0.0) || speed > 1.0) throw InvalidArgument("retraction speed must lie in (0, 1] mm/s");
    ContactLayout layout = build_layout(config.design);
    FrictionField friction = jittered_friction(layout.size(), stimulus, config.sim.mu_jitter, seed);
    Simulator sim(layout, stimulus, std::move(friction), config.sim);
    std::mt19937_64 rng(seed ^ 0xe7037ed1a0b428dbULL);

    TrialRecord rec;
    rec.stimulus = stimulus.name;
    rec.speed = speed;
    rec.seed = seed;
    rec.step = config.online.step;

    const double dt = 1.0 / config.sim.frame_rate;
    const auto frames_per_step =
        static_cast<std::size_t>(std::llround(config.online.step / (speed * dt)));
    if (frames_per_step < 1) throw InvalidArgument("online step shorter than one frame");
    const double step_speed = config.online.step / (static_cast<double>(frames_per_step) * dt);

    const SimState reference = sim.initial_state();
    SimState state = reference;
    std::vector<std::vector<double>> window;  // reduced frames, newest last
    auto observe = [&](const SimState& s) {
        const PinFrame pf = observe_pins(s, reference, layout, config.pins, rng);
        window.push_back(reduce_frame(render_frame(pf, config.render), config.threshold));
        if (window.size() > kStackFrames) window.erase(window.begin());
    };
    observe(state);
    for (std::size_t k = 0; k < config.online.hold_frames; ++k) {
        state = sim.step(state, dt, 0.0);
        observe(state);
    }

    const auto max_steps = static_cast<std::size_t>(std::ceil(config.sim.max_time / (frames_per_step * dt)));
    for (std::size_t step = 1; step <= max_steps; ++step) {
        bool fell = false;
        for (std::size_t k = 0; k < frames_per_step; ++k) {
            state = sim.step(state, dt, step_speed);
            if (state.plate.height <= -config.sim.fall_threshold) {
                fell = true;
                break;
            }
            // only the last ten frames of a step reach the classifier
            if (!rec.detection_step && frames_per_step - k <= kStackFrames) observe(state);
        }
        if (fell) {
            rec.fall_step = step;
            settle_record(rec);
            return rec;
        }
        if (!rec.detection_step && window.size() == kStackFrames) {
            const Stack stack = stack_from_reduced(window);
            if (static_cast<double>(weights.forward(stack)) > config.online.threshold) rec.detection_step = step;
        }
    }
    throw TimeoutError("plate did not fall within " + detail::num(config.sim.max_time) + " s");
}

/// `trials_per_stimulus` trials for each stimulus, each at a speed drawn
/// uniformly from the configured speeds.
inline std::vector<TrialRecord> run_online_experiment(const Weights& weights, const ExperimentConfig& config)
{
    config.validate();
    std::vector<TrialRecord> records;
    std::uint64_t index = 0;
    for (const auto& stimulus : config.stimuli)
        for (std::size_t t = 0; t < config.online.trials_per_stimulus; ++t, ++index) {
            const std::uint64_t seed = trial_seed(config.seed ^ 0x6f6e6c696e65ULL, index);
            std::mt19937_64 pick(seed);
            const double speed =
                config.speeds[std::uniform_int_distribution<std::size_t>(0, config.speeds.size() - 1)(pick)];
            records.push_back(run_online_trial(weights, config, stimulus, speed, seed));
        }
    return records;
}

inline void write_trials_csv(const std::vector<TrialRecord>& records, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    out << "stimulus,speed,seed,step_mm,detection_step,fall_step,detection_retraction_mm,fall_retraction_mm,margin_mm,"
           "detected_before_fall\n";
    for (const auto& r : records) {
        const auto m = compute_margin(r);
        out << r.stimulus << ',' << detail::num(r.speed) << ',' << r.seed << ',' << detail::num(r.step) << ','
            << (r.detection_step ? std::to_string(*r.detection_step) : "") << ',' << r.fall_step << ','
            << (r.detection_retraction ? detail::num(*r.detection_retraction) : "") << ','
            << detail::num(r.fall_retraction) << ',' << (m ? detail::num(*m) : "") << ','
            << (r.detected_before_fall ? "true" : "false") << '\n';
    }
}

inline std::vector<TrialRecord> read_trials_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw FormatError("cannot read " + path);
    std::string line;
    std::getline(in, line);
    if (line.rfind("stimulus,speed,seed,step_mm,detection_step,fall_step", 0) != 0)
        throw FormatError(path + " is not a trials file");
    std::vector<TrialRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream row(line);
        std::string c;
        while (std::getline(row, c, ',')) cells.push_back(c);
        if (cells.size() == 9) cells.emplace_back();
        if (cells.size() != 10) throw FormatError("malformed row in " + path);
        TrialRecord r;
        try {
            r.stimulus = cells[0];
            r.speed = std::stod(cells[1]);
            r.seed = std::stoull(cells[2]);
            r.step = std::stod(cells[3]);
            if (!cells[4].empty()) r.detection_step = std::stoul(cells[4]);
            r.fall_step = std::stoul(cells[5]);
        } catch (const std::logic_error&) {
            throw FormatError("malformed row in " + path);
        }
        settle_record(r);
        out.push_back(std::move(r));
    }
    return out;
}

// ---- reporting -------------------------------------------------------------

struct StimulusSummary
{
    std::string stimulus;
    std::size_t trials{0};
    std::size_t successes{0};
    double success_rate{0.0};         // percent
    std::optional<double> mean_margin;  // mm, over detected trials
};

struct Report
{
    std::vector<StimulusSummary> rows;  // in first-appearance order
    std::string config_hash;
    std::uint64_t seed{0};
};

inline Report summarise(const std::vector<TrialRecord>& records)
{
    if (records.empty()) throw InvalidArgument("report needs at least one trial");
    Report rep;
    std::map<std::string, std::size_t> row_of;
    std::vector<double> margin_sum;
    std::vector<std::size_t> margin_count;
    for (const auto& r : records) {
        auto it = row_of.find(r.stimulus);
        if (it == row_of.end()) {
            it = row_of.emplace(r.stimulus, rep.rows.size()).first;
            rep.rows.push_back(StimulusSummary{r.stimulus, 0, 0, 0.0, std::nullopt});
            margin_sum.push_back(0.0);
            margin_count.push_back(0);
        }
        auto& row = rep.rows[it->second];
        ++row.trials;
        row.successes += r.detected_before_fall;
        if (const auto m = compute_margin(r)) {
            margin_sum[it->second] += *m;
            ++margin_count[it->second];
        }
    }
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        auto& row = rep.rows[i];
        row.success_rate = 100.0 * static_cast<double>(row.successes) / static_cast<double>(row.trials);
        if (margin_count[i] > 0) row.mean_margin = margin_sum[i] / static_cast<double>(margin_count[i]);
    }
    return rep;
}

/// Line chart with optional vertical event markers. Series share the x axis.
struct SvgSeries
{
    std::string label;
    std::vector<double> y;
};

inline std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                                  const std::vector<double>& x, const std::vector<SvgSeries>& series,
                                  const std::vector<std::pair<std::string, double>>& events)
{
    constexpr double W = 720, H = 420, L = 70, R = 20, T = 40, B = 60;
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (!x.empty()) {
        x0 = *std::min_element(x.begin(), x.end());
        x1 = *std::max_element(x.begin(), x.end());
    }
    bool any = false;
    for (const auto& s : series)
        for (double v : s.y) {
            if (!std::isfinite(v)) continue;
            if (!any) y0 = y1 = v;
            y0 = std::min(y0, v);
            y1 = std::max(y1, v);
            any = true;
        }
    if (x1 <= x0) x1 = x0 + 1;
    if (y1 <= y0) y1 = y0 + 1;
    auto px = [&](double v) { return L + (v - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double v) { return H - B - (v - y0) / (y1 - y0) * (H - T - B); };
    auto f = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };
    static const char* colours[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
    s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = x0 + (x1 - x0) * i / 4.0;
        const double yv = y0 + (y1 - y0) * i / 4.0;
        s << "<text x=\"" << f(px(xv)) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << f(xv) << "</text>\n";
        s << "<text x=\"" << L - 6 << "\" y=\"" << f(py(yv) + 4) << "\" text-anchor=\"end\">" << f(yv) << "</text>\n";
    }
    s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
    s << "<text x=\"18\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << (T + H - B) / 2 << ")\">" << y_label << "</text>\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* colour = colours[i % 10];
        s << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.2\" points=\"";
        for (std::size_t k = 0; k < std::min(x.size(), series[i].y.size()); ++k)
            if (std::isfinite(series[i].y[k])) s << f(px(x[k])) << ',' << f(py(series[i].y[k])) << ' ';
        s << "\"/>\n";
        s << "<text x=\"" << W - R - 4 << "\" y=\"" << T + 14 * (i + 1) << "\" text-anchor=\"end\" fill=\"" << colour
          << "\">" << series[i].label << "</text>\n";
    }
    for (const auto& [name, xv] : events) {
        s << "<line x1=\"" << f(px(xv)) << "\" y1=\"" << T << "\" x2=\"" << f(px(xv)) << "\" y2=\"" << H - B
          << "\" stroke=\"black\" stroke-dasharray=\"4 3\"/>\n";
        s << "<text x=\"" << f(px(xv) + 4) << "\" y=\"" << T + 12 << "\">" << name << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

/// Marker displacement magnitudes (mm) against time with onset and gross lines.
inline std::string displacement_svg(const TrackedSequence& tracks, double frame_rate, std::optional<std::size_t> onset,
                                    std::optional<std::size_t> gross, const std::vector<std::size_t>& marker_ids)
{
    std::vector<double> t(tracks.size());
    for (std::size_t k = 0; k < tracks.size(); ++k) t[k] = static_cast<double>(k) / frame_rate;
    std::vector<SvgSeries> series;
    const std::size_t markers = tracks.empty() ? 0 : tracks.front().size();
    for (std::size_t m = 0; m < markers; ++m) {
        SvgSeries s{"marker " + std::to_string(m < marker_ids.size() ? marker_ids[m] : m), {}};
        for (const auto& frame : tracks) s.y.push_back((frame[m] - tracks.front()[m]).norm());
        series.push_back(std::move(s));
    }
    std::vector<std::pair<std::string, double>> events;
    if (onset) events.emplace_back("onset", static_cast<double>(*onset) / frame_rate);
    if (gross) events.emplace_back("gross", static_cast<double>(*gross) / frame_rate);
    return line_chart_svg("Marker displacement", "time (s)", "displacement (mm)", t, series, events);
}

/// Writes table.csv (one row per stimulus), report.json, trials.csv and
/// margins.svg into `dir`.
inline Report emit_report(const std::vector<TrialRecord>& records, const ExperimentConfig& config,
                          const std::string& dir)
{
    Report rep = summarise(records);
    rep.config_hash = config_hash(config);
    rep.seed = config.seed;
    detail::ensure_dir(dir);

    auto roc_of = [&](const std::string& name) -> std::string {
        for (const auto& s : config.stimuli)
            if (s.name == name) return s.flat() ? "inf" : detail::num(s.radius_of_curvature);
        return "";
    };
    {
        std::ofstream out(dir + "/table.csv");
        if (!out) throw FormatError("cannot write " + dir + "/table.csv");
        out << "stimulus,radius_of_curvature_mm,trials,success_rate_pct,mean_margin_mm\n";
        char buf[64];
        for (const auto& row : rep.rows) {
            out << row.stimulus << ',' << roc_of(row.stimulus) << ',' << row.trials << ',';
            std::snprintf(buf, sizeof buf, "%.1f", row.success_rate);
            out << buf << ',';
            if (row.mean_margin) {
                std::snprintf(buf, sizeof buf, "%.3f", *row.mean_margin);
                out << buf;
            }
            out << '\n';
        }
    }
    Json rows = Json::array();
    for (const auto& row : rep.rows)
        rows.push_back({{"stimulus", row.stimulus},
                        {"trials", row.trials},
                        {"successes", row.successes},
                        {"success_rate_pct", row.success_rate},
                        {"mean_margin_mm", row.mean_margin ? Json(*row.mean_margin) : Json(nullptr)}});
    Json meta = {{"config_hash", rep.config_hash}, {"seed", rep.seed}, {"rows", rows}};
    std::ofstream(dir + "/report.json") << meta.dump(2) << '\n';
    write_trials_csv(records, dir + "/trials.csv");

    std::vector<double> x;
    std::vector<SvgSeries> series;
    std::map<std::string, std::size_t> idx;
    for (const auto& r : records) {
        if (!idx.count(r.stimulus)) {
            idx[r.stimulus] = series.size();
            series.push_back({r.stimulus, {}});
        }
        const auto m = compute_margin(r);
        series[idx[r.stimulus]].y.push_back(m ? *m : std::numeric_limits<double>::quiet_NaN());
    }
    std::size_t longest = 0;
    for (const auto& s : series) longest = std::max(longest, s.y.size());
    for (std::size_t i = 0; i < longest; ++i) x.push_back(static_cast<double>(i + 1));
    std::ofstream(dir + "/margins.svg") << line_chart_svg("Detection margin per trial", "trial", "margin (mm)", x,
                                                          series, {});
    return rep;
}

}  // namespace tipslip
