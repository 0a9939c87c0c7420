#include "tipslip/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

using namespace tipslip;

namespace
{

struct Common
{
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out{"out"};
};

void add_common(CLI::App* cmd, Common& c)
{
    cmd->add_option("--config", c.config_path, "JSON configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "Base seed, overrides the configuration");
    cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
}

ExperimentConfig resolve(const Common& c)
{
    ExperimentConfig config = c.config_path.empty() ? ExperimentConfig{} : load_config(c.config_path);
    if (c.seed) config.seed = *c.seed;
    config.validate();
    return config;
}

void emit(const Json& j) { std::cout << j.dump() << '\n'; }

int fail(const std::string& code, const std::string& message, int status)
{
    std::cerr << Json{{"error", {{"code", code}, {"message", message}}}}.dump() << '\n';
    return status;
}

void simulate(const Common& c, double speed, const std::string& stimulus_name)
{
    const auto config = resolve(c);
    const auto& stimulus = config.stimulus(stimulus_name.empty() ? config.training_stimulus : stimulus_name);
    const auto traj = run_retraction(config.design, stimulus, speed, config.seed, config.sim);
    detail::ensure_dir(c.out);
    write_trajectory_jsonl(traj, c.out + "/trajectory.jsonl");
    emit({{"command", "simulate"},
          {"stimulus", stimulus.name},
          {"speed", speed},
          {"frames", traj.frames.size()},
          {"incipient_retraction_mm", detail::optional_json(traj.events.incipient_retraction)},
          {"gross_retraction_mm", detail::optional_json(traj.events.gross_retraction)},
          {"window_mm", traj.incipient_window()},
          {"path", c.out + "/trajectory.jsonl"}});
}

void collect(const Common& c)
{
    const auto config = resolve(c);
    const auto result = collect_dataset(config);
    save_dataset(result, config, c.out);
    std::ofstream(c.out + "/config.json") << to_json(config).dump(2) << '\n';
    std::size_t failed = 0;
    std::size_t incipient = 0;
    for (const auto& t : result.trials) failed += !t.error.empty();
    for (const auto& s : result.dataset) incipient += s.incipient;
    emit({{"command", "collect"},
          {"trials", result.trials.size()},
          {"failed_trials", failed},
          {"stacks", result.dataset.size()},
          {"incipient_stacks", incipient},
          {"config_hash", config_hash(config)},
          {"path", c.out}});
}

void label(const Common& c, const std::string& trajectory)
{
    const auto config = resolve(c);
    const auto traj = read_trajectory_jsonl(trajectory);
    const auto layout = build_layout(config.design);
    TrialLabel lab;
    lab.speed = traj.speed;
    lab.seed = traj.seed;
    TrackedSequence tracks;
    auto rng = observation_rng(traj.seed);
    label_trajectory(config, layout, traj, lab, tracks, rng);
    detail::ensure_dir(c.out);
    std::ofstream(c.out + "/labels.json") << labeling_report({lab}, config).dump(2) << '\n';
    write_tracks_csv(tracks, c.out + "/tracks.csv");
    std::ofstream(c.out + "/displacement.svg")
        << displacement_svg(tracks, traj.frame_rate, lab.onset_frame, lab.gross_frame, layout.tracked_markers());
    emit({{"command", "label"},
          {"onset_frame", lab.onset_frame ? Json(*lab.onset_frame) : Json(nullptr)},
          {"gross_frame", lab.gross_frame ? Json(*lab.gross_frame) : Json(nullptr)},
          {"path", c.out}});
}

void train_cmd(const Common& c, const std::string& data_dir)
{
    const auto config = resolve(c);
    const auto data = load_dataset(data_dir);
    const auto split = split_dataset(data, config.speeds, config.seed);
    const auto result = train(split.train, split.validation, config.training, config.seed);
    const auto [test_loss, test_acc] = evaluate(result.weights, split.test);
    detail::ensure_dir(c.out);
    write_weights(result.weights, c.out + "/weights.bin");
    write_history_csv(result.history, c.out + "/history.csv");
    const Json summary = {{"config_hash", config_hash(config)},
                          {"seed", config.seed},
                          {"architecture", result.weights.spec().describe()},
                          {"split_trials",
                           {{"train", split.trials.train},
                            {"validation", split.trials.validation},
                            {"test", split.trials.test}}},
                          {"stacks", {{"train", split.train.size()}, {"validation", split.validation.size()}, {"test", split.test.size()}}},
                          {"test_loss", test_loss},
                          {"test_accuracy", test_acc}};
    std::ofstream(c.out + "/training.json") << summary.dump(2) << '\n';
    emit({{"command", "train"}, {"test_accuracy", test_acc}, {"path", c.out}});
}

void online(const Common& c, const std::string& weights_path)
{
    const auto config = resolve(c);
    const auto weights = read_weights(weights_path);
    const auto records = run_online_experiment(weights, config);
    detail::ensure_dir(c.out);
    write_trials_csv(records, c.out + "/trials.csv");
    std::size_t detected = 0;
    for (const auto& r : records) detected += r.detected_before_fall;
    emit({{"command", "online"}, {"trials", records.size()}, {"detected_before_fall", detected}, {"path", c.out}});
}

void report(const Common& c, const std::string& trials_path, const std::string& history_path)
{
    const auto config = resolve(c);
    const auto records = read_trials_csv(trials_path);
    const auto rep = emit_report(records, config, c.out);
    if (!history_path.empty()) {
        std::ifstream in(history_path);
        if (!in) throw FormatError("cannot read " + history_path);
        std::string line;
        std::getline(in, line);
        std::vector<double> epoch;
        std::vector<SvgSeries> series{{"train accuracy", {}}, {"validation accuracy", {}}};
        while (std::getline(in, line)) {
            double e = 0, tl = 0, ta = 0, vl = 0, va = 0;
            if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf", &e, &tl, &ta, &vl, &va) != 5)
                throw FormatError("malformed row in " + history_path);
            epoch.push_back(e);
            series[0].y.push_back(ta);
            series[1].y.push_back(va);
        }
        std::ofstream(c.out + "/history.svg") << line_chart_svg("Training history", "epoch", "accuracy", epoch, series, {});
    }
    Json rows = Json::array();
    for (const auto& r : rep.rows)
        rows.push_back({{"stimulus", r.stimulus},
                        {"success_rate_pct", r.success_rate},
                        {"mean_margin_mm", r.mean_margin ? Json(*r.mean_margin) : Json(nullptr)}});
    emit({{"command", "report"}, {"rows", rows}, {"path", c.out}});
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Incipient slip testbed for a ridged tactile dome"};
    app.require_subcommand(1);
    Common common;

    double speed = 0.2;
    std::string stimulus;
    auto* sim = app.add_subcommand("simulate", "Simulate one retraction trajectory");
    add_common(sim, common);
    sim->add_option("--speed", speed, "Retraction speed in mm/s")->capture_default_str();
    sim->add_option("--stimulus", stimulus, "Stimulus name, default the training stimulus");

    auto* col = app.add_subcommand("collect", "Simulate, label and stack the training dataset");
    add_common(col, common);

    std::string trajectory;
    auto* lab = app.add_subcommand("label", "Label one trajectory with PELT and plate drop");
    add_common(lab, common);
    lab->add_option("--trajectory", trajectory, "Trajectory JSONL file")->required()->check(CLI::ExistingFile);

    std::string data_dir;
    auto* trn = app.add_subcommand("train", "Split a dataset and train the classifier");
    add_common(trn, common);
    trn->add_option("--data", data_dir, "Dataset directory from collect")->required()->check(CLI::ExistingDirectory);

    std::string weights;
    auto* onl = app.add_subcommand("online", "Run closed-loop retraction trials");
    add_common(onl, common);
    onl->add_option("--weights", weights, "Weights file from train")->required()->check(CLI::ExistingFile);

    std::string trials;
    std::string history;
    auto* rep = app.add_subcommand("report", "Aggregate trials into the margin table and plots");
    add_common(rep, common);
    rep->add_option("--trials", trials, "trials.csv from online")->required()->check(CLI::ExistingFile);
    rep->add_option("--history", history, "history.csv from train")->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what(), 2);
    }

    try {
        if (sim->parsed()) simulate(common, speed, stimulus);
        else if (col->parsed()) collect(common);
        else if (lab->parsed()) label(common, trajectory);
        else if (trn->parsed()) train_cmd(common, data_dir);
        else if (onl->parsed()) online(common, weights);
        else if (rep->parsed()) report(common, trials, history);
    } catch (const Error& e) {
        return fail(e.code(), e.what(), 1);
    } catch (const std::exception& e) {
        return fail("internal", e.what(), 1);
    }
    return 0;
}
