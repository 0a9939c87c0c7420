#include "tipslip/harness.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

using namespace tipslip;
namespace fs = std::filesystem;

namespace
{

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("tipslip_harness_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ExperimentConfig one_trial_config()
{
    ExperimentConfig c;
    c.speeds = {0.2};
    c.repeats = 1;
    return c;
}

TrialRecord record(const std::string& stimulus, std::optional<std::size_t> detection, std::size_t fall)
{
    TrialRecord r;
    r.stimulus = stimulus;
    r.detection_step = detection;
    r.fall_step = fall;
    r.step = 0.2;
    settle_record(r);
    return r;
}

std::vector<std::pair<std::size_t, double>> trials_at(const std::vector<double>& speeds, std::size_t per_speed)
{
    std::vector<std::pair<std::size_t, double>> out;
    for (double v : speeds)
        for (std::size_t r = 0; r < per_speed; ++r) out.emplace_back(out.size(), v);
    return out;
}

}  // namespace

TEST(Config, JsonRoundTrip)
{
    ExperimentConfig c;
    c.seed = 42;
    c.speeds = {0.1, 0.3};
    c.training.optimizer = Optimizer::Momentum;
    c.pins.own_gain = 99.0;
    const Json j = to_json(c);
    const ExperimentConfig back = config_from_json(j);
    EXPECT_EQ(to_json(back), j);
    EXPECT_EQ(config_hash(back), config_hash(c));
    EXPECT_EQ(back.training.optimizer, Optimizer::Momentum);
}

TEST(Config, MissingKeysKeepDefaults)
{
    const auto c = config_from_json(Json::parse(R"({"seed": 7})"));
    EXPECT_EQ(c.seed, 7u);
    EXPECT_EQ(c.speeds.size(), 5u);
    EXPECT_EQ(c.stimuli.size(), 4u);
}

TEST(Config, RejectsUnknownKeysAndBadValues)
{
    EXPECT_THROW((void)config_from_json(Json::parse(R"({"sede": 7})")), InvalidArgument);
    EXPECT_THROW((void)config_from_json(Json::parse(R"({"training": {"lr": 0.1}})")), InvalidArgument);
    EXPECT_THROW((void)config_from_json(Json::parse(R"({"training": {"optimizer": "rmsprop"}})")), InvalidArgument);
    EXPECT_THROW((void)config_from_json(Json::parse(R"({"seed": "one"})")), InvalidArgument);
    EXPECT_THROW((void)config_from_json(Json::parse(R"({"speeds": [0.0]})")), InvalidArgument);
    EXPECT_THROW((void)config_from_json(Json::parse(R"({"training_stimulus": "cube"})")), InvalidArgument);
    EXPECT_THROW((void)config_from_json(Json::parse("[1, 2]")), InvalidArgument);
}

TEST(Config, LoadReportsMissingAndMalformedFiles)
{
    const auto dir = scratch("config");
    EXPECT_THROW((void)load_config((dir / "absent.json").string()), FormatError);
    std::ofstream(dir / "bad.json") << "{not json";
    EXPECT_THROW((void)load_config((dir / "bad.json").string()), FormatError);
    std::ofstream(dir / "ok.json") << R"({"seed": 3, "repeats": 2})";
    EXPECT_EQ(load_config((dir / "ok.json").string()).repeats, 2u);
    fs::remove_all(dir);
}

TEST(Config, HashFollowsContent)
{
    ExperimentConfig a;
    ExperimentConfig b;
    EXPECT_EQ(config_hash(a), config_hash(b));
    b.seed = 2;
    EXPECT_NE(config_hash(a), config_hash(b));
    EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(TrialSeed, DeterministicAndDistinct)
{
    EXPECT_EQ(trial_seed(1, 5), trial_seed(1, 5));
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(trial_seed(1, i));
    EXPECT_EQ(seen.size(), 1000u);
    EXPECT_NE(trial_seed(1, 0), trial_seed(2, 0));
}

TEST(Trajectory, JsonLinesRoundTrip)
{
    const auto dir = scratch("jsonl");
    const auto traj = run_retraction(SensorDesign::ridged(), StimulusSpec{}, 0.5, 3);
    const auto path = (dir / "traj.jsonl").string();
    write_trajectory_jsonl(traj, path);
    const auto back = read_trajectory_jsonl(path);
    ASSERT_EQ(back.frames.size(), traj.frames.size());
    EXPECT_EQ(back.speed, traj.speed);
    EXPECT_EQ(back.seed, traj.seed);
    EXPECT_EQ(back.events.incipient_time, traj.events.incipient_time);
    EXPECT_EQ(back.events.gross_retraction, traj.events.gross_retraction);
    for (std::size_t k = 0; k < traj.frames.size(); k += 17) {
        EXPECT_EQ(back.frames[k].plate.height, traj.frames[k].plate.height);
        EXPECT_EQ(back.frames[k].regime_summary, traj.frames[k].regime_summary);
        for (std::size_t i = 0; i < traj.frames[k].nodes.size(); ++i) {
            EXPECT_EQ(back.frames[k].nodes[i].position.x, traj.frames[k].nodes[i].position.x);
            EXPECT_EQ(back.frames[k].nodes[i].regime, traj.frames[k].nodes[i].regime);
        }
    }
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    EXPECT_EQ(Json::parse(first).at("record"), "events");
    std::ofstream(dir / "bad.jsonl") << "{\"record\": \"frame\"}\n";
    EXPECT_THROW((void)read_trajectory_jsonl((dir / "bad.jsonl").string()), FormatError);
    fs::remove_all(dir);
}

TEST(Collect, StackEndFramesAreSpacedAndCapped)
{
    EXPECT_TRUE(stack_end_frames(5, 16).empty());
    EXPECT_EQ(stack_end_frames(10, 16), (std::vector<std::size_t>{9}));
    const auto ends = stack_end_frames(100, 16);
    EXPECT_EQ(ends.size(), 10u);
    const auto few = stack_end_frames(1000, 16);
    EXPECT_LE(few.size(), 16u);
    for (std::size_t k = 1; k < few.size(); ++k) EXPECT_GE(few[k] - few[k - 1], kStackFrames);
    EXPECT_LT(few.back(), 1000u);
}

TEST(Collect, SingleTrialHasBothClassesAndConsistentLabels)
{
    const auto c = one_trial_config();
    const auto res = collect_dataset(c);
    ASSERT_EQ(res.trials.size(), 1u);
    ASSERT_EQ(res.tracks.size(), 1u);
    const auto& t = res.trials[0];
    EXPECT_TRUE(t.error.empty()) << t.error;
    ASSERT_TRUE(t.onset_frame && t.truth_onset_frame && t.gross_frame && t.truth_gross_frame);
    const double fr = c.sim.frame_rate;
    EXPECT_LE(std::abs(static_cast<double>(*t.onset_frame) - static_cast<double>(*t.truth_onset_frame)) / fr, 0.3);
    EXPECT_LE(std::abs(static_cast<double>(*t.gross_frame) - static_cast<double>(*t.truth_gross_frame)) / fr, 0.2);
    EXPECT_EQ(res.tracks[0].size(), t.frames);
    std::size_t pos = 0;
    for (const auto& s : res.dataset) {
        pos += s.incipient;
        EXPECT_EQ(s.incipient, s.end_frame >= *t.onset_frame);
    }
    EXPECT_GT(pos, 0u);
    EXPECT_LT(pos, res.dataset.size());
    EXPECT_EQ(res.dataset.size(), t.stacks);
}

TEST(Collect, SmoothVariantHasAlmostNoIncipientFrames)
{
    ExperimentConfig c;
    c.design = SensorDesign::smooth();
    c.speeds = {0.1, 0.5};
    c.repeats = 2;
    const auto res = collect_dataset(c);
    const auto rep = labeling_report(res.trials, c);
    EXPECT_LT(rep.at("incipient_frame_fraction").get<double>(), 0.02);
    std::size_t pos = 0;
    for (const auto& s : res.dataset) pos += s.incipient;
    EXPECT_LT(static_cast<double>(pos), 0.02 * static_cast<double>(res.dataset.size()) + 1.0);
}

TEST(Collect, SaveLoadRoundTripAndByteIdenticalRerun)
{
    const auto c = one_trial_config();
    const auto a = scratch("collect_a");
    const auto b = scratch("collect_b");
    save_dataset(collect_dataset(c), c, a.string());
    save_dataset(collect_dataset(c), c, b.string());
    for (const char* f : {"stacks.bin", "index.csv", "labels.json", "tracks/trial_000.csv"})
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    const auto res = collect_dataset(c);
    const auto back = load_dataset(a.string());
    ASSERT_EQ(back.size(), res.dataset.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        EXPECT_EQ(back[i].stack, res.dataset[i].stack);
        EXPECT_EQ(back[i].incipient, res.dataset[i].incipient);
        EXPECT_EQ(back[i].end_frame, res.dataset[i].end_frame);
    }
    const auto labels = Json::parse(slurp(a / "labels.json"));
    EXPECT_EQ(labels.at("trials").size(), 1u);
    EXPECT_TRUE(labels.at("trials")[0].contains("onset_error_s"));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Split, HundredTrialsGiveTenFiveFivePerSpeed)
{
    const std::vector<double> speeds{0.1, 0.2, 0.3, 0.4, 0.5};
    const auto trials = trials_at(speeds, 20);
    const auto s = split_trials(trials, speeds, 1);
    EXPECT_EQ(s.train.size(), 50u);
    EXPECT_EQ(s.validation.size(), 25u);
    EXPECT_EQ(s.test.size(), 25u);
    for (double v : speeds) {
        auto count = [&](const std::vector<std::size_t>& ids) {
            return std::count_if(ids.begin(), ids.end(), [&](std::size_t id) { return trials[id].second == v; });
        };
        EXPECT_EQ(count(s.train), 10);
        EXPECT_EQ(count(s.validation), 5);
        EXPECT_EQ(count(s.test), 5);
    }
    std::vector<std::size_t> all;
    for (const auto* part : {&s.train, &s.validation, &s.test}) all.insert(all.end(), part->begin(), part->end());
    std::sort(all.begin(), all.end());
    EXPECT_EQ(std::adjacent_find(all.begin(), all.end()), all.end());
    EXPECT_EQ(all.size(), 100u);
}

TEST(Split, SingleSpeedDatasetCannotBeStratified)
{
    const std::vector<double> speeds{0.1, 0.2, 0.3, 0.4, 0.5};
    EXPECT_THROW((void)split_trials(trials_at({0.1}, 4), speeds, 1), InvalidArgument);
    EXPECT_THROW((void)split_trials(trials_at({0.1}, 3), {0.1}, 1), InvalidArgument);
    const auto s = split_trials(trials_at({0.1}, 4), {0.1}, 1);
    EXPECT_EQ(s.train.size(), 2u);
    EXPECT_EQ(s.validation.size(), 1u);
    EXPECT_EQ(s.test.size(), 1u);
}

TEST(Split, SameSeedSameMembership)
{
    const std::vector<double> speeds{0.1, 0.2, 0.3, 0.4, 0.5};
    const auto trials = trials_at(speeds, 20);
    const auto a = split_trials(trials, speeds, 9);
    const auto b = split_trials(trials, speeds, 9);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.validation, b.validation);
    EXPECT_EQ(a.test, b.test);
    EXPECT_NE(split_trials(trials, speeds, 10).train, a.train);
}

TEST(Split, DatasetSplitKeepsTrialsWhole)
{
    LabeledDataset data;
    for (std::size_t t = 0; t < 8; ++t)
        for (int k = 0; k < 3; ++k) {
            LabeledStack s;
            s.trial = t;
            s.speed = 0.3;
            data.push_back(s);
        }
    const auto s = split_dataset(data, {0.3}, 4);
    EXPECT_EQ(s.train.size(), 12u);
    EXPECT_EQ(s.validation.size(), 6u);
    EXPECT_EQ(s.test.size(), 6u);
    for (const auto& item : s.test)
        EXPECT_TRUE(std::binary_search(s.trials.test.begin(), s.trials.test.end(), item.trial));
}

TEST(Margin, Examples)
{
    const auto r = record("flat", 20, 25);
    ASSERT_TRUE(compute_margin(r).has_value());
    EXPECT_NEAR(*compute_margin(r), 1.0, 1e-12);
    EXPECT_TRUE(r.detected_before_fall);
    EXPECT_NEAR(*r.detection_retraction, 4.0, 1e-12);
    EXPECT_NEAR(r.fall_retraction, 5.0, 1e-12);

    const auto same = record("flat", 25, 25);
    EXPECT_EQ(*compute_margin(same), 0.0);
    EXPECT_FALSE(same.detected_before_fall);

    const auto none = record("flat", std::nullopt, 25);
    EXPECT_FALSE(compute_margin(none).has_value());
    EXPECT_FALSE(none.detected_before_fall);
}

TEST(Report, SingleDetectedTrial)
{
    const auto rep = summarise({record("flat", 20, 25)});
    ASSERT_EQ(rep.rows.size(), 1u);
    EXPECT_EQ(rep.rows[0].success_rate, 100.0);
    EXPECT_NEAR(*rep.rows[0].mean_margin, 1.0, 1e-12);
}

TEST(Report, MeanOfTwoMarginGroups)
{
    std::vector<TrialRecord> recs;
    for (int i = 0; i < 10; ++i) recs.push_back(record("flat", 21, 25));
    for (int i = 0; i < 10; ++i) recs.push_back(record("flat", 20, 25));
    const auto rep = summarise(recs);
    EXPECT_EQ(rep.rows[0].trials, 20u);
    EXPECT_NEAR(*rep.rows[0].mean_margin, 0.9, 1e-12);
}

TEST(Report, MixedOutcomesGiveIntermediateSuccess)
{
    const auto rep = summarise({record("roc20", 20, 25), record("roc20", std::nullopt, 25), record("roc20", 25, 25)});
    EXPECT_GT(rep.rows[0].success_rate, 0.0);
    EXPECT_LT(rep.rows[0].success_rate, 100.0);
    EXPECT_THROW((void)summarise({}), InvalidArgument);
}

TEST(Report, FilesAreDeterministicAndTableShaped)
{
    const ExperimentConfig c;
    std::vector<TrialRecord> recs;
    for (const auto& s : c.stimuli)
        for (std::size_t d : {20u, 21u}) recs.push_back(record(s.name, d, 25));
    recs.push_back(record("roc20", std::nullopt, 30));
    const auto a = scratch("report_a");
    const auto b = scratch("report_b");
    (void)emit_report(recs, c, a.string());
    (void)emit_report(recs, c, b.string());
    for (const char* f : {"table.csv", "report.json", "trials.csv", "margins.svg"})
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    std::ifstream in(a / "table.csv");
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "stimulus,radius_of_curvature_mm,trials,success_rate_pct,mean_margin_mm");
    std::getline(in, line);
    EXPECT_EQ(line, "flat,inf,2,100.0,0.900");
    const auto back = read_trials_csv((a / "trials.csv").string());
    ASSERT_EQ(back.size(), recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        EXPECT_EQ(back[i].stimulus, recs[i].stimulus);
        EXPECT_EQ(back[i].detection_step, recs[i].detection_step);
        EXPECT_EQ(back[i].detected_before_fall, recs[i].detected_before_fall);
    }
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Online, SilentClassifierNeverDetects)
{
    ExperimentConfig c;
    const Weights silent;  // outputs exactly 0.5, never above the threshold
    const auto r = run_online_trial(silent, c, c.stimuli[0], 0.3, 5);
    EXPECT_FALSE(r.detection_step.has_value());
    EXPECT_FALSE(r.detected_before_fall);
    EXPECT_GT(r.fall_step, 0u);
}

TEST(Online, FallStepMatchesOfflineGrossSlip)
{
    ExperimentConfig c;
    c.online.threshold = 0.4;  // fires on the first full window
    const Weights eager;
    for (const auto& stimulus : c.stimuli) {
        const auto r = run_online_trial(eager, c, stimulus, 0.2, 11);
        ASSERT_EQ(r.detection_step, std::optional<std::size_t>{1}) << stimulus.name;
        EXPECT_TRUE(r.detected_before_fall);
        const auto traj = run_retraction(c.design, stimulus, 0.2, 11, c.sim);
        const auto gross = gross_label(traj, c.sim.fall_threshold);
        ASSERT_TRUE(gross.has_value());
        const double offline = traj.frames[*gross].retraction;
        EXPECT_GE(r.fall_retraction, offline - 1e-9) << stimulus.name;
        EXPECT_LE(r.fall_retraction, offline + c.online.step + 1e-9) << stimulus.name;
    }
}
