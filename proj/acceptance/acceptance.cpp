#include "tipslip/harness.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

using namespace tipslip;
namespace fs = std::filesystem;

namespace
{

// pinned tolerances
constexpr double kWindowLo = 0.4;           // mm
constexpr double kWindowHi = 1.6;           // mm
constexpr double kSmoothWindow = 0.05;      // mm
constexpr double kSmoothFrames = 0.02;      // fraction of pre-gross frames
constexpr int kOrderingTrials = 20;
constexpr int kOrderingPasses = 19;
constexpr int kPeltSeries = 100;
constexpr double kCostRelTol = 1e-9;
constexpr double kScalingRatio = 8.0;
constexpr double kTestAccuracy = 0.95;
constexpr double kGradRelTol = 1e-4;
constexpr double kFdStep = 1e-4;
constexpr int kGradProbes = 10;
constexpr double kValGain = 0.20;           // epoch 10 over epoch 0
constexpr double kMarginLo = 0.4;           // mm
constexpr double kMarginHi = 1.6;           // mm
constexpr int kTrackFrames = 1000;

struct Outcome
{
    bool pass{false};
    std::string detail;
};

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<double> planted(std::size_t n, std::size_t shifts, std::mt19937_64& rng)
{
    std::uniform_int_distribution<std::size_t> pos(10, n - 10);
    std::vector<std::size_t> at;
    for (std::size_t k = 0; k < shifts; ++k) at.push_back(pos(rng));
    std::sort(at.begin(), at.end());
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> level(-4.0, 4.0);
    std::vector<double> x(n);
    double mean = level(rng);
    std::size_t next = 0;
    for (std::size_t t = 0; t < n; ++t) {
        while (next < at.size() && at[next] == t) {
            mean = level(rng);
            ++next;
        }
        x[t] = mean + noise(rng);
    }
    return x;
}

double default_penalty_for(const std::vector<double>& x)
{
    return changepoint::default_penalty(changepoint::estimate_sigma(x), x.size());
}

Outcome incipient_window(const ExperimentConfig& c)
{
    const auto& stimulus = c.stimulus(c.training_stimulus);
    const double at02 = run_retraction(c.design, stimulus, 0.2, c.seed, c.sim).incipient_window();
    bool ok = at02 >= kWindowLo && at02 <= kWindowHi;
    std::string detail = "window at 0.2 mm/s " + fmt("%.3f", at02) + " mm; other speeds";
    for (double v : {0.1, 0.2, 0.3, 0.4, 0.5}) {
        const double w = run_retraction(c.design, stimulus, v, c.seed + 1, c.sim).incipient_window();
        ok &= w > 0.0;
        detail += " " + fmt("%.3f", w);
    }
    return {ok, detail};
}

Outcome smooth_control(const ExperimentConfig& base)
{
    ExperimentConfig c = base;
    c.design = SensorDesign::smooth();
    c.repeats = 2;
    double worst = 0.0;
    for (double v : c.speeds)
        worst = std::max(worst, run_retraction(c.design, c.stimulus(c.training_stimulus), v, c.seed, c.sim).incipient_window());
    const auto res = collect_dataset(c);
    const double frac = labeling_report(res.trials, c).at("incipient_frame_fraction").get<double>();
    return {worst < kSmoothWindow && frac < kSmoothFrames,
            "max window " + fmt("%.4f", worst) + " mm, incipient frames " + fmt("%.4f", 100.0 * frac) + "%"};
}

Outcome slip_order(const ExperimentConfig& c)
{
    const auto layout = build_layout(c.design);
    int ok = 0;
    for (int i = 0; i < kOrderingTrials; ++i) {
        const double v = c.speeds[static_cast<std::size_t>(i) % c.speeds.size()];
        const auto traj = run_retraction(c.design, c.stimulus(c.training_stimulus), v,
                                         trial_seed(c.seed ^ 0x6f72646572ULL, static_cast<std::uint64_t>(i)), c.sim);
        const auto order = slip_ordering(traj, layout);
        ok += order.outer_first && order.top_last;
    }
    return {ok >= kOrderingPasses, std::to_string(ok) + "/" + std::to_string(kOrderingTrials) + " trials ordered"};
}

Outcome pelt_exactness(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> len(20, 200);
    int same = 0;
    int bs_ok = 0;
    int strict = 0;
    for (int i = 0; i < kPeltSeries; ++i) {
        const auto x = planted(len(rng), static_cast<std::size_t>(i % 4), rng);
        const double pen = default_penalty_for(x);
        const auto op = changepoint::op_exact(x, pen);
        const auto pe = changepoint::pelt(x, pen);
        const auto bs = changepoint::binary_segmentation(x, pen);
        const double tol = kCostRelTol * std::max(1.0, std::abs(op.total_cost));
        same += pe.indices == op.indices && std::abs(pe.total_cost - op.total_cost) <= tol;
        bs_ok += bs.total_cost >= op.total_cost - tol;
        strict += bs.total_cost > op.total_cost + tol;
    }
    return {same == kPeltSeries && bs_ok == kPeltSeries && strict >= 1,
            "PELT equal on " + std::to_string(same) + "/" + std::to_string(kPeltSeries) + ", BinSeg >= OP on "
                + std::to_string(bs_ok) + ", strictly worse on " + std::to_string(strict)};
}

Outcome pelt_scaling(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    auto time_at = [&](std::size_t n) {
        const auto x = planted(n, n / 1000, rng);
        const double pen = default_penalty_for(x);
        double best = std::numeric_limits<double>::infinity();
        for (int rep = 0; rep < 3; ++rep) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto r = changepoint::pelt(x, pen);
            const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            if (r.indices.size() > n) return -1.0;
            best = std::min(best, dt);
        }
        return best;
    };
    bool ok = true;
    std::string detail;
    for (std::size_t n : {std::size_t{10000}, std::size_t{40000}}) {
        const double ratio = time_at(4 * n) / time_at(n);
        ok &= ratio > 0.0 && ratio < kScalingRatio;
        if (!detail.empty()) detail += "; ";
        detail += "t(" + std::to_string(4 * n) + ")/t(" + std::to_string(n) + ") = " + fmt("%.2f", ratio);
    }
    return {ok, detail};
}

struct RunArtifacts
{
    double test_accuracy{0.0};
    std::vector<EpochStats> history;
    std::vector<TrialRecord> records;
    Report report;
    LabeledDataset test;
};

// collect, split, train, online, report; all files land in `dir`
RunArtifacts run_pipeline(const ExperimentConfig& c, const fs::path& dir)
{
    fs::create_directories(dir);
    RunArtifacts out;
    const auto collected = collect_dataset(c);
    for (const auto& t : collected.trials)
        if (!t.error.empty()) throw Error("collect", "trial " + std::to_string(t.trial) + " failed: " + t.error);
    save_dataset(collected, c, (dir / "dataset").string());
    const auto split = split_dataset(collected.dataset, c.speeds, c.seed);
    const auto trained = train(split.train, split.validation, c.training, c.seed);
    write_weights(trained.weights, (dir / "weights.bin").string());
    write_history_csv(trained.history, (dir / "history.csv").string());
    out.test_accuracy = evaluate(trained.weights, split.test).second;
    out.history = trained.history;
    out.test = split.test;
    out.records = run_online_experiment(trained.weights, c);
    out.report = emit_report(out.records, c, (dir / "report").string());
    return out;
}

Outcome classifier(const ExperimentConfig& c, const RunArtifacts& run)
{
    // gradient probes on real stacks with a fresh network in double precision
    std::vector<const LabeledStack*> batch;
    for (std::size_t i = 0; i < run.test.size() && batch.size() < 4; i += run.test.size() / 4 + 1)
        batch.push_back(&run.test[i]);
    auto net = Weights::initialized({}, c.seed).cast<double>();
    std::vector<double> grad;
    std::vector<double> scratch;
    const double base = net.loss_and_gradient(batch, grad);
    auto loss_at = [&](std::size_t i, double delta) {
        const double keep = net.parameters()[i];
        net.parameters()[i] = keep + delta;
        const double l = net.loss_and_gradient(batch, scratch);
        net.parameters()[i] = keep;
        return l;
    };
    std::mt19937_64 rng(c.seed ^ 0x6772616469656e74ULL);
    std::uniform_int_distribution<std::size_t> pick(0, grad.size() - 1);
    int probes = 0;
    double worst = 0.0;
    for (int tries = 0; probes < kGradProbes && tries < 2000; ++tries) {
        const std::size_t i = pick(rng);
        if (std::abs(grad[i]) < 1e-6) continue;
        const double up = loss_at(i, kFdStep);
        const double down = loss_at(i, -kFdStep);
        // skip probes whose interval straddles a ReLU or max-pool kink
        const double right = (up - base) / kFdStep;
        const double left = (base - down) / kFdStep;
        if (std::abs(right - left) > 1e-3 * std::max(std::abs(right), std::abs(left))) continue;
        const double fd = (up - down) / (2.0 * kFdStep);
        worst = std::max(worst, std::abs(fd - grad[i]) / std::max(std::abs(fd), std::abs(grad[i])));
        ++probes;
    }
    const double gain = run.history.back().val_accuracy - run.history.front().val_accuracy;
    return {run.test_accuracy >= kTestAccuracy && probes == kGradProbes && worst <= kGradRelTol && gain >= kValGain,
            "test accuracy " + fmt("%.4f", run.test_accuracy) + " on " + std::to_string(run.test.size())
                + " stacks; gradient max rel error " + fmt("%.2e", worst) + " over " + std::to_string(probes)
                + " probes; validation gain " + fmt("%.3f", gain)};
}

Outcome online_experiment(const RunArtifacts& run, const fs::path& dir)
{
    bool ok = fs::exists(dir / "report" / "table.csv");
    for (const auto& r : run.records) {
        const auto m = compute_margin(r);
        ok &= r.detected_before_fall && m && *m > 0.0;
    }
    std::string detail;
    for (const auto& row : run.report.rows) {
        ok &= row.success_rate == 100.0 && row.mean_margin && *row.mean_margin >= kMarginLo
              && *row.mean_margin <= kMarginHi;
        if (!detail.empty()) detail += "; ";
        detail += row.stimulus + " " + fmt("%.0f%%", row.success_rate) + " "
                  + (row.mean_margin ? fmt("%.3f", *row.mean_margin) : std::string("n/a")) + " mm";
    }
    return {ok, detail};
}

Outcome tracking(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    const TrackSettings settings;
    const double t = settings.max_distance;
    std::uniform_real_distribution<double> px(40.0, 600.0);
    std::uniform_real_distribution<double> py(40.0, 440.0);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const RenderSettings render;
    auto to_plane = [&](Vec2 p) { return Vec2{(p.x - Image::kWidth / 2.0) / render.scale, (Image::kHeight / 2.0 - p.y) / render.scale}; };
    int matched = 0;
    for (int f = 0; f < kTrackFrames; ++f) {
        std::vector<Vec2> truth_prev;
        while (truth_prev.size() < 7) {
            const Vec2 p{px(rng), py(rng)};
            bool ok = true;
            // moved points stay more than two thresholds apart
            for (const auto& q : truth_prev) ok &= (p - q).norm() > 3.0 * t;
            if (ok) truth_prev.push_back(p);
        }
        std::vector<Vec2> truth_curr;
        for (const auto& p : truth_prev) {
            Vec2 d{unit(rng), unit(rng)};
            if (d.norm() > 1.0) d *= 1.0 / d.norm();
            truth_curr.push_back(p + 0.49 * t * d);
        }
        auto detect = [&](const std::vector<Vec2>& pts) {
            PinFrame pf;
            for (const auto& p : pts) pf.positions.push_back(to_plane(p));
            std::vector<Vec2> c;
            for (const auto& b : extract_centroids(render_frame(pf, render))) c.push_back(b.centroid);
            return c;
        };
        const auto prev = detect(truth_prev);
        const auto curr = detect(truth_curr);
        if (prev.size() != 7 || curr.size() != 7) continue;
        // identity of each detected blob by nearest ground-truth point
        auto owner = [](const std::vector<Vec2>& truth, Vec2 p) {
            std::size_t best = 0;
            for (std::size_t k = 1; k < truth.size(); ++k)
                if ((truth[k] - p).norm() < (truth[best] - p).norm()) best = k;
            return best;
        };
        std::vector<std::size_t> perm(curr.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::vector<std::size_t> oracle = perm;
        double best_cost = std::numeric_limits<double>::infinity();
        do {
            double cost = 0.0;
            for (std::size_t i = 0; i < prev.size(); ++i) cost += (prev[i] - curr[perm[i]]).norm();
            if (cost < best_cost) {
                best_cost = cost;
                oracle = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        const auto pick = assign_identities(prev, curr, settings);
        bool ok = pick == oracle;
        for (std::size_t i = 0; i < prev.size(); ++i) ok &= owner(truth_prev, prev[i]) == owner(truth_curr, curr[pick[i]]);
        matched += ok;
    }
    return {matched == kTrackFrames, std::to_string(matched) + "/" + std::to_string(kTrackFrames) + " frames match the oracle"};
}

Outcome determinism(const ExperimentConfig& c, const fs::path& first, const fs::path& second)
{
    run_pipeline(c, second);
    std::vector<std::string> differ;
    std::size_t files = 0;
    for (const auto& entry : fs::recursive_directory_iterator(first)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), first);
        ++files;
        if (!fs::exists(second / rel) || slurp(entry.path()) != slurp(second / rel)) differ.push_back(rel.string());
    }
    std::string detail = std::to_string(files) + " files compared";
    for (const auto& d : differ) detail += "; differs: " + d;
    return {differ.empty() && files > 0, detail};
}

void print(int n, const std::string& name, const Outcome& o)
{
    std::cout << "criterion " << n << " " << name << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Acceptance checks"};
    std::string out = "acceptance_out";
    std::string config_path;
    app.add_option("--out", out, "Scratch directory")->capture_default_str();
    app.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
    CLI11_PARSE(app, argc, argv);

    try {
        const ExperimentConfig c = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
        const fs::path root(out);
        fs::remove_all(root);
        fs::create_directories(root);

        int failed = 0;
        auto run = [&](int n, const std::string& name, const Outcome& o) {
            print(n, name, o);
            failed += !o.pass;
        };
        run(1, "incipient window", incipient_window(c));
        run(2, "smooth control", smooth_control(c));
        run(3, "slip ordering", slip_order(c));
        run(4, "PELT exactness", pelt_exactness(c.seed));
        run(5, "PELT scaling", pelt_scaling(c.seed));
        const auto artifacts = run_pipeline(c, root / "run1");
        run(6, "classifier", classifier(c, artifacts));
        run(7, "online experiment", online_experiment(artifacts, root / "run1"));
        run(8, "tracking", tracking(c.seed));
        run(9, "determinism", determinism(c, root / "run1", root / "run2"));
        std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
        return failed == 0 ? 0 : 1;
    } catch (const Error& e) {
        std::cerr << Json{{"error", {{"code", e.code()}, {"message", e.what()}}}}.dump() << '\n';
        return 2;
    }
}
