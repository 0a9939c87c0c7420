#pragma once

#include "tipslip/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

namespace tipslip::changepoint
{

enum class Algorithm
{
    PELT,
    OP,
    BinSeg
};

inline std::string to_string(Algorithm a)
{
    switch (a) {
    case Algorithm::PELT: return "pelt";
    case Algorithm::OP: return "op";
    case Algorithm::BinSeg: return "binseg";
    }
    return "?";
}

/// Gaussian mean-shift segment cost: C(a, b] = sum over a <= t < b of
/// (x_t - mean)^2, from prefix sums of the centred series.
class MeanShiftCost
{
public:
    explicit MeanShiftCost(std::span<const double> series)
        : sum_(series.size() + 1, 0.0), sq_(series.size() + 1, 0.0)
    {
        const double centre = series.empty()
                                  ? 0.0
                                  : std::accumulate(series.begin(), series.end(), 0.0)
                                        / static_cast<double>(series.size());
        for (std::size_t t = 0; t < series.size(); ++t) {
            const double v = series[t] - centre;
            sum_[t + 1] = sum_[t] + v;
            sq_[t + 1] = sq_[t] + v * v;
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return sum_.size() - 1; }

    /// Cost of the half-open segment [begin, end).
    [[nodiscard]] double operator()(std::size_t begin, std::size_t end) const noexcept
    {
        const double len = static_cast<double>(end - begin);
        if (len <= 0.0) return 0.0;
        const double s = sum_[end] - sum_[begin];
        return std::max(0.0, (sq_[end] - sq_[begin]) - s * s / len);
    }

private:
    std::vector<double> sum_;
    std::vector<double> sq_;
};

struct ChangePointResult
{
    std::vector<std::size_t> indices;  // first index of each new segment, within (0, n)
    double total_cost{0.0};            // segment costs + penalty * indices.size()
    Algorithm algorithm{Algorithm::OP};
    double mean_candidates{0.0};       // average candidate-set size (PELT), t (OP)
};

namespace detail
{

inline void check(std::span<const double> series, double penalty, std::size_t min_size = 1)
{
    if (series.empty()) throw InvalidArgument("change-point search needs a non-empty series");
    if (!(penalty >= 0.0)) throw InvalidArgument("penalty must be non-negative");
    if (min_size == 0) throw InvalidArgument("minimum segment length must be at least 1");
}

inline std::vector<std::size_t> backtrack(const std::vector<std::size_t>& last, std::size_t n)
{
    std::vector<std::size_t> cps;
    for (std::size_t t = n; last[t] > 0; t = last[t]) cps.push_back(last[t]);
    std::reverse(cps.begin(), cps.end());
    return cps;
}

inline double segmentation_cost(const MeanShiftCost& cost, std::span<const std::size_t> cps, double penalty)
{
    double total = 0.0;
    std::size_t begin = 0;
    for (std::size_t c : cps) {
        total += cost(begin, c);
        begin = c;
    }
    total += cost(begin, cost.size());
    return total + penalty * static_cast<double>(cps.size());
}

}  // namespace detail

/// Optimal Partitioning: F(t) = min_{s<t} F(s) + C(s,t] + penalty, O(n^2).
/// Every segment holds at least `min_size` points (a series shorter than that
/// is one segment). Ties go to the earliest s.
inline ChangePointResult op_exact(std::span<const double> series, double penalty, std::size_t min_size = 1)
{
    detail::check(series, penalty, min_size);
    const std::size_t n = series.size();
    const MeanShiftCost cost(series);
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> best(n + 1, inf);
    std::vector<std::size_t> last(n + 1, 0);
    best[0] = -penalty;
    for (std::size_t t = min_size; t <= n; ++t) {
        double f = inf;
        for (std::size_t s = 0; s + min_size <= t; ++s) {
            if (best[s] == inf) continue;
            const double v = best[s] + cost(s, t) + penalty;
            if (v < f) {
                f = v;
                last[t] = s;
            }
        }
        best[t] = f;
    }
    ChangePointResult r;
    r.algorithm = Algorithm::OP;
    if (n < min_size) {
        r.total_cost = cost(0, n);
        return r;
    }
    r.indices = detail::backtrack(last, n);
    r.total_cost = best[n];
    r.mean_candidates = static_cast<double>(n + 1) / 2.0;
    return r;
}

/// PELT: the Optimal Partitioning recursion restricted to candidates that can
/// still be optimal. s is dropped once F(s) + C(s,u] exceeds F(u) for some
/// u that every later t may use as its last change (u = t - min_size); for
/// this cost the pruning constant is zero. A relative slack on the
/// comparison keeps rounding from discarding a candidate that ties.
inline ChangePointResult pelt(std::span<const double> series, double penalty, std::size_t min_size = 1)
{
    detail::check(series, penalty, min_size);
    const std::size_t n = series.size();
    const MeanShiftCost cost(series);
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> best(n + 1, inf);
    std::vector<std::size_t> last(n + 1, 0);
    best[0] = -penalty;

    ChangePointResult r;
    r.algorithm = Algorithm::PELT;
    if (n < min_size) {
        r.total_cost = cost(0, n);
        return r;
    }

    std::vector<std::size_t> candidates{0};
    std::vector<std::size_t> kept;
    double candidate_total = 0.0;
    for (std::size_t t = min_size; t <= n; ++t) {
        // t - min_size becomes usable as a last change from t on
        const std::size_t fresh = t - min_size;
        if (fresh > 0 && best[fresh] < inf) candidates.push_back(fresh);

        double f = inf;
        for (std::size_t s : candidates) {
            const double v = best[s] + cost(s, t) + penalty;
            if (v < f) {
                f = v;
                last[t] = s;
            }
        }
        best[t] = f;
        candidate_total += static_cast<double>(candidates.size());

        // prune against u = t - min_size + 1, the next point to join
        if (t + 1 > n) break;
        const std::size_t u = t + 1 - min_size;
        if (u == 0 || best[u] == inf) continue;
        const double slack = 1e-10 * (std::abs(best[u]) + penalty + 1.0);
        kept.clear();
        for (std::size_t s : candidates)
            if (s >= u || best[s] + cost(s, u) <= best[u] + slack) kept.push_back(s);
        candidates.swap(kept);
    }
    r.indices = detail::backtrack(last, n);
    r.total_cost = best[n];
    r.mean_candidates = candidate_total / static_cast<double>(n - min_size + 1);
    return r;
}

/// Greedy binary segmentation: repeatedly applies the single split with the
/// largest cost reduction across all current segments while that reduction
/// exceeds the penalty.
inline ChangePointResult binary_segmentation(std::span<const double> series, double penalty)
{
    detail::check(series, penalty);
    const std::size_t n = series.size();
    const MeanShiftCost cost(series);

    struct Split
    {
        double gain;
        std::size_t begin, end, at;
        bool operator<(const Split& o) const
        {
            if (gain != o.gain) return gain < o.gain;
            return at > o.at;  // equal gains: earlier split first
        }
    };
    auto best_split = [&](std::size_t begin, std::size_t end) -> std::optional<Split> {
        if (end - begin < 2) return std::nullopt;
        const double whole = cost(begin, end);
        Split s{-1.0, begin, end, begin};
        for (std::size_t m = begin + 1; m < end; ++m) {
            const double g = whole - cost(begin, m) - cost(m, end);
            if (g > s.gain) {
                s.gain = g;
                s.at = m;
            }
        }
        return s;
    };

    std::priority_queue<Split> queue;
    if (auto s = best_split(0, n)) queue.push(*s);
    std::vector<std::size_t> cps;
    while (!queue.empty() && queue.top().gain > penalty) {
        const Split s = queue.top();
        queue.pop();
        cps.push_back(s.at);
        if (auto l = best_split(s.begin, s.at)) queue.push(*l);
        if (auto r = best_split(s.at, s.end)) queue.push(*r);
    }
    std::sort(cps.begin(), cps.end());
    ChangePointResult r;
    r.algorithm = Algorithm::BinSeg;
    r.indices = cps;
    r.total_cost = detail::segmentation_cost(cost, cps, penalty);
    return r;
}

/// Penalised cost of an arbitrary segmentation, for checking results.
inline double penalised_cost(std::span<const double> series, std::span<const std::size_t> cps, double penalty)
{
    return detail::segmentation_cost(MeanShiftCost(series), cps, penalty);
}

/// Noise scale from the median absolute first difference (differencing
/// cancels slow drift; the sqrt(2) undoes the doubled variance).
inline double estimate_sigma(std::span<const double> series)
{
    if (series.size() < 2) return 0.0;
    std::vector<double> d(series.size() - 1);
    for (std::size_t t = 1; t < series.size(); ++t) d[t - 1] = std::abs(series[t] - series[t - 1]);
    auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    return *mid / (0.6744897501960817 * std::sqrt(2.0));
}

/// 2 * sigma^2 * log(n).
inline double default_penalty(double sigma, std::size_t n)
{
    return 2.0 * sigma * sigma * std::log(static_cast<double>(std::max<std::size_t>(n, 2)));
}

struct OnsetLabel
{
    std::optional<std::size_t> onset;     // frame index of the earliest change
    std::vector<std::size_t> markers;     // the two markers used, by position in the input
};

struct OnsetSettings
{
    std::optional<double> penalty;  // overrides 2 sigma^2 log n
    std::optional<double> sigma;    // overrides the per-marker coordinate estimate
    std::size_t baseline_frames{10};  // averaged for the reference position
    std::size_t min_segment{5};
};

/// Labels incipient-slip onset from tracked marker positions.
///
/// `tracks[m][f]` is marker m at frame f. The two markers with the largest
/// excursion from their reference position (mean of the first few frames) are
/// segmented with PELT on their displacement magnitude; the earliest change
/// point is the onset. Noise is estimated on the x and y traces since the
/// magnitude of pure noise is not Gaussian.
inline OnsetLabel label_onset(const std::vector<std::vector<Vec2>>& tracks, const OnsetSettings& settings = {})
{
    if (tracks.size() < 2) throw InvalidArgument("onset labelling needs at least two markers");
    const std::size_t frames = tracks.front().size();
    for (const auto& t : tracks)
        if (t.size() != frames) throw InvalidArgument("marker sequences differ in length");
    OnsetLabel label;
    if (frames < 2) return label;

    const std::size_t settle = std::clamp<std::size_t>(settings.baseline_frames, 1, frames);
    std::vector<std::vector<double>> magnitude(tracks.size(), std::vector<double>(frames));
    std::vector<double> excursion(tracks.size(), 0.0);
    for (std::size_t m = 0; m < tracks.size(); ++m) {
        Vec2 ref;
        for (std::size_t f = 0; f < settle; ++f) ref += tracks[m][f];
        ref *= 1.0 / static_cast<double>(settle);
        for (std::size_t f = 0; f < frames; ++f) {
            magnitude[m][f] = (tracks[m][f] - ref).norm();
            excursion[m] = std::max(excursion[m], magnitude[m][f]);
        }
    }
    std::vector<std::size_t> order(tracks.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return excursion[a] > excursion[b]; });
    label.markers = {order[0], order[1]};
    std::sort(label.markers.begin(), label.markers.end());

    for (std::size_t m : label.markers) {
        double s = 0.0;
        if (settings.sigma) {
            s = *settings.sigma;
        } else {
            std::vector<double> xs(frames), ys(frames);
            for (std::size_t f = 0; f < frames; ++f) {
                xs[f] = tracks[m][f].x;
                ys[f] = tracks[m][f].y;
            }
            s = std::max(estimate_sigma(xs), estimate_sigma(ys));
        }
        const double pen = settings.penalty.value_or(default_penalty(s, frames));
        const auto result = pelt(magnitude[m], pen, settings.min_segment);
        if (!result.indices.empty()) {
            const std::size_t first = result.indices.front();
            if (!label.onset || first < *label.onset) label.onset = first;
        }
    }
    return label;
}

}  // namespace tipslip::changepoint
