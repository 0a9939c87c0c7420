#pragma once

#include "tipslip/core.hpp"
#include "tipslip/sensing.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <tuple>
#include <vector>

namespace tipslip
{

/// Intensity-weighted centre of one connected blob, pixel coordinates.
struct Blob
{
    Vec2 centroid;
    int area{0};
};

struct CentroidSettings
{
    std::uint8_t threshold{128};  // pixels at or above this belong to a blob
    int min_area{20};             // blobs must be strictly larger
};

/// 8-connected components of bright pixels, sorted by (y, x) of their centroids.
inline std::vector<Blob> extract_centroids(const Image& img, const CentroidSettings& settings = {})
{
    const int w = img.width;
    const int h = img.height;
    std::vector<int> label(static_cast<std::size_t>(w) * h, -1);
    std::vector<Blob> blobs;
    std::vector<std::pair<int, int>> stack;
    for (int y0 = 0; y0 < h; ++y0)
        for (int x0 = 0; x0 < w; ++x0) {
            const std::size_t idx0 = static_cast<std::size_t>(y0) * w + x0;
            if (img.pixels[idx0] < settings.threshold || label[idx0] >= 0) continue;
            double sx = 0.0, sy = 0.0, sw = 0.0;
            int area = 0;
            label[idx0] = 1;
            stack.assign(1, {x0, y0});
            while (!stack.empty()) {
                const auto [x, y] = stack.back();
                stack.pop_back();
                const double v = img.at(x, y);
                sx += v * x;
                sy += v * y;
                sw += v;
                ++area;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = x + dx;
                        const int ny = y + dy;
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                        const std::size_t nidx = static_cast<std::size_t>(ny) * w + nx;
                        if (label[nidx] >= 0 || img.pixels[nidx] < settings.threshold) continue;
                        label[nidx] = 1;
                        stack.emplace_back(nx, ny);
                    }
            }
            if (area > settings.min_area) blobs.push_back({{sx / sw, sy / sw}, area});
        }
    std::sort(blobs.begin(), blobs.end(), [](const Blob& a, const Blob& b) {
        return std::tie(a.centroid.y, a.centroid.x) < std::tie(b.centroid.y, b.centroid.x);
    });
    return blobs;
}

struct TrackSettings
{
    double max_distance{15.0};  // px
};

/// Greedy assignment: all (identity, candidate) pairs in ascending distance,
/// ties broken by identity then candidate index; each side used once.
/// Returns, per identity, the chosen candidate index.
inline std::vector<std::size_t> assign_identities(const std::vector<Vec2>& previous, const std::vector<Vec2>& candidates,
                                                  const TrackSettings& settings = {})
{
    struct Pair
    {
        double d;
        std::size_t id;
        std::size_t cand;
    };
    std::vector<Pair> pairs;
    for (std::size_t i = 0; i < previous.size(); ++i)
        for (std::size_t j = 0; j < candidates.size(); ++j) {
            const double d = (previous[i] - candidates[j]).norm();
            if (d <= settings.max_distance) pairs.push_back({d, i, j});
        }
    std::sort(pairs.begin(), pairs.end(),
              [](const Pair& a, const Pair& b) { return std::tie(a.d, a.id, a.cand) < std::tie(b.d, b.id, b.cand); });
    constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> chosen(previous.size(), none);
    std::vector<bool> taken(candidates.size(), false);
    for (const auto& p : pairs) {
        if (chosen[p.id] != none || taken[p.cand]) continue;
        chosen[p.id] = p.cand;
        taken[p.cand] = true;
    }
    for (std::size_t i = 0; i < chosen.size(); ++i)
        if (chosen[i] == none) throw TrackingLoss(i);
    return chosen;
}

/// Positions per frame, per identity.
using TrackedSequence = std::vector<std::vector<Vec2>>;

/// Identities come from the first frame's (y, x) order; later frames are
/// matched to the previous one.
inline TrackedSequence track_sequence(const std::vector<Image>& frames, const CentroidSettings& centroid = {},
                                      const TrackSettings& settings = {})
{
    TrackedSequence seq;
    for (const auto& img : frames) {
        std::vector<Vec2> pts;
        for (const auto& b : extract_centroids(img, centroid)) pts.push_back(b.centroid);
        if (seq.empty()) {
            seq.push_back(std::move(pts));
            continue;
        }
        const auto pick = assign_identities(seq.back(), pts, settings);
        std::vector<Vec2> next(pick.size());
        for (std::size_t i = 0; i < pick.size(); ++i) next[i] = pts[pick[i]];
        seq.push_back(std::move(next));
    }
    return seq;
}

/// CSV with header `frame,identity,x,y`, in the units of the tracked positions.
inline void write_tracks_csv(const TrackedSequence& seq, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    out << "frame,identity,x,y\n";
    out.precision(17);
    for (std::size_t f = 0; f < seq.size(); ++f)
        for (std::size_t i = 0; i < seq[f].size(); ++i)
            out << f << ',' << i << ',' << seq[f][i].x << ',' << seq[f][i].y << '\n';
}

}  // namespace tipslip
