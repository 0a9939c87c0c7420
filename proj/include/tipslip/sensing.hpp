#pragma once

#include "tipslip/core.hpp"
#include "tipslip/dome.hpp"
#include "tipslip/mechanics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace tipslip
{

/// External-camera view: the tracked markers, in layout order, in mm.
struct MarkerFrame
{
    double time{0.0};
    std::vector<Vec2> positions;
};

/// Internal-camera view: one pin per node, image-plane mm about the optical axis.
struct PinFrame
{
    double time{0.0};
    std::vector<Vec2> positions;
};

/// Markers sit on the skin, so they report node positions plus camera noise.
template <class Rng>
MarkerFrame observe_markers(const SimState& state, const ContactLayout& layout, double sigma, Rng& rng)
{
    if (sigma < 0.0) throw InvalidArgument("marker noise must be non-negative");
    if (state.nodes.size() != layout.size()) throw InvalidArgument("state and layout disagree on node count");
    std::normal_distribution<double> noise(0.0, 1.0);
    MarkerFrame frame;
    frame.time = state.time;
    for (std::size_t id : layout.tracked_markers()) {
        Vec2 p = state.nodes[id].position;
        if (sigma > 0.0) {
            const double dx = noise(rng);
            const double dy = noise(rng);
            p += sigma * Vec2{dx, dy};
        }
        frame.positions.push_back(p);
    }
    return frame;
}

/// Pin response to skin motion. A pin follows its own node by `own_gain` and
/// pivots with the difference between its neighbours' motion and its own.
struct PinModel
{
    double own_gain{150.0};
    double pivot_gain{360.0};
    double noise{0.01};  // mm, image plane
};

/// Pin positions for `state`, with node displacements measured from
/// `reference` (the first frame of the trial), so pins sit at their rest
/// positions until the skin moves.
template <class Rng>
PinFrame observe_pins(const SimState& state, const SimState& reference, const ContactLayout& layout,
                      const PinModel& model, Rng& rng)
{
    if (model.pivot_gain < 0.0 || model.own_gain < 0.0 || model.noise < 0.0)
        throw InvalidArgument("pin gains and noise must be non-negative");
    const std::size_t n = layout.size();
    if (state.nodes.size() != n || reference.nodes.size() != n)
        throw InvalidArgument("state and layout disagree on node count");
    std::vector<Vec2> moved(n);
    for (std::size_t i = 0; i < n; ++i) moved[i] = state.nodes[i].position - reference.nodes[i].position;

    std::normal_distribution<double> noise(0.0, 1.0);
    PinFrame frame;
    frame.time = state.time;
    frame.positions.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        Vec2 pivot;
        const auto& adj = layout.neighbours[i];
        if (!adj.empty()) {
            for (std::size_t j : adj) pivot += moved[j];
            pivot *= 1.0 / static_cast<double>(adj.size());
            pivot -= moved[i];
        }
        Vec2 p = layout.nodes[i].rest + model.own_gain * moved[i] + model.pivot_gain * pivot;
        if (model.noise > 0.0) {
            const double dx = noise(rng);
            const double dy = noise(rng);
            p += model.noise * Vec2{dx, dy};
        }
        frame.positions[i] = p;
    }
    return frame;
}

/// 8-bit grayscale image, row-major.
struct Image
{
    static constexpr int kWidth = 640;
    static constexpr int kHeight = 480;

    int width{kWidth};
    int height{kHeight};
    std::vector<std::uint8_t> pixels;

    Image() : pixels(static_cast<std::size_t>(kWidth) * kHeight, 0) {}
    Image(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, 0)
    {
        if (w <= 0 || h <= 0) throw InvalidArgument("image dimensions must be positive");
    }

    [[nodiscard]] std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }

    friend bool operator==(const Image&, const Image&) = default;
};

struct RenderSettings
{
    double scale{8.0};         // px per image-plane mm
    double disc_radius{6.0};   // px
};

/// Maps image-plane mm to pixel coordinates: origin at the image centre,
/// +y toward the top row.
inline Vec2 project(Vec2 p, double scale)
{
    return {Image::kWidth / 2.0 + scale * p.x, Image::kHeight / 2.0 - scale * p.y};
}

/// White filled discs on black, no anti-aliasing. A pixel is lit when its
/// centre lies within the disc.
inline Image render_frame(const PinFrame& frame, const RenderSettings& settings = {})
{
    Image img;
    const double r = settings.disc_radius;
    for (std::size_t i = 0; i < frame.positions.size(); ++i) {
        const Vec2 c = project(frame.positions[i], settings.scale);
        if (!(c.x - r >= 0.0 && c.x + r <= img.width - 1 && c.y - r >= 0.0 && c.y + r <= img.height - 1))
            throw InvalidArgument("pin " + std::to_string(i) + " projects off the image");
        const int x0 = static_cast<int>(std::ceil(c.x - r));
        const int x1 = static_cast<int>(std::floor(c.x + r));
        const int y0 = static_cast<int>(std::ceil(c.y - r));
        const int y1 = static_cast<int>(std::floor(c.y + r));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const double dx = x - c.x;
                const double dy = y - c.y;
                if (dx * dx + dy * dy <= r * r) img.at(x, y) = 255;
            }
    }
    return img;
}

/// Network input: rows x cols values in [0, 1], row-major.
struct Stack
{
    static constexpr int kRows = 48;
    static constexpr int kCols = 55;

    std::vector<float> values = std::vector<float>(static_cast<std::size_t>(kRows) * kCols, 0.0f);

    [[nodiscard]] float at(int r, int c) const { return values[static_cast<std::size_t>(r) * kCols + c]; }
    float& at(int r, int c) { return values[static_cast<std::size_t>(r) * kCols + c]; }

    friend bool operator==(const Stack&, const Stack&) = default;
};

struct ThresholdSettings
{
    int window{11};
    double offset{2.0};
};

namespace detail
{

// Kernel OpenCV uses for a Gaussian of this size when sigma is left at 0.
inline std::vector<double> gaussian_kernel(int size)
{
    const double sigma = 0.3 * ((size - 1) * 0.5 - 1.0) + 0.8;
    std::vector<double> k(static_cast<std::size_t>(size));
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        const double d = i - (size - 1) / 2.0;
        k[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += k[static_cast<std::size_t>(i)];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Area-average weights from `in` samples onto `out` bins: weights[o] lists
// (input index, overlap fraction / bin width).
inline std::vector<std::vector<std::pair<int, double>>> area_weights(int in, int out)
{
    std::vector<std::vector<std::pair<int, double>>> w(static_cast<std::size_t>(out));
    const double step = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
        const double lo = o * step;
        const double hi = (o + 1) * step;
        for (int i = static_cast<int>(std::floor(lo)); i < std::min(in, static_cast<int>(std::ceil(hi))); ++i) {
            const double overlap = std::min<double>(hi, i + 1) - std::max<double>(lo, i);
            if (overlap > 1e-12) w[static_cast<std::size_t>(o)].emplace_back(i, overlap / step);
        }
    }
    return w;
}

}  // namespace detail

namespace detail
{

using Interval = std::pair<int, int>;  // inclusive

inline void merge_intervals(std::vector<Interval>& v)
{
    std::sort(v.begin(), v.end());
    std::size_t out = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (out > 0 && v[i].first <= v[out - 1].second + 1) v[out - 1].second = std::max(v[out - 1].second, v[i].second);
        else v[out++] = v[i];
    }
    v.resize(out);
}

}  // namespace detail

/// Gaussian adaptive threshold with inverted output: a pixel becomes 255 when
/// it is at most (local Gaussian mean - offset), else 0. Borders replicate.
/// With a positive offset, a pixel whose window holds no lit input stays 0, so
/// only pixels within half a window of lit pixels are filtered.
inline Image adaptive_threshold(const Image& src, const ThresholdSettings& settings = {})
{
    if (settings.window < 3 || settings.window % 2 == 0) throw InvalidArgument("threshold window must be odd and >= 3");
    if (!(settings.offset > 0.0)) throw InvalidArgument("threshold offset must be positive");
    const int w = src.width;
    const int h = src.height;
    const int half = settings.window / 2;
    const auto kernel = detail::gaussian_kernel(settings.window);
    const double* kern = kernel.data() + half;  // kern[k] for k in [-half, half]

    // per row: merged column ranges within half a window of a lit pixel
    std::vector<std::vector<detail::Interval>> spans(static_cast<std::size_t>(h));
    const std::vector<std::uint8_t> dark(static_cast<std::size_t>(w), 0);
    for (int y = 0; y < h; ++y) {
        const std::uint8_t* row = &src.pixels[static_cast<std::size_t>(y) * w];
        if (std::memcmp(row, dark.data(), static_cast<std::size_t>(w)) == 0) continue;
        auto& sp = spans[static_cast<std::size_t>(y)];
        for (int x = 0; x < w; ++x) {
            if (row[x] == 0) continue;
            const int a = std::max(0, x - half);
            const int b = std::min(w - 1, x + half);
            if (!sp.empty() && a <= sp.back().second + 1) sp.back().second = b;
            else sp.emplace_back(a, b);
        }
    }

    // horizontal pass into a reusable zeroed buffer, one full-width row per image row
    thread_local std::vector<double> pass;
    thread_local std::vector<double> zero_row;
    pass.resize(static_cast<std::size_t>(w) * h, 0.0);
    zero_row.assign(static_cast<std::size_t>(w), 0.0);
    for (int y = 0; y < h; ++y) {
        const std::uint8_t* row = &src.pixels[static_cast<std::size_t>(y) * w];
        double* dst = pass.data() + static_cast<std::size_t>(y) * w;
        for (const auto& [a, b] : spans[static_cast<std::size_t>(y)])
            for (int x = a; x <= b; ++x) {
                double acc = 0.0;
                if (x - half >= 0 && x + half < w)
                    for (int k = -half; k <= half; ++k) acc += kern[k] * row[x + k];
                else
                    for (int k = -half; k <= half; ++k) acc += kern[k] * row[std::clamp(x + k, 0, w - 1)];
                dst[x] = acc;
            }
    }

    Image out(w, h);
    std::vector<const double*> taps(static_cast<std::size_t>(2 * half + 1));
    std::vector<detail::Interval> cover;
    std::vector<double> mean;
    for (int y = 0; y < h; ++y) {
        cover.clear();
        for (int k = -half; k <= half; ++k) {
            const int yc = std::clamp(y + k, 0, h - 1);
            const auto& sp = spans[static_cast<std::size_t>(yc)];
            taps[static_cast<std::size_t>(k + half)] = sp.empty() ? zero_row.data() : pass.data() + static_cast<std::size_t>(yc) * w;
            cover.insert(cover.end(), sp.begin(), sp.end());
        }
        if (cover.empty()) continue;
        detail::merge_intervals(cover);
        const std::uint8_t* srow = &src.pixels[static_cast<std::size_t>(y) * w];
        std::uint8_t* orow = &out.pixels[static_cast<std::size_t>(y) * w];
        for (const auto& [a, b] : cover) {
            const auto len = static_cast<std::size_t>(b - a + 1);
            mean.assign(len, 0.0);
            for (int k = 0; k <= 2 * half; ++k) {
                const double kv = kernel[static_cast<std::size_t>(k)];
                const double* t = taps[static_cast<std::size_t>(k)] + a;
                for (std::size_t i = 0; i < len; ++i) mean[i] += kv * t[i];
            }
            for (std::size_t i = 0; i < len; ++i)
                orow[a + static_cast<int>(i)] = srow[a + static_cast<int>(i)] > mean[i] - settings.offset ? 0 : 255;
        }
    }

    for (int y = 0; y < h; ++y)
        for (const auto& [a, b] : spans[static_cast<std::size_t>(y)])
            std::fill(pass.begin() + static_cast<std::ptrdiff_t>(y) * w + a, pass.begin() + static_cast<std::ptrdiff_t>(y) * w + b + 1, 0.0);
    return out;
}

/// Area-average resample of a full frame onto the stack grid, values in [0, 255].
inline std::vector<double> downsample(const Image& img)
{
    static const auto col_w = detail::area_weights(Image::kWidth, Stack::kCols);
    static const auto row_w = detail::area_weights(Image::kHeight, Stack::kRows);
    if (img.width != Image::kWidth || img.height != Image::kHeight)
        throw InvalidArgument("frames must be 640x480");
    std::vector<double> rows(static_cast<std::size_t>(Stack::kRows) * img.width, 0.0);
    for (int r = 0; r < Stack::kRows; ++r)
        for (const auto& [y, wy] : row_w[static_cast<std::size_t>(r)]) {
            const std::uint8_t* src = &img.pixels[static_cast<std::size_t>(y) * img.width];
            if (std::find_if(src, src + img.width, [](std::uint8_t v) { return v != 0; }) == src + img.width) continue;
            double* dst = &rows[static_cast<std::size_t>(r) * img.width];
            for (int x = 0; x < img.width; ++x) dst[x] += wy * src[x];
        }
    std::vector<double> out(static_cast<std::size_t>(Stack::kRows) * Stack::kCols, 0.0);
    for (int r = 0; r < Stack::kRows; ++r)
        for (int c = 0; c < Stack::kCols; ++c) {
            double acc = 0.0;
            for (const auto& [x, wx] : col_w[static_cast<std::size_t>(c)])
                acc += wx * rows[static_cast<std::size_t>(r) * img.width + x];
            out[static_cast<std::size_t>(r) * Stack::kCols + c] = acc;
        }
    return out;
}

/// Threshold then downsample one frame (grayscale conversion is the identity
/// for these synthetic frames).
inline std::vector<double> reduce_frame(const Image& img, const ThresholdSettings& settings = {})
{
    return downsample(adaptive_threshold(img, settings));
}

inline constexpr std::size_t kStackFrames = 10;

/// Sums reduced frames and rescales to [0, 1]; a flat sum maps to zeros.
inline Stack stack_from_reduced(std::span<const std::vector<double>> reduced)
{
    if (reduced.size() != kStackFrames) throw InvalidArgument("a stack needs exactly ten frames");
    const std::size_t cells = static_cast<std::size_t>(Stack::kRows) * Stack::kCols;
    std::vector<double> sum(cells, 0.0);
    for (const auto& f : reduced) {
        if (f.size() != cells) throw InvalidArgument("reduced frame has the wrong shape");
        for (std::size_t i = 0; i < cells; ++i) sum[i] += f[i];
    }
    const auto [lo, hi] = std::minmax_element(sum.begin(), sum.end());
    Stack s;
    const double range = *hi - *lo;
    if (range <= 0.0) return s;
    for (std::size_t i = 0; i < cells; ++i) s.values[i] = static_cast<float>((sum[i] - *lo) / range);
    return s;
}

/// Full pipeline over ten consecutive 640x480 frames.
inline Stack preprocess(std::span<const Image> frames, const ThresholdSettings& settings = {})
{
    if (frames.size() != kStackFrames) throw InvalidArgument("a stack needs exactly ten frames");
    std::vector<std::vector<double>> reduced;
    reduced.reserve(frames.size());
    for (const auto& f : frames) {
        if (f.width != Image::kWidth || f.height != Image::kHeight) throw InvalidArgument("frames must be 640x480");
        reduced.push_back(reduce_frame(f, settings));
    }
    return stack_from_reduced(reduced);
}

// ---- persistence ---------------------------------------------------------

inline void write_pgm(const Image& img, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path);
    out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
}

inline Image read_pgm(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot read " + path);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (magic != "P5" || w <= 0 || h <= 0 || maxval != 255) throw FormatError(path + " is not an 8-bit binary PGM");
    in.get();
    Image img(w, h);
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (!in) throw FormatError(path + " is truncated");
    return img;
}

namespace detail
{

inline constexpr std::array<char, 8> kStackMagic{'T', 'S', 'S', 'T', 'A', 'C', 'K', '1'};

inline void put_u32(std::ostream& out, std::uint32_t v)
{
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& in)
{
    unsigned char b[4] = {};
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8)
           | (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f32(std::ostream& out, float v)
{
    std::uint32_t bits = 0;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

inline float get_f32(std::istream& in)
{
    const std::uint32_t bits = get_u32(in);
    float v = 0.0f;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace detail

/// Stacks file: 8-byte magic, u32 rows, u32 cols, then float32 values of each
/// stack in turn, all little-endian.
inline void write_stacks(const std::vector<Stack>& stacks, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path);
    out.write(detail::kStackMagic.data(), 8);
    detail::put_u32(out, Stack::kRows);
    detail::put_u32(out, Stack::kCols);
    for (const auto& s : stacks)
        for (float v : s.values) detail::put_f32(out, v);
}

inline std::vector<Stack> read_stacks(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot read " + path);
    std::array<char, 8> magic{};
    in.read(magic.data(), 8);
    if (!in || magic != detail::kStackMagic) throw FormatError(path + " is not a stack file");
    const auto rows = detail::get_u32(in);
    const auto cols = detail::get_u32(in);
    if (rows != Stack::kRows || cols != Stack::kCols) throw FormatError(path + " has an unexpected stack shape");
    std::vector<Stack> stacks;
    while (in.peek() != std::char_traits<char>::eof()) {
        Stack s;
        for (float& v : s.values) v = detail::get_f32(in);
        if (!in) throw FormatError(path + " is truncated");
        stacks.push_back(std::move(s));
    }
    return stacks;
}

}  // namespace tipslip
