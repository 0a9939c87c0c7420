#pragma once

#include "tipslip/core.hpp"
#include "tipslip/sensing.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace tipslip
{

/// Architecture: three 3x3 ReLU conv layers, 2x2 max-pool after the first two,
/// one ReLU hidden layer, one logistic output. Convolutions are unpadded.
struct ConvNetSpec
{
    int rows{Stack::kRows};
    int cols{Stack::kCols};
    std::array<int, 3> filters{32, 64, 64};
    int kernel{3};
    int hidden{64};

    struct Shape
    {
        int c, h, w;
        [[nodiscard]] int size() const { return c * h * w; }
    };

    // shapes after conv1, pool1, conv2, pool2, conv3
    [[nodiscard]] std::array<Shape, 5> shapes() const
    {
        const int k = kernel - 1;
        Shape c1{filters[0], rows - k, cols - k};
        Shape p1{c1.c, c1.h / 2, c1.w / 2};
        Shape c2{filters[1], p1.h - k, p1.w - k};
        Shape p2{c2.c, c2.h / 2, c2.w / 2};
        Shape c3{filters[2], p2.h - k, p2.w - k};
        return {c1, p1, c2, p2, c3};
    }

    void validate() const
    {
        if (kernel < 1 || hidden < 1) throw InvalidArgument("kernel and hidden width must be positive");
        for (int f : filters)
            if (f < 1) throw InvalidArgument("filter counts must be positive");
        if (shapes()[4].h < 1 || shapes()[4].w < 1) throw InvalidArgument("input too small for the network");
    }

    [[nodiscard]] std::size_t parameter_count() const
    {
        const std::size_t kk = static_cast<std::size_t>(kernel) * kernel;
        std::size_t n = 0;
        int in = 1;
        for (int f : filters) {
            n += static_cast<std::size_t>(f) * in * kk + f;
            in = f;
        }
        n += static_cast<std::size_t>(hidden) * shapes()[4].size() + hidden;
        n += static_cast<std::size_t>(hidden) + 1;
        return n;
    }

    [[nodiscard]] std::string describe() const
    {
        std::ostringstream s;
        s << "in" << rows << 'x' << cols << ";conv" << filters[0] << ',' << filters[1] << ',' << filters[2] << ";k"
          << kernel << ";pool12;fc" << hidden << ";sigmoid";
        return s.str();
    }

    /// FNV-1a of `describe()`.
    [[nodiscard]] std::uint64_t hash() const
    {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char ch : describe()) {
            h ^= ch;
            h *= 0x100000001b3ULL;
        }
        return h;
    }
};

namespace detail
{

template <class S>
S dot(const S* a, const S* b, std::size_t n)
{
    // eight lanes keep the reduction vectorisable without reassociation flags
    S acc[8] = {};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        for (int l = 0; l < 8; ++l) acc[l] += a[i + l] * b[i + l];
    S tail = 0;
    for (; i < n; ++i) tail += a[i] * b[i];
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

template <class S>
void axpy(S a, const S* x, S* y, std::size_t n)
{
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

// cols[(c*k + dy)*k + dx][y*wo + x] = in[c][y+dy][x+dx]
template <class S>
void im2col(const S* in, int c, int h, int w, int k, S* cols)
{
    const int ho = h - k + 1;
    const int wo = w - k + 1;
    for (int ch = 0; ch < c; ++ch)
        for (int dy = 0; dy < k; ++dy)
            for (int dx = 0; dx < k; ++dx) {
                S* row = cols + static_cast<std::size_t>((ch * k + dy) * k + dx) * ho * wo;
                for (int y = 0; y < ho; ++y) {
                    const S* src = in + (static_cast<std::size_t>(ch) * h + y + dy) * w + dx;
                    std::copy(src, src + wo, row + static_cast<std::size_t>(y) * wo);
                }
            }
}

template <class S>
void col2im(const S* cols, int c, int h, int w, int k, S* in)
{
    const int ho = h - k + 1;
    const int wo = w - k + 1;
    std::fill(in, in + static_cast<std::size_t>(c) * h * w, S(0));
    for (int ch = 0; ch < c; ++ch)
        for (int dy = 0; dy < k; ++dy)
            for (int dx = 0; dx < k; ++dx) {
                const S* row = cols + static_cast<std::size_t>((ch * k + dy) * k + dx) * ho * wo;
                for (int y = 0; y < ho; ++y) {
                    S* dst = in + (static_cast<std::size_t>(ch) * h + y + dy) * w + dx;
                    const S* src = row + static_cast<std::size_t>(y) * wo;
                    for (int x = 0; x < wo; ++x) dst[x] += src[x];
                }
            }
}

// 2x2 max-pool, floor on odd sizes; `arg` records the winning input index
template <class S>
void maxpool(const S* in, int c, int h, int w, S* out, std::uint32_t* arg)
{
    const int ho = h / 2;
    const int wo = w / 2;
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < ho; ++y)
            for (int x = 0; x < wo; ++x) {
                std::size_t best = (static_cast<std::size_t>(ch) * h + 2 * y) * w + 2 * x;
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        const std::size_t idx = (static_cast<std::size_t>(ch) * h + 2 * y + dy) * w + 2 * x + dx;
                        if (in[idx] > in[best]) best = idx;
                    }
                const std::size_t o = (static_cast<std::size_t>(ch) * ho + y) * wo + x;
                out[o] = in[best];
                arg[o] = static_cast<std::uint32_t>(best);
            }
}

}  // namespace detail

/// One labelled example for the classifier.
struct LabeledStack
{
    Stack stack;
    bool incipient{false};
    double speed{0.0};
    std::size_t trial{0};
    std::size_t end_frame{0};  // last frame of the ten-frame window
};

using LabeledDataset = std::vector<LabeledStack>;

template <class S>
class ConvNet
{
public:
    explicit ConvNet(ConvNetSpec spec = {}) : spec_(spec)
    {
        spec_.validate();
        params_.assign(spec_.parameter_count(), S(0));
        layout();
    }

    /// He-normal hidden layers, small output layer, zero biases.
    static ConvNet initialized(const ConvNetSpec& spec, std::uint64_t seed)
    {
        ConvNet net(spec);
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        const int kk = spec.kernel * spec.kernel;
        int in = 1;
        for (int l = 0; l < 3; ++l) {
            const double sd = std::sqrt(2.0 / (in * kk));
            for (std::size_t i = 0; i < net.w_[l].second; ++i) net.params_[net.w_[l].first + i] = S(sd * normal(rng));
            in = spec.filters[static_cast<std::size_t>(l)];
        }
        const double fc_sd = std::sqrt(2.0 / spec.shapes()[4].size());
        for (std::size_t i = 0; i < net.w_[3].second; ++i) net.params_[net.w_[3].first + i] = S(fc_sd * normal(rng));
        const double out_sd = 0.1 / std::sqrt(static_cast<double>(spec.hidden));
        for (std::size_t i = 0; i < net.w_[4].second; ++i) net.params_[net.w_[4].first + i] = S(out_sd * normal(rng));
        return net;
    }

    [[nodiscard]] const ConvNetSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] std::vector<S>& parameters() noexcept { return params_; }
    [[nodiscard]] const std::vector<S>& parameters() const noexcept { return params_; }

    template <class T>
    [[nodiscard]] ConvNet<T> cast() const
    {
        ConvNet<T> out(spec_);
        for (std::size_t i = 0; i < params_.size(); ++i) out.parameters()[i] = static_cast<T>(params_[i]);
        return out;
    }

    /// Logit of P(incipient).
    [[nodiscard]] S logit(const Stack& stack) const
    {
        Workspace ws(spec_);
        return forward_pass(stack, ws);
    }

    [[nodiscard]] S forward(const Stack& stack) const { return sigmoid(logit(stack)); }

    /// Mean binary cross-entropy over the batch; `grad` receives its gradient.
    S loss_and_gradient(const std::vector<const LabeledStack*>& batch, std::vector<S>& grad) const
    {
        if (batch.empty()) throw InvalidArgument("gradient needs a nonempty batch");
        grad.assign(params_.size(), S(0));
        Workspace ws(spec_);
        S loss = 0;
        const S scale = S(1) / static_cast<S>(batch.size());
        for (const auto* item : batch) {
            const S z = forward_pass(item->stack, ws);
            const S y = item->incipient ? S(1) : S(0);
            loss += bce(z, y);
            backward_pass(ws, (sigmoid(z) - y) * scale, grad);
        }
        return loss * scale;
    }

    static S sigmoid(S z)
    {
        if (z >= 0) return S(1) / (S(1) + std::exp(-z));
        const S e = std::exp(z);
        return e / (S(1) + e);
    }

    static S bce(S z, S y) { return std::max(z, S(0)) - z * y + std::log1p(std::exp(-std::abs(z))); }

private:
    using Range = std::pair<std::size_t, std::size_t>;  // offset, length

    struct Workspace
    {
        std::array<ConvNetSpec::Shape, 5> sh;
        std::vector<S> input, cols, dcols;
        std::vector<S> a1, p1, a2, p2, a3, hidden, dp, dh;
        std::vector<std::uint32_t> arg1, arg2;

        explicit Workspace(const ConvNetSpec& spec) : sh(spec.shapes())
        {
            const int kk = spec.kernel * spec.kernel;
            std::size_t cols_size = static_cast<std::size_t>(kk) * sh[0].h * sh[0].w;
            cols_size = std::max(cols_size, static_cast<std::size_t>(sh[1].c) * kk * sh[2].h * sh[2].w);
            cols_size = std::max(cols_size, static_cast<std::size_t>(sh[3].c) * kk * sh[4].h * sh[4].w);
            input.resize(static_cast<std::size_t>(spec.rows) * spec.cols);
            cols.resize(cols_size);
            dcols.resize(cols_size);
            a1.resize(static_cast<std::size_t>(sh[0].size()));
            p1.resize(static_cast<std::size_t>(sh[1].size()));
            arg1.resize(p1.size());
            a2.resize(static_cast<std::size_t>(sh[2].size()));
            p2.resize(static_cast<std::size_t>(sh[3].size()));
            arg2.resize(p2.size());
            a3.resize(static_cast<std::size_t>(sh[4].size()));
            hidden.resize(static_cast<std::size_t>(spec.hidden));
            dh.resize(hidden.size());
            dp.resize(std::max({a1.size(), a2.size(), a3.size()}));
        }
    };

    void layout()
    {
        std::size_t off = 0;
        auto take = [&](std::size_t n) {
            Range r{off, n};
            off += n;
            return r;
        };
        const std::size_t kk = static_cast<std::size_t>(spec_.kernel) * spec_.kernel;
        int in = 1;
        for (int l = 0; l < 3; ++l) {
            const int f = spec_.filters[static_cast<std::size_t>(l)];
            w_[l] = take(static_cast<std::size_t>(f) * in * kk);
            b_[l] = take(static_cast<std::size_t>(f));
            in = f;
        }
        w_[3] = take(static_cast<std::size_t>(spec_.hidden) * spec_.shapes()[4].size());
        b_[3] = take(static_cast<std::size_t>(spec_.hidden));
        w_[4] = take(static_cast<std::size_t>(spec_.hidden));
        b_[4] = take(1);
    }

    // out[o][p] = relu(b[o] + sum_k w[o][k] cols[k][p])
    void conv_forward(int layer, const S* in, const ConvNetSpec::Shape& in_sh, const ConvNetSpec::Shape& out_sh,
                      Workspace& ws, S* out) const
    {
        const int k = spec_.kernel;
        const std::size_t kdim = static_cast<std::size_t>(in_sh.c) * k * k;
        const std::size_t p = static_cast<std::size_t>(out_sh.h) * out_sh.w;
        detail::im2col(in, in_sh.c, in_sh.h, in_sh.w, k, ws.cols.data());
        const S* w = params_.data() + w_[layer].first;
        const S* b = params_.data() + b_[layer].first;
        for (int o = 0; o < out_sh.c; ++o) {
            S* dst = out + static_cast<std::size_t>(o) * p;
            std::fill(dst, dst + p, b[o]);
            for (std::size_t kk = 0; kk < kdim; ++kk)
                detail::axpy(w[o * kdim + kk], ws.cols.data() + kk * p, dst, p);
            for (std::size_t i = 0; i < p; ++i) dst[i] = std::max(dst[i], S(0));
        }
    }

    // `dout` holds dL/d(pre-activation); accumulates weight gradients and,
    // when `din` is non-null, writes dL/d(input).
    void conv_backward(int layer, const S* in, const ConvNetSpec::Shape& in_sh, const ConvNetSpec::Shape& out_sh,
                       const S* dout, Workspace& ws, std::vector<S>& grad, S* din) const
    {
        const int k = spec_.kernel;
        const std::size_t kdim = static_cast<std::size_t>(in_sh.c) * k * k;
        const std::size_t p = static_cast<std::size_t>(out_sh.h) * out_sh.w;
        detail::im2col(in, in_sh.c, in_sh.h, in_sh.w, k, ws.cols.data());
        const S* w = params_.data() + w_[layer].first;
        S* gw = grad.data() + w_[layer].first;
        S* gb = grad.data() + b_[layer].first;
        for (int o = 0; o < out_sh.c; ++o) {
            const S* d = dout + static_cast<std::size_t>(o) * p;
            gb[o] += std::accumulate(d, d + p, S(0));
            for (std::size_t kk = 0; kk < kdim; ++kk) gw[o * kdim + kk] += detail::dot(d, ws.cols.data() + kk * p, p);
        }
        if (!din) return;
        std::fill(ws.dcols.begin(), ws.dcols.begin() + static_cast<std::ptrdiff_t>(kdim * p), S(0));
        for (int o = 0; o < out_sh.c; ++o) {
            const S* d = dout + static_cast<std::size_t>(o) * p;
            for (std::size_t kk = 0; kk < kdim; ++kk) detail::axpy(w[o * kdim + kk], d, ws.dcols.data() + kk * p, p);
        }
        detail::col2im(ws.dcols.data(), in_sh.c, in_sh.h, in_sh.w, k, din);
    }

    S forward_pass(const Stack& stack, Workspace& ws) const
    {
        if (static_cast<int>(stack.values.size()) != spec_.rows * spec_.cols)
            throw InvalidArgument("stack shape does not match the network input");
        for (std::size_t i = 0; i < ws.input.size(); ++i) ws.input[i] = static_cast<S>(stack.values[i]);
        const auto& sh = ws.sh;
        const ConvNetSpec::Shape in_sh{1, spec_.rows, spec_.cols};
        conv_forward(0, ws.input.data(), in_sh, sh[0], ws, ws.a1.data());
        detail::maxpool(ws.a1.data(), sh[0].c, sh[0].h, sh[0].w, ws.p1.data(), ws.arg1.data());
        conv_forward(1, ws.p1.data(), sh[1], sh[2], ws, ws.a2.data());
        detail::maxpool(ws.a2.data(), sh[2].c, sh[2].h, sh[2].w, ws.p2.data(), ws.arg2.data());
        conv_forward(2, ws.p2.data(), sh[3], sh[4], ws, ws.a3.data());

        const std::size_t flat = ws.a3.size();
        const S* fw = params_.data() + w_[3].first;
        const S* fb = params_.data() + b_[3].first;
        for (int j = 0; j < spec_.hidden; ++j)
            ws.hidden[static_cast<std::size_t>(j)] =
                std::max(S(0), fb[j] + detail::dot(fw + static_cast<std::size_t>(j) * flat, ws.a3.data(), flat));
        const S* ow = params_.data() + w_[4].first;
        return params_[b_[4].first] + detail::dot(ow, ws.hidden.data(), ws.hidden.size());
    }

    void backward_pass(Workspace& ws, S dz, std::vector<S>& grad) const
    {
        const auto& sh = ws.sh;
        const std::size_t flat = ws.a3.size();
        const std::size_t hid = ws.hidden.size();
        const S* ow = params_.data() + w_[4].first;
        S* gow = grad.data() + w_[4].first;
        grad[b_[4].first] += dz;
        for (std::size_t j = 0; j < hid; ++j) {
            gow[j] += dz * ws.hidden[j];
            ws.dh[j] = ws.hidden[j] > S(0) ? dz * ow[j] : S(0);
        }

        const S* fw = params_.data() + w_[3].first;
        S* gfw = grad.data() + w_[3].first;
        S* gfb = grad.data() + b_[3].first;
        S* d3 = ws.dp.data();
        std::fill(d3, d3 + flat, S(0));
        for (std::size_t j = 0; j < hid; ++j) {
            const S d = ws.dh[j];
            if (d == S(0)) continue;
            gfb[j] += d;
            detail::axpy(d, ws.a3.data(), gfw + j * flat, flat);
            detail::axpy(d, fw + j * flat, d3, flat);
        }
        for (std::size_t i = 0; i < flat; ++i)
            if (!(ws.a3[i] > S(0))) d3[i] = S(0);

        std::vector<S> dp2(ws.p2.size());
        conv_backward(2, ws.p2.data(), sh[3], sh[4], d3, ws, grad, dp2.data());

        std::vector<S> d2(ws.a2.size(), S(0));
        for (std::size_t i = 0; i < dp2.size(); ++i)
            if (ws.a2[ws.arg2[i]] > S(0)) d2[ws.arg2[i]] += dp2[i];
        std::vector<S> dp1(ws.p1.size());
        conv_backward(1, ws.p1.data(), sh[1], sh[2], d2.data(), ws, grad, dp1.data());

        std::vector<S> d1(ws.a1.size(), S(0));
        for (std::size_t i = 0; i < dp1.size(); ++i)
            if (ws.a1[ws.arg1[i]] > S(0)) d1[ws.arg1[i]] += dp1[i];
        const ConvNetSpec::Shape in_sh{1, spec_.rows, spec_.cols};
        conv_backward(0, ws.input.data(), in_sh, sh[0], d1.data(), ws, grad, nullptr);
    }

    ConvNetSpec spec_;
    std::vector<S> params_;
    std::array<Range, 5> w_{};
    std::array<Range, 5> b_{};
};

using Weights = ConvNet<float>;

/// Incipient iff probability strictly exceeds the threshold.
template <class S>
bool predict(const ConvNet<S>& net, const Stack& stack, double threshold = 0.5)
{
    return static_cast<double>(net.forward(stack)) > threshold;
}

// ---- augmentation ---------------------------------------------------------

struct AugmentParams
{
    int shift_x{0};   // columns, positive moves content right
    int shift_y{0};   // rows, positive moves content down
    double zoom{1.0};  // >= 1
};

/// Shift with zero fill, then centre-crop 1/zoom of each side and area-resample
/// back to full size.
inline Stack apply_augmentation(const Stack& in, const AugmentParams& p)
{
    if (p.zoom < 1.0) throw InvalidArgument("zoom must be at least 1");
    const int rows = Stack::kRows;
    const int cols = Stack::kCols;
    Stack shifted;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const int sr = r - p.shift_y;
            const int sc = c - p.shift_x;
            if (sr >= 0 && sr < rows && sc >= 0 && sc < cols) shifted.at(r, c) = in.at(sr, sc);
        }
    if (p.zoom == 1.0) return shifted;

    auto weights = [](int n, double zoom) {
        // output bin o covers [lo + o*step, lo + (o+1)*step) of the input axis
        const double span = n / zoom;
        const double lo = (n - span) / 2.0;
        const double step = span / n;
        std::vector<std::vector<std::pair<int, double>>> w(static_cast<std::size_t>(n));
        for (int o = 0; o < n; ++o) {
            const double a = lo + o * step;
            const double b = a + step;
            for (int i = static_cast<int>(std::floor(a)); i < std::min(n, static_cast<int>(std::ceil(b))); ++i) {
                const double overlap = std::min<double>(b, i + 1) - std::max<double>(a, i);
                if (overlap > 1e-12) w[static_cast<std::size_t>(o)].emplace_back(i, overlap / step);
            }
        }
        return w;
    };
    const auto wr = weights(rows, p.zoom);
    const auto wc = weights(cols, p.zoom);
    Stack out;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (const auto& [ir, a] : wr[static_cast<std::size_t>(r)])
                for (const auto& [ic, b] : wc[static_cast<std::size_t>(c)]) acc += a * b * shifted.at(ir, ic);
            out.at(r, c) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
        }
    return out;
}

/// Shifts uniform in +-20% of each dimension, zoom uniform in [1, 1.2].
template <class Rng>
AugmentParams draw_augmentation(Rng& rng)
{
    const int mx = Stack::kCols / 5;
    const int my = Stack::kRows / 5;
    AugmentParams p;
    p.shift_x = std::uniform_int_distribution<int>(-mx, mx)(rng);
    p.shift_y = std::uniform_int_distribution<int>(-my, my)(rng);
    p.zoom = std::uniform_real_distribution<double>(1.0, 1.2)(rng);
    return p;
}

template <class Rng>
Stack augment(const Stack& in, Rng& rng)
{
    return apply_augmentation(in, draw_augmentation(rng));
}

// ---- training -------------------------------------------------------------

enum class Optimizer { Momentum, Adam };

struct TrainSettings
{
    int epochs{10};
    double learning_rate{1e-3};
    Optimizer optimizer{Optimizer::Adam};
    double momentum{0.9};  // first-moment decay for Adam
    double second_moment{0.999};
    double epsilon{1e-7};
    std::size_t batch_size{32};
    bool augment{true};
};

struct EpochStats
{
    int epoch{0};
    double train_loss{0.0};
    double train_accuracy{0.0};
    double val_loss{0.0};
    double val_accuracy{0.0};
};

struct TrainResult
{
    Weights weights;
    std::vector<EpochStats> history;  // epoch 0 is the untrained network
};

/// Mean loss and accuracy of `net` on `data`, no augmentation.
template <class S>
std::pair<double, double> evaluate(const ConvNet<S>& net, const LabeledDataset& data)
{
    if (data.empty()) return {0.0, 0.0};
    double loss = 0.0;
    std::size_t correct = 0;
    for (const auto& item : data) {
        const S z = net.logit(item.stack);
        const S y = item.incipient ? S(1) : S(0);
        loss += static_cast<double>(ConvNet<S>::bce(z, y));
        correct += (static_cast<double>(ConvNet<S>::sigmoid(z)) > 0.5) == item.incipient;
    }
    return {loss / static_cast<double>(data.size()), static_cast<double>(correct) / static_cast<double>(data.size())};
}

/// Mini-batch Adam (or SGD with momentum) on augmented training stacks. History reports
/// loss and accuracy on the unaugmented validation split and on an evenly
/// strided subset of at most `kTrainProbe` unaugmented training stacks.
inline constexpr std::size_t kTrainProbe = 256;

inline TrainResult train(const LabeledDataset& train_set, const LabeledDataset& val_set, const TrainSettings& settings,
                         std::uint64_t seed, const ConvNetSpec& spec = {})
{
    if (train_set.empty()) throw InvalidArgument("training split is empty");
    if (val_set.empty()) throw InvalidArgument("validation split is empty");
    if (settings.epochs < 0 || settings.batch_size == 0 || settings.learning_rate < 0.0 || settings.momentum < 0.0
        || settings.momentum >= 1.0 || settings.second_moment < 0.0 || settings.second_moment >= 1.0
        || !(settings.epsilon > 0.0))
        throw InvalidArgument("invalid training settings");

    TrainResult result{Weights::initialized(spec, seed), {}};
    auto& net = result.weights;
    LabeledDataset probe;
    const std::size_t every = (train_set.size() + kTrainProbe - 1) / kTrainProbe;
    for (std::size_t i = 0; i < train_set.size(); i += every) probe.push_back(train_set[i]);
    auto record = [&](int epoch) {
        const auto [tl, ta] = evaluate(net, probe);
        const auto [vl, va] = evaluate(net, val_set);
        result.history.push_back({epoch, tl, ta, vl, va});
    };
    record(0);

    std::mt19937_64 rng(seed ^ 0x5851f42d4c957f2dULL);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<float> velocity(net.parameters().size(), 0.0f);
    std::vector<float> second(net.parameters().size(), 0.0f);
    double decay1 = 1.0;
    double decay2 = 1.0;
    std::vector<float> grad;
    std::vector<LabeledStack> augmented;
    std::vector<const LabeledStack*> batch;
    const auto lr = static_cast<float>(settings.learning_rate);
    const auto mom = static_cast<float>(settings.momentum);
    for (int epoch = 1; epoch <= settings.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += settings.batch_size) {
            const std::size_t end = std::min(order.size(), start + settings.batch_size);
            augmented.clear();
            for (std::size_t i = start; i < end; ++i) {
                LabeledStack item = train_set[order[i]];
                if (settings.augment) item.stack = augment(item.stack, rng);
                augmented.push_back(std::move(item));
            }
            batch.clear();
            for (const auto& item : augmented) batch.push_back(&item);
            net.loss_and_gradient(batch, grad);
            auto& w = net.parameters();
            if (settings.optimizer == Optimizer::Momentum) {
                for (std::size_t i = 0; i < w.size(); ++i) {
                    velocity[i] = mom * velocity[i] - lr * grad[i];
                    w[i] += velocity[i];
                }
                continue;
            }
            decay1 *= settings.momentum;
            decay2 *= settings.second_moment;
            const auto step = static_cast<float>(settings.learning_rate * std::sqrt(1.0 - decay2) / (1.0 - decay1));
            const auto b2 = static_cast<float>(settings.second_moment);
            const auto eps = static_cast<float>(settings.epsilon);
            for (std::size_t i = 0; i < w.size(); ++i) {
                velocity[i] = mom * velocity[i] + (1.0f - mom) * grad[i];
                second[i] = b2 * second[i] + (1.0f - b2) * grad[i] * grad[i];
                w[i] -= step * velocity[i] / (std::sqrt(second[i]) + eps);
            }
        }
        record(epoch);
    }
    return result;
}

// ---- persistence ----------------------------------------------------------

inline constexpr std::array<char, 8> kWeightsMagic{'T', 'S', 'W', 'E', 'I', 'G', 'H', 'T'};
inline constexpr std::uint32_t kWeightsVersion = 1;

/// Weights file: 8-byte magic, u32 version, u64 spec hash, u32 parameter
/// count, float32 parameters; all little-endian.
inline void write_weights(const Weights& net, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path);
    out.write(kWeightsMagic.data(), 8);
    detail::put_u32(out, kWeightsVersion);
    const std::uint64_t h = net.spec().hash();
    detail::put_u32(out, static_cast<std::uint32_t>(h));
    detail::put_u32(out, static_cast<std::uint32_t>(h >> 32));
    detail::put_u32(out, static_cast<std::uint32_t>(net.parameters().size()));
    for (float v : net.parameters()) detail::put_f32(out, v);
}

inline Weights read_weights(const std::string& path, const ConvNetSpec& spec = {})
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot read " + path);
    std::array<char, 8> magic{};
    in.read(magic.data(), 8);
    if (!in || magic != kWeightsMagic) throw FormatError(path + " is not a weights file");
    if (detail::get_u32(in) != kWeightsVersion) throw FormatError(path + " has an unsupported version");
    const std::uint64_t lo = detail::get_u32(in);
    const std::uint64_t hi = detail::get_u32(in);
    if ((lo | (hi << 32)) != spec.hash()) throw FormatError(path + " was written for a different architecture");
    Weights net(spec);
    if (detail::get_u32(in) != net.parameters().size()) throw FormatError(path + " has the wrong parameter count");
    for (float& v : net.parameters()) v = detail::get_f32(in);
    if (!in) throw FormatError(path + " is truncated");
    return net;
}

inline void write_history_csv(const std::vector<EpochStats>& history, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    out << "epoch,train_loss,train_accuracy,val_loss,val_accuracy\n";
    out.precision(9);
    for (const auto& e : history)
        out << e.epoch << ',' << e.train_loss << ',' << e.train_accuracy << ',' << e.val_loss << ',' << e.val_accuracy
            << '\n';
}

}  // namespace tipslip
