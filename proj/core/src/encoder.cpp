#include "ppe/encoder.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ppe/errors.hpp"
#include "ppe/rng.hpp"

namespace ppe {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
// Eigen's vectorized kernels peel a data-dependent number of leading
// elements, so every buffer it reads or writes must have a fixed alignment
// for results to be bit-reproducible across allocations.
using AlignedVec = std::vector<double, Eigen::aligned_allocator<double>>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// ---------------------------------------------------------------------------
// im2col / col2im for 3x3 same-padding convolution.

void im2col3(const double* x, int channels, int h, int w, double* col) {
    const std::size_t hw = std::size_t(h) * w;
    for (int c = 0; c < channels; ++c) {
        const double* plane = x + c * hw;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                double* row = col + (std::size_t(c) * 9 + ky * 3 + kx) * hw;
                const int dy = ky - 1;
                const int dx = kx - 1;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + dy;
                    double* out = row + std::size_t(y) * w;
                    if (sy < 0 || sy >= h) {
                        std::fill(out, out + w, 0.0);
                        continue;
                    }
                    const double* in = plane + std::size_t(sy) * w;
                    const int x0 = std::max(0, -dx);
                    const int x1 = std::min(w, w - dx);
                    std::fill(out, out + x0, 0.0);
                    std::copy(in + x0 + dx, in + x1 + dx, out + x0);
                    std::fill(out + x1, out + w, 0.0);
                }
            }
        }
    }
}

void col2im3(const double* col, int channels, int h, int w, double* x) {
    const std::size_t hw = std::size_t(h) * w;
    std::fill(x, x + channels * hw, 0.0);
    for (int c = 0; c < channels; ++c) {
        double* plane = x + c * hw;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const double* row = col + (std::size_t(c) * 9 + ky * 3 + kx) * hw;
                const int dy = ky - 1;
                const int dx = kx - 1;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + dy;
                    if (sy < 0 || sy >= h) continue;
                    const double* in = row + std::size_t(y) * w;
                    double* out = plane + std::size_t(sy) * w;
                    const int x0 = std::max(0, -dx);
                    const int x1 = std::min(w, w - dx);
                    for (int xx = x0; xx < x1; ++xx) out[xx + dx] += in[xx];
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Half-plane max. For every channel and direction, remembers which input
// cell supplied each row/column value so the backward pass can route
// gradients to it. Ties go to the first cell in scan order.

struct HalfPlaneIndex {
    // Per channel: argmax column for each row, argmax row for each column,
    // and the source row/column for each of the four cumulative maps.
    std::vector<int> row_argcol, col_argrow;
    std::vector<int> above_src, below_src, left_src, right_src;
};

void half_plane_forward(const double* x, int channels, int h, int w, double* y,
                        HalfPlaneIndex& idx) {
    const std::size_t hw = std::size_t(h) * w;
    idx.row_argcol.resize(std::size_t(channels) * h);
    idx.col_argrow.resize(std::size_t(channels) * w);
    idx.above_src.resize(std::size_t(channels) * h);
    idx.below_src.resize(std::size_t(channels) * h);
    idx.left_src.resize(std::size_t(channels) * w);
    idx.right_src.resize(std::size_t(channels) * w);
    std::copy(x, x + channels * hw, y);

    std::vector<double> rowmax(h), colmax(w);
    for (int c = 0; c < channels; ++c) {
        const double* p = x + c * hw;
        int* argcol = idx.row_argcol.data() + std::size_t(c) * h;
        int* argrow = idx.col_argrow.data() + std::size_t(c) * w;
        for (int r = 0; r < h; ++r) {
            int best = 0;
            for (int cc = 1; cc < w; ++cc)
                if (p[r * w + cc] > p[r * w + best]) best = cc;
            argcol[r] = best;
            rowmax[r] = p[r * w + best];
        }
        for (int cc = 0; cc < w; ++cc) {
            int best = 0;
            for (int r = 1; r < h; ++r)
                if (p[r * w + cc] > p[best * w + cc]) best = r;
            argrow[cc] = best;
            colmax[cc] = p[best * w + cc];
        }

        int* above = idx.above_src.data() + std::size_t(c) * h;
        int* below = idx.below_src.data() + std::size_t(c) * h;
        int* left = idx.left_src.data() + std::size_t(c) * w;
        int* right = idx.right_src.data() + std::size_t(c) * w;
        above[0] = 0;
        for (int r = 1; r < h; ++r) above[r] = rowmax[r] > rowmax[above[r - 1]] ? r : above[r - 1];
        below[h - 1] = h - 1;
        for (int r = h - 2; r >= 0; --r)
            below[r] = rowmax[r] >= rowmax[below[r + 1]] ? r : below[r + 1];
        left[0] = 0;
        for (int cc = 1; cc < w; ++cc)
            left[cc] = colmax[cc] > colmax[left[cc - 1]] ? cc : left[cc - 1];
        right[w - 1] = w - 1;
        for (int cc = w - 2; cc >= 0; --cc)
            right[cc] = colmax[cc] >= colmax[right[cc + 1]] ? cc : right[cc + 1];

        double* y_above = y + (std::size_t(channels) + c) * hw;
        double* y_below = y + (std::size_t(2 * channels) + c) * hw;
        double* y_left = y + (std::size_t(3 * channels) + c) * hw;
        double* y_right = y + (std::size_t(4 * channels) + c) * hw;
        for (int r = 0; r < h; ++r) {
            const double va = rowmax[above[r]];
            const double vb = rowmax[below[r]];
            for (int cc = 0; cc < w; ++cc) {
                y_above[r * w + cc] = va;
                y_below[r * w + cc] = vb;
                y_left[r * w + cc] = colmax[left[cc]];
                y_right[r * w + cc] = colmax[right[cc]];
            }
        }
    }
}

void half_plane_backward(const double* dy, int channels, int h, int w, const HalfPlaneIndex& idx,
                         double* dx) {
    const std::size_t hw = std::size_t(h) * w;
    std::copy(dy, dy + channels * hw, dx);
    std::vector<double> drow(h), dcol(w);
    for (int c = 0; c < channels; ++c) {
        std::fill(drow.begin(), drow.end(), 0.0);
        std::fill(dcol.begin(), dcol.end(), 0.0);
        const double* d_above = dy + (std::size_t(channels) + c) * hw;
        const double* d_below = dy + (std::size_t(2 * channels) + c) * hw;
        const double* d_left = dy + (std::size_t(3 * channels) + c) * hw;
        const double* d_right = dy + (std::size_t(4 * channels) + c) * hw;
        const int* above = idx.above_src.data() + std::size_t(c) * h;
        const int* below = idx.below_src.data() + std::size_t(c) * h;
        const int* left = idx.left_src.data() + std::size_t(c) * w;
        const int* right = idx.right_src.data() + std::size_t(c) * w;
        for (int r = 0; r < h; ++r) {
            double sa = 0.0;
            double sb = 0.0;
            for (int cc = 0; cc < w; ++cc) {
                sa += d_above[r * w + cc];
                sb += d_below[r * w + cc];
            }
            drow[above[r]] += sa;
            drow[below[r]] += sb;
        }
        for (int cc = 0; cc < w; ++cc) {
            double sl = 0.0;
            double sr = 0.0;
            for (int r = 0; r < h; ++r) {
                sl += d_left[r * w + cc];
                sr += d_right[r * w + cc];
            }
            dcol[left[cc]] += sl;
            dcol[right[cc]] += sr;
        }
        double* p = dx + c * hw;
        const int* argcol = idx.row_argcol.data() + std::size_t(c) * h;
        const int* argrow = idx.col_argrow.data() + std::size_t(c) * w;
        for (int r = 0; r < h; ++r) p[r * w + argcol[r]] += drow[r];
        for (int cc = 0; cc < w; ++cc) p[argrow[cc] * w + cc] += dcol[cc];
    }
}

// ---------------------------------------------------------------------------
// Forward pass with everything the backward pass needs. Buffers are reused
// across samples of the same shape.

struct Workspace {
    int h = 0;
    int w = 0;
    std::vector<AlignedVec> acts;  // acts[0] = input, acts[i+1] = output of layer i
    AlignedVec logits;             // pre-logistic output of the final layer
    AlignedVec col;                // im2col scratch
    std::vector<HalfPlaneIndex> hp;
    AlignedVec grad_a;
    AlignedVec grad_b;
    AlignedVec grad_col;
    std::vector<AlignedVec> weights;  // aligned copies of the conv weights
    std::vector<AlignedVec> dweights;

    void prepare(const Architecture& arch, int height, int width) {
        if (h == height && w == width && acts.size() == arch.size() + 1) return;
        h = height;
        w = width;
        const std::size_t hw = std::size_t(h) * w;
        acts.assign(arch.size() + 1, {});
        acts[0].resize(std::size_t(arch.front().in_ch) * hw);
        std::size_t max_col = 0;
        std::size_t max_ch = std::size_t(arch.front().in_ch);
        for (std::size_t i = 0; i < arch.size(); ++i) {
            acts[i + 1].resize(std::size_t(arch[i].out_ch) * hw);
            max_ch = std::max(max_ch, std::size_t(arch[i].out_ch));
            if (arch[i].kind == LayerKind::Conv && arch[i].kernel == 3)
                max_col = std::max(max_col, std::size_t(arch[i].in_ch) * 9 * hw);
        }
        logits.resize(hw);
        col.resize(max_col);
        grad_col.resize(max_col);
        hp.assign(arch.size(), {});
        weights.assign(arch.size(), {});
        dweights.assign(arch.size(), {});
        for (std::size_t i = 0; i < arch.size(); ++i) {
            weights[i].resize(arch[i].weight_count());
            dweights[i].resize(arch[i].weight_count());
        }
        grad_a.resize(max_ch * hw);
        grad_b.resize(max_ch * hw);
    }
};

void check_input(const EncoderModel& model, const Tensor3& input) {
    if (model.arch.empty()) throw IncompatibleArchitecture("empty architecture");
    if (input.channels != model.arch.front().in_ch || input.height < 1 || input.width < 1 ||
        input.data.size() != std::size_t(input.channels) * input.plane()) {
        std::ostringstream os;
        os << "input has " << input.channels << " channels, model expects "
           << model.arch.front().in_ch;
        throw ShapeMismatch(os.str());
    }
}

void run_forward(const EncoderModel& model, const Tensor3& input, Workspace& ws) {
    const auto& arch = model.arch;
    ws.prepare(arch, input.height, input.width);
    const int h = ws.h;
    const int w = ws.w;
    const Eigen::Index hw = Eigen::Index(h) * w;
    std::copy(input.data.begin(), input.data.end(), ws.acts[0].begin());

    for (std::size_t li = 0; li < arch.size(); ++li) {
        const LayerSpec& L = arch[li];
        const double* x = ws.acts[li].data();
        double* y = ws.acts[li + 1].data();
        if (L.kind == LayerKind::HalfPlaneMax) {
            half_plane_forward(x, L.in_ch, h, w, y, ws.hp[li]);
            continue;
        }
        const Eigen::Index k2 = Eigen::Index(L.kernel) * L.kernel;
        const auto& src = model.params.weights[li];
        std::copy(src.begin(), src.end(), ws.weights[li].begin());
        ConstMatMap W(ws.weights[li].data(), L.out_ch, L.in_ch * k2);
        MatMap Y(y, L.out_ch, hw);
        if (L.kernel == 1) {
            Y.noalias() = W * ConstMatMap(x, L.in_ch, hw);
        } else {
            im2col3(x, L.in_ch, h, w, ws.col.data());
            Y.noalias() = W * ConstMatMap(ws.col.data(), L.in_ch * k2, hw);
        }
        const auto& b = model.params.biases[li];
        for (int o = 0; o < L.out_ch; ++o) Y.row(o).array() += b[std::size_t(o)];

        switch (L.activation) {
            case Activation::None: break;
            case Activation::ReLU:
                for (Eigen::Index i = 0; i < Y.size(); ++i) y[i] = y[i] > 0.0 ? y[i] : 0.0;
                break;
            case Activation::Logistic:
                std::copy(y, y + Y.size(), ws.logits.begin());
                for (Eigen::Index i = 0; i < Y.size(); ++i) y[i] = logistic(y[i]);
                break;
        }
    }
}

// Loss of one sample from the final activations; fills dlogits with the
// gradient of the per-sample mean loss when requested.
double sample_loss(const double* probs, const PathLabel& label,
                   const std::vector<double>* weights, double positive_weight,
                   double* dlogits) {
    const std::size_t n = label.mask.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = probs[i];
        const double pc = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
        const double wgt = weights ? (*weights)[i] : 1.0;
        const bool on_path = label.mask[i] != 0;
        total += on_path ? -wgt * positive_weight * std::log(pc) : -wgt * std::log(1.0 - pc);
        if (dlogits) {
            const bool inside = p > kProbClamp && p < 1.0 - kProbClamp;
            dlogits[i] = !inside ? 0.0
                         : on_path ? -wgt * positive_weight * (1.0 - p) * inv_n
                                   : wgt * p * inv_n;
        }
    }
    return total * inv_n;
}

// Accumulates d(loss)/d(params) for one sample into `grads` (which must be
// zeroed by the caller). Requires run_forward on the same workspace.
void run_backward(const EncoderModel& model, Workspace& ws, ParameterSet& grads) {
    const auto& arch = model.arch;
    const int h = ws.h;
    const int w = ws.w;
    const Eigen::Index hw = Eigen::Index(h) * w;

    // ws.grad_a holds d(loss)/d(output of current layer), pre-activation
    // for the last layer (already through the logistic).
    double* dout = ws.grad_a.data();
    double* dnext = ws.grad_b.data();
    for (std::size_t li = arch.size(); li-- > 0;) {
        const LayerSpec& L = arch[li];
        const double* x = ws.acts[li].data();
        const double* y = ws.acts[li + 1].data();
        const bool need_input_grad = li > 0;

        if (L.kind == LayerKind::HalfPlaneMax) {
            half_plane_backward(dout, L.in_ch, h, w, ws.hp[li], dnext);
            std::swap(dout, dnext);
            continue;
        }
        if (L.activation == Activation::ReLU) {
            for (Eigen::Index i = 0; i < Eigen::Index(L.out_ch) * hw; ++i)
                if (y[i] <= 0.0) dout[i] = 0.0;
        }
        const Eigen::Index k2 = Eigen::Index(L.kernel) * L.kernel;
        ConstMatMap dZ(dout, L.out_ch, hw);
        MatMap dW(ws.dweights[li].data(), L.out_ch, L.in_ch * k2);
        auto& db = grads.biases[li];
        for (int o = 0; o < L.out_ch; ++o) {
            double sum = 0.0;
            for (Eigen::Index i = 0; i < hw; ++i) sum += dout[o * hw + i];
            db[std::size_t(o)] += sum;
        }
        ConstMatMap W(ws.weights[li].data(), L.out_ch, L.in_ch * k2);

        if (L.kernel == 1) {
            ConstMatMap X(x, L.in_ch, hw);
            dW.noalias() = dZ * X.transpose();
            if (need_input_grad) MatMap(dnext, L.in_ch, hw).noalias() = W.transpose() * dZ;
        } else {
            im2col3(x, L.in_ch, h, w, ws.col.data());
            ConstMatMap C(ws.col.data(), L.in_ch * k2, hw);
            dW.noalias() = dZ * C.transpose();
            if (need_input_grad) {
                MatMap(ws.grad_col.data(), L.in_ch * k2, hw).noalias() = W.transpose() * dZ;
                col2im3(ws.grad_col.data(), L.in_ch, h, w, dnext);
            }
        }
        auto& gw = grads.weights[li];
        for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += ws.dweights[li][i];
        std::swap(dout, dnext);
    }
}

std::vector<double> probs_from(const Workspace& ws) {
    return std::vector<double>(ws.acts.back().begin(), ws.acts.back().end());
}

}  // namespace

// ---------------------------------------------------------------------------

LayerSpec LayerSpec::conv(int in, int out, int kernel, Activation act) {
    return {LayerKind::Conv, in, out, kernel, act};
}

LayerSpec LayerSpec::half_plane_max(int channels) {
    return {LayerKind::HalfPlaneMax, channels, 5 * channels, 1, Activation::None};
}

std::size_t LayerSpec::weight_count() const noexcept {
    if (kind != LayerKind::Conv) return 0;
    return std::size_t(in_ch) * std::size_t(out_ch) * std::size_t(kernel) * std::size_t(kernel);
}

std::size_t LayerSpec::bias_count() const noexcept {
    return kind == LayerKind::Conv ? std::size_t(out_ch) : 0;
}

Architecture default_architecture() {
    return {
        LayerSpec::conv(3, 8, 1, Activation::ReLU),
        LayerSpec::half_plane_max(8),
        LayerSpec::conv(40, 16, 1, Activation::ReLU),
        LayerSpec::conv(16, 16, 3, Activation::ReLU),
        LayerSpec::conv(16, 16, 3, Activation::ReLU),
        LayerSpec::conv(16, 16, 3, Activation::ReLU),
        LayerSpec::conv(16, 1, 3, Activation::Logistic),
    };
}

Architecture local_architecture() {
    return {
        LayerSpec::conv(3, 16, 3, Activation::ReLU),
        LayerSpec::conv(16, 16, 3, Activation::ReLU),
        LayerSpec::conv(16, 16, 3, Activation::ReLU),
        LayerSpec::conv(16, 1, 3, Activation::Logistic),
    };
}

void validate_architecture(const Architecture& arch) {
    auto fail = [](std::size_t i, const std::string& why) {
        throw IncompatibleArchitecture("layer " + std::to_string(i) + ": " + why);
    };
    if (arch.empty()) throw IncompatibleArchitecture("architecture has no layers");
    for (std::size_t i = 0; i < arch.size(); ++i) {
        const LayerSpec& L = arch[i];
        if (L.in_ch < 1 || L.out_ch < 1) fail(i, "channel counts must be positive");
        if (i > 0 && L.in_ch != arch[i - 1].out_ch)
            fail(i, "expects " + std::to_string(L.in_ch) + " input channels but previous layer emits " +
                        std::to_string(arch[i - 1].out_ch));
        const bool last = i + 1 == arch.size();
        if (L.kind == LayerKind::HalfPlaneMax) {
            if (L.out_ch != 5 * L.in_ch) fail(i, "half-plane layer must emit 5x its input channels");
            if (last) fail(i, "final layer must be a convolution");
            continue;
        }
        if (L.kind != LayerKind::Conv) fail(i, "unknown layer kind");
        if (L.kernel != 1 && L.kernel != 3) fail(i, "kernel must be 1 or 3");
        if (L.activation == Activation::Logistic && !last)
            fail(i, "logistic activation is reserved for the final layer");
        if (last && (L.out_ch != 1 || L.activation != Activation::Logistic))
            fail(i, "final layer must emit 1 channel through a logistic");
    }
}

std::size_t parameter_count(const Architecture& arch) {
    std::size_t n = 0;
    for (const auto& L : arch) n += L.weight_count() + L.bias_count();
    return n;
}

ParameterSet ParameterSet::zeros_like(const Architecture& arch) {
    ParameterSet p;
    for (const auto& L : arch) {
        p.weights.emplace_back(L.weight_count(), 0.0);
        p.biases.emplace_back(L.bias_count(), 0.0);
    }
    return p;
}

std::size_t ParameterSet::size() const noexcept {
    std::size_t n = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) n += weights[i].size() + biases[i].size();
    return n;
}

double& ParameterSet::at(std::size_t flat) {
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (flat < weights[i].size()) return weights[i][flat];
        flat -= weights[i].size();
        if (flat < biases[i].size()) return biases[i][flat];
        flat -= biases[i].size();
    }
    throw std::out_of_range("ParameterSet::at");
}

double ParameterSet::at(std::size_t flat) const {
    return const_cast<ParameterSet*>(this)->at(flat);
}

void ParameterSet::add(const ParameterSet& other) {
    for (std::size_t i = 0; i < weights.size(); ++i) {
        for (std::size_t j = 0; j < weights[i].size(); ++j) weights[i][j] += other.weights[i][j];
        for (std::size_t j = 0; j < biases[i].size(); ++j) biases[i][j] += other.biases[i][j];
    }
}

void ParameterSet::scale(double factor) {
    for (auto& v : weights)
        for (auto& x : v) x *= factor;
    for (auto& v : biases)
        for (auto& x : v) x *= factor;
}

bool ParameterSet::all_finite() const noexcept {
    auto finite = [](const std::vector<std::vector<double>>& vv) {
        for (const auto& v : vv)
            for (double x : v)
                if (!std::isfinite(x)) return false;
        return true;
    };
    return finite(weights) && finite(biases);
}

EncoderModel init_model(const Architecture& arch, std::uint64_t seed) {
    validate_architecture(arch);
    EncoderModel m;
    m.arch = arch;
    m.init_seed = seed;
    m.params = ParameterSet::zeros_like(arch);
    Rng rng(derive_seed(seed, 0x1417));
    for (std::size_t i = 0; i < arch.size(); ++i) {
        const LayerSpec& L = arch[i];
        if (L.kind != LayerKind::Conv) continue;
        const double std_dev = std::sqrt(2.0 / double(L.in_ch * L.kernel * L.kernel));
        for (double& x : m.params.weights[i]) x = std_dev * standard_normal(rng);
    }
    return m;
}

Tensor3 encode_input(const ImageRGB& image) {
    Tensor3 t(3, image.height, image.width);
    const std::size_t hw = t.plane();
    for (std::size_t i = 0; i < hw; ++i)
        for (std::size_t c = 0; c < 3; ++c) t.data[c * hw + i] = image.pixels[i * 3 + c] / 255.0;
    return t;
}

Tensor3 encode_input(const GridScene& scene) { return encode_input(render_scene(scene)); }

RegionProbabilities forward(const EncoderModel& model, const Tensor3& input) {
    check_input(model, input);
    Workspace ws;
    run_forward(model, input, ws);
    RegionProbabilities out;
    out.height = input.height;
    out.width = input.width;
    out.values = probs_from(ws);
    for (double& v : out.values) v = std::clamp(v, kProbClamp, 1.0 - kProbClamp);
    return out;
}

std::vector<int> distance_to_path(const PathLabel& label) {
    // Two-pass L1 distance transform.
    const int h = label.height;
    const int w = label.width;
    const int inf = h + w + 1;
    std::vector<int> d(label.mask.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = label.mask[i] ? 0 : inf;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            int& v = d[std::size_t(r) * w + c];
            if (r > 0) v = std::min(v, d[std::size_t(r - 1) * w + c] + 1);
            if (c > 0) v = std::min(v, d[std::size_t(r) * w + c - 1] + 1);
        }
    for (int r = h - 1; r >= 0; --r)
        for (int c = w - 1; c >= 0; --c) {
            int& v = d[std::size_t(r) * w + c];
            if (r + 1 < h) v = std::min(v, d[std::size_t(r + 1) * w + c] + 1);
            if (c + 1 < w) v = std::min(v, d[std::size_t(r) * w + c + 1] + 1);
        }
    return d;
}

std::vector<double> loss_weights(const PathLabel& label, const LossWeighting& weighting) {
    if (weighting.kind == LossWeighting::Kind::Uniform)
        return std::vector<double>(label.mask.size(), 1.0);
    if (!(weighting.sigma > 0.0)) throw ConfigError("gaussian weighting requires sigma > 0");
    const auto d = distance_to_path(label);
    const double denom = 2.0 * weighting.sigma * weighting.sigma;
    std::vector<double> wts(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) wts[i] = std::exp(-double(d[i]) * d[i] / denom);
    return wts;
}

double loss(const RegionProbabilities& pred, const PathLabel& label,
            const LossWeighting& weighting, double positive_weight) {
    if (pred.width != label.width || pred.height != label.height ||
        pred.values.size() != label.mask.size())
        throw ShapeMismatch("prediction and label shapes differ");
    const auto wts = loss_weights(label, weighting);
    return sample_loss(pred.values.data(), label, &wts, positive_weight, nullptr);
}

Sample make_sample(const GridScene& scene, const PathLabel& label) {
    return {encode_input(scene), label};
}

Sample make_sample(const GridScene& scene) { return make_sample(scene, compute_label(scene)); }

namespace {

void check_sample(const EncoderModel& model, const Sample& s) {
    check_input(model, s.input);
    if (s.label.width != s.input.width || s.label.height != s.input.height ||
        s.label.mask.size() != s.input.plane())
        throw ShapeMismatch("label shape differs from input");
}

// Per-sample loss and gradient into `sample_grads` (overwritten).
double sample_gradient(const EncoderModel& model, const Sample& s, const std::vector<double>* wts,
                       double positive_weight, Workspace& ws, ParameterSet& sample_grads) {
    run_forward(model, s.input, ws);
    for (auto& v : sample_grads.weights) std::fill(v.begin(), v.end(), 0.0);
    for (auto& v : sample_grads.biases) std::fill(v.begin(), v.end(), 0.0);
    const double l = sample_loss(ws.acts.back().data(), s.label, wts, positive_weight, ws.grad_a.data());
    run_backward(model, ws, sample_grads);
    return l;
}

}  // namespace

BatchGradient backward(const EncoderModel& model, std::span<const Sample> batch,
                       const LossWeighting& weighting, double positive_weight) {
    if (batch.empty()) throw std::invalid_argument("backward: empty batch");
    validate_architecture(model.arch);
    BatchGradient out;
    out.grads = ParameterSet::zeros_like(model.arch);
    ParameterSet tmp = ParameterSet::zeros_like(model.arch);
    Workspace ws;
    for (const Sample& s : batch) {
        check_sample(model, s);
        const auto wts = loss_weights(s.label, weighting);
        out.loss += sample_gradient(model, s, &wts, positive_weight, ws, tmp);
        out.grads.add(tmp);
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    out.grads.scale(inv);
    out.loss *= inv;
    return out;
}

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("train.epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw ConfigError("train.learning_rate must be finite and >= 0");
    if (weighting.kind == LossWeighting::Kind::Gaussian && !(weighting.sigma > 0.0))
        throw ConfigError("train.gaussian_sigma must be > 0");
    if (!(positive_weight > 0.0)) throw ConfigError("train.positive_weight must be > 0");
    if (optimizer.kind == OptimizerKind::Adam &&
        !(optimizer.beta1 >= 0 && optimizer.beta1 < 1 && optimizer.beta2 >= 0 &&
          optimizer.beta2 < 1 && optimizer.epsilon > 0))
        throw ConfigError("train: invalid Adam parameters");
}

TrainResult train(EncoderModel model, std::span<const Sample> dataset, const TrainConfig& cfg) {
    cfg.validate();
    validate_architecture(model.arch);
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
    for (const Sample& s : dataset) check_sample(model, s);

    std::vector<std::vector<double>> weights;
    weights.reserve(dataset.size());
    for (const Sample& s : dataset) weights.push_back(loss_weights(s.label, cfg.weighting));

    const std::size_t n_params = model.params.size();
    std::vector<double> m1(n_params, 0.0), m2(n_params, 0.0);
    std::uint64_t t = 0;

    Workspace ws;
    ParameterSet batch_grads = ParameterSet::zeros_like(model.arch);
    ParameterSet sample_grads = ParameterSet::zeros_like(model.arch);
    std::vector<double> sample_losses(dataset.size());
    std::vector<std::size_t> order(dataset.size());

    TrainResult out;
    out.history.reserve(std::size_t(cfg.epochs));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(derive_seed(cfg.seed, 0xE90C + std::uint64_t(epoch)));
        shuffle(order.begin(), order.end(), rng);

        for (std::size_t b0 = 0; b0 < order.size(); b0 += std::size_t(cfg.batch_size)) {
            const std::size_t b1 = std::min(order.size(), b0 + std::size_t(cfg.batch_size));
            for (auto& v : batch_grads.weights) std::fill(v.begin(), v.end(), 0.0);
            for (auto& v : batch_grads.biases) std::fill(v.begin(), v.end(), 0.0);
            for (std::size_t k = b0; k < b1; ++k) {
                const std::size_t idx = order[k];
                const double l = sample_gradient(model, dataset[idx], &weights[idx],
                                                  cfg.positive_weight, ws, sample_grads);
                if (!std::isfinite(l))
                    throw DivergenceDetected("train: non-finite loss in epoch " +
                                             std::to_string(epoch));
                sample_losses[idx] = l;
                batch_grads.add(sample_grads);
            }
            batch_grads.scale(1.0 / static_cast<double>(b1 - b0));

            ++t;
            const double lr = cfg.learning_rate;
            const auto& opt = cfg.optimizer;
            const double bc1 = 1.0 - std::pow(opt.beta1, double(t));
            const double bc2 = 1.0 - std::pow(opt.beta2, double(t));
            std::size_t flat = 0;
            auto update = [&](std::vector<double>& param, const std::vector<double>& grad) {
                for (std::size_t j = 0; j < param.size(); ++j, ++flat) {
                    const double g = grad[j];
                    if (opt.kind == OptimizerKind::SGD) {
                        param[j] -= lr * g;
                        continue;
                    }
                    m1[flat] = opt.beta1 * m1[flat] + (1.0 - opt.beta1) * g;
                    m2[flat] = opt.beta2 * m2[flat] + (1.0 - opt.beta2) * g * g;
                    const double mhat = m1[flat] / bc1;
                    const double vhat = m2[flat] / bc2;
                    param[j] -= lr * mhat / (std::sqrt(vhat) + opt.epsilon);
                }
            };
            for (std::size_t li = 0; li < model.arch.size(); ++li) {
                update(model.params.weights[li], batch_grads.weights[li]);
                update(model.params.biases[li], batch_grads.biases[li]);
            }
            if (!model.params.all_finite())
                throw DivergenceDetected("train: non-finite parameters in epoch " +
                                         std::to_string(epoch));
        }
        // Summed in dataset order so the value does not depend on the shuffle.
        double total = 0.0;
        for (double l : sample_losses) total += l;
        out.history.push_back(total / static_cast<double>(dataset.size()));
    }
    out.model = std::move(model);
    return out;
}

double grad_check(const EncoderModel& model, const Sample& sample, double h,
                  const LossWeighting& weighting, double positive_weight, std::size_t max_params,
                  std::uint64_t seed) {
    const auto analytic = backward(model, std::span<const Sample>(&sample, 1), weighting,
                                   positive_weight).grads;
    const std::size_t n = model.params.size();
    std::vector<std::size_t> picks(n);
    std::iota(picks.begin(), picks.end(), std::size_t{0});
    if (n > max_params) {
        Rng rng(derive_seed(seed, 0x6C4E));
        shuffle(picks.begin(), picks.end(), rng);
        picks.resize(max_params);
        std::sort(picks.begin(), picks.end());
    }

    const auto wts = loss_weights(sample.label, weighting);
    Workspace ws;
    auto eval = [&](const EncoderModel& m) {
        run_forward(m, sample.input, ws);
        return sample_loss(ws.acts.back().data(), sample.label, &wts, positive_weight, nullptr);
    };

    EncoderModel probe = model;
    double worst = 0.0;
    for (std::size_t p : picks) {
        const double orig = probe.params.at(p);
        probe.params.at(p) = orig + h;
        const double up = eval(probe);
        probe.params.at(p) = orig - h;
        const double down = eval(probe);
        probe.params.at(p) = orig;
        const double numeric = (up - down) / (2.0 * h);
        const double a = analytic.at(p);
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-12});
        worst = std::max(worst, std::abs(a - numeric) / denom);
    }
    return worst;
}

}  // namespace ppe
