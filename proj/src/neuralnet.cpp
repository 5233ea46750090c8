#include "chartnet/neuralnet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "chartnet/error.hpp"
#include "chartnet/tensor.hpp"

namespace chartnet {

Tensor::Tensor(std::vector<int> dims) : shape(std::move(dims)), v(element_count(shape), 0.0) {}

std::size_t Tensor::element_count(const std::vector<int>& dims) {
    std::size_t n = 1;
    for (int d : dims) {
        if (d <= 0) raise(ErrorClass::Shape, "non-positive tensor extent");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

namespace {

// ---- small dense kernels -------------------------------------------------
// Plain row-major loops. The a == 0 skips are exact no-ops arithmetically and
// pay off because chart pixels and relu activations are mostly zero.

// C[MxN] = A[MxK] * B[KxN], C overwritten.
void gemm_nn(int m, int n, int k, const double* a, const double* b, double* c) {
    for (int i = 0; i < m; ++i) {
        double* crow = c + static_cast<std::size_t>(i) * n;
        std::fill(crow, crow + n, 0.0);
        const double* arow = a + static_cast<std::size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[KxN] += A[MxK]^T * B[MxN].
void gemm_tn_acc(int m, int n, int k, const double* a, const double* b, double* c) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * k;
        const double* brow = b + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            double* crow = c + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// Patch matrix for a 3x3 same-padded convolution: one row per output pixel,
// columns ordered (dr, dc, channel).
void im2col_3x3(const double* in, int h, int w, int c, double* patches) {
    const int patch_w = 9 * c;
    for (int r = 0; r < h; ++r) {
        for (int col = 0; col < w; ++col) {
            double* row = patches + static_cast<std::size_t>(r * w + col) * patch_w;
            for (int dr = 0; dr < 3; ++dr) {
                const int rr = r + dr - 1;
                for (int dc = 0; dc < 3; ++dc) {
                    const int cc = col + dc - 1;
                    double* dst = row + (dr * 3 + dc) * c;
                    if (rr < 0 || rr >= h || cc < 0 || cc >= w) {
                        std::fill(dst, dst + c, 0.0);
                    } else {
                        const double* src = in + static_cast<std::size_t>(rr * w + cc) * c;
                        std::copy(src, src + c, dst);
                    }
                }
            }
        }
    }
}

// Scatter-add of patch gradients back onto the input grid.
void col2im_3x3(const double* dpatches, int h, int w, int c, double* din) {
    std::fill(din, din + static_cast<std::size_t>(h) * w * c, 0.0);
    const int patch_w = 9 * c;
    for (int r = 0; r < h; ++r) {
        for (int col = 0; col < w; ++col) {
            const double* row = dpatches + static_cast<std::size_t>(r * w + col) * patch_w;
            for (int dr = 0; dr < 3; ++dr) {
                const int rr = r + dr - 1;
                if (rr < 0 || rr >= h) continue;
                for (int dc = 0; dc < 3; ++dc) {
                    const int cc = col + dc - 1;
                    if (cc < 0 || cc >= w) continue;
                    const double* src = row + (dr * 3 + dc) * c;
                    double* dst = din + static_cast<std::size_t>(rr * w + cc) * c;
                    for (int i = 0; i < c; ++i) dst[i] += src[i];
                }
            }
        }
    }
}

void check_hwc(const Tensor& t, const char* what) {
    if (t.shape.size() != 3) raise(ErrorClass::Shape, std::string(what) + ": expected a HxWxC tensor");
}

std::vector<double> relu_vec(const std::vector<double>& x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0 ? x[i] : 0.0;
    return out;
}

// Shared core of tensor/vector dropout.
void dropout_span(const double* in, double* out, std::size_t n, double rate, bool training, Rng& rng,
                  std::vector<std::uint8_t>* mask) {
    if (!(rate >= 0.0 && rate < 1.0)) raise(ErrorClass::Validation, "dropout rate outside [0, 1)");
    if (!training || rate == 0.0) {
        std::copy(in, in + n, out);
        return;
    }
    const double scale = 1.0 / (1.0 - rate);
    mask->resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const bool keep = rng.uniform() >= rate;
        (*mask)[i] = keep ? 1 : 0;
        out[i] = keep ? in[i] * scale : 0.0;
    }
}

}  // namespace

// ---- public layer ops ------------------------------------------------------

Tensor conv2d_forward(const Tensor& input, const ConvLayer& layer) {
    check_hwc(input, "conv2d_forward");
    const int h = input.dim(0), w = input.dim(1), c = input.dim(2);
    if (c != layer.in_channels) {
        raise(ErrorClass::Shape, "conv2d_forward: input has " + std::to_string(c) + " channels, layer expects " +
                                     std::to_string(layer.in_channels));
    }
    std::vector<double> patches(static_cast<std::size_t>(h) * w * 9 * c);
    im2col_3x3(input.v.data(), h, w, c, patches.data());

    Tensor out({h, w, layer.out_channels});
    gemm_nn(h * w, layer.out_channels, 9 * c, patches.data(), layer.kernels.data(), out.v.data());
    for (int p = 0; p < h * w; ++p) {
        double* row = out.v.data() + static_cast<std::size_t>(p) * layer.out_channels;
        for (int o = 0; o < layer.out_channels; ++o) row[o] += layer.biases[static_cast<std::size_t>(o)];
    }
    return out;
}

Tensor relu(const Tensor& input) {
    Tensor out = input;
    for (double& x : out.v) x = x > 0 ? x : 0.0;
    return out;
}

PoolResult maxpool_2x2(const Tensor& input) {
    check_hwc(input, "maxpool_2x2");
    const int h = input.dim(0), w = input.dim(1), c = input.dim(2);
    if (h % 2 != 0 || w % 2 != 0) {
        raise(ErrorClass::Shape, "maxpool_2x2: odd spatial dims " + std::to_string(h) + "x" + std::to_string(w));
    }
    PoolResult res{Tensor({h / 2, w / 2, c}), {}};
    res.argmax.resize(res.output.size());
    std::size_t k = 0;
    for (int r = 0; r < h; r += 2) {
        for (int col = 0; col < w; col += 2) {
            for (int ch = 0; ch < c; ++ch) {
                int best = (r * w + col) * c + ch;
                double best_val = input.v[static_cast<std::size_t>(best)];
                for (int dr = 0; dr < 2; ++dr) {
                    for (int dc = 0; dc < 2; ++dc) {
                        const int idx = ((r + dr) * w + col + dc) * c + ch;
                        const double val = input.v[static_cast<std::size_t>(idx)];
                        if (val > best_val) {
                            best_val = val;
                            best = idx;
                        }
                    }
                }
                res.output.v[k] = best_val;
                res.argmax[k] = best;
                ++k;
            }
        }
    }
    return res;
}

DropoutResult dropout(const Tensor& input, double rate, bool training, Rng& rng) {
    DropoutResult res{input, {}};
    dropout_span(input.v.data(), res.output.v.data(), input.size(), rate, training, rng, &res.mask);
    return res;
}

std::vector<double> dense_forward(const std::vector<double>& input, const DenseLayer& layer) {
    if (static_cast<int>(input.size()) != layer.in_dim) {
        raise(ErrorClass::Shape, "dense_forward: input size " + std::to_string(input.size()) +
                                     " vs layer in_dim " + std::to_string(layer.in_dim));
    }
    std::vector<double> out(static_cast<std::size_t>(layer.out_dim));
    for (int o = 0; o < layer.out_dim; ++o) {
        const double* wrow = layer.weights.data() + static_cast<std::size_t>(o) * layer.in_dim;
        double acc = layer.biases[static_cast<std::size_t>(o)];
        for (int j = 0; j < layer.in_dim; ++j) acc += wrow[j] * input[static_cast<std::size_t>(j)];
        out[static_cast<std::size_t>(o)] = acc;
    }
    return out;
}

std::vector<double> softmax(const std::vector<double>& logits) {
    const double hi = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double sum = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - hi);
        sum += out[i];
    }
    for (double& y : out) y /= sum;
    return out;
}

double cross_entropy_loss(const std::vector<double>& probs, TrendLabel target) {
    const double p = probs[static_cast<std::size_t>(target)];
    return -std::log(std::max(p, 1e-12));
}

// ---- model construction ----------------------------------------------------

namespace {

void init_glorot(std::vector<double>& weights, int fan_in, int fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& w : weights) w = rng.uniform(-limit, limit);
}

}  // namespace

CnnModel CnnModel::initialize(const ModelConfig& config) {
    const auto& a = config.arch;
    if (a.input_h < 2 || a.input_w < 2 || a.input_h % 2 != 0 || a.input_w % 2 != 0) {
        raise(ErrorClass::Shape, "input spatial dims must be even and >= 2");
    }
    if (!(config.dropout1 >= 0 && config.dropout1 < 1 && config.dropout2 >= 0 && config.dropout2 < 1)) {
        raise(ErrorClass::Validation, "dropout rates must lie in [0, 1)");
    }
    if (config.batch_size < 1) raise(ErrorClass::Validation, "batch_size must be >= 1");

    CnnModel m;
    m.config = config;
    m.conv1 = ConvLayer{a.input_c, a.conv1_out,
                        std::vector<double>(static_cast<std::size_t>(9) * a.input_c * a.conv1_out),
                        std::vector<double>(static_cast<std::size_t>(a.conv1_out), 0.0)};
    m.conv2 = ConvLayer{a.conv1_out, a.conv2_out,
                        std::vector<double>(static_cast<std::size_t>(9) * a.conv1_out * a.conv2_out),
                        std::vector<double>(static_cast<std::size_t>(a.conv2_out), 0.0)};
    m.dense1 = DenseLayer{a.flat_size(), a.dense_hidden,
                          std::vector<double>(static_cast<std::size_t>(a.flat_size()) * a.dense_hidden),
                          std::vector<double>(static_cast<std::size_t>(a.dense_hidden), 0.0)};
    m.dense2 = DenseLayer{a.dense_hidden, a.classes,
                          std::vector<double>(static_cast<std::size_t>(a.dense_hidden) * a.classes),
                          std::vector<double>(static_cast<std::size_t>(a.classes), 0.0)};

    Rng rng(config.seed);
    init_glorot(m.conv1.kernels, 9 * a.input_c, 9 * a.conv1_out, rng);
    init_glorot(m.conv2.kernels, 9 * a.conv1_out, 9 * a.conv2_out, rng);
    init_glorot(m.dense1.weights, a.flat_size(), a.dense_hidden, rng);
    init_glorot(m.dense2.weights, a.dense_hidden, a.classes, rng);
    return m;
}

std::size_t CnnModel::parameter_count() const {
    return conv1.kernels.size() + conv1.biases.size() + conv2.kernels.size() + conv2.biases.size() +
           dense1.weights.size() + dense1.biases.size() + dense2.weights.size() + dense2.biases.size();
}

Gradients Gradients::zeros_like(const CnnModel& model) {
    Gradients g;
    g.conv1 = ConvLayer{model.conv1.in_channels, model.conv1.out_channels,
                        std::vector<double>(model.conv1.kernels.size(), 0.0),
                        std::vector<double>(model.conv1.biases.size(), 0.0)};
    g.conv2 = ConvLayer{model.conv2.in_channels, model.conv2.out_channels,
                        std::vector<double>(model.conv2.kernels.size(), 0.0),
                        std::vector<double>(model.conv2.biases.size(), 0.0)};
    g.dense1 = DenseLayer{model.dense1.in_dim, model.dense1.out_dim,
                          std::vector<double>(model.dense1.weights.size(), 0.0),
                          std::vector<double>(model.dense1.biases.size(), 0.0)};
    g.dense2 = DenseLayer{model.dense2.in_dim, model.dense2.out_dim,
                          std::vector<double>(model.dense2.weights.size(), 0.0),
                          std::vector<double>(model.dense2.biases.size(), 0.0)};
    return g;
}

// ---- forward / backward ----------------------------------------------------

namespace {

SampleTrace forward_one(const CnnModel& model, const Tensor& input, bool training, Rng& rng) {
    const auto& cfg = model.config;
    SampleTrace t;
    t.input = input;
    t.conv1_pre = conv2d_forward(input, model.conv1);
    const Tensor act1 = relu(t.conv1_pre);
    t.conv2_pre = conv2d_forward(act1, model.conv2);
    const Tensor act2 = relu(t.conv2_pre);
    auto pooled = maxpool_2x2(act2);
    t.pool_out = std::move(pooled.output);
    t.pool_argmax = std::move(pooled.argmax);

    t.drop1_out.resize(t.pool_out.size());
    dropout_span(t.pool_out.v.data(), t.drop1_out.data(), t.pool_out.size(), cfg.dropout1, training, rng,
                 &t.drop1_mask);

    t.dense1_pre = dense_forward(t.drop1_out, model.dense1);
    const std::vector<double> act3 = relu_vec(t.dense1_pre);

    t.drop2_out.resize(act3.size());
    dropout_span(act3.data(), t.drop2_out.data(), act3.size(), cfg.dropout2, training, rng, &t.drop2_mask);

    t.probs = softmax(dense_forward(t.drop2_out, model.dense2));
    return t;
}

// Accumulates one sample's gradient contribution (unscaled) into g.
void backward_one(const CnnModel& model, const SampleTrace& t, TrendLabel target, Gradients& g) {
    const auto& cfg = model.config;
    const int classes = model.dense2.out_dim;
    const int hidden = model.dense1.out_dim;
    const int flat = model.dense1.in_dim;

    // softmax + cross-entropy
    std::vector<double> dlogits(t.probs);
    dlogits[static_cast<std::size_t>(target)] -= 1.0;

    // dense2
    std::vector<double> ddrop2(static_cast<std::size_t>(hidden), 0.0);
    for (int o = 0; o < classes; ++o) {
        const double d = dlogits[static_cast<std::size_t>(o)];
        g.dense2.biases[static_cast<std::size_t>(o)] += d;
        double* grow = g.dense2.weights.data() + static_cast<std::size_t>(o) * hidden;
        const double* wrow = model.dense2.weights.data() + static_cast<std::size_t>(o) * hidden;
        for (int j = 0; j < hidden; ++j) {
            grow[j] += d * t.drop2_out[static_cast<std::size_t>(j)];
            ddrop2[static_cast<std::size_t>(j)] += d * wrow[j];
        }
    }

    // dropout2 and the dense1 relu
    std::vector<double> ddense1_pre(static_cast<std::size_t>(hidden));
    const double scale2 = 1.0 / (1.0 - cfg.dropout2);
    for (int j = 0; j < hidden; ++j) {
        double d = ddrop2[static_cast<std::size_t>(j)];
        if (!t.drop2_mask.empty()) d = t.drop2_mask[static_cast<std::size_t>(j)] ? d * scale2 : 0.0;
        ddense1_pre[static_cast<std::size_t>(j)] = t.dense1_pre[static_cast<std::size_t>(j)] > 0 ? d : 0.0;
    }

    // dense1
    std::vector<double> ddrop1(static_cast<std::size_t>(flat), 0.0);
    for (int o = 0; o < hidden; ++o) {
        const double d = ddense1_pre[static_cast<std::size_t>(o)];
        g.dense1.biases[static_cast<std::size_t>(o)] += d;
        double* grow = g.dense1.weights.data() + static_cast<std::size_t>(o) * flat;
        const double* wrow = model.dense1.weights.data() + static_cast<std::size_t>(o) * flat;
        if (d == 0.0) continue;
        for (int j = 0; j < flat; ++j) {
            grow[j] += d * t.drop1_out[static_cast<std::size_t>(j)];
            ddrop1[static_cast<std::size_t>(j)] += d * wrow[j];
        }
    }

    // dropout1
    std::vector<double> dpool(static_cast<std::size_t>(flat));
    const double scale1 = 1.0 / (1.0 - cfg.dropout1);
    for (int j = 0; j < flat; ++j) {
        double d = ddrop1[static_cast<std::size_t>(j)];
        if (!t.drop1_mask.empty()) d = t.drop1_mask[static_cast<std::size_t>(j)] ? d * scale1 : 0.0;
        dpool[static_cast<std::size_t>(j)] = d;
    }

    // maxpool scatter
    const int h = t.conv2_pre.dim(0), w = t.conv2_pre.dim(1);
    const int c2 = model.conv2.out_channels;
    std::vector<double> dact2(static_cast<std::size_t>(h) * w * c2, 0.0);
    for (std::size_t k = 0; k < t.pool_argmax.size(); ++k) {
        dact2[static_cast<std::size_t>(t.pool_argmax[k])] += dpool[k];
    }

    // conv2 relu
    std::vector<double> dconv2_pre(dact2.size());
    for (std::size_t i = 0; i < dact2.size(); ++i) {
        dconv2_pre[i] = t.conv2_pre.v[i] > 0 ? dact2[i] : 0.0;
    }

    // conv2: act1 patches for the kernel gradient, transposed kernels for the
    // input gradient
    const int c1 = model.conv1.out_channels;
    const Tensor act1 = relu(t.conv1_pre);
    std::vector<double> patches(static_cast<std::size_t>(h) * w * 9 * c1);
    im2col_3x3(act1.v.data(), h, w, c1, patches.data());
    gemm_tn_acc(h * w, c2, 9 * c1, patches.data(), dconv2_pre.data(), g.conv2.kernels.data());
    for (int p = 0; p < h * w; ++p) {
        const double* row = dconv2_pre.data() + static_cast<std::size_t>(p) * c2;
        for (int o = 0; o < c2; ++o) g.conv2.biases[static_cast<std::size_t>(o)] += row[o];
    }

    std::vector<double> kernels_t(static_cast<std::size_t>(c2) * 9 * c1);
    for (int p = 0; p < 9 * c1; ++p) {
        for (int o = 0; o < c2; ++o) {
            kernels_t[static_cast<std::size_t>(o) * (9 * c1) + p] =
                model.conv2.kernels[static_cast<std::size_t>(p) * c2 + o];
        }
    }
    std::vector<double> dpatches(patches.size());
    gemm_nn(h * w, 9 * c1, c2, dconv2_pre.data(), kernels_t.data(), dpatches.data());
    std::vector<double> dact1(static_cast<std::size_t>(h) * w * c1);
    col2im_3x3(dpatches.data(), h, w, c1, dact1.data());

    // conv1 relu
    std::vector<double> dconv1_pre(dact1.size());
    for (std::size_t i = 0; i < dact1.size(); ++i) {
        dconv1_pre[i] = t.conv1_pre.v[i] > 0 ? dact1[i] : 0.0;
    }

    // conv1
    const int c0 = model.conv1.in_channels;
    std::vector<double> patches0(static_cast<std::size_t>(h) * w * 9 * c0);
    im2col_3x3(t.input.v.data(), h, w, c0, patches0.data());
    gemm_tn_acc(h * w, c1, 9 * c0, patches0.data(), dconv1_pre.data(), g.conv1.kernels.data());
    for (int p = 0; p < h * w; ++p) {
        const double* row = dconv1_pre.data() + static_cast<std::size_t>(p) * c1;
        for (int o = 0; o < c1; ++o) g.conv1.biases[static_cast<std::size_t>(o)] += row[o];
    }
}

void scale_gradients(Gradients& g, double factor) {
    auto scale = [factor](std::vector<double>& v) {
        for (double& x : v) x *= factor;
    };
    scale(g.conv1.kernels);
    scale(g.conv1.biases);
    scale(g.conv2.kernels);
    scale(g.conv2.biases);
    scale(g.dense1.weights);
    scale(g.dense1.biases);
    scale(g.dense2.weights);
    scale(g.dense2.biases);
}

std::size_t argmax_index(const std::vector<double>& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

}  // namespace

std::vector<SampleTrace> forward_train(const CnnModel& model, std::span<const Tensor> inputs, Rng& rng) {
    std::vector<SampleTrace> traces;
    traces.reserve(inputs.size());
    for (const Tensor& x : inputs) traces.push_back(forward_one(model, x, true, rng));
    return traces;
}

Gradients backward(const CnnModel& model, const std::vector<SampleTrace>& traces,
                   std::span<const TrendLabel> targets) {
    if (traces.empty() || traces.size() != targets.size()) {
        raise(ErrorClass::State, "backward called without a matching forward pass");
    }
    for (const auto& t : traces) {
        if (t.probs.size() != static_cast<std::size_t>(model.dense2.out_dim)) {
            raise(ErrorClass::State, "forward trace does not match this model");
        }
    }
    Gradients g = Gradients::zeros_like(model);
    for (std::size_t i = 0; i < traces.size(); ++i) backward_one(model, traces[i], targets[i], g);
    scale_gradients(g, 1.0 / static_cast<double>(traces.size()));
    return g;
}

BatchGradients compute_gradients(const CnnModel& model, std::span<const Tensor> inputs,
                                 std::span<const TrendLabel> targets, Rng& rng) {
    if (inputs.empty() || inputs.size() != targets.size()) {
        raise(ErrorClass::Validation, "batch inputs and targets must align and be non-empty");
    }
    BatchGradients out;
    out.grads = Gradients::zeros_like(model);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        SampleTrace t = forward_one(model, inputs[i], true, rng);
        out.mean_loss += cross_entropy_loss(t.probs, targets[i]);
        if (argmax_index(t.probs) == static_cast<std::size_t>(targets[i])) ++out.correct;
        backward_one(model, t, targets[i], out.grads);
    }
    out.mean_loss /= static_cast<double>(inputs.size());
    scale_gradients(out.grads, 1.0 / static_cast<double>(inputs.size()));
    return out;
}

double batch_loss(const CnnModel& model, std::span<const Tensor> inputs, std::span<const TrendLabel> targets,
                  Rng& rng) {
    if (inputs.empty() || inputs.size() != targets.size()) {
        raise(ErrorClass::Validation, "batch inputs and targets must align and be non-empty");
    }
    double loss = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const SampleTrace t = forward_one(model, inputs[i], true, rng);
        loss += cross_entropy_loss(t.probs, targets[i]);
    }
    return loss / static_cast<double>(inputs.size());
}

std::vector<double> forward_inference(const CnnModel& model, const Tensor& input) {
    Rng unused(0);
    return forward_one(model, input, false, unused).probs;
}

Tensor image_to_tensor(const ChartImage& image) {
    Tensor t({ChartImage::kSize, ChartImage::kSize, 1});
    for (int r = 0; r < ChartImage::kSize; ++r) {
        for (int c = 0; c < ChartImage::kSize; ++c) {
            t.at(r, c, 0) = image.pixel(r, c) ? 1.0 : 0.0;
        }
    }
    return t;
}

std::pair<TrendLabel, std::array<double, 3>> predict(const CnnModel& model, const ChartImage& image) {
    const auto& a = model.config.arch;
    if (a.input_h != ChartImage::kSize || a.input_w != ChartImage::kSize || a.input_c != 1 || a.classes != 3) {
        raise(ErrorClass::Shape, "model architecture does not accept 30x30 chart images");
    }
    const std::vector<double> probs = forward_inference(model, image_to_tensor(image));
    std::array<double, 3> p{probs[0], probs[1], probs[2]};
    return {static_cast<TrendLabel>(argmax_index(probs)), p};
}

// ---- training loop ----------------------------------------------------------

namespace {

template <typename F>
void for_each_param(CnnModel& m, Gradients& g, F&& f) {
    f(m.conv1.kernels, g.conv1.kernels);
    f(m.conv1.biases, g.conv1.biases);
    f(m.conv2.kernels, g.conv2.kernels);
    f(m.conv2.biases, g.conv2.biases);
    f(m.dense1.weights, g.dense1.weights);
    f(m.dense1.biases, g.dense1.biases);
    f(m.dense2.weights, g.dense2.weights);
    f(m.dense2.biases, g.dense2.biases);
}

struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    long t = 0;
};

}  // namespace

std::pair<CnnModel, TrainReport> train(const LabeledDataset& dataset, const ModelConfig& config,
                                       const LabeledDataset* validation) {
    if (dataset.samples.empty()) raise(ErrorClass::Validation, "cannot train on an empty dataset");
    if (config.epochs < 0) raise(ErrorClass::Validation, "negative epoch count");

    CnnModel model = CnnModel::initialize(config);
    if (model.config.arch.input_h != ChartImage::kSize || model.config.arch.input_w != ChartImage::kSize ||
        model.config.arch.input_c != 1) {
        raise(ErrorClass::Shape, "chart-image training requires the 30x30x1 input architecture");
    }

    std::vector<Tensor> tensors;
    std::vector<TrendLabel> labels;
    tensors.reserve(dataset.samples.size());
    labels.reserve(dataset.samples.size());
    for (const auto& s : dataset.samples) {
        tensors.push_back(image_to_tensor(s.image));
        labels.push_back(s.label);
    }

    const std::size_t n = tensors.size();
    const std::size_t batch_size = static_cast<std::size_t>(config.batch_size);

    // separate stream from parameter init so both are reproducible on their own
    Rng rng(config.seed ^ 0x747261696e000000ULL);

    AdamState adam;
    if (config.optimizer == ModelConfig::Optimizer::Adam) {
        Gradients proto = Gradients::zeros_like(model);
        for_each_param(model, proto, [&](std::vector<double>&, std::vector<double>& g) {
            adam.m.emplace_back(g.size(), 0.0);
            adam.v.emplace_back(g.size(), 0.0);
        });
    }

    TrainReport report;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<Tensor> batch_x;
    std::vector<TrendLabel> batch_y;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0;
        std::size_t epoch_correct = 0;

        for (std::size_t start = 0; start < n; start += batch_size) {
            const std::size_t count = std::min(batch_size, n - start);
            batch_x.clear();
            batch_y.clear();
            for (std::size_t i = 0; i < count; ++i) {
                batch_x.push_back(tensors[order[start + i]]);
                batch_y.push_back(labels[order[start + i]]);
            }

            BatchGradients bg = compute_gradients(model, batch_x, batch_y, rng);
            epoch_loss += bg.mean_loss * static_cast<double>(count);
            epoch_correct += bg.correct;

            if (config.optimizer == ModelConfig::Optimizer::Adam) {
                ++adam.t;
                const double c1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(adam.t));
                const double c2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(adam.t));
                std::size_t slot = 0;
                for_each_param(model, bg.grads, [&](std::vector<double>& p, std::vector<double>& grad) {
                    auto& m1 = adam.m[slot];
                    auto& m2 = adam.v[slot];
                    for (std::size_t i = 0; i < p.size(); ++i) {
                        m1[i] = config.adam_beta1 * m1[i] + (1.0 - config.adam_beta1) * grad[i];
                        m2[i] = config.adam_beta2 * m2[i] + (1.0 - config.adam_beta2) * grad[i] * grad[i];
                        const double mhat = m1[i] / c1;
                        const double vhat = m2[i] / c2;
                        p[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.adam_epsilon);
                    }
                    ++slot;
                });
            } else {
                for_each_param(model, bg.grads, [&](std::vector<double>& p, std::vector<double>& grad) {
                    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= config.learning_rate * grad[i];
                });
            }
        }

        report.epochs.push_back(EpochStats{epoch + 1, epoch_loss / static_cast<double>(n),
                                           static_cast<double>(epoch_correct) / static_cast<double>(n)});
    }

    if (validation && !validation->samples.empty()) {
        std::size_t correct = 0;
        for (const auto& s : validation->samples) {
            if (predict(model, s.image).first == s.label) ++correct;
        }
        report.validation_accuracy = static_cast<double>(correct) / static_cast<double>(validation->samples.size());
    }

    return {std::move(model), std::move(report)};
}

// ---- persistence -------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'C', 'H', 'A', 'R', 'T', 'N', 'N', '1'};

static_assert(std::endian::native == std::endian::little, "model files are little-endian");

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }

std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), 4)) raise(ErrorClass::Format, "truncated model stream");
    return v;
}

std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), 8)) raise(ErrorClass::Format, "truncated model stream");
    return v;
}

void write_array(std::ostream& out, const std::vector<double>& v) {
    write_u64(out, v.size());
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_array(std::istream& in, std::vector<double>& v, std::size_t expected) {
    const std::uint64_t count = read_u64(in);
    if (count != expected) {
        raise(ErrorClass::Format, "parameter array size " + std::to_string(count) +
                                      " does not match the declared architecture (" + std::to_string(expected) + ")");
    }
    v.resize(count);
    if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(double)))) {
        raise(ErrorClass::Format, "truncated model stream");
    }
    for (double x : v) {
        if (!std::isfinite(x)) raise(ErrorClass::Format, "non-finite parameter value");
    }
}

nlohmann::json arch_to_json(const ArchitectureSpec& a) {
    return {{"input_h", a.input_h},         {"input_w", a.input_w}, {"input_c", a.input_c},
            {"conv1_out", a.conv1_out},     {"conv2_out", a.conv2_out}, {"dense_hidden", a.dense_hidden},
            {"classes", a.classes}};
}

ArchitectureSpec arch_from_json(const nlohmann::json& j) {
    ArchitectureSpec a;
    a.input_h = j.at("input_h").get<int>();
    a.input_w = j.at("input_w").get<int>();
    a.input_c = j.at("input_c").get<int>();
    a.conv1_out = j.at("conv1_out").get<int>();
    a.conv2_out = j.at("conv2_out").get<int>();
    a.dense_hidden = j.at("dense_hidden").get<int>();
    a.classes = j.at("classes").get<int>();
    return a;
}

}  // namespace

void save_model(const CnnModel& model, std::ostream& out) {
    nlohmann::json header;
    header["arch"] = arch_to_json(model.config.arch);
    header["config"] = {
        {"epochs", model.config.epochs},
        {"batch_size", model.config.batch_size},
        {"learning_rate", model.config.learning_rate},
        {"seed", model.config.seed},
        {"dropout1", model.config.dropout1},
        {"dropout2", model.config.dropout2},
        {"optimizer", model.config.optimizer == ModelConfig::Optimizer::Adam ? "adam" : "sgd"},
        {"adam_beta1", model.config.adam_beta1},
        {"adam_beta2", model.config.adam_beta2},
        {"adam_epsilon", model.config.adam_epsilon},
    };
    const std::string header_text = header.dump();

    out.write(kMagic, sizeof(kMagic));
    write_u32(out, static_cast<std::uint32_t>(header_text.size()));
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    write_array(out, model.conv1.kernels);
    write_array(out, model.conv1.biases);
    write_array(out, model.conv2.kernels);
    write_array(out, model.conv2.biases);
    write_array(out, model.dense1.weights);
    write_array(out, model.dense1.biases);
    write_array(out, model.dense2.weights);
    write_array(out, model.dense2.biases);
    if (!out) raise(ErrorClass::Io, "failed to write model stream");
}

CnnModel load_model(std::istream& in) {
    char magic[8] = {};
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        raise(ErrorClass::Format, "not a model stream (bad magic)");
    }
    const std::uint32_t header_len = read_u32(in);
    std::string header_text(header_len, '\0');
    if (!in.read(header_text.data(), header_len)) raise(ErrorClass::Format, "truncated model stream");

    nlohmann::json header = nlohmann::json::parse(header_text, nullptr, false);
    if (header.is_discarded()) raise(ErrorClass::Format, "corrupt model header");

    ModelConfig config;
    try {
        config.arch = arch_from_json(header.at("arch"));
        const auto& c = header.at("config");
        config.epochs = c.at("epochs").get<int>();
        config.batch_size = c.at("batch_size").get<int>();
        config.learning_rate = c.at("learning_rate").get<double>();
        config.seed = c.at("seed").get<std::uint64_t>();
        config.dropout1 = c.at("dropout1").get<double>();
        config.dropout2 = c.at("dropout2").get<double>();
        config.optimizer = c.at("optimizer").get<std::string>() == "adam" ? ModelConfig::Optimizer::Adam
                                                                          : ModelConfig::Optimizer::Sgd;
        config.adam_beta1 = c.at("adam_beta1").get<double>();
        config.adam_beta2 = c.at("adam_beta2").get<double>();
        config.adam_epsilon = c.at("adam_epsilon").get<double>();
    } catch (const nlohmann::json::exception&) {
        raise(ErrorClass::Format, "corrupt model header");
    }

    const auto& a = config.arch;
    CnnModel model;
    model.config = config;
    model.conv1.in_channels = a.input_c;
    model.conv1.out_channels = a.conv1_out;
    model.conv2.in_channels = a.conv1_out;
    model.conv2.out_channels = a.conv2_out;
    model.dense1.in_dim = a.flat_size();
    model.dense1.out_dim = a.dense_hidden;
    model.dense2.in_dim = a.dense_hidden;
    model.dense2.out_dim = a.classes;

    read_array(in, model.conv1.kernels, static_cast<std::size_t>(9) * a.input_c * a.conv1_out);
    read_array(in, model.conv1.biases, static_cast<std::size_t>(a.conv1_out));
    read_array(in, model.conv2.kernels, static_cast<std::size_t>(9) * a.conv1_out * a.conv2_out);
    read_array(in, model.conv2.biases, static_cast<std::size_t>(a.conv2_out));
    read_array(in, model.dense1.weights, static_cast<std::size_t>(a.flat_size()) * a.dense_hidden);
    read_array(in, model.dense1.biases, static_cast<std::size_t>(a.dense_hidden));
    read_array(in, model.dense2.weights, static_cast<std::size_t>(a.dense_hidden) * a.classes);
    read_array(in, model.dense2.biases, static_cast<std::size_t>(a.classes));
    return model;
}

void save_model_file(const CnnModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorClass::Io, "cannot open '" + path + "' for writing");
    save_model(model, out);
}

CnnModel load_model_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorClass::Io, "cannot open '" + path + "'");
    return load_model(in);
}

}  // namespace chartnet
