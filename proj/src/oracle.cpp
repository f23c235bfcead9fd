// Double-precision loss oracle and its central-difference gradients.
// Deliberately independent of the float32 kernel stack: plain nested loops,
// no dispatch, everything in 64-bit. This is the reference the analytic
// gradients are checked against.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "darforge/model.hpp"

namespace darforge {
namespace {

struct DoubleParams {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    explicit DoubleParams(const Model& m) {
        weights.resize(m.layers.size());
        biases.resize(m.layers.size());
        for (size_t i = 0; i < m.layers.size(); ++i) {
            const Layer& l = m.layers[i];
            weights[i].assign(l.weight.data(), l.weight.data() + l.weight.size());
            biases[i].assign(l.bias.data(), l.bias.data() + l.bias.size());
        }
    }
};

double loss_double(const Model& model, const DoubleParams& params,
                   const std::vector<double>& image, int label) {
    std::vector<double> cur = image;
    std::vector<int> shape = model.input_shape;

    for (size_t li = 0; li < model.layers.size(); ++li) {
        const Layer& l = model.layers[li];
        const auto& w = params.weights[li];
        const auto& b = params.biases[li];
        switch (l.kind) {
            case LayerKind::conv2d: {
                const int C = shape[0], H = shape[1], W = shape[2];
                const int OH = (H + 2 * l.pad - l.kernel) / l.stride + 1;
                const int OW = (W + 2 * l.pad - l.kernel) / l.stride + 1;
                std::vector<double> out(static_cast<size_t>(l.out_channels) * OH * OW);
                for (int oc = 0; oc < l.out_channels; ++oc)
                    for (int oy = 0; oy < OH; ++oy)
                        for (int ox = 0; ox < OW; ++ox) {
                            double acc = b[oc];
                            for (int ic = 0; ic < C; ++ic)
                                for (int ky = 0; ky < l.kernel; ++ky)
                                    for (int kx = 0; kx < l.kernel; ++kx) {
                                        const int iy = oy * l.stride + ky - l.pad;
                                        const int ix = ox * l.stride + kx - l.pad;
                                        if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                                        acc += w[((static_cast<size_t>(oc) * C + ic) * l.kernel + ky) *
                                                     l.kernel + kx] *
                                               cur[(static_cast<size_t>(ic) * H + iy) * W + ix];
                                    }
                            out[(static_cast<size_t>(oc) * OH + oy) * OW + ox] = acc;
                        }
                cur = std::move(out);
                shape = {l.out_channels, OH, OW};
                break;
            }
            case LayerKind::dense: {
                std::vector<double> out(l.out_dim);
                for (int o = 0; o < l.out_dim; ++o) {
                    double acc = b[o];
                    for (int i = 0; i < l.in_dim; ++i)
                        acc += w[static_cast<size_t>(o) * l.in_dim + i] * cur[i];
                    out[o] = acc;
                }
                cur = std::move(out);
                shape = {l.out_dim};
                break;
            }
            case LayerKind::relu:
                for (auto& v : cur) v = v > 0.0 ? v : 0.0;
                break;
            case LayerKind::maxpool2d:
            case LayerKind::avgpool2d: {
                const int C = shape[0], H = shape[1], W = shape[2];
                const int OH = (H - l.pool) / l.pool_stride + 1;
                const int OW = (W - l.pool) / l.pool_stride + 1;
                std::vector<double> out(static_cast<size_t>(C) * OH * OW);
                for (int c = 0; c < C; ++c)
                    for (int oy = 0; oy < OH; ++oy)
                        for (int ox = 0; ox < OW; ++ox) {
                            double acc = l.kind == LayerKind::maxpool2d
                                             ? -std::numeric_limits<double>::infinity()
                                             : 0.0;
                            for (int ky = 0; ky < l.pool; ++ky)
                                for (int kx = 0; kx < l.pool; ++kx) {
                                    const double v = cur[(static_cast<size_t>(c) * H +
                                                          oy * l.pool_stride + ky) * W +
                                                         ox * l.pool_stride + kx];
                                    if (l.kind == LayerKind::maxpool2d)
                                        acc = v > acc ? v : acc;
                                    else
                                        acc += v;
                                }
                            if (l.kind == LayerKind::avgpool2d) acc /= l.pool * l.pool;
                            out[(static_cast<size_t>(c) * OH + oy) * OW + ox] = acc;
                        }
                cur = std::move(out);
                shape = {C, OH, OW};
                break;
            }
            case LayerKind::flatten:
                shape = {static_cast<int>(cur.size())};
                break;
            case LayerKind::softmax_xent: {
                double m = cur[0];
                for (double v : cur) m = v > m ? v : m;
                double sum = 0.0;
                for (double v : cur) sum += std::exp(v - m);
                return std::log(sum) - (cur[label] - m);
            }
        }
    }
    throw std::logic_error("model has no softmax_xent head");
}

} // namespace

double oracle_loss(const Model& model, const Tensor& image, int label) {
    if (image.shape() != model.input_shape)
        throw std::invalid_argument("oracle_loss: image shape mismatch");
    if (label < 0 || label >= model.num_classes)
        throw std::invalid_argument("oracle_loss: label out of range");
    DoubleParams params(model);
    std::vector<double> x(image.data(), image.data() + image.size());
    return loss_double(model, params, x, label);
}

Tensor finite_diff_gradient(const Model& model, const Tensor& image, int label, float h) {
    if (h <= 0.0f) throw std::invalid_argument("finite_diff_gradient: h must be positive");
    if (image.shape() != model.input_shape)
        throw std::invalid_argument("finite_diff_gradient: image shape mismatch");
    if (label < 0 || label >= model.num_classes)
        throw std::invalid_argument("finite_diff_gradient: label out of range");

    DoubleParams params(model);
    std::vector<double> x(image.data(), image.data() + image.size());
    const double hd = h;
    Tensor grad(image.shape());
    for (size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + hd;
        const double jp = loss_double(model, params, x, label);
        x[i] = orig - hd;
        const double jm = loss_double(model, params, x, label);
        x[i] = orig;
        grad[i] = static_cast<float>((jp - jm) / (2.0 * hd));
    }
    return grad;
}

Tensor finite_diff_param_gradient(const Model& model, const Tensor& image, int label,
                                  size_t layer_index, bool which_bias, float h) {
    if (h <= 0.0f) throw std::invalid_argument("finite_diff_param_gradient: h must be positive");
    if (layer_index >= model.layers.size() || !model.layers[layer_index].has_params())
        throw std::invalid_argument("finite_diff_param_gradient: layer has no parameters");

    DoubleParams params(model);
    std::vector<double> x(image.data(), image.data() + image.size());
    std::vector<double>& target =
        which_bias ? params.biases[layer_index] : params.weights[layer_index];
    const double hd = h;
    Tensor grad(which_bias ? model.layers[layer_index].bias.shape()
                           : model.layers[layer_index].weight.shape());
    for (size_t i = 0; i < target.size(); ++i) {
        const double orig = target[i];
        target[i] = orig + hd;
        const double jp = loss_double(model, params, x, label);
        target[i] = orig - hd;
        const double jm = loss_double(model, params, x, label);
        target[i] = orig;
        grad[i] = static_cast<float>((jp - jm) / (2.0 * hd));
    }
    return grad;
}

} // namespace darforge
