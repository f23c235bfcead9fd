#include "darforge/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "darforge/kernels.hpp"

namespace darforge {

const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::dense: return "dense";
        case LayerKind::relu: return "relu";
        case LayerKind::maxpool2d: return "maxpool2d";
        case LayerKind::avgpool2d: return "avgpool2d";
        case LayerKind::flatten: return "flatten";
        case LayerKind::softmax_xent: return "softmax_xent";
    }
    return "?";
}

Layer Layer::conv2d(int in_ch, int out_ch, int kernel, int stride, int pad) {
    if (in_ch < 1 || out_ch < 1 || kernel < 1 || stride < 1 || pad < 0)
        throw std::invalid_argument("conv2d: bad geometry");
    Layer l;
    l.kind = LayerKind::conv2d;
    l.in_channels = in_ch;
    l.out_channels = out_ch;
    l.kernel = kernel;
    l.stride = stride;
    l.pad = pad;
    l.weight = Tensor::zeros({out_ch, in_ch, kernel, kernel});
    l.bias = Tensor::zeros({out_ch});
    return l;
}

Layer Layer::dense(int in_dim, int out_dim) {
    if (in_dim < 1 || out_dim < 1) throw std::invalid_argument("dense: bad geometry");
    Layer l;
    l.kind = LayerKind::dense;
    l.in_dim = in_dim;
    l.out_dim = out_dim;
    l.weight = Tensor::zeros({out_dim, in_dim});
    l.bias = Tensor::zeros({out_dim});
    return l;
}

Layer Layer::relu() {
    Layer l;
    l.kind = LayerKind::relu;
    return l;
}

Layer Layer::maxpool2d(int pool, int stride) {
    if (pool < 1 || stride < 1) throw std::invalid_argument("maxpool2d: bad geometry");
    Layer l;
    l.kind = LayerKind::maxpool2d;
    l.pool = pool;
    l.pool_stride = stride;
    return l;
}

Layer Layer::avgpool2d(int pool, int stride) {
    if (pool < 1 || stride < 1) throw std::invalid_argument("avgpool2d: bad geometry");
    Layer l;
    l.kind = LayerKind::avgpool2d;
    l.pool = pool;
    l.pool_stride = stride;
    return l;
}

Layer Layer::flatten() {
    Layer l;
    l.kind = LayerKind::flatten;
    return l;
}

Layer Layer::softmax_xent() {
    Layer l;
    l.kind = LayerKind::softmax_xent;
    return l;
}

size_t Model::param_count() const {
    size_t n = 0;
    for (const auto& l : layers) n += l.param_count();
    return n;
}

namespace {

std::vector<int> layer_out_shape(const Layer& l, const std::vector<int>& in) {
    switch (l.kind) {
        case LayerKind::conv2d: {
            if (in.size() != 3 || in[0] != l.in_channels)
                throw std::invalid_argument("conv2d: input shape mismatch");
            const int oh = (in[1] + 2 * l.pad - l.kernel) / l.stride + 1;
            const int ow = (in[2] + 2 * l.pad - l.kernel) / l.stride + 1;
            if (in[1] + 2 * l.pad < l.kernel || in[2] + 2 * l.pad < l.kernel)
                throw std::invalid_argument("conv2d: kernel larger than padded input");
            return {l.out_channels, oh, ow};
        }
        case LayerKind::dense:
            if (in.size() != 1 || in[0] != l.in_dim)
                throw std::invalid_argument("dense: input shape mismatch");
            return {l.out_dim};
        case LayerKind::relu:
        case LayerKind::softmax_xent:
            return in;
        case LayerKind::maxpool2d:
        case LayerKind::avgpool2d: {
            if (in.size() != 3) throw std::invalid_argument("pool: rank-3 input required");
            const int oh = (in[1] - l.pool) / l.pool_stride + 1;
            const int ow = (in[2] - l.pool) / l.pool_stride + 1;
            if (in[1] < l.pool || in[2] < l.pool)
                throw std::invalid_argument("pool: window larger than input");
            return {in[0], oh, ow};
        }
        case LayerKind::flatten: {
            if (in.size() != 3) throw std::invalid_argument("flatten: rank-3 input required");
            return {static_cast<int>(shape_product(in))};
        }
    }
    throw std::invalid_argument("unknown layer kind");
}

void softmax_stable(const float* z, float* p, int n) {
    float m = z[0];
    for (int i = 1; i < n; ++i) m = std::max(m, z[i]);
    float sum = 0.0f;
    for (int i = 0; i < n; ++i) {
        p[i] = std::exp(z[i] - m);
        sum += p[i];
    }
    for (int i = 0; i < n; ++i) p[i] /= sum;
}

float xent_loss(const float* z, int n, int label) {
    float m = z[0];
    for (int i = 1; i < n; ++i) m = std::max(m, z[i]);
    float sum = 0.0f;
    for (int i = 0; i < n; ++i) sum += std::exp(z[i] - m);
    return std::log(sum) - (z[label] - m);
}

Tensor layer_forward(const Layer& l, const Tensor& in, const std::vector<int>& out_shape) {
    Tensor out(out_shape);
    switch (l.kind) {
        case LayerKind::conv2d:
            kernels::conv2d_forward(in.data(), in.dim(0), in.dim(1), in.dim(2),
                                    l.weight.data(), l.out_channels, l.kernel, l.stride, l.pad,
                                    l.bias.data(), out.data(), out.dim(1), out.dim(2));
            break;
        case LayerKind::dense:
            kernels::dense_forward(l.weight.data(), l.out_dim, l.in_dim, l.bias.data(),
                                   in.data(), out.data());
            break;
        case LayerKind::relu:
            kernels::relu_forward(in.data(), out.data(), in.size());
            break;
        case LayerKind::maxpool2d: {
            const int C = in.dim(0), H = in.dim(1), W = in.dim(2);
            const int OH = out.dim(1), OW = out.dim(2);
            for (int c = 0; c < C; ++c)
                for (int oy = 0; oy < OH; ++oy)
                    for (int ox = 0; ox < OW; ++ox) {
                        float best = -std::numeric_limits<float>::infinity();
                        for (int ky = 0; ky < l.pool; ++ky)
                            for (int kx = 0; kx < l.pool; ++kx) {
                                const float v = in.at(c, oy * l.pool_stride + ky,
                                                      ox * l.pool_stride + kx);
                                if (v > best) best = v;
                            }
                        out.at(c, oy, ox) = best;
                    }
            (void)H;
            (void)W;
            break;
        }
        case LayerKind::avgpool2d: {
            const int C = in.dim(0);
            const int OH = out.dim(1), OW = out.dim(2);
            const float inv = 1.0f / static_cast<float>(l.pool * l.pool);
            for (int c = 0; c < C; ++c)
                for (int oy = 0; oy < OH; ++oy)
                    for (int ox = 0; ox < OW; ++ox) {
                        float sum = 0.0f;
                        for (int ky = 0; ky < l.pool; ++ky)
                            for (int kx = 0; kx < l.pool; ++kx)
                                sum += in.at(c, oy * l.pool_stride + ky, ox * l.pool_stride + kx);
                        out.at(c, oy, ox) = sum * inv;
                    }
            break;
        }
        case LayerKind::flatten:
            for (size_t i = 0; i < in.size(); ++i) out[i] = in[i];
            break;
        case LayerKind::softmax_xent:
            softmax_stable(in.data(), out.data(), static_cast<int>(in.size()));
            break;
    }
    return out;
}

// Gradient wrt the layer input given the gradient wrt its output. gw/gb, if
// non-null, are accumulated into.
Tensor layer_backward(const Layer& l, const Tensor& in, const Tensor& gout,
                      Tensor* gw, Tensor* gb) {
    Tensor gin(in.shape());
    switch (l.kind) {
        case LayerKind::conv2d:
            kernels::conv2d_backward_data(l.weight.data(), l.out_channels, l.in_channels,
                                          l.kernel, l.stride, l.pad, gout.data(), gout.dim(1),
                                          gout.dim(2), gin.data(), in.dim(1), in.dim(2));
            if (gw)
                kernels::conv2d_backward_weights(in.data(), in.dim(0), in.dim(1), in.dim(2),
                                                 gout.data(), l.out_channels, gout.dim(1),
                                                 gout.dim(2), l.kernel, l.stride, l.pad,
                                                 gw->data(), gb->data());
            break;
        case LayerKind::dense:
            kernels::dense_backward_data(l.weight.data(), l.out_dim, l.in_dim, gout.data(),
                                         gin.data());
            if (gw)
                kernels::dense_backward_weights(in.data(), l.in_dim, gout.data(), l.out_dim,
                                                gw->data(), gb->data());
            break;
        case LayerKind::relu:
            kernels::relu_backward(in.data(), gout.data(), gin.data(), in.size());
            break;
        case LayerKind::maxpool2d: {
            const int C = in.dim(0);
            const int OH = gout.dim(1), OW = gout.dim(2);
            for (int c = 0; c < C; ++c)
                for (int oy = 0; oy < OH; ++oy)
                    for (int ox = 0; ox < OW; ++ox) {
                        float best = -std::numeric_limits<float>::infinity();
                        int by = 0, bx = 0;
                        for (int ky = 0; ky < l.pool; ++ky)
                            for (int kx = 0; kx < l.pool; ++kx) {
                                const int iy = oy * l.pool_stride + ky;
                                const int ix = ox * l.pool_stride + kx;
                                const float v = in.at(c, iy, ix);
                                if (v > best) {
                                    best = v;
                                    by = iy;
                                    bx = ix;
                                }
                            }
                        gin.at(c, by, bx) += gout.at(c, oy, ox);
                    }
            break;
        }
        case LayerKind::avgpool2d: {
            const int C = in.dim(0);
            const int OH = gout.dim(1), OW = gout.dim(2);
            const float inv = 1.0f / static_cast<float>(l.pool * l.pool);
            for (int c = 0; c < C; ++c)
                for (int oy = 0; oy < OH; ++oy)
                    for (int ox = 0; ox < OW; ++ox) {
                        const float g = gout.at(c, oy, ox) * inv;
                        for (int ky = 0; ky < l.pool; ++ky)
                            for (int kx = 0; kx < l.pool; ++kx)
                                gin.at(c, oy * l.pool_stride + ky, ox * l.pool_stride + kx) += g;
                    }
            break;
        }
        case LayerKind::flatten:
            for (size_t i = 0; i < gout.size(); ++i) gin[i] = gout[i];
            break;
        case LayerKind::softmax_xent:
            throw std::logic_error("softmax_xent is handled by the loss head");
    }
    return gin;
}

} // namespace

std::vector<std::vector<int>> Model::layer_output_shapes() const {
    std::vector<std::vector<int>> shapes;
    std::vector<int> cur = input_shape;
    for (const auto& l : layers) {
        cur = layer_out_shape(l, cur);
        shapes.push_back(cur);
    }
    return shapes;
}

void Model::validate() const {
    if (layers.empty() || layers.back().kind != LayerKind::softmax_xent)
        throw std::invalid_argument("model must end with a softmax_xent layer");
    for (size_t i = 0; i + 1 < layers.size(); ++i)
        if (layers[i].kind == LayerKind::softmax_xent)
            throw std::invalid_argument("softmax_xent must be the final layer");
    const auto shapes = layer_output_shapes();
    const auto& out = shapes.back();
    if (out.size() != 1 || out[0] != num_classes)
        throw std::invalid_argument("model output size does not match class count");
}

Tensor forward(const Model& model, const Tensor& image, ForwardTrace& trace) {
    if (image.shape() != model.input_shape)
        throw std::invalid_argument("forward: image shape " + image.shape_str() +
                                    " does not match model input");
    trace.inputs.clear();
    trace.inputs.reserve(model.layers.size());
    Tensor cur = image;
    std::vector<int> cur_shape = model.input_shape;
    for (const auto& l : model.layers) {
        const auto out_shape = layer_out_shape(l, cur_shape);
        Tensor next = layer_forward(l, cur, out_shape);
        trace.inputs.push_back(std::move(cur));
        cur = std::move(next);
        cur_shape = out_shape;
    }
    trace.probabilities = cur;
    return cur;
}

Tensor forward(const Model& model, const Tensor& image) {
    ForwardTrace trace;
    return forward(model, image, trace);
}

float confidence(const Model& model, const Tensor& image, int label) {
    const Tensor p = forward(model, image);
    if (label < 0 || label >= static_cast<int>(p.size()))
        throw std::invalid_argument("confidence: label out of range");
    return p[label];
}

int predict(const Model& model, const Tensor& image) {
    const Tensor p = forward(model, image);
    int best = 0;
    for (int i = 1; i < static_cast<int>(p.size()); ++i)
        if (p[i] > p[best]) best = i;
    return best;
}

namespace {

// Shared backward driver. gw/gb nullable.
Tensor backward_from_trace(const Model& model, const ForwardTrace& trace, int label,
                           float* loss_out, std::vector<Tensor>* gws,
                           std::vector<Tensor>* gbs) {
    const size_t L = model.layers.size();
    const Tensor& logits = trace.inputs.back(); // input of softmax_xent
    if (label < 0 || label >= static_cast<int>(logits.size()))
        throw std::invalid_argument("label out of range: " + std::to_string(label));
    if (loss_out) *loss_out = xent_loss(logits.data(), static_cast<int>(logits.size()), label);

    // Fused softmax + cross-entropy head: dJ/dlogits = p - onehot(label).
    Tensor grad = trace.probabilities;
    grad[label] -= 1.0f;

    for (size_t i = L - 1; i-- > 0;) {
        const Layer& l = model.layers[i];
        Tensor* gw = nullptr;
        Tensor* gb = nullptr;
        if (gws && l.has_params()) {
            gw = &(*gws)[i];
            gb = &(*gbs)[i];
        }
        grad = layer_backward(l, trace.inputs[i], grad, gw, gb);
    }
    return grad;
}

} // namespace

GradientBundle loss_and_input_gradient(const Model& model, const Tensor& image, int label) {
    ForwardTrace trace;
    forward(model, image, trace);
    GradientBundle out;
    out.grad_weights.resize(model.layers.size());
    out.grad_biases.resize(model.layers.size());
    for (size_t i = 0; i < model.layers.size(); ++i) {
        if (model.layers[i].has_params()) {
            out.grad_weights[i] = Tensor::zeros(model.layers[i].weight.shape());
            out.grad_biases[i] = Tensor::zeros(model.layers[i].bias.shape());
        }
    }
    out.grad_input =
        backward_from_trace(model, trace, label, &out.loss, &out.grad_weights, &out.grad_biases);
    return out;
}

Tensor input_gradient(const Model& model, const Tensor& image, int label, float* loss_out) {
    ForwardTrace trace;
    forward(model, image, trace);
    float loss = 0.0f;
    Tensor g = backward_from_trace(model, trace, label, &loss, nullptr, nullptr);
    if (loss_out) *loss_out = loss;
    return g;
}

float train_step(Model& model, std::span<const Tensor> batch, std::span<const int> labels,
                 float lr) {
    if (batch.empty() || batch.size() != labels.size())
        throw std::invalid_argument("train_step: empty batch or label count mismatch");
    if (lr < 0.0f) throw std::invalid_argument("train_step: negative learning rate");

    std::vector<Tensor> gws(model.layers.size()), gbs(model.layers.size());
    for (size_t i = 0; i < model.layers.size(); ++i) {
        if (model.layers[i].has_params()) {
            gws[i] = Tensor::zeros(model.layers[i].weight.shape());
            gbs[i] = Tensor::zeros(model.layers[i].bias.shape());
        }
    }

    float loss_sum = 0.0f;
    for (size_t b = 0; b < batch.size(); ++b) {
        ForwardTrace trace;
        forward(model, batch[b], trace);
        float loss = 0.0f;
        backward_from_trace(model, trace, labels[b], &loss, &gws, &gbs);
        loss_sum += loss;
    }

    const float scale = lr / static_cast<float>(batch.size());
    for (size_t i = 0; scale != 0.0f && i < model.layers.size(); ++i) {
        if (!model.layers[i].has_params()) continue;
        Layer& l = model.layers[i];
        for (size_t j = 0; j < l.weight.size(); ++j) l.weight[j] -= scale * gws[i][j];
        for (size_t j = 0; j < l.bias.size(); ++j) l.bias[j] -= scale * gbs[i][j];
    }
    return loss_sum / static_cast<float>(batch.size());
}

} // namespace darforge
