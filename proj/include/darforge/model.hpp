#pragma once

#include <span>
#include <string>
#include <vector>

#include "darforge/tensor.hpp"

namespace darforge {

enum class LayerKind { conv2d, dense, relu, maxpool2d, avgpool2d, flatten, softmax_xent };

const char* layer_kind_name(LayerKind k);

// One layer of a sequential classifier. Weight layouts:
//   conv2d: weight (OC, IC, K, K), bias (OC); zero padding, stride >= 1
//   dense:  weight (out, in), bias (out)
// Pooling layers carry (pool, pool_stride) and no parameters.
struct Layer {
    LayerKind kind;
    int in_channels = 0, out_channels = 0, kernel = 0, stride = 1, pad = 0; // conv2d
    int in_dim = 0, out_dim = 0;                                           // dense
    int pool = 0, pool_stride = 0;                                         // pooling
    Tensor weight;
    Tensor bias;

    static Layer conv2d(int in_ch, int out_ch, int kernel, int stride, int pad);
    static Layer dense(int in_dim, int out_dim);
    static Layer relu();
    static Layer maxpool2d(int pool, int stride);
    static Layer avgpool2d(int pool, int stride);
    static Layer flatten();
    static Layer softmax_xent();

    bool has_params() const { return kind == LayerKind::conv2d || kind == LayerKind::dense; }
    size_t param_count() const { return weight.size() + bias.size(); }
};

// Sequential classifier theta. The last layer must be softmax_xent; forward
// runs it as a plain softmax, the loss path fuses it with cross-entropy.
struct Model {
    std::string name;
    std::vector<int> input_shape; // (C, H, W)
    int num_classes = 0;
    std::vector<Layer> layers;

    size_t param_count() const;
    // Output shape of every layer given input_shape; throws
    // std::invalid_argument on inconsistent geometry.
    std::vector<std::vector<int>> layer_output_shapes() const;
    void validate() const;
};

// Per-layer inputs captured during a forward pass, for backprop.
struct ForwardTrace {
    std::vector<Tensor> inputs; // inputs[i] = input tensor of layers[i]
    Tensor probabilities;
};

// theta(X): class-probability vector. Rejects shape mismatches.
Tensor forward(const Model& model, const Tensor& image);
Tensor forward(const Model& model, const Tensor& image, ForwardTrace& trace);

// Softmax probability of `label` under theta(X).
float confidence(const Model& model, const Tensor& image, int label);
// argmax of theta(X), first index on ties.
int predict(const Model& model, const Tensor& image);

struct GradientBundle {
    Tensor grad_input;                // dJ/dX, same shape as the image
    std::vector<Tensor> grad_weights; // per layer; empty tensor for layers without params
    std::vector<Tensor> grad_biases;
    float loss = 0.0f;                // cross-entropy at `label`
};

// Exact analytic gradients of J(theta, X, Y) = -log softmax(theta(X))[Y]
// with respect to the input and all parameters.
GradientBundle loss_and_input_gradient(const Model& model, const Tensor& image, int label);

// Lean path for attacks: input gradient only, no parameter gradients.
Tensor input_gradient(const Model& model, const Tensor& image, int label,
                      float* loss_out = nullptr);

// Central-difference oracle (J(x+h e_i) - J(x-h e_i)) / 2h per component.
// Runs an independent double-precision naive forward (no shared kernels),
// so the estimate is accurate enough to check the float32 analytic path.
Tensor finite_diff_gradient(const Model& model, const Tensor& image, int label, float h);

// Same oracle for one layer's weight (which_bias=false) or bias tensor.
Tensor finite_diff_param_gradient(const Model& model, const Tensor& image, int label,
                                  size_t layer_index, bool which_bias, float h);

// J evaluated by the double-precision oracle forward.
double oracle_loss(const Model& model, const Tensor& image, int label);

// One plain SGD step on the mean batch loss: w <- w - lr * dw. Returns the
// mean loss before the update. Deterministic: items accumulate in order.
float train_step(Model& model, std::span<const Tensor> batch,
                 std::span<const int> labels, float lr);

} // namespace darforge
