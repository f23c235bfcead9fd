#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace darforge {

// Dense row-major float32 tensor. Image layout is (channels, height, width).
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<float> data);

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int> shape, float value);

    const std::vector<int>& shape() const { return shape_; }
    int dim(size_t i) const { return shape_[i]; }
    size_t rank() const { return shape_.size(); }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    float& operator[](size_t i) { return data_[i]; }
    float operator[](size_t i) const { return data_[i]; }

    // (c, y, x) access for rank-3 tensors, (y, x) for rank-2.
    float& at(int c, int y, int x) { return data_[(static_cast<size_t>(c) * shape_[1] + y) * shape_[2] + x]; }
    float at(int c, int y, int x) const { return data_[(static_cast<size_t>(c) * shape_[1] + y) * shape_[2] + x]; }
    float& at(int y, int x) { return data_[static_cast<size_t>(y) * shape_[1] + x]; }
    float at(int y, int x) const { return data_[static_cast<size_t>(y) * shape_[1] + x]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool all_finite() const;
    std::string shape_str() const;

private:
    std::vector<int> shape_;
    std::vector<float> data_;
};

// Product of dims; throws std::invalid_argument on non-positive entries.
size_t shape_product(const std::vector<int>& shape);

// max_i |a_i - b_i|; shapes must match.
float linf_distance(const Tensor& a, const Tensor& b);

// a - b, elementwise; shapes must match.
Tensor subtract(const Tensor& a, const Tensor& b);

} // namespace darforge
