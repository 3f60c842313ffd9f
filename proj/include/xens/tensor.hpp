#pragma once

#include <cstddef>
#include <vector>

namespace xens {

// Dense row-major tensor of doubles. Images in this toolkit are 2-D
// tensors with values in [0,1]; weight matrices are 2-D {rows, cols}.
struct Tensor {
    std::vector<size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<size_t> shape_, double fill = 0.0);
    Tensor(std::vector<size_t> shape_, std::vector<double> data_);

    size_t size() const { return data.size(); }
    size_t rows() const;
    size_t cols() const;

    double& at(size_t r, size_t c);
    double at(size_t r, size_t c) const;

    // Clamps every element into [0,1]; returns a copy.
    Tensor clipped01() const;

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    bool operator==(const Tensor& other) const {
        return shape == other.shape && data == other.data;
    }
};

double linf_distance(const Tensor& a, const Tensor& b);
double l2_distance(const Tensor& a, const Tensor& b);

}  // namespace xens
