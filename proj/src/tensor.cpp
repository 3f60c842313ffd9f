#include "xens/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "xens/error.hpp"

namespace xens {

static size_t shape_product(const std::vector<size_t>& shape) {
    size_t p = 1;
    for (size_t d : shape) p *= d;
    return p;
}

Tensor::Tensor(std::vector<size_t> shape_, double fill)
    : shape(std::move(shape_)), data(shape_product(shape), fill) {}

Tensor::Tensor(std::vector<size_t> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
    if (shape_product(shape) != data.size())
        fail_dim("tensor data size " + std::to_string(data.size()) +
                 " does not match shape product " + std::to_string(shape_product(shape)));
}

size_t Tensor::rows() const {
    if (shape.size() != 2) fail_dim("rows() requires a 2-D tensor");
    return shape[0];
}

size_t Tensor::cols() const {
    if (shape.size() != 2) fail_dim("cols() requires a 2-D tensor");
    return shape[1];
}

double& Tensor::at(size_t r, size_t c) {
    if (shape.size() != 2 || r >= shape[0] || c >= shape[1])
        fail_dim("tensor index out of range");
    return data[r * shape[1] + c];
}

double Tensor::at(size_t r, size_t c) const {
    if (shape.size() != 2 || r >= shape[0] || c >= shape[1])
        fail_dim("tensor index out of range");
    return data[r * shape[1] + c];
}

Tensor Tensor::clipped01() const {
    Tensor out = *this;
    for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
    return out;
}

double linf_distance(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) fail_dim("linf_distance: shape mismatch");
    double m = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::fabs(a.data[i] - b.data[i]));
    return m;
}

double l2_distance(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) fail_dim("l2_distance: shape mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        s += d * d;
    }
    return std::sqrt(s);
}

}  // namespace xens
