#include "xsec/tensor.hpp"

#include "xsec/error.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace xsec {

Tensor::Tensor(std::vector<std::size_t> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
    validate();
}

Tensor Tensor::zeros(std::vector<std::size_t> shape_) {
    std::size_t n = 1;
    for (std::size_t d : shape_) n *= d;
    return Tensor(std::move(shape_), std::vector<double>(n, 0.0));
}

Tensor Tensor::vector(std::vector<double> values) {
    return Tensor({values.size()}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor({rows, cols}, std::move(values));
}

void Tensor::validate() const {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) throw DimensionError("tensor shape has a zero dimension");
        n *= d;
    }
    if (n != data.size()) {
        throw DimensionError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape product " + std::to_string(n));
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!std::isfinite(data[i])) {
            throw ValidationError("tensor element " + std::to_string(i) + " is not finite");
        }
    }
}

bool same_shape(const Tensor& a, const Tensor& b) {
    return a.shape == b.shape;
}

} // namespace xsec
