#pragma once

#include <cstddef>
#include <vector>

namespace xsec {

// Dense row-major array of 64-bit floats; the universal value carrier.
// Invariants (checked on construction and by validate()):
//   - data.size() == product(shape)
//   - every element is finite
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> shape_, std::vector<double> data_);

    static Tensor zeros(std::vector<std::size_t> shape_);
    static Tensor vector(std::vector<double> values);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    std::size_t size() const { return data.size(); }
    bool is_vector() const { return shape.size() == 1; }

    double operator[](std::size_t i) const { return data[i]; }
    double& operator[](std::size_t i) { return data[i]; }

    // Row-major matrix access; shape must be {rows, cols}.
    double at(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }
    double& at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }

    // Throws DimensionError / ValidationError when an invariant is broken.
    void validate() const;
};

bool same_shape(const Tensor& a, const Tensor& b);

} // namespace xsec
