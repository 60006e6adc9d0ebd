#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace se3 {

using Shape = std::vector<std::size_t>;

/// Dense row-major array of doubles. Rank 0 (empty shape) holds one value.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() : data(1, 0.0) {}
    explicit Tensor(Shape s, double fill = 0.0);
    Tensor(Shape s, std::vector<double> values);

    static std::size_t count(const Shape& s);
    static Tensor scalar(double v) { return Tensor(Shape{}, v); }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t dim(std::size_t axis) const;
    double item() const;

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }
};

std::string shape_string(const Shape& s);

}  // namespace se3
