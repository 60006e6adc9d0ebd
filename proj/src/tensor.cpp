#include "se3/tensor.hpp"

#include "se3/error.hpp"

namespace se3 {

std::size_t Tensor::count(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

Tensor::Tensor(Shape s, double fill) : shape(std::move(s)), data(count(shape), fill) {}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != count(shape)) {
        throw ArgumentError("Tensor: " + std::to_string(data.size()) + " values for shape " +
                            shape_string(shape));
    }
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape.size()) throw ArgumentError("Tensor: axis out of range for " + shape_string(shape));
    return shape[axis];
}

double Tensor::item() const {
    if (data.size() != 1) throw ArgumentError("Tensor::item on shape " + shape_string(shape));
    return data[0];
}

std::string shape_string(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

}  // namespace se3
