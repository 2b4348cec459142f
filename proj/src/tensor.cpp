// Copyright (c) 2026, dscls contributors
// SPDX-License-Identifier: Apache-2.0

#include "dscls/tensor.hpp"

#include <stdexcept>

namespace dscls {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) {
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) {
            s += "x";
        }
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(Shape s, double fill) : shape(std::move(s)), data(shape_numel(shape), fill) {}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != shape_numel(shape)) {
        throw std::invalid_argument("tensor of shape " + shape_str(shape) + " given " +
                                    std::to_string(data.size()) + " values");
    }
}

std::size_t Tensor::rows() const {
    if (shape.empty()) {
        return 1;
    }
    std::size_t r = 1;
    for (std::size_t i = 0; i + 1 < shape.size(); ++i) {
        r *= shape[i];
    }
    return r;
}

std::size_t Tensor::cols() const { return shape.empty() ? 1 : shape.back(); }

} // namespace dscls
