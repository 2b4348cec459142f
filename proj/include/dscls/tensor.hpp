// Copyright (c) 2026, dscls contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace dscls {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major tensor of 64-bit floats, rank 0 to 3.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(Shape s, double fill = 0.0);
    Tensor(Shape s, std::vector<double> values);

    static Tensor scalar(double v) { return Tensor({}, std::vector<double>{v}); }

    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }

    // 2-D accessors: rank-1 tensors read as a single row.
    std::size_t rows() const;
    std::size_t cols() const;
    double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

    bool operator==(const Tensor&) const = default;
};

/// Named tensor set, ordered by name so iteration is deterministic.
using TensorMap = std::map<std::string, Tensor>;

} // namespace dscls
