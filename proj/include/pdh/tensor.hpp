#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "pdh/error.hpp"

namespace pdh {

// Dense row-major array of doubles.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0)
        : shape(std::move(dims)), data(volume(shape), fill) {}

    Tensor(std::vector<std::size_t> dims, std::vector<double> values)
        : shape(std::move(dims)), data(std::move(values)) {
        if (volume(shape) != data.size()) {
            throw DimensionError("tensor shape " + shape_string(shape) + " does not hold " +
                                 std::to_string(data.size()) + " values");
        }
    }

    std::size_t size() const noexcept { return data.size(); }
    std::size_t rank() const noexcept { return shape.size(); }

    // Leading dimension (batch) and the per-row element count.
    std::size_t rows() const noexcept { return shape.empty() ? 0 : shape.front(); }
    std::size_t row_size() const noexcept { return rows() == 0 ? 0 : size() / rows(); }

    std::span<double> row(std::size_t r) { return {data.data() + r * row_size(), row_size()}; }
    std::span<const double> row(std::size_t r) const {
        return {data.data() + r * row_size(), row_size()};
    }

    static std::size_t volume(const std::vector<std::size_t>& dims) {
        return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>{});
    }

    static std::string shape_string(const std::vector<std::size_t>& dims) {
        std::string s = "(";
        for (std::size_t i = 0; i < dims.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(dims[i]);
        }
        return s + ")";
    }
};

}  // namespace pdh
