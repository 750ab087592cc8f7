// SPDX-FileCopyrightText: © 2026 The muonrec authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "muonrec/aligned.hpp"
#include "muonrec/linalg.hpp"

namespace muonrec {

/// Rank-1 or rank-2 dense tensor of doubles, row-major.
class Tensor {
public:
    Tensor() = default;

    static Tensor vector(std::size_t n, double fill = 0.0);
    static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    static Tensor from_matrix(const linalg::Matrix& m);

    std::size_t rank() const noexcept { return m_shape.size(); }
    const std::vector<std::size_t>& shape() const noexcept { return m_shape; }
    std::size_t rows() const noexcept { return m_shape.empty() ? 0 : m_shape[0]; }
    std::size_t cols() const noexcept { return m_shape.size() == 2 ? m_shape[1] : 1; }
    std::size_t size() const noexcept { return m_data.size(); }

    double* raw() noexcept { return m_data.data(); }
    const double* raw() const noexcept { return m_data.data(); }
    std::span<double> data() noexcept { return m_data; }
    std::span<const double> data() const noexcept { return m_data; }

    double& operator[](std::size_t i) { return m_data[i]; }
    double operator[](std::size_t i) const { return m_data[i]; }

    /// Copy of a rank-2 tensor as a Matrix.
    linalg::Matrix to_matrix() const;

    void fill(double value);
    bool same_shape(const Tensor& other) const noexcept { return m_shape == other.m_shape; }
    std::string shape_string() const;

    bool operator==(const Tensor&) const = default;

private:
    std::vector<std::size_t> m_shape;
    AlignedDoubles m_data;
};

}  // namespace muonrec
