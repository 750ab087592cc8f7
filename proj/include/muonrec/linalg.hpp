// SPDX-FileCopyrightText: © 2026 The muonrec authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "muonrec/aligned.hpp"
#include "muonrec/error.hpp"

namespace muonrec::linalg {

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;

    /// Zero-filled rows x cols matrix. Both dimensions must be positive.
    Matrix(std::size_t rows, std::size_t cols);

    /// Copies `data` (row-major). Rejects size mismatches and
    /// non-finite entries.
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);
    static Matrix from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t rows() const noexcept { return m_rows; }
    std::size_t cols() const noexcept { return m_cols; }
    std::size_t size() const noexcept { return m_data.size(); }
    bool empty() const noexcept { return m_data.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return m_data[r * m_cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return m_data[r * m_cols + c]; }

    std::span<double> data() noexcept { return m_data; }
    std::span<const double> data() const noexcept { return m_data; }

    std::string shape_string() const;

    bool operator==(const Matrix&) const = default;

private:
    std::size_t m_rows = 0;
    std::size_t m_cols = 0;
    AlignedDoubles m_data;
};

struct SvdResult {
    Matrix u;                   // rows x r
    std::vector<double> sigma;  // r, non-increasing
    Matrix vt;                  // r x cols
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& m, double factor);

double frobenius_norm(const Matrix& m);
bool is_all_zero(const Matrix& m);

// One-sided Jacobi; intended for matrices up to 512 x 512.
inline constexpr std::size_t kSvdMaxDim = 512;
inline constexpr int kSvdSweepBudget = 60;

SvdResult svd(const Matrix& m);

/// Nearest semi-orthogonal matrix U V^T. Singular directions with
/// sigma <= 1e-12 * sigma_max are dropped.
Matrix ortho_oracle(const Matrix& m);

struct NewtonSchulzCoefficients {
    double a = 3.4445;
    double b = -4.7750;
    double c = 2.0315;
};

inline constexpr int kDefaultNewtonSchulzIters = 5;

/// Quintic Newton-Schulz approximation of ortho_oracle(m). The input is
/// normalized by max(||m||_F, 1e-7) first; tall inputs are transposed so the
/// Gram matrix is formed on the smaller side.
Matrix newton_schulz(const Matrix& m, int iters = kDefaultNewtonSchulzIters,
                     const NewtonSchulzCoefficients& coeffs = {});

}  // namespace muonrec::linalg
