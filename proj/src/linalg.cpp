// SPDX-FileCopyrightText: © 2026 The muonrec authors
//
// SPDX-License-Identifier: Apache-2.0

#include "muonrec/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Core>
#include <fmt/format.h>

namespace muonrec {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Shape: return "shape";
        case ErrorKind::NonFinite: return "non_finite";
        case ErrorKind::Convergence: return "convergence";
        case ErrorKind::InvalidArgument: return "invalid_argument";
        case ErrorKind::Config: return "config";
        case ErrorKind::Data: return "data";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

}  // namespace muonrec

namespace muonrec::linalg {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

ConstMap view(const Matrix& m) {
    return ConstMap(m.data().data(), static_cast<Eigen::Index>(m.rows()),
                    static_cast<Eigen::Index>(m.cols()));
}

MutMap view(Matrix& m) {
    return MutMap(m.data().data(), static_cast<Eigen::Index>(m.rows()),
                  static_cast<Eigen::Index>(m.cols()));
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw Error(ErrorKind::Shape,
                    fmt::format("{}: shape mismatch {} vs {}", op, a.shape_string(), b.shape_string()));
    }
}

void require_finite(const Matrix& m, const char* op) {
    for (double x : m.data()) {
        if (!std::isfinite(x)) {
            throw Error(ErrorKind::NonFinite, fmt::format("{}: non-finite entry in {} input", op, m.shape_string()));
        }
    }
}

double column_dot(const std::vector<double>& a, std::size_t rows, std::size_t cols, std::size_t i,
                  std::size_t j) {
    double s = 0.0;
    for (std::size_t k = 0; k < rows; ++k) {
        s += a[k * cols + i] * a[k * cols + j];
    }
    return s;
}

void rotate_columns(std::vector<double>& a, std::size_t rows, std::size_t cols, std::size_t i, std::size_t j,
                    double c, double s) {
    for (std::size_t k = 0; k < rows; ++k) {
        const double ai = a[k * cols + i];
        const double aj = a[k * cols + j];
        a[k * cols + i] = c * ai - s * aj;
        a[k * cols + j] = s * ai + c * aj;
    }
}

// Fills the columns of `u` flagged in `missing` with unit vectors orthogonal
// to every other column (Gram-Schmidt against the standard basis).
void complete_orthonormal(Matrix& u, const std::vector<bool>& missing) {
    const std::size_t n = u.rows();
    const std::size_t r = u.cols();
    std::vector<bool> filled(r);
    for (std::size_t j = 0; j < r; ++j) filled[j] = !missing[j];

    for (std::size_t j = 0; j < r; ++j) {
        if (filled[j]) continue;
        std::vector<double> best;
        double best_norm = -1.0;
        for (std::size_t e = 0; e < n; ++e) {
            std::vector<double> cand(n, 0.0);
            cand[e] = 1.0;
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t q = 0; q < r; ++q) {
                    if (!filled[q]) continue;
                    double d = 0.0;
                    for (std::size_t k = 0; k < n; ++k) d += u(k, q) * cand[k];
                    for (std::size_t k = 0; k < n; ++k) cand[k] -= d * u(k, q);
                }
            }
            double norm = 0.0;
            for (double x : cand) norm += x * x;
            norm = std::sqrt(norm);
            if (norm > best_norm) {
                best_norm = norm;
                best = std::move(cand);
            }
        }
        for (std::size_t k = 0; k < n; ++k) u(k, j) = best[k] / best_norm;
        filled[j] = true;
    }
}

// Hestenes one-sided Jacobi on a tall (rows >= cols) matrix.
SvdResult jacobi_svd_tall(const Matrix& m) {
    const std::size_t rows = m.rows();
    const std::size_t cols = m.cols();
    std::vector<double> a(m.data().begin(), m.data().end());
    std::vector<double> v(cols * cols, 0.0);
    for (std::size_t i = 0; i < cols; ++i) v[i * cols + i] = 1.0;

    const double fro = frobenius_norm(m);
    const double rel_tol = 1e-14;
    const double abs_floor = (rel_tol * fro) * (rel_tol * fro);

    bool converged = false;
    for (int sweep = 0; sweep < kSvdSweepBudget && !converged; ++sweep) {
        bool rotated = false;
        for (std::size_t i = 0; i + 1 < cols; ++i) {
            for (std::size_t j = i + 1; j < cols; ++j) {
                const double alpha = column_dot(a, rows, cols, i, i);
                const double beta = column_dot(a, rows, cols, j, j);
                const double gamma = column_dot(a, rows, cols, i, j);
                const double scale_ij = std::sqrt(alpha * beta);
                if (std::abs(gamma) <= rel_tol * scale_ij || scale_ij <= abs_floor) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                rotate_columns(a, rows, cols, i, j, c, s);
                rotate_columns(v, cols, cols, i, j, c, s);
            }
        }
        converged = !rotated;
    }
    if (!converged) {
        throw Error(ErrorKind::Convergence,
                    fmt::format("svd: no convergence within {} Jacobi sweeps for {}", kSvdSweepBudget,
                                m.shape_string()));
    }

    std::vector<double> norms(cols);
    for (std::size_t j = 0; j < cols; ++j) norms[j] = std::sqrt(column_dot(a, rows, cols, j, j));
    std::vector<std::size_t> order(cols);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

    SvdResult out{Matrix(rows, cols), std::vector<double>(cols), Matrix(cols, cols)};
    const double sigma_max = norms[order[0]];
    std::vector<bool> missing(cols, false);
    for (std::size_t jj = 0; jj < cols; ++jj) {
        const std::size_t j = order[jj];
        out.sigma[jj] = norms[j];
        for (std::size_t k = 0; k < cols; ++k) out.vt(jj, k) = v[k * cols + j];
        if (norms[j] <= 1e-13 * sigma_max || norms[j] == 0.0) {
            missing[jj] = true;
            continue;
        }
        for (std::size_t k = 0; k < rows; ++k) out.u(k, jj) = a[k * cols + j] / norms[j];
    }
    if (std::any_of(missing.begin(), missing.end(), [](bool b) { return b; })) {
        complete_orthonormal(out.u, missing);
    }
    return out;
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols) : m_rows(rows), m_cols(cols), m_data(rows * cols, 0.0) {
    if (rows == 0 || cols == 0) {
        throw Error(ErrorKind::Shape, fmt::format("matrix dimensions must be positive, got {}x{}", rows, cols));
    }
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data) :
    m_rows(rows), m_cols(cols), m_data(data.begin(), data.end()) {
    if (rows == 0 || cols == 0) {
        throw Error(ErrorKind::Shape, fmt::format("matrix dimensions must be positive, got {}x{}", rows, cols));
    }
    if (m_data.size() != rows * cols) {
        throw Error(ErrorKind::Shape,
                    fmt::format("matrix {}x{} needs {} entries, got {}", rows, cols, rows * cols, m_data.size()));
    }
    require_finite(*this, "matrix");
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty() || rows.front().empty()) {
        throw Error(ErrorKind::Shape, "from_rows: empty matrix");
    }
    std::vector<double> data;
    data.reserve(rows.size() * rows.front().size());
    for (const auto& row : rows) {
        if (row.size() != rows.front().size()) {
            throw Error(ErrorKind::Shape, "from_rows: ragged rows");
        }
        data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(rows.size(), rows.front().size(), std::move(data));
}

std::string Matrix::shape_string() const {
    return fmt::format("{}x{}", m_rows, m_cols);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw Error(ErrorKind::Shape,
                    fmt::format("matmul: cannot multiply {} by {}", a.shape_string(), b.shape_string()));
    }
    Matrix out(a.rows(), b.cols());
    view(out).noalias() = view(a) * view(b);
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols(), m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) out(c, r) = m(r, c);
    }
    return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix out = a;
    auto dst = out.data();
    auto src = b.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    return out;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "subtract");
    Matrix out = a;
    auto dst = out.data();
    auto src = b.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= src[i];
    return out;
}

Matrix scale(const Matrix& m, double factor) {
    Matrix out = m;
    for (double& x : out.data()) x *= factor;
    return out;
}

double frobenius_norm(const Matrix& m) {
    double s = 0.0;
    for (double x : m.data()) s += x * x;
    return std::sqrt(s);
}

bool is_all_zero(const Matrix& m) {
    return std::all_of(m.data().begin(), m.data().end(), [](double x) { return x == 0.0; });
}

SvdResult svd(const Matrix& m) {
    if (m.empty()) throw Error(ErrorKind::Shape, "svd: empty matrix");
    if (m.rows() > kSvdMaxDim || m.cols() > kSvdMaxDim) {
        throw Error(ErrorKind::InvalidArgument,
                    fmt::format("svd: {} exceeds the {}x{} oracle limit", m.shape_string(), kSvdMaxDim, kSvdMaxDim));
    }
    require_finite(m, "svd");
    if (m.rows() >= m.cols()) {
        return jacobi_svd_tall(m);
    }
    // m^T = U S V^T  =>  m = V S U^T
    SvdResult t = jacobi_svd_tall(transpose(m));
    return SvdResult{transpose(t.vt), std::move(t.sigma), transpose(t.u)};
}

Matrix ortho_oracle(const Matrix& m) {
    if (m.empty()) throw Error(ErrorKind::Shape, "ortho_oracle: empty matrix");
    if (is_all_zero(m)) {
        throw Error(ErrorKind::InvalidArgument, "ortho_oracle: orthogonalization of an all-zero matrix is undefined");
    }
    const SvdResult s = svd(m);
    const double cutoff = 1e-12 * s.sigma.front();
    Matrix out(m.rows(), m.cols());
    for (std::size_t j = 0; j < s.sigma.size(); ++j) {
        if (s.sigma[j] <= cutoff) break;
        for (std::size_t r = 0; r < m.rows(); ++r) {
            const double ur = s.u(r, j);
            for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) += ur * s.vt(j, c);
        }
    }
    return out;
}

Matrix newton_schulz(const Matrix& m, int iters, const NewtonSchulzCoefficients& coeffs) {
    if (iters < 1) {
        throw Error(ErrorKind::InvalidArgument, fmt::format("newton_schulz: iters must be >= 1, got {}", iters));
    }
    if (m.empty()) throw Error(ErrorKind::Shape, "newton_schulz: empty matrix");
    require_finite(m, "newton_schulz");
    if (is_all_zero(m)) {
        throw Error(ErrorKind::InvalidArgument, "newton_schulz: orthogonalization of an all-zero matrix is undefined");
    }

    const bool tall = m.rows() > m.cols();
    Matrix x = tall ? transpose(m) : m;
    const double norm = std::max(frobenius_norm(x), 1e-7);
    for (double& e : x.data()) e /= norm;

    const auto n = static_cast<Eigen::Index>(x.rows());
    RowMajor gram(n, n);
    RowMajor poly(n, n);
    RowMajor next(x.rows(), x.cols());
    for (int it = 0; it < iters; ++it) {
        auto xv = view(x);
        gram.noalias() = xv * xv.transpose();
        poly.noalias() = coeffs.c * (gram * gram);
        poly += coeffs.b * gram;
        next.noalias() = poly * xv;
        next += coeffs.a * xv;
        xv = next;
        if (!xv.allFinite()) {
            throw Error(ErrorKind::NonFinite,
                        fmt::format("newton_schulz: non-finite value after iteration {} on {}", it + 1,
                                    m.shape_string()));
        }
    }
    return tall ? transpose(x) : x;
}

}  // namespace muonrec::linalg
