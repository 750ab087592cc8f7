// SPDX-FileCopyrightText: © 2026 The muonrec authors
//
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <array>
#include <limits>
#include <random>
#include <utility>

#include <Eigen/Dense>

#include "muonrec/harness.hpp"

namespace muonrec::harness {

namespace {

using Dense = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Dense random_orthonormal_columns(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Dense g(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = normal(rng);
    const Eigen::HouseholderQR<Dense> qr(g);
    return qr.householderQ() * Dense::Identity(g.rows(), g.cols());
}

// U diag(s) V^T with singular values spread over [1, 10].
linalg::Matrix conditioned_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    const std::size_t r = std::min(rows, cols);
    std::uniform_real_distribution<double> spread(1.0, 10.0);
    Eigen::VectorXd s(static_cast<Eigen::Index>(r));
    for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = spread(rng);
    s[0] = 1.0;
    if (r > 1) s[1] = 10.0;
    const Dense u = random_orthonormal_columns(rows, r, rng);
    const Dense v = random_orthonormal_columns(cols, r, rng);
    const Dense a = u * s.asDiagonal() * v.transpose();
    return {rows, cols, std::vector<double>(a.data(), a.data() + a.size())};
}

double max_abs_diff(const linalg::Matrix& a, const linalg::Matrix& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
    return worst;
}

}  // namespace

NsCheckReport ns_check(std::uint64_t seed, std::size_t cases) {
    constexpr std::array<std::pair<std::size_t, std::size_t>, 4> shapes{{{4, 4}, {16, 8}, {8, 16}, {64, 64}}};
    constexpr std::array<double, 3> scales{1e-3, 7.5, 1e3};

    std::mt19937_64 rng(seed);
    NsCheckReport report;
    report.cases = cases;
    report.min_singular_value = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cases; ++i) {
        const auto [rows, cols] = shapes[i % shapes.size()];
        const linalg::Matrix m = conditioned_matrix(rows, cols, rng);
        const linalg::Matrix o = linalg::newton_schulz(m);
        const linalg::Matrix reference = linalg::ortho_oracle(m);

        report.max_relative_error = std::max(report.max_relative_error, linalg::frobenius_norm(linalg::subtract(o, reference)) /
                                                                            linalg::frobenius_norm(reference));
        for (double s : linalg::svd(o).sigma) {
            report.min_singular_value = std::min(report.min_singular_value, s);
            report.max_singular_value = std::max(report.max_singular_value, s);
        }
        for (double c : scales) {
            report.max_scale_error =
                std::max(report.max_scale_error, max_abs_diff(linalg::newton_schulz(linalg::scale(m, c)), o));
        }
        report.max_sign_error = std::max(
            report.max_sign_error, max_abs_diff(linalg::newton_schulz(linalg::scale(m, -1.0)), linalg::scale(o, -1.0)));
        report.max_transpose_error = std::max(
            report.max_transpose_error, max_abs_diff(linalg::newton_schulz(linalg::transpose(m)), linalg::transpose(o)));
    }
    return report;
}

}  // namespace muonrec::harness
