// SPDX-FileCopyrightText: © 2026 The muonrec authors
//
// SPDX-License-Identifier: Apache-2.0

// Single-block, single-head causal self-attention encoder:
//   x  = E[item] + P[pos]
//   h1 = LN1(x + Attn(x) W_O)
//   h2 = LN2(h1 + relu(h1 W_1 + b_1) W_2 + b_2)

#include <cmath>

#include "model_internal.hpp"

namespace muonrec::model::detail {

namespace {

class SasRecEncoder final : public Encoder {
public:
    explicit SasRecEncoder(const ModelSpec& spec) : m_spec(spec) {}

    void encode(const ParamList& params, const Batch& batch, Mat& hidden) override {
        const auto d = static_cast<Eigen::Index>(m_spec.embed_dim);
        const std::size_t len = batch.max_len;
        const auto n = static_cast<Eigen::Index>(batch.rows * len);
        const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(m_spec.embed_dim));

        const auto emb = mat(find_param(params, "E").value);
        const auto pos = mat(find_param(params, "P").value);

        m_x.resize(n, d);
        for (std::size_t b = 0; b < batch.rows; ++b) {
            for (std::size_t t = 0; t < len; ++t) {
                const auto r = static_cast<Eigen::Index>(b * len + t);
                m_x.row(r) = emb.row(batch.input(b, t)) + pos.row(static_cast<Eigen::Index>(t));
            }
        }

        m_q.noalias() = m_x * mat(find_param(params, "W_Q").value);
        m_k.noalias() = m_x * mat(find_param(params, "W_K").value);
        m_v.noalias() = m_x * mat(find_param(params, "W_V").value);

        m_attn.setZero(n, static_cast<Eigen::Index>(len));
        m_z.setZero(n, d);
        std::vector<double> scores(len);
        for (std::size_t b = 0; b < batch.rows; ++b) {
            for (std::size_t i = 0; i < len; ++i) {
                if (batch.input(b, i) == 0) continue;
                const auto ri = static_cast<Eigen::Index>(b * len + i);
                double max_score = -INFINITY;
                for (std::size_t j = 0; j <= i; ++j) {
                    if (batch.input(b, j) == 0) continue;
                    const auto rj = static_cast<Eigen::Index>(b * len + j);
                    scores[j] = m_q.row(ri).dot(m_k.row(rj)) * inv_sqrt_d;
                    max_score = std::max(max_score, scores[j]);
                }
                double total = 0.0;
                for (std::size_t j = 0; j <= i; ++j) {
                    if (batch.input(b, j) == 0) continue;
                    scores[j] = std::exp(scores[j] - max_score);
                    total += scores[j];
                }
                for (std::size_t j = 0; j <= i; ++j) {
                    if (batch.input(b, j) == 0) continue;
                    const auto rj = static_cast<Eigen::Index>(b * len + j);
                    const double a = scores[j] / total;
                    m_attn(ri, static_cast<Eigen::Index>(j)) = a;
                    m_z.row(ri) += a * m_v.row(rj);
                }
            }
        }

        Mat r1 = m_x;
        r1.noalias() += m_z * mat(find_param(params, "W_O").value);
        layer_norm_rows(r1, m_n1, m_rstd1);
        m_ln1_input = std::move(r1);
        m_h1 = (m_n1.array().rowwise() * row(find_param(params, "ln1_gain").value).array()).matrix();
        m_h1.rowwise() += row(find_param(params, "ln1_bias").value);

        m_f1.noalias() = m_h1 * mat(find_param(params, "W_1").value);
        m_f1.rowwise() += row(find_param(params, "b_1").value);
        m_u = m_f1.cwiseMax(0.0);

        Mat r2 = m_h1;
        r2.noalias() += m_u * mat(find_param(params, "W_2").value);
        r2.rowwise() += row(find_param(params, "b_2").value);
        layer_norm_rows(r2, m_n2, m_rstd2);
        m_ln2_input = std::move(r2);
        hidden = (m_n2.array().rowwise() * row(find_param(params, "ln2_gain").value).array()).matrix();
        hidden.rowwise() += row(find_param(params, "ln2_bias").value);
    }

    void backward(ParamList& params, const Batch& batch, const Mat& d_hidden) override {
        const std::size_t len = batch.max_len;
        const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(m_spec.embed_dim));

        // second layer norm
        auto& ln2_gain = find_param(params, "ln2_gain");
        row(ln2_gain.grad) = (d_hidden.array() * m_n2.array()).colwise().sum().matrix();
        row(find_param(params, "ln2_bias").grad) = d_hidden.colwise().sum();
        Mat d_r2;
        layer_norm_backward((d_hidden.array().rowwise() * row(ln2_gain.value).array()).matrix(), m_n2, m_rstd2,
                            d_r2);

        // feed-forward
        auto& w2 = find_param(params, "W_2");
        mat(w2.grad).noalias() = m_u.transpose() * d_r2;
        row(find_param(params, "b_2").grad) = d_r2.colwise().sum();
        Mat d_f1 = d_r2 * mat(w2.value).transpose();
        d_f1.array() *= (m_f1.array() > 0.0).cast<double>();
        auto& w1 = find_param(params, "W_1");
        mat(w1.grad).noalias() = m_h1.transpose() * d_f1;
        row(find_param(params, "b_1").grad) = d_f1.colwise().sum();
        Mat d_h1 = d_r2;
        d_h1.noalias() += d_f1 * mat(w1.value).transpose();

        // first layer norm
        auto& ln1_gain = find_param(params, "ln1_gain");
        row(ln1_gain.grad) = (d_h1.array() * m_n1.array()).colwise().sum().matrix();
        row(find_param(params, "ln1_bias").grad) = d_h1.colwise().sum();
        Mat d_x;
        layer_norm_backward((d_h1.array().rowwise() * row(ln1_gain.value).array()).matrix(), m_n1, m_rstd1, d_x);

        // attention output projection; d_x currently holds d(r1)
        auto& wo = find_param(params, "W_O");
        mat(wo.grad).noalias() = m_z.transpose() * d_x;
        const Mat d_z = d_x * mat(wo.value).transpose();

        Mat d_q = Mat::Zero(m_q.rows(), m_q.cols());
        Mat d_k = Mat::Zero(m_k.rows(), m_k.cols());
        Mat d_v = Mat::Zero(m_v.rows(), m_v.cols());
        std::vector<double> d_attn(len);
        for (std::size_t b = 0; b < batch.rows; ++b) {
            for (std::size_t i = 0; i < len; ++i) {
                if (batch.input(b, i) == 0) continue;
                const auto ri = static_cast<Eigen::Index>(b * len + i);
                double weighted = 0.0;
                for (std::size_t j = 0; j <= i; ++j) {
                    if (batch.input(b, j) == 0) continue;
                    const auto rj = static_cast<Eigen::Index>(b * len + j);
                    const double a = m_attn(ri, static_cast<Eigen::Index>(j));
                    d_attn[j] = d_z.row(ri).dot(m_v.row(rj));
                    d_v.row(rj) += a * d_z.row(ri);
                    weighted += a * d_attn[j];
                }
                for (std::size_t j = 0; j <= i; ++j) {
                    if (batch.input(b, j) == 0) continue;
                    const auto rj = static_cast<Eigen::Index>(b * len + j);
                    const double d_score =
                        m_attn(ri, static_cast<Eigen::Index>(j)) * (d_attn[j] - weighted) * inv_sqrt_d;
                    d_q.row(ri) += d_score * m_k.row(rj);
                    d_k.row(rj) += d_score * m_q.row(ri);
                }
            }
        }

        auto& wq = find_param(params, "W_Q");
        auto& wk = find_param(params, "W_K");
        auto& wv = find_param(params, "W_V");
        mat(wq.grad).noalias() = m_x.transpose() * d_q;
        mat(wk.grad).noalias() = m_x.transpose() * d_k;
        mat(wv.grad).noalias() = m_x.transpose() * d_v;
        d_x.noalias() += d_q * mat(wq.value).transpose();
        d_x.noalias() += d_k * mat(wk.value).transpose();
        d_x.noalias() += d_v * mat(wv.value).transpose();

        auto d_pos = mat(find_param(params, "P").grad);
        auto d_emb = mat(find_param(params, "E").grad);
        d_pos.setZero();
        for (std::size_t b = 0; b < batch.rows; ++b) {
            for (std::size_t t = 0; t < len; ++t) {
                const auto r = static_cast<Eigen::Index>(b * len + t);
                const std::int32_t id = batch.input(b, t);
                if (id == 0) continue;
                d_pos.row(static_cast<Eigen::Index>(t)) += d_x.row(r);
                d_emb.row(id) += d_x.row(r);
            }
        }
    }

    std::vector<LayerNormTrace> layer_norm_traces() const override {
        return {{to_tensor(m_ln1_input), to_tensor(m_n1)}, {to_tensor(m_ln2_input), to_tensor(m_n2)}};
    }

private:
    ModelSpec m_spec;
    Mat m_x, m_q, m_k, m_v, m_attn, m_z;
    Mat m_ln1_input, m_n1, m_h1, m_f1, m_u, m_ln2_input, m_n2;
    Eigen::VectorXd m_rstd1, m_rstd2;
};

}  // namespace

std::unique_ptr<Encoder> make_sasrec_encoder(const ModelSpec& spec) {
    return std::make_unique<SasRecEncoder>(spec);
}

}  // namespace muonrec::model::detail
