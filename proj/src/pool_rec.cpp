// SPDX-FileCopyrightText: © 2026 The muonrec authors
//
// SPDX-License-Identifier: Apache-2.0

#include "model_internal.hpp"

namespace muonrec::model::detail {

namespace {

// Causal mean of the non-padding item embeddings, optionally followed by two
// relu layers (PoolRec). Without the MLP this is the EmbeddingBag model.
class PoolEncoder final : public Encoder {
public:
    explicit PoolEncoder(const ModelSpec& spec) : m_spec(spec), m_mlp(spec.kind == ModelKind::PoolRec) {}

    void encode(const ParamList& params, const Batch& batch, Mat& hidden) override {
        const auto d = static_cast<Eigen::Index>(m_spec.embed_dim);
        const std::size_t len = batch.max_len;
        const auto n = static_cast<Eigen::Index>(batch.rows * len);
        const auto emb = mat(find_param(params, "E").value);

        m_pooled.setZero(n, d);
        m_counts.assign(static_cast<std::size_t>(n), 0);
        Row sum(d);
        for (std::size_t b = 0; b < batch.rows; ++b) {
            sum.setZero();
            int count = 0;
            for (std::size_t t = 0; t < len; ++t) {
                const std::int32_t id = batch.input(b, t);
                if (id != 0) {
                    sum += emb.row(id);
                    ++count;
                }
                const std::size_t r = b * len + t;
                m_counts[r] = count;
                if (count > 0) m_pooled.row(static_cast<Eigen::Index>(r)) = sum / static_cast<double>(count);
            }
        }

        if (!m_mlp) {
            hidden = m_pooled;
            return;
        }
        m_z1.noalias() = m_pooled * mat(find_param(params, "W_1").value);
        m_z1.rowwise() += row(find_param(params, "b_1").value);
        m_a1 = m_z1.cwiseMax(0.0);
        m_z2.noalias() = m_a1 * mat(find_param(params, "W_2").value);
        m_z2.rowwise() += row(find_param(params, "b_2").value);
        hidden = m_z2.cwiseMax(0.0);
    }

    void backward(ParamList& params, const Batch& batch, const Mat& d_hidden) override {
        Mat d_pooled;
        if (m_mlp) {
            Mat d_z2 = (d_hidden.array() * (m_z2.array() > 0.0).cast<double>()).matrix();
            auto& w2 = find_param(params, "W_2");
            mat(w2.grad).noalias() = m_a1.transpose() * d_z2;
            row(find_param(params, "b_2").grad) = d_z2.colwise().sum();
            Mat d_z1 = d_z2 * mat(w2.value).transpose();
            d_z1.array() *= (m_z1.array() > 0.0).cast<double>();
            auto& w1 = find_param(params, "W_1");
            mat(w1.grad).noalias() = m_pooled.transpose() * d_z1;
            row(find_param(params, "b_1").grad) = d_z1.colwise().sum();
            d_pooled.noalias() = d_z1 * mat(w1.value).transpose();
        } else {
            d_pooled = d_hidden;
        }

        // h[t] = mean of E[item_s] over non-padding s <= t, so E[item_s]
        // receives the suffix sum of d_h[t] / count[t] for t >= s.
        const std::size_t len = batch.max_len;
        auto d_emb = mat(find_param(params, "E").grad);
        Row suffix(d_pooled.cols());
        for (std::size_t b = 0; b < batch.rows; ++b) {
            suffix.setZero();
            for (std::size_t t = len; t-- > 0;) {
                const std::size_t r = b * len + t;
                if (m_counts[r] > 0) {
                    suffix += d_pooled.row(static_cast<Eigen::Index>(r)) / static_cast<double>(m_counts[r]);
                }
                const std::int32_t id = batch.input(b, t);
                if (id != 0) d_emb.row(id) += suffix;
            }
        }
    }

private:
    ModelSpec m_spec;
    bool m_mlp;
    Mat m_pooled, m_z1, m_a1, m_z2;
    std::vector<int> m_counts;
};

}  // namespace

std::unique_ptr<Encoder> make_pool_encoder(const ModelSpec& spec) {
    return std::make_unique<PoolEncoder>(spec);
}

}  // namespace muonrec::model::detail
