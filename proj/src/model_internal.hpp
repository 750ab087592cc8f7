// SPDX-FileCopyrightText: © 2026 The muonrec authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <vector>

#include <Eigen/Core>

#include "muonrec/model.hpp"

namespace muonrec::model::detail {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Row = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using ConstMatMap = Eigen::Map<const Mat>;
using MatMap = Eigen::Map<Mat>;
using ConstRowMap = Eigen::Map<const Row>;
using RowMap = Eigen::Map<Row>;

inline ConstMatMap mat(const Tensor& t) {
    return ConstMatMap(t.raw(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

inline MatMap mat(Tensor& t) {
    return MatMap(t.raw(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

inline ConstRowMap row(const Tensor& t) {
    return ConstRowMap(t.raw(), static_cast<Eigen::Index>(t.size()));
}

inline RowMap row(Tensor& t) {
    return RowMap(t.raw(), static_cast<Eigen::Index>(t.size()));
}

/// Maps a batch to hidden states (rows*max_len x embed_dim) and back-propagates
/// a hidden-state gradient into the parameters it owns. Gradients of the
/// embedding table are accumulated; all other gradients are overwritten.
class Encoder {
public:
    virtual ~Encoder() = default;

    virtual void encode(const ParamList& params, const Batch& batch, Mat& hidden) = 0;
    virtual void backward(ParamList& params, const Batch& batch, const Mat& d_hidden) = 0;
    virtual std::vector<LayerNormTrace> layer_norm_traces() const { return {}; }
};

std::unique_ptr<Encoder> make_sasrec_encoder(const ModelSpec& spec);
std::unique_ptr<Encoder> make_pool_encoder(const ModelSpec& spec);

/// Normalizes each row of x in place of `normalized`; stores 1/sqrt(var+eps).
void layer_norm_rows(const Mat& x, Mat& normalized, Eigen::VectorXd& rstd);

/// Gradient w.r.t. the layer-norm input given the gradient w.r.t. the
/// normalized output.
void layer_norm_backward(const Mat& d_normalized, const Mat& normalized, const Eigen::VectorXd& rstd, Mat& d_input);

Tensor to_tensor(const Mat& m);

}  // namespace muonrec::model::detail
