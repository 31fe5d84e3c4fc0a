#pragma once

#include <span>
#include <vector>

#include "ctdg/diff/tape.hpp"
#include "ctdg/rng.hpp"

namespace ctdg::diff {

inline constexpr double kLayerNormEps = 1e-5;

// Every op is defined for BasicVar<double> and BasicVar<float>.

// Linear algebra and structure.
template <typename S> BasicVar<S> matmul(BasicVar<S> a, BasicVar<S> b);
template <typename S> BasicVar<S> transpose(BasicVar<S> a);
/// Elementwise sum; `b` may also be a 1 x cols row broadcast over a's rows.
template <typename S> BasicVar<S> add(BasicVar<S> a, BasicVar<S> b);
template <typename S> BasicVar<S> sub(BasicVar<S> a, BasicVar<S> b);
/// Elementwise (Hadamard) product of equal shapes.
template <typename S> BasicVar<S> multiply(BasicVar<S> a, BasicVar<S> b);
template <typename S> BasicVar<S> scale(BasicVar<S> a, double s);
/// Concatenation along the last axis.
template <typename S> BasicVar<S> concat_cols(const std::vector<BasicVar<S>>& parts);
template <typename S> BasicVar<S> vstack(const std::vector<BasicVar<S>>& parts);
template <typename S> BasicVar<S> slice_rows(BasicVar<S> a, Eigen::Index begin, Eigen::Index count);
template <typename S> BasicVar<S> slice_cols(BasicVar<S> a, Eigen::Index begin, Eigen::Index count);
/// out.row(i) = a.row(index[i]), or zeros where index[i] < 0.
template <typename S> BasicVar<S> gather_rows(BasicVar<S> a, std::span<const Eigen::Index> index);
/// Row-major reinterpretation to rows x cols.
template <typename S> BasicVar<S> reshape(BasicVar<S> a, Eigen::Index rows, Eigen::Index cols);

// Reductions.
template <typename S> BasicVar<S> sum(BasicVar<S> a);
/// 1 x cols mean over all rows.
template <typename S> BasicVar<S> row_mean(BasicVar<S> a);
/// One output row per group: the mean of the listed input rows.
template <typename S>
BasicVar<S> segment_mean(BasicVar<S> a, const std::vector<std::vector<Eigen::Index>>& groups);

// Nonlinearities.
template <typename S> BasicVar<S> softmax_rows(BasicVar<S> a);
/// Normalizes each row to zero mean and unit variance (biased, eps-regularized),
/// then applies gain and bias (both 1 x cols).
template <typename S>
BasicVar<S> layer_norm(BasicVar<S> x, BasicVar<S> gain, BasicVar<S> bias, double eps = kLayerNormEps);
template <typename S> BasicVar<S> relu(BasicVar<S> a);
/// Exact form x * Phi(x).
template <typename S> BasicVar<S> gelu(BasicVar<S> a);
template <typename S> BasicVar<S> sigmoid(BasicVar<S> a);
/// Inverted dropout; the identity when !train or rate == 0.
template <typename S> BasicVar<S> dropout(BasicVar<S> a, double rate, CounterRng& rng, bool train);

/// Contiguous rows [begin, begin + size) that attend to each other.
struct RowSegment {
  Eigen::Index begin = 0;
  Eigen::Index size = 0;
};

/// Per segment: dropout(softmax(Q K^T * scale)) V. Segments must tile the
/// rows of q, k and v in order.
template <typename S>
BasicVar<S> segment_attention(BasicVar<S> q, BasicVar<S> k, BasicVar<S> v, std::span<const RowSegment> segments,
                              double scale, double dropout_rate, CounterRng& rng, bool train);

/// Mean binary cross-entropy of logits (n x 1) against labels in {0, 1}.
template <typename S> BasicVar<S> bce_with_logits(BasicVar<S> logits, const Matrix& labels);

/// Row i = sqrt(1/d_T) [cos(w_1 dt_i), sin(w_1 dt_i), ...] with
/// d_T = 2 * freqs.cols(). `deltas` is n x 1 and not differentiated; phases
/// are evaluated in double precision.
template <typename S> BasicVar<S> time_encoding(const Matrix& deltas, BasicVar<S> freqs);

}  // namespace ctdg::diff
