#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "ctdg/diff/tape.hpp"
#include "ctdg/error.hpp"
#include "ctdg/sequence.hpp"
#include "ctdg/temporal_graph.hpp"

namespace ctdg {

template <typename Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Frequencies w_1..w_{d_T/2}; the encoding is d_T wide.
struct TimeEncodingParams {
  diff::Parameter w;  // 1 x d_T/2
};

/// f(x) = ReLU(x W_a + b_a) W_b + b_b on a scalar count x.
struct CooccurrenceEncoderParams {
  diff::Parameter w_a;  // 1 x d_C
  diff::Parameter b_a;  // 1 x d_C
  diff::Parameter w_b;  // d_C x d_C
  diff::Parameter b_b;  // 1 x d_C
};

/// Affine maps from flattened patches (width * P) to the aligned width d.
struct PatchProjectionParams {
  diff::Parameter w_n, b_n;
  diff::Parameter w_e, b_e;
  diff::Parameter w_t, b_t;
  diff::Parameter w_c, b_c;
};

struct EncoderParams {
  TimeEncodingParams time;
  CooccurrenceEncoderParams cooc;
  std::optional<CooccurrenceEncoderParams> cooc_dst;  // second MLP, separate-occurrence variant only
  PatchProjectionParams proj;
};

struct EncoderFlags {
  bool use_ncoe = true;
  bool use_te = true;
  bool sep_no = false;
};

/// Aligned patch encodings [N | E | T | C] of one sequence.
struct EncodedSequence {
  Matrix z;                    // l x 4d
  Eigen::Index l = 0;
  std::vector<bool> pad_mask;  // true for patches made only of padding
};

template <typename Scalar>
struct Patched {
  MatrixT<Scalar> patches;     // l x (w * P)
  std::vector<bool> pad_mask;
};

inline Eigen::Index patch_count(Eigen::Index n, Eigen::Index patch_size) {
  return std::max<Eigen::Index>(1, (n + patch_size - 1) / patch_size);
}

/// sqrt(1/d_T) [cos(w_1 dt), sin(w_1 dt), ...] per interval, d_T = 2 * |w|.
template <typename DerivedD, typename DerivedW>
MatrixT<typename DerivedD::Scalar> time_encode(const Eigen::MatrixBase<DerivedD>& deltas,
                                               const Eigen::MatrixBase<DerivedW>& freqs) {
  using Scalar = typename DerivedD::Scalar;
  const Eigen::Index n = deltas.size();
  const Eigen::Index k = freqs.size();
  const Scalar s = std::sqrt(Scalar(1) / Scalar(2 * k));
  MatrixT<Scalar> out(n, 2 * k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      const Scalar phase = static_cast<Scalar>(freqs(j)) * deltas(i);
      out(i, 2 * j) = s * std::cos(phase);
      out(i, 2 * j + 1) = s * std::sin(phase);
    }
  }
  return out;
}

/// Rows f(c[i,0]) + f(c[i,1]) of the co-occurrence encoder.
template <typename DerivedC>
Matrix cooccurrence_encode(const Eigen::MatrixBase<DerivedC>& counts, const CooccurrenceEncoderParams& p) {
  require(counts.cols() == 2, ErrorCategory::kShapeMismatch, "co-occurrence counts must be n x 2");
  const Matrix c0 = counts.col(0).template cast<double>();
  const Matrix c1 = counts.col(1).template cast<double>();
  auto f = [&p](const Matrix& x) {
    const Matrix hidden = ((x * p.w_a.value).rowwise() + p.b_a.value.row(0)).cwiseMax(0.0);
    return Matrix((hidden * p.w_b.value).rowwise() + p.b_b.value.row(0));
  };
  return f(c0) + f(c1);
}

/// Splits rows into consecutive groups of P, flattening each group into one
/// row; a trailing partial group is zero-padded.
template <typename Derived>
Patched<typename Derived::Scalar> patch(const Eigen::MatrixBase<Derived>& x, Eigen::Index patch_size) {
  using Scalar = typename Derived::Scalar;
  require(patch_size >= 1, ErrorCategory::kInvalidArgument, "patch size must be at least 1");
  const Eigen::Index n = x.rows();
  const Eigen::Index w = x.cols();
  const Eigen::Index l = patch_count(n, patch_size);
  Patched<Scalar> out;
  out.patches = MatrixT<Scalar>::Zero(l, w * patch_size);
  out.pad_mask.assign(static_cast<std::size_t>(l), true);
  for (Eigen::Index r = 0; r < n; ++r) {
    out.patches.block(r / patch_size, (r % patch_size) * w, 1, w) = x.row(r);
    out.pad_mask[static_cast<std::size_t>(r / patch_size)] = false;
  }
  return out;
}

/// Drops the padding added by patch(): the first n rows of the unflattened
/// patches.
template <typename Derived>
MatrixT<typename Derived::Scalar> unpatch(const Eigen::MatrixBase<Derived>& patches, Eigen::Index width,
                                          Eigen::Index n) {
  using Scalar = typename Derived::Scalar;
  MatrixT<Scalar> flat = patches;
  const MatrixT<Scalar> rows = Eigen::Map<const MatrixT<Scalar>>(flat.data(), flat.size() / width, width);
  return rows.topRows(n);
}

/// m W + b, row-wise.
template <typename DerivedM, typename DerivedW, typename DerivedB>
MatrixT<typename DerivedM::Scalar> align(const Eigen::MatrixBase<DerivedM>& m, const Eigen::MatrixBase<DerivedW>& w,
                                         const Eigen::MatrixBase<DerivedB>& b) {
  require(m.cols() == w.rows() && b.size() == w.cols(), ErrorCategory::kShapeMismatch,
          "align shape mismatch");
  MatrixT<typename DerivedM::Scalar> out = m * w;
  out.rowwise() += b.reshaped().transpose();
  return out;
}

/// Raw per-entry inputs of a sequence: neighbor features, link features
/// (zero for the self entry) and time intervals.
struct RawEncodings {
  Matrix x_n;
  Matrix x_e;
  Eigen::VectorXd deltas;
};

RawEncodings raw_encodings(const InteractionSequence& seq, const TemporalGraph& g);

/// Evaluation-mode encoding of one sequence into aligned patches.
/// `counts` is the sequence's side of its CooccurrencePair.
EncodedSequence encode_sequence(const InteractionSequence& seq, const CountMatrix& counts, const TemporalGraph& g,
                                const EncoderParams& params, Eigen::Index patch_size, const EncoderFlags& flags);

}  // namespace ctdg
