#include "ctdg/encodings.hpp"

namespace ctdg {

namespace {

Matrix cooccurrence_mlp(const Matrix& x, const CooccurrenceEncoderParams& p) {
  const Matrix hidden = ((x * p.w_a.value).rowwise() + p.b_a.value.row(0)).cwiseMax(0.0);
  return (hidden * p.w_b.value).rowwise() + p.b_b.value.row(0);
}

}  // namespace

RawEncodings raw_encodings(const InteractionSequence& seq, const TemporalGraph& g) {
  const auto n = static_cast<Eigen::Index>(seq.size());
  RawEncodings raw{Matrix(n, g.d_n()), Matrix::Zero(n, g.d_e()), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const NeighborEntry& e = seq.entries[static_cast<std::size_t>(i)];
    raw.x_n.row(i) = g.node_features.row(e.neighbor);
    if (e.event_index != kSelfEntry) raw.x_e.row(i) = g.link_features.row(e.event_index);
    raw.deltas(i) = seq.delta(static_cast<std::size_t>(i));
  }
  return raw;
}

EncodedSequence encode_sequence(const InteractionSequence& seq, const CountMatrix& counts, const TemporalGraph& g,
                                const EncoderParams& params, Eigen::Index patch_size, const EncoderFlags& flags) {
  require(counts.rows() == static_cast<Eigen::Index>(seq.size()), ErrorCategory::kShapeMismatch,
          "co-occurrence rows must match the sequence length");
  const PatchProjectionParams& proj = params.proj;
  const Eigen::Index d = proj.b_n.value.cols();
  const RawEncodings raw = raw_encodings(seq, g);

  const auto pn = patch(raw.x_n, patch_size);
  const auto pe = patch(raw.x_e, patch_size);
  const Eigen::Index l = pn.patches.rows();

  EncodedSequence out;
  out.l = l;
  out.pad_mask = pn.pad_mask;
  out.z = Matrix::Zero(l, 4 * d);
  out.z.middleCols(0, d) = align(pn.patches, proj.w_n.value, proj.b_n.value);
  out.z.middleCols(d, d) = align(pe.patches, proj.w_e.value, proj.b_e.value);
  if (flags.use_te) {
    const Matrix x_t = time_encode(raw.deltas, params.time.w.value);
    out.z.middleCols(2 * d, d) = align(patch(x_t, patch_size).patches, proj.w_t.value, proj.b_t.value);
  }
  if (flags.use_ncoe) {
    Matrix x_c;
    if (flags.sep_no) {
      require(params.cooc_dst.has_value(), ErrorCategory::kInvalidArgument,
              "separate-occurrence encoding needs a destination encoder");
      const Matrix c0 = counts.col(0).cast<double>();
      const Matrix c1 = counts.col(1).cast<double>();
      const Matrix f0 = cooccurrence_mlp(c0, params.cooc);
      const Matrix f1 = cooccurrence_mlp(c1, *params.cooc_dst);
      x_c.resize(f0.rows(), f0.cols() + f1.cols());
      x_c.leftCols(f0.cols()) = f0;
      x_c.rightCols(f1.cols()) = f1;
    } else {
      x_c = cooccurrence_encode(counts, params.cooc);
    }
    out.z.middleCols(3 * d, d) = align(patch(x_c, patch_size).patches, proj.w_c.value, proj.b_c.value);
  }
  return out;
}

}  // namespace ctdg
