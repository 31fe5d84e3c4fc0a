#include "ctdg/diff/ops.hpp"

#include <cmath>
#include <numbers>

#include <unsupported/Eigen/SpecialFunctions>

#include "ctdg/error.hpp"

namespace ctdg::diff {

namespace {

void check(bool ok, const char* what) { require(ok, ErrorCategory::kShapeMismatch, what); }

template <typename M>
std::string shape(const M& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

template <typename S>
S stable_sigmoid(S x) {
  return x >= S(0) ? S(1) / (S(1) + std::exp(-x)) : std::exp(x) / (S(1) + std::exp(x));
}

}  // namespace

template <typename S>
BasicVar<S> matmul(BasicVar<S> a, BasicVar<S> b) {
  using M = MatrixT<S>;
  const M& av = a.value();
  const M& bv = b.value();
  require(av.cols() == bv.rows(), ErrorCategory::kShapeMismatch,
          "matmul shape mismatch: " + shape(av) + " * " + shape(bv));
  M out(av.rows(), bv.cols());
  out.noalias() = av * bv;
  return a.tape().record(std::move(out), {a, b}, [a, b](BasicTape<S>& t, const M& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * b.value().transpose());
    if (t.requires_grad(b)) t.accumulate(b, a.value().transpose() * g);
  });
}

template <typename S>
BasicVar<S> transpose(BasicVar<S> a) {
  using M = MatrixT<S>;
  M out = a.value().transpose();
  return a.tape().record(std::move(out), {a}, [a](BasicTape<S>& t, const M& g) {
    t.accumulate(a, g.transpose());
  });
}

template <typename S>
BasicVar<S> add(BasicVar<S> a, BasicVar<S> b) {
  using M = MatrixT<S>;
  const M& av = a.value();
  const M& bv = b.value();
  if (av.rows() == bv.rows() && av.cols() == bv.cols()) {
    M out = av + bv;
    return a.tape().record(std::move(out), {a, b}, [a, b](BasicTape<S>& t, const M& g) {
      t.accumulate(a, g);
      t.accumulate(b, g);
    });
  }
  require(bv.rows() == 1 && bv.cols() == av.cols(), ErrorCategory::kShapeMismatch,
          "add shape mismatch: " + shape(av) + " + " + shape(bv));
  M out = av.rowwise() + bv.row(0);
  return a.tape().record(std::move(out), {a, b}, [a, b](BasicTape<S>& t, const M& g) {
    t.accumulate(a, g);
    if (t.requires_grad(b)) t.accumulate(b, g.colwise().sum());
  });
}

template <typename S>
BasicVar<S> sub(BasicVar<S> a, BasicVar<S> b) {
  using M = MatrixT<S>;
  const M& av = a.value();
  const M& bv = b.value();
  check(av.rows() == bv.rows() && av.cols() == bv.cols(), "sub shape mismatch");
  M out = av - bv;
  return a.tape().record(std::move(out), {a, b}, [a, b](BasicTape<S>& t, const M& g) {
    t.accumulate(a, g);
    if (t.requires_grad(b)) t.accumulate(b, -g);
  });
}

template <typename S>
BasicVar<S> multiply(BasicVar<S> a, BasicVar<S> b) {
  using M = MatrixT<S>;
  const M& av = a.value();
  const M& bv = b.value();
  check(av.rows() == bv.rows() && av.cols() == bv.cols(), "multiply shape mismatch");
  M out = av.cwiseProduct(bv);
  return a.tape().record(std::move(out), {a, b}, [a, b](BasicTape<S>& t, const M& g) {
    if (t.requires_grad(a)) t.accumulate(a, g.cwiseProduct(b.value()));
    if (t.requires_grad(b)) t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

template <typename S>
BasicVar<S> scale(BasicVar<S> a, double s) {
  using M = MatrixT<S>;
  const S k = static_cast<S>(s);
  M out = a.value() * k;
  return a.tape().record(std::move(out), {a}, [a, k](BasicTape<S>& t, const M& g) { t.accumulate(a, g * k); });
}

template <typename S>
BasicVar<S> concat_cols(const std::vector<BasicVar<S>>& parts) {
  using M = MatrixT<S>;
  check(!parts.empty(), "concat of nothing");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    check(p.rows() == rows, "concat row mismatch");
    cols += p.cols();
  }
  M out(rows, cols);
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return parts.front().tape().record(std::move(out), parts, [parts](BasicTape<S>& t, const M& g) {
    Eigen::Index offset = 0;
    for (const auto& p : parts) {
      if (t.requires_grad(p)) t.accumulate(p, g.middleCols(offset, p.cols()));
      offset += p.cols();
    }
  });
}

template <typename S>
BasicVar<S> vstack(const std::vector<BasicVar<S>>& parts) {
  using M = MatrixT<S>;
  check(!parts.empty(), "vstack of nothing");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    check(p.cols() == cols, "vstack column mismatch");
    rows += p.rows();
  }
  M out(rows, cols);
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return parts.front().tape().record(std::move(out), parts, [parts](BasicTape<S>& t, const M& g) {
    Eigen::Index offset = 0;
    for (const auto& p : parts) {
      if (t.requires_grad(p)) t.accumulate(p, g.middleRows(offset, p.rows()));
      offset += p.rows();
    }
  });
}

template <typename S>
BasicVar<S> slice_rows(BasicVar<S> a, Eigen::Index begin, Eigen::Index count) {
  using M = MatrixT<S>;
  check(begin >= 0 && count >= 0 && begin + count <= a.rows(), "slice_rows out of range");
  M out = a.value().middleRows(begin, count);
  return a.tape().record(std::move(out), {a}, [a, begin, count](BasicTape<S>& t, const M& g) {
    t.grad_buffer(a).middleRows(begin, count) += g;
  });
}

template <typename S>
BasicVar<S> slice_cols(BasicVar<S> a, Eigen::Index begin, Eigen::Index count) {
  using M = MatrixT<S>;
  check(begin >= 0 && count >= 0 && begin + count <= a.cols(), "slice_cols out of range");
  M out = a.value().middleCols(begin, count);
  return a.tape().record(std::move(out), {a}, [a, begin, count](BasicTape<S>& t, const M& g) {
    t.grad_buffer(a).middleCols(begin, count) += g;
  });
}

template <typename S>
BasicVar<S> gather_rows(BasicVar<S> a, std::span<const Eigen::Index> index) {
  using M = MatrixT<S>;
  const M& av = a.value();
  M out(static_cast<Eigen::Index>(index.size()), av.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    const Eigen::Index src = index[i];
    check(src < av.rows(), "gather index out of range");
    if (src < 0) {
      out.row(static_cast<Eigen::Index>(i)).setZero();
    } else {
      out.row(static_cast<Eigen::Index>(i)) = av.row(src);
    }
  }
  std::vector<Eigen::Index> idx(index.begin(), index.end());
  return a.tape().record(std::move(out), {a}, [a, idx = std::move(idx)](BasicTape<S>& t, const M& g) {
    M& full = t.grad_buffer(a);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] >= 0) full.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
    }
  });
}

template <typename S>
BasicVar<S> reshape(BasicVar<S> a, Eigen::Index rows, Eigen::Index cols) {
  using M = MatrixT<S>;
  check(rows * cols == a.value().size(), "reshape changes element count");
  const Eigen::Index in_rows = a.rows();
  const Eigen::Index in_cols = a.cols();
  M out = Eigen::Map<const M>(a.value().data(), rows, cols);
  return a.tape().record(std::move(out), {a}, [a, in_rows, in_cols](BasicTape<S>& t, const M& g) {
    t.accumulate(a, Eigen::Map<const M>(g.data(), in_rows, in_cols));
  });
}

template <typename S>
BasicVar<S> sum(BasicVar<S> a) {
  using M = MatrixT<S>;
  M out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape().record(std::move(out), {a}, [a](BasicTape<S>& t, const M& g) {
    t.accumulate(a, M::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

template <typename S>
BasicVar<S> row_mean(BasicVar<S> a) {
  using M = MatrixT<S>;
  check(a.rows() > 0, "row_mean of an empty matrix");
  M out = a.value().colwise().mean();
  return a.tape().record(std::move(out), {a}, [a](BasicTape<S>& t, const M& g) {
    const S inv = S(1) / static_cast<S>(a.rows());
    t.accumulate(a, (g * inv).replicate(a.rows(), 1));
  });
}

template <typename S>
BasicVar<S> segment_mean(BasicVar<S> a, const std::vector<std::vector<Eigen::Index>>& groups) {
  using M = MatrixT<S>;
  const M& av = a.value();
  M out = M::Zero(static_cast<Eigen::Index>(groups.size()), av.cols());
  for (std::size_t k = 0; k < groups.size(); ++k) {
    check(!groups[k].empty(), "segment_mean over an empty group");
    for (Eigen::Index r : groups[k]) {
      check(r >= 0 && r < av.rows(), "segment_mean row out of range");
      out.row(static_cast<Eigen::Index>(k)) += av.row(r);
    }
    out.row(static_cast<Eigen::Index>(k)) /= static_cast<S>(groups[k].size());
  }
  return a.tape().record(std::move(out), {a}, [a, groups](BasicTape<S>& t, const M& g) {
    M& full = t.grad_buffer(a);
    for (std::size_t k = 0; k < groups.size(); ++k) {
      const S inv = S(1) / static_cast<S>(groups[k].size());
      for (Eigen::Index r : groups[k]) full.row(r) += g.row(static_cast<Eigen::Index>(k)) * inv;
    }
  });
}

template <typename S>
BasicVar<S> softmax_rows(BasicVar<S> a) {
  using M = MatrixT<S>;
  const M& av = a.value();
  M out = (av.colwise() - av.rowwise().maxCoeff()).array().exp().matrix();
  out.array().colwise() /= out.rowwise().sum().array();
  BasicTape<S>& tape = a.tape();
  const std::size_t out_id = tape.size();
  return tape.record(std::move(out), {a}, [a, out_id](BasicTape<S>& t, const M& g) {
    const M& s = t.value(out_id);
    const Eigen::Matrix<S, Eigen::Dynamic, 1> dot = g.cwiseProduct(s).rowwise().sum();
    t.accumulate(a, s.cwiseProduct(g.colwise() - dot));
  });
}

template <typename S>
BasicVar<S> layer_norm(BasicVar<S> x, BasicVar<S> gain, BasicVar<S> bias, double eps) {
  using M = MatrixT<S>;
  using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
  const M& xv = x.value();
  const M& gv = gain.value();
  const M& bv = bias.value();
  const Eigen::Index n = xv.cols();
  check(gv.rows() == 1 && gv.cols() == n && bv.rows() == 1 && bv.cols() == n, "layer_norm gain/bias shape");
  const Vec mean = xv.rowwise().mean();
  M xhat = xv.colwise() - mean;
  const Vec inv_std =
      (xhat.array().square().rowwise().sum() / static_cast<S>(n) + static_cast<S>(eps)).rsqrt().matrix();
  xhat.array().colwise() *= inv_std.array();
  M out = (xhat.array().rowwise() * gv.row(0).array()).rowwise() + bv.row(0).array();
  return x.tape().record(
      std::move(out), {x, gain, bias},
      [x, gain, bias, xhat = std::move(xhat), inv_std](BasicTape<S>& t, const M& g) {
        if (t.requires_grad(gain)) t.accumulate(gain, g.cwiseProduct(xhat).colwise().sum());
        if (t.requires_grad(bias)) t.accumulate(bias, g.colwise().sum());
        if (!t.requires_grad(x)) return;
        const M dxhat = g.array().rowwise() * gain.value().row(0).array();
        const S inv_cols = S(1) / static_cast<S>(g.cols());
        const Vec m1 = dxhat.rowwise().sum() * inv_cols;
        const Vec m2 = dxhat.cwiseProduct(xhat).rowwise().sum() * inv_cols;
        M dx = (dxhat.colwise() - m1) - M(xhat.array().colwise() * m2.array());
        dx.array().colwise() *= inv_std.array();
        t.accumulate(x, dx);
      });
}

template <typename S>
BasicVar<S> relu(BasicVar<S> a) {
  using M = MatrixT<S>;
  M out = a.value().cwiseMax(S(0));
  return a.tape().record(std::move(out), {a}, [a](BasicTape<S>& t, const M& g) {
    t.accumulate(a, (a.value().array() > S(0)).select(g, S(0)));
  });
}

template <typename S>
BasicVar<S> gelu(BasicVar<S> a) {
  using M = MatrixT<S>;
  const auto x = a.value().array();
  const S inv_sqrt2 = S(1) / std::numbers::sqrt2_v<S>;
  const S inv_sqrt2pi = S(1) / std::sqrt(S(2) * std::numbers::pi_v<S>);
  const M cdf = (S(0.5) * ((x * inv_sqrt2).erf() + S(1))).matrix();
  M out = (x * cdf.array()).matrix();
  M deriv = (cdf.array() + x * inv_sqrt2pi * (S(-0.5) * x.square()).exp()).matrix();
  return a.tape().record(std::move(out), {a}, [a, deriv = std::move(deriv)](BasicTape<S>& t, const M& g) {
    t.accumulate(a, g.cwiseProduct(deriv));
  });
}

template <typename S>
BasicVar<S> sigmoid(BasicVar<S> a) {
  using M = MatrixT<S>;
  M out = a.value().unaryExpr([](S x) { return stable_sigmoid(x); });
  M saved = out;
  return a.tape().record(std::move(out), {a}, [a, s = std::move(saved)](BasicTape<S>& t, const M& g) {
    t.accumulate(a, g.cwiseProduct(s.cwiseProduct((S(1) - s.array()).matrix())));
  });
}

namespace {

// Inverted-dropout mask; each 64-bit draw decides two entries.
template <typename S>
void fill_dropout_mask(S* mask, Eigen::Index n, double rate, CounterRng& rng) {
  const auto cut = static_cast<std::uint64_t>(rate * 4294967296.0);
  const S keep = static_cast<S>(1.0 / (1.0 - rate));
  for (Eigen::Index i = 0; i < n; i += 2) {
    const std::uint64_t r = rng();
    mask[i] = (r & 0xFFFFFFFFull) >= cut ? keep : S(0);
    if (i + 1 < n) mask[i + 1] = (r >> 32) >= cut ? keep : S(0);
  }
}

}  // namespace

template <typename S>
BasicVar<S> dropout(BasicVar<S> a, double rate, CounterRng& rng, bool train) {
  using M = MatrixT<S>;
  require(rate >= 0.0 && rate < 1.0, ErrorCategory::kInvalidArgument, "dropout rate must lie in [0, 1)");
  if (!train || rate == 0.0) return a;
  M mask(a.rows(), a.cols());
  fill_dropout_mask(mask.data(), mask.size(), rate, rng);
  M out = a.value().cwiseProduct(mask);
  return a.tape().record(std::move(out), {a}, [a, mask = std::move(mask)](BasicTape<S>& t, const M& g) {
    t.accumulate(a, g.cwiseProduct(mask));
  });
}

template <typename S>
BasicVar<S> segment_attention(BasicVar<S> q, BasicVar<S> k, BasicVar<S> v, std::span<const RowSegment> segments,
                              double scale, double dropout_rate, CounterRng& rng, bool train) {
  using M = MatrixT<S>;
  const M& qv = q.value();
  const M& kv = k.value();
  const M& vv = v.value();
  check(qv.rows() == kv.rows() && qv.rows() == vv.rows() && qv.cols() == kv.cols(), "segment_attention shapes");
  require(dropout_rate >= 0.0 && dropout_rate < 1.0, ErrorCategory::kInvalidArgument,
          "dropout rate must lie in [0, 1)");
  Eigen::Index next = 0;
  for (const RowSegment& seg : segments) {
    check(seg.begin == next && seg.size >= 1, "segments must tile the rows in order");
    next += seg.size;
  }
  check(next == qv.rows(), "segments must cover every row");
  const bool drop = train && dropout_rate > 0.0;
  const S s = static_cast<S>(scale);

  std::vector<M> probs(segments.size());
  std::vector<M> masks(drop ? segments.size() : 0);
  M out(qv.rows(), vv.cols());
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto [b, n] = segments[i];
    M p(n, n);
    p.noalias() = qv.middleRows(b, n) * kv.middleRows(b, n).transpose();
    p *= s;
    p = (p.colwise() - p.rowwise().maxCoeff()).array().exp().matrix();
    p.array().colwise() /= p.rowwise().sum().array();
    if (drop) {
      masks[i].resize(n, n);
      fill_dropout_mask(masks[i].data(), masks[i].size(), dropout_rate, rng);
      out.middleRows(b, n).noalias() = p.cwiseProduct(masks[i]) * vv.middleRows(b, n);
    } else {
      out.middleRows(b, n).noalias() = p * vv.middleRows(b, n);
    }
    probs[i] = std::move(p);
  }
  std::vector<RowSegment> segs(segments.begin(), segments.end());
  return q.tape().record(
      std::move(out), {q, k, v},
      [q, k, v, s, segs = std::move(segs), probs = std::move(probs), masks = std::move(masks)](BasicTape<S>& t,
                                                                                            const M& g) {
        const M& qv = q.value();
        const M& kv = k.value();
        const M& vv = v.value();
        const bool want_q = t.requires_grad(q);
        const bool want_k = t.requires_grad(k);
        const bool want_v = t.requires_grad(v);
        M dq = want_q ? M(qv.rows(), qv.cols()) : M();
        M dk = want_k ? M(kv.rows(), kv.cols()) : M();
        M dv = want_v ? M(vv.rows(), vv.cols()) : M();
        M weights;
        M dp;
        for (std::size_t i = 0; i < segs.size(); ++i) {
          const auto [b, n] = segs[i];
          const M& p = probs[i];
          const bool dropped = !masks.empty();
          if (dropped) weights = p.cwiseProduct(masks[i]);
          const M& w = dropped ? weights : p;
          const auto gs = g.middleRows(b, n);
          if (want_v) dv.middleRows(b, n).noalias() = w.transpose() * gs;
          if (!want_q && !want_k) continue;
          dp.resize(n, n);
          dp.noalias() = gs * vv.middleRows(b, n).transpose();
          if (dropped) dp.array() *= masks[i].array();
          // Softmax backward, then the scale.
          const Eigen::Matrix<S, Eigen::Dynamic, 1> dot = dp.cwiseProduct(p).rowwise().sum();
          dp = (p.array() * (dp.colwise() - dot).array() * s).matrix();
          if (want_q) dq.middleRows(b, n).noalias() = dp * kv.middleRows(b, n);
          if (want_k) dk.middleRows(b, n).noalias() = dp.transpose() * qv.middleRows(b, n);
        }
        if (want_q) t.accumulate(q, dq);
        if (want_k) t.accumulate(k, dk);
        if (want_v) t.accumulate(v, dv);
      });
}

template <typename S>
BasicVar<S> bce_with_logits(BasicVar<S> logits, const Matrix& labels) {
  using M = MatrixT<S>;
  const M& z = logits.value();
  require(z.cols() == 1 && labels.rows() == z.rows() && labels.cols() == 1, ErrorCategory::kShapeMismatch,
          "bce_with_logits expects matching n x 1 logits and labels");
  require(z.rows() > 0, ErrorCategory::kShapeMismatch, "bce_with_logits over an empty batch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double x = z(i, 0);
    total += std::max(x, 0.0) - x * labels(i, 0) + std::log1p(std::exp(-std::abs(x)));
  }
  M out(1, 1);
  out(0, 0) = static_cast<S>(total / static_cast<double>(z.rows()));
  return logits.tape().record(std::move(out), {logits}, [logits, labels](BasicTape<S>& t, const M& g) {
    const M& zv = logits.value();
    M d(zv.rows(), 1);
    const double inv_n = static_cast<double>(g(0, 0)) / static_cast<double>(zv.rows());
    for (Eigen::Index i = 0; i < zv.rows(); ++i) {
      d(i, 0) = static_cast<S>((stable_sigmoid(static_cast<double>(zv(i, 0))) - labels(i, 0)) * inv_n);
    }
    t.accumulate(logits, d);
  });
}

template <typename S>
BasicVar<S> time_encoding(const Matrix& deltas, BasicVar<S> freqs) {
  using M = MatrixT<S>;
  const Matrix w = freqs.value().template cast<double>();
  require(deltas.cols() == 1 && w.rows() == 1, ErrorCategory::kShapeMismatch,
          "time_encoding expects n x 1 intervals and 1 x k frequencies");
  const Eigen::Index k = w.cols();
  const double s = std::sqrt(1.0 / static_cast<double>(2 * k));
  Matrix enc(deltas.rows(), 2 * k);
  for (Eigen::Index i = 0; i < deltas.rows(); ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      const double phase = w(0, j) * deltas(i, 0);
      enc(i, 2 * j) = s * std::cos(phase);
      enc(i, 2 * j + 1) = s * std::sin(phase);
    }
  }
  BasicTape<S>& tape = freqs.tape();
  M out = enc.cast<S>();
  if (!tape.requires_grad(freqs)) return tape.constant(std::move(out));
  return tape.record(std::move(out), {freqs}, [freqs, deltas, enc = std::move(enc)](BasicTape<S>& t, const M& g) {
    // d/dw [s cos(w dt)] = -dt * s sin(w dt) = -dt * enc[., 2j+1]; similarly for sin.
    const Eigen::Index k = freqs.cols();
    Matrix dw = Matrix::Zero(1, k);
    for (Eigen::Index i = 0; i < deltas.rows(); ++i) {
      const double dt = deltas(i, 0);
      for (Eigen::Index j = 0; j < k; ++j) {
        dw(0, j) += dt * (-enc(i, 2 * j + 1) * static_cast<double>(g(i, 2 * j)) +
                          enc(i, 2 * j) * static_cast<double>(g(i, 2 * j + 1)));
      }
    }
    t.accumulate(freqs, dw.cast<S>());
  });
}

#define CTDG_INSTANTIATE_OPS(S)                                                                  \
  template BasicVar<S> matmul(BasicVar<S>, BasicVar<S>);                                         \
  template BasicVar<S> transpose(BasicVar<S>);                                                   \
  template BasicVar<S> add(BasicVar<S>, BasicVar<S>);                                            \
  template BasicVar<S> sub(BasicVar<S>, BasicVar<S>);                                            \
  template BasicVar<S> multiply(BasicVar<S>, BasicVar<S>);                                       \
  template BasicVar<S> scale(BasicVar<S>, double);                                               \
  template BasicVar<S> concat_cols(const std::vector<BasicVar<S>>&);                             \
  template BasicVar<S> vstack(const std::vector<BasicVar<S>>&);                                  \
  template BasicVar<S> slice_rows(BasicVar<S>, Eigen::Index, Eigen::Index);                      \
  template BasicVar<S> slice_cols(BasicVar<S>, Eigen::Index, Eigen::Index);                      \
  template BasicVar<S> gather_rows(BasicVar<S>, std::span<const Eigen::Index>);                  \
  template BasicVar<S> reshape(BasicVar<S>, Eigen::Index, Eigen::Index);                         \
  template BasicVar<S> sum(BasicVar<S>);                                                         \
  template BasicVar<S> row_mean(BasicVar<S>);                                                    \
  template BasicVar<S> segment_mean(BasicVar<S>, const std::vector<std::vector<Eigen::Index>>&); \
  template BasicVar<S> softmax_rows(BasicVar<S>);                                                \
  template BasicVar<S> layer_norm(BasicVar<S>, BasicVar<S>, BasicVar<S>, double);                \
  template BasicVar<S> relu(BasicVar<S>);                                                        \
  template BasicVar<S> gelu(BasicVar<S>);                                                        \
  template BasicVar<S> sigmoid(BasicVar<S>);                                                     \
  template BasicVar<S> dropout(BasicVar<S>, double, CounterRng&, bool);                          \
  template BasicVar<S> segment_attention(BasicVar<S>, BasicVar<S>, BasicVar<S>, std::span<const RowSegment>,    \
                                         double, double, CounterRng&, bool);                    \
  template BasicVar<S> bce_with_logits(BasicVar<S>, const Matrix&);                              \
  template BasicVar<S> time_encoding(const Matrix&, BasicVar<S>);

CTDG_INSTANTIATE_OPS(double)
CTDG_INSTANTIATE_OPS(float)

}  // namespace ctdg::diff
