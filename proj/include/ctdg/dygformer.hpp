#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ctdg/diff/checkpoint.hpp"
#include "ctdg/diff/ops.hpp"
#include "ctdg/encodings.hpp"
#include "ctdg/rng.hpp"
#include "ctdg/sequence.hpp"
#include "ctdg/temporal_graph.hpp"

namespace ctdg {

struct DyGFormerHyper {
  Eigen::Index d_n = 0;
  Eigen::Index d_e = 0;
  Eigen::Index d_t = 100;
  Eigen::Index d_c = 50;
  Eigen::Index d = 50;
  Eigen::Index d_out = 172;
  Eigen::Index heads = 2;
  Eigen::Index layers = 2;
  std::size_t max_len = 32;
  Eigen::Index patch = 1;
  double dropout = 0.1;
  bool use_ncoe = true;
  bool use_te = true;
  bool mix_sequences = true;
  bool sep_no = false;
  bool include_self = true;

  Eigen::Index width() const { return 4 * d; }
  Eigen::Index d_k() const { return width() / heads; }
  EncoderFlags encoder_flags() const { return {use_ncoe, use_te, sep_no}; }

  /// Throws ctdg::Error(kInvalidArgument) when the shapes cannot be built.
  void validate() const;
};

std::map<std::string, std::string> hyper_to_manifest(const DyGFormerHyper& h);
DyGFormerHyper hyper_from_manifest(const std::map<std::string, std::string>& m);

struct TransformerLayerParams {
  std::vector<diff::Parameter> w_q;  // per head, 4d x d_k
  std::vector<diff::Parameter> w_k;
  std::vector<diff::Parameter> w_v;
  diff::Parameter w_o;               // heads * d_k x 4d
  diff::Parameter w_1, b_1;          // 4d x 16d, 1 x 16d
  diff::Parameter w_2, b_2;          // 16d x 4d, 1 x 4d
  diff::Parameter ln1_gain, ln1_bias;
  diff::Parameter ln2_gain, ln2_bias;
};

/// One-hidden-layer ReLU perceptron producing a single logit.
struct MlpHeadParams {
  diff::Parameter w_1, b_1;
  diff::Parameter w_2, b_2;
};

struct ModelParams {
  EncoderParams encoder;
  std::vector<TransformerLayerParams> layers;
  diff::Parameter w_out, b_out;  // 4d x d_out, 1 x d_out
  MlpHeadParams link_decoder;     // 2 d_out -> d_out -> 1
  MlpHeadParams node_classifier;  // d_out -> d_out -> 1

  /// Every parameter in a fixed order (names are unique).
  std::vector<diff::Parameter*> all();
  std::vector<const diff::Parameter*> all() const;
  /// Encoder, Transformer and output layer: what the node head reuses.
  std::vector<diff::Parameter*> backbone();
  std::vector<diff::Parameter*> link_model();  // backbone + link decoder
  std::vector<diff::Parameter*> node_head();
};

/// Glorot-uniform weights, zero biases, unit layer-norm gains, and time
/// frequencies decaying geometrically from 1 to 1e-9.
ModelParams init_params(const DyGFormerHyper& hyper, std::uint64_t seed);

diff::TensorContainer to_container(const ModelParams& params, const DyGFormerHyper& hyper);
/// Restores parameters saved by to_container; shapes must match `hyper`.
ModelParams from_container(const diff::TensorContainer& c, const DyGFormerHyper& hyper);

struct GraphContext {
  const TemporalGraph* graph = nullptr;
  const NeighborIndex* index = nullptr;
};

/// Counts model inputs whose source event is not strictly older than the
/// query time.
struct LeakageAudit {
  std::size_t links = 0;
  std::size_t inputs = 0;
  std::size_t violations = 0;
};

struct ForwardOptions {
  bool train = false;
  CounterRng* rng = nullptr;  // required when train and dropout > 0
  LeakageAudit* audit = nullptr;
};

/// Contiguous rows that attend to each other.
using Segment = diff::RowSegment;

/// Pre-LN block: O = MSA(LN(z)) + z, out = FFN(LN(O)) + O, with attention
/// restricted to each segment. Dropout hits attention weights and the FFN
/// hidden layer.
/// Defined for double and float tapes.
template <typename S>
diff::BasicVar<S> transformer_layer(diff::BasicTape<S>& tape, diff::BasicVar<S> z, TransformerLayerParams& p,
                                    std::span<const Segment> segments, double dropout, const ForwardOptions& opts);

/// Evaluation-mode layer on a single segment (every row attends to every
/// row), written directly against Eigen.
Matrix transformer_layer(const Matrix& z, const TransformerLayerParams& p);

template <typename S>
struct PairRepresentations {
  diff::BasicVar<S> h_u;  // n x d_out
  diff::BasicVar<S> h_v;
};

/// Batched forward of the backbone for n queries on one tape.
template <typename S>
PairRepresentations<S> encode_pairs(diff::BasicTape<S>& tape, ModelParams& params, const DyGFormerHyper& hyper,
                                    const GraphContext& ctx, std::span<const PairQuery> queries,
                                    const ForwardOptions& opts = {});

/// Single-query convenience returning (h_u, h_v) in evaluation mode, in
/// double precision.
std::pair<Eigen::VectorXd, Eigen::VectorXd> encode_pair(ModelParams& params, const GraphContext& ctx, NodeId u,
                                                        NodeId v, double t, const DyGFormerHyper& hyper);

/// n x 1 logits of MLP([h_u || h_v]).
template <typename S>
diff::BasicVar<S> link_logits(diff::BasicTape<S>& tape, MlpHeadParams& head, diff::BasicVar<S> h_u,
                              diff::BasicVar<S> h_v);
/// n x 1 logits of MLP(h).
template <typename S>
diff::BasicVar<S> node_logits(diff::BasicTape<S>& tape, MlpHeadParams& head, diff::BasicVar<S> h);

double link_logit(const Eigen::VectorXd& h_u, const Eigen::VectorXd& h_v, const MlpHeadParams& head);
double node_logit(const Eigen::VectorXd& h, const MlpHeadParams& head);

/// Link probabilities in evaluation mode, computed with scalar type S in
/// shards of at most `shard` queries.
template <typename S>
std::vector<double> score_links(ModelParams& params, const DyGFormerHyper& hyper, const GraphContext& ctx,
                                std::span<const PairQuery> queries, std::size_t shard = 100,
                                LeakageAudit* audit = nullptr);

}  // namespace ctdg
