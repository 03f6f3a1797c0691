#pragma once

// Parsing-reading-predict network: a language model whose attention over
// previous positions is gated by estimated syntactic distances. Distances
// come from a two-layer MLP over the current word and its left context;
// gates are cumulative products of normalized distance differences; the
// gated attention context feeds an LSTM reader that predicts the next word.

#include <cstdint>
#include <string>
#include <vector>

#include "uparse/autodiff.hpp"
#include "uparse/distance.hpp"
#include "uparse/errors.hpp"
#include "uparse/nn.hpp"
#include "uparse/rng.hpp"

namespace uparse {

struct PrpnConfig {
  int vocab_size = 0;
  int embed_dim = 16;
  int hidden_dim = 24;
  int context_window = 3;  // L: left-context words fed to the distance MLP
  double tau = 1.0;        // gate sharpness
  double learning_rate = 0.2;
  int epochs = 10;
  int batch_size = 1;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (vocab_size < 2) throw DataError("prpn: vocab_size must be >= 2");
    if (embed_dim < 1 || hidden_dim < 1) throw DataError("prpn: dims must be >= 1");
    if (context_window < 1) throw DataError("prpn: context window must be >= 1");
    if (!(tau > 0)) throw DataError("prpn: tau must be > 0");
    if (epochs < 0 || batch_size < 1) throw DataError("prpn: bad schedule");
  }
};

// Token id conventions used across the toolkit.
constexpr int kUnkId = 0;
constexpr int kBoundaryId = 1;

template <class Scalar>
struct PrpnStateT {
  ad::Vec<Scalar> distances;                 // d-hat for boundaries 2..N
  std::vector<ad::Vec<Scalar>> hidden;       // reader states h_1..h_{N-1}
  std::vector<ad::Vec<Scalar>> gates;        // per reading step t >= 2
  std::vector<ad::Vec<Scalar>> attention;    // per reading step t >= 2
};

template <class Scalar>
class PrpnT {
 public:
  using Tape = ad::TapeT<Scalar>;
  using Var = ad::VarT<Scalar>;
  using Store = ad::ParamStoreT<Scalar>;

  explicit PrpnT(PrpnConfig cfg) : cfg_(cfg), params_(cfg.seed) {
    cfg_.validate();
    int ctx = cfg_.context_window + 1;
    params_.add_embedding("prpn.embed", cfg_.vocab_size, cfg_.embed_dim);
    params_.add_matrix("prpn.dist.w1", cfg_.hidden_dim, ctx * cfg_.embed_dim);
    params_.add_bias("prpn.dist.b1", cfg_.hidden_dim);
    params_.add_matrix("prpn.dist.w2", 1, cfg_.hidden_dim);
    params_.add_bias("prpn.dist.b2", 1);
    params_.add_matrix("prpn.attn.w", cfg_.hidden_dim,
                       cfg_.hidden_dim + cfg_.embed_dim);
    params_.add_matrix("prpn.reader.w_ih", 4 * cfg_.hidden_dim,
                       cfg_.embed_dim + cfg_.hidden_dim);
    params_.add_matrix("prpn.reader.w_hh", 4 * cfg_.hidden_dim, cfg_.hidden_dim);
    params_.add_bias("prpn.reader.b", 4 * cfg_.hidden_dim);
    params_.add_matrix("prpn.out.w", cfg_.vocab_size, cfg_.hidden_dim);
    params_.add_bias("prpn.out.b", cfg_.vocab_size);
  }

  PrpnT(PrpnConfig cfg, Store&& params)
      : cfg_(cfg), params_(std::move(params)) {
    cfg_.validate();
    const auto& embed = params_.at("prpn.embed").value;
    if (embed.rows() != cfg_.vocab_size || embed.cols() != cfg_.embed_dim ||
        params_.at("prpn.out.w").value.rows() != cfg_.vocab_size ||
        params_.at("prpn.dist.w1").value.cols() !=
            (cfg_.context_window + 1) * cfg_.embed_dim) {
      throw DataError("prpn: checkpoint does not match the configuration");
    }
  }

  const PrpnConfig& config() const { return cfg_; }
  Store& params() { return params_; }
  const Store& params() const { return params_; }

  // d-hat_t for t = 2..N: a two-layer MLP over the embeddings of w_{t-L}..w_t,
  // with positions left of the sentence padded by the boundary embedding.
  std::vector<Var> estimate_distances(Tape& tape,
                                      const std::vector<int>& ids) const {
    check_ids(ids);
    int n = static_cast<int>(ids.size());
    Var embed = tape.param("prpn.embed");
    Var w1 = tape.param("prpn.dist.w1");
    Var b1 = tape.param("prpn.dist.b1");
    Var w2 = tape.param("prpn.dist.w2");
    Var b2 = tape.param("prpn.dist.b2");
    std::vector<Var> dhat;
    dhat.reserve(static_cast<std::size_t>(n - 1));
    for (int t = 2; t <= n; ++t) {
      std::vector<Var> window;
      window.reserve(static_cast<std::size_t>(cfg_.context_window + 1));
      for (int j = t - cfg_.context_window; j <= t; ++j) {
        int id = j >= 1 ? ids[static_cast<std::size_t>(j - 1)] : kBoundaryId;
        window.push_back(ad::lookup(embed, id));
      }
      Var x = ad::concat_rows(window);
      Var h = ad::tanh(ad::affine(w1, x, b1));
      dhat.push_back(ad::affine(w2, h, b2));
    }
    return dhat;
  }

  // Gates g_i^t for 1 <= i <= t-1, computed right to left as cumulative
  // products of alpha_j^t = (hardtanh(tau * (d_t - d_j)) + 1) / 2. dhat[k]
  // holds d-hat_{k+2}; the empty product at i = t-1 is exactly 1.
  static std::vector<Var> attention_gates(Tape& tape, const std::vector<Var>& dhat,
                                          Scalar tau, int t) {
    if (t < 2) throw DataError("attention_gates: t must be >= 2");
    if (static_cast<int>(dhat.size()) < t - 1) {
      throw DataError("attention_gates: need distances up to position " +
                      std::to_string(t));
    }
    std::vector<Var> gates(static_cast<std::size_t>(t - 1));
    Var one = tape.scalar(Scalar(1));
    gates[static_cast<std::size_t>(t - 2)] = one;
    Var dt = dhat[static_cast<std::size_t>(t - 2)];
    for (int i = t - 2; i >= 1; --i) {
      int j = i + 1;  // 2 <= j <= t-1
      Var diff = ad::scale(ad::sub(dt, dhat[static_cast<std::size_t>(j - 2)]), tau);
      Var alpha = ad::scale(ad::add(ad::hardtanh(diff), one), Scalar(0.5));
      gates[static_cast<std::size_t>(i - 1)] =
          ad::cmul(gates[static_cast<std::size_t>(i)], alpha);
    }
    return gates;
  }

  struct Attention {
    Var context;
    Var weights;      // s_i^t, convex over the previous positions
    Var raw_weights;  // inner-sentence attention before gating
  };

  // Inner-sentence attention over the previous reader states, reweighted by
  // the gates and renormalized to a convex combination. If the gate mass
  // vanishes, all attention falls on position t-1.
  static Attention structured_attention(Tape& tape, const std::vector<Var>& h_prev,
                                        Var attn_w, Var h_last, Var w_embed,
                                        const std::vector<Var>& gates) {
    if (h_prev.empty() || h_prev.size() != gates.size()) {
      throw DataError("structured_attention: states and gates disagree");
    }
    Var query = ad::matmul(attn_w, ad::concat_rows<Scalar>({h_last, w_embed}));
    Var states = ad::concat_cols(h_prev);
    Var scores = ad::matmul(ad::transpose(states), query);
    Var raw = ad::softmax(scores);
    Var gate_vec = ad::concat_rows(gates);
    Var weighted = ad::cmul(gate_vec, raw);
    Scalar mass = weighted.value().sum();
    Var weights;
    if (mass <= Scalar(0)) {
      ad::Mat<Scalar> pin = ad::Mat<Scalar>::Zero(gate_vec.rows(), 1);
      pin(gate_vec.rows() - 1, 0) = Scalar(1);
      weights = tape.constant(pin);
    } else {
      weights = ad::matmul(weighted, ad::reciprocal(ad::sum(weighted)));
    }
    Var context = ad::matmul(states, weights);
    return {context, weights, raw};
  }

  struct LmGraph {
    Var loss;                     // mean next-token cross-entropy
    std::vector<Var> dhat;        // d-hat_2..d-hat_N
    std::vector<Var> predictions; // per position, distribution over the vocab
    PrpnStateT<Scalar> state;
  };

  LmGraph lm_forward(Tape& tape, const std::vector<int>& ids) const {
    int n = static_cast<int>(ids.size());
    if (n < 2) throw DataError("prpn: lm_forward needs at least 2 tokens");
    LmGraph g;
    g.dhat = estimate_distances(tape, ids);

    Var embed = tape.param("prpn.embed");
    Var attn_w = tape.param("prpn.attn.w");
    Var w_ih = tape.param("prpn.reader.w_ih");
    Var w_hh = tape.param("prpn.reader.w_hh");
    Var rb = tape.param("prpn.reader.b");
    Var out_w = tape.param("prpn.out.w");
    Var out_b = tape.param("prpn.out.b");

    ad::NodeStateT<Scalar> reader{
        tape.constant(ad::Mat<Scalar>::Zero(cfg_.hidden_dim, 1)),
        tape.constant(ad::Mat<Scalar>::Zero(cfg_.hidden_dim, 1))};
    std::vector<Var> h_prev;
    Var loss_sum = tape.scalar(Scalar(0));

    for (int t = 1; t <= n - 1; ++t) {
      Var x = ad::lookup(embed, ids[static_cast<std::size_t>(t - 1)]);
      Var context;
      if (t == 1) {
        context = tape.constant(ad::Mat<Scalar>::Zero(cfg_.hidden_dim, 1));
      } else {
        std::vector<Var> gates =
            attention_gates(tape, g.dhat, static_cast<Scalar>(cfg_.tau), t);
        Attention attn =
            structured_attention(tape, h_prev, attn_w, reader.h, x, gates);
        context = attn.context;
        ad::Vec<Scalar> gate_values(t - 1), attn_values(t - 1);
        for (int i = 0; i < t - 1; ++i) {
          gate_values[i] = gates[static_cast<std::size_t>(i)].scalar_value();
        }
        attn_values = attn.weights.value().col(0);
        g.state.gates.push_back(std::move(gate_values));
        g.state.attention.push_back(std::move(attn_values));
      }
      reader = ad::lstm_step(w_ih, w_hh, rb,
                             ad::concat_rows<Scalar>({x, context}), reader);
      h_prev.push_back(reader.h);
      g.state.hidden.push_back(reader.h.value().col(0));

      Var logits = ad::affine(out_w, reader.h, out_b);
      g.predictions.push_back(ad::softmax(logits));
      loss_sum = ad::add(loss_sum,
                         ad::cross_entropy(logits, ids[static_cast<std::size_t>(t)]));
    }
    g.loss = ad::scale(loss_sum, Scalar(1) / static_cast<Scalar>(n - 1));
    g.state.distances.resize(n - 1);
    for (int k = 0; k < n - 1; ++k) {
      g.state.distances[k] = g.dhat[static_cast<std::size_t>(k)].scalar_value();
    }
    return g;
  }

  // Distance vector for one sentence, aligned so entry k belongs to the
  // boundary between tokens k+1 and k+2.
  DistanceVector extract_distances(const std::vector<int>& ids) {
    if (ids.size() < 2) {
      throw DataError("prpn: extract_distances needs at least 2 tokens");
    }
    Tape tape(params_);
    std::vector<Var> dhat = estimate_distances(tape, ids);
    DistanceVector d(static_cast<Eigen::Index>(dhat.size()));
    for (std::size_t k = 0; k < dhat.size(); ++k) {
      d[static_cast<Eigen::Index>(k)] =
          static_cast<double>(dhat[k].scalar_value());
    }
    return d;
  }

 private:
  void check_ids(const std::vector<int>& ids) const {
    if (ids.size() < 2) throw DataError("prpn: sentence needs at least 2 tokens");
    for (int id : ids) {
      if (id < 0 || id >= cfg_.vocab_size) {
        throw DataError("prpn: token id " + std::to_string(id) +
                        " outside vocabulary of " + std::to_string(cfg_.vocab_size));
      }
    }
  }

  PrpnConfig cfg_;
  Store params_;
};

struct TrainLog {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_metric;  // task accuracy where applicable
  std::vector<double> epoch_f;       // parsing F against references, if logged
};

// Language-model training with SGD, gradient-norm clipping, and seeded
// shuffling. Batches average the per-sentence losses.
template <class Scalar>
TrainLog train_lm(PrpnT<Scalar>& model,
                  const std::vector<std::vector<int>>& corpus) {
  if (corpus.empty()) throw DataError("train_lm: empty corpus");
  const PrpnConfig& cfg = model.config();
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainLog log;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    std::size_t done = 0;
    while (done < order.size()) {
      std::size_t batch = std::min<std::size_t>(
          static_cast<std::size_t>(cfg.batch_size), order.size() - done);
      model.params().zero_grads();
      for (std::size_t b = 0; b < batch; ++b) {
        const std::vector<int>& sent = corpus[order[done + b]];
        ad::TapeT<Scalar> tape(model.params());
        auto graph = model.lm_forward(tape, sent);
        double loss = static_cast<double>(graph.loss.scalar_value());
        if (!std::isfinite(loss)) {
          throw NumericError("train_lm: non-finite loss at epoch " +
                             std::to_string(epoch + 1));
        }
        total += loss;
        tape.backward(ad::scale(graph.loss, Scalar(1) / static_cast<Scalar>(batch)));
      }
      model.params().clip_grads(static_cast<Scalar>(cfg.clip_norm));
      model.params().sgd_step(static_cast<Scalar>(cfg.learning_rate));
      done += batch;
    }
    log.epoch_loss.push_back(total / static_cast<double>(corpus.size()));
  }
  return log;
}

}  // namespace uparse
