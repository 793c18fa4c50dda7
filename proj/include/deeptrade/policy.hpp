#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "deeptrade/activations.hpp"
#include "deeptrade/dense.hpp"
#include "deeptrade/kv.hpp"
#include "deeptrade/lstm.hpp"
#include "deeptrade/serialize.hpp"

namespace deeptrade {

struct PolicyConfig {
  std::size_t obs_dim = 12;
  std::size_t hidden = 50;
  std::size_t layers = 1;
  std::size_t actions = 24;
};

/// Shared recurrent actor-critic: stacked peephole LSTM backbone (ReLU
/// between layers), a linear logits head over the actions and a scalar value
/// head, both reading the top layer's hidden vector. The action distribution
/// is the softmax of the logits; all the loss math works in log space.
struct PolicyNet {
  PolicyConfig cfg;
  std::vector<LstmCellParams> cells;
  DenseParams pi_head;  // (actions, hidden) logits
  DenseParams v_head;   // (1, hidden)

  static PolicyNet make(const PolicyConfig& cfg) {
    PolicyNet net;
    net.cfg = cfg;
    std::size_t in = cfg.obs_dim;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      net.cells.push_back(make_lstm_cell(cfg.hidden, in));
      in = cfg.hidden;
    }
    net.pi_head = make_dense(cfg.actions, cfg.hidden, Activation::linear);
    net.v_head = make_dense(1, cfg.hidden, Activation::linear);
    return net;
  }

  void init(Rng& rng) {
    for (auto& c : cells) init_lstm_cell(c, rng);
    init_dense(pi_head, rng);
    init_dense(v_head, rng);
  }

  std::vector<TensorRef> tensors() {
    std::vector<TensorRef> out;
    for (std::size_t l = 0; l < cells.size(); ++l)
      append_lstm_tensors(out, "lstm" + std::to_string(l), cells[l]);
    out.push_back(ref("pi.W", pi_head.W));
    out.push_back(ref("pi.b", pi_head.b));
    out.push_back(ref("v.W", v_head.W));
    out.push_back(ref("v.b", v_head.b));
    return out;
  }

  KvFile config_echo() const {
    KvFile kv;
    kv.set("policy.obs_dim", static_cast<std::int64_t>(cfg.obs_dim));
    kv.set("policy.hidden", static_cast<std::int64_t>(cfg.hidden));
    kv.set("policy.layers", static_cast<std::int64_t>(cfg.layers));
    kv.set("policy.actions", static_cast<std::int64_t>(cfg.actions));
    return kv;
  }

  static PolicyConfig config_from_echo(const KvFile& kv) {
    PolicyConfig cfg;
    cfg.obs_dim = static_cast<std::size_t>(kv.get_i64("policy.obs_dim"));
    cfg.hidden = static_cast<std::size_t>(kv.get_i64("policy.hidden"));
    cfg.layers = static_cast<std::size_t>(kv.get_i64("policy.layers"));
    cfg.actions = static_cast<std::size_t>(kv.get_i64("policy.actions"));
    return cfg;
  }
};

struct PolicyGrads {
  std::vector<LstmCellGrads> cells;
  DenseGrads pi_head, v_head;

  static PolicyGrads make(const PolicyNet& net) {
    PolicyGrads g;
    for (const auto& c : net.cells) g.cells.push_back(make_lstm_grads(c));
    g.pi_head = make_dense_grads(net.pi_head);
    g.v_head = make_dense_grads(net.v_head);
    return g;
  }

  std::vector<TensorRef> tensors() {
    std::vector<TensorRef> out;
    for (std::size_t l = 0; l < cells.size(); ++l)
      append_lstm_tensors(out, "lstm" + std::to_string(l), cells[l]);
    out.push_back(ref("pi.W", pi_head.W));
    out.push_back(ref("pi.b", pi_head.b));
    out.push_back(ref("v.W", v_head.W));
    out.push_back(ref("v.b", v_head.b));
    return out;
  }
};

/// Per-layer (m, c) pairs; columns are batch lanes.
struct RecurrentState {
  std::vector<Matrix> m, c;

  static RecurrentState zero(const PolicyNet& net, std::size_t batch) {
    RecurrentState s;
    for (const auto& cell : net.cells) {
      s.m.emplace_back(cell.hidden_dim(), batch);
      s.c.emplace_back(cell.hidden_dim(), batch);
    }
    return s;
  }

  void zero_column(std::size_t b) {
    for (std::size_t l = 0; l < m.size(); ++l) {
      for (std::size_t i = 0; i < m[l].rows(); ++i) {
        m[l](i, b) = 0.0;
        c[l](i, b) = 0.0;
      }
    }
  }
};

/// Tape for one sequence pass over a batch of equal-length chunks.
struct PolicySeqCache {
  std::size_t steps = 0;
  std::vector<std::vector<LstmStepCache>> cells;  // [layer][t]
  std::vector<DenseCache> pi, v;                  // [t]
  std::vector<std::vector<std::uint8_t>> reset_before;  // [t][b]
};

struct PolicySeqOut {
  std::vector<Matrix> logp;          // [t] (actions, B)
  std::vector<std::vector<double>> value;  // [t][b]
};

/// Runs the net over `steps` time steps. `obs` holds one (obs_dim, B) matrix
/// per step; `reset_before[t][b]` zeroes lane b's recurrent state before
/// consuming step t (episode boundaries). `state` is advanced in place.
inline PolicySeqOut policy_seq_forward(
    const PolicyNet& net, const std::vector<Matrix>& obs,
    RecurrentState& state,
    const std::vector<std::vector<std::uint8_t>>* reset_before,
    PolicySeqCache* cache) {
  const std::size_t steps = obs.size();
  const std::size_t L = net.cells.size();
  const std::size_t B = steps ? obs[0].cols() : 0;

  if (cache) {
    cache->steps = steps;
    cache->cells.assign(L, std::vector<LstmStepCache>(steps));
    cache->pi.assign(steps, DenseCache{});
    cache->v.assign(steps, DenseCache{});
    cache->reset_before.assign(steps, std::vector<std::uint8_t>(B, 0));
  }

  PolicySeqOut out;
  out.logp.resize(steps);
  out.value.assign(steps, std::vector<double>(B, 0.0));

  Matrix m_next, c_next;
  for (std::size_t t = 0; t < steps; ++t) {
    if (reset_before) {
      for (std::size_t b = 0; b < B; ++b)
        if ((*reset_before)[t][b]) {
          state.zero_column(b);
          if (cache) cache->reset_before[t][b] = 1;
        }
    }
    const Matrix* x = &obs[t];
    Matrix relu_buf;
    for (std::size_t l = 0; l < L; ++l) {
      lstm_cell_forward(net.cells[l], *x, state.m[l], state.c[l], m_next,
                        c_next, cache ? &cache->cells[l][t] : nullptr);
      std::swap(state.m[l], m_next);
      std::swap(state.c[l], c_next);
      if (l + 1 < L) {
        relu_buf = state.m[l];
        relu_inplace(relu_buf);
        x = &relu_buf;
      }
    }
    const Matrix& top = state.m[L - 1];
    Matrix logits = dense_forward(net.pi_head, top, cache ? &cache->pi[t] : nullptr);
    out.logp[t] = log_softmax_columns(logits);
    Matrix v = dense_forward(net.v_head, top, cache ? &cache->v[t] : nullptr);
    for (std::size_t b = 0; b < B; ++b) out.value[t][b] = v(0, b);
  }
  return out;
}

/// Reverse pass matching policy_seq_forward. `dlogits[t]` and `dvalue[t]`
/// are the loss gradients at each step; parameter gradients accumulate into
/// `grads`. Episode-boundary resets stop gradient flow exactly where the
/// forward pass zeroed state.
inline void policy_seq_backward(const PolicyNet& net,
                                const PolicySeqCache& cache,
                                const std::vector<Matrix>& dlogits,
                                const std::vector<std::vector<double>>& dvalue,
                                PolicyGrads& grads) {
  const std::size_t steps = cache.steps;
  const std::size_t L = net.cells.size();
  if (steps == 0) return;
  const std::size_t B = cache.cells[0][0].x.cols();

  // External gradient on the top layer's m at each step (from both heads).
  std::vector<Matrix> dm_top(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    Matrix dv(1, B);
    for (std::size_t b = 0; b < B; ++b) dv(0, b) = dvalue[t][b];
    dm_top[t] = dense_backward(net.pi_head, cache.pi[t], dlogits[t], grads.pi_head);
    Matrix dm_v = dense_backward(net.v_head, cache.v[t], dv, grads.v_head);
    for (std::size_t i = 0; i < dm_top[t].size(); ++i)
      dm_top[t].storage()[i] += dm_v.storage()[i];
  }

  std::vector<Matrix> dx_above;  // gradient on the layer above's input per t
  for (std::size_t li = L; li-- > 0;) {
    const std::size_t h = net.cells[li].hidden_dim();
    Matrix dm(h, B), dc(h, B);
    std::vector<Matrix> dx_below(steps);
    for (std::size_t t = steps; t-- > 0;) {
      if (li == L - 1) {
        for (std::size_t i = 0; i < dm.size(); ++i)
          dm.storage()[i] += dm_top[t].storage()[i];
      } else {
        const Matrix& x_above = cache.cells[li + 1][t].x;
        for (std::size_t i = 0; i < dm.size(); ++i) {
          double v = dx_above[t].storage()[i];
          if (x_above.storage()[i] <= 0.0) v = 0.0;  // ReLU gate
          dm.storage()[i] += v;
        }
      }
      dx_below[t] = lstm_cell_backward(net.cells[li], cache.cells[li][t], dm,
                                       dc, grads.cells[li]);
      if (!cache.reset_before.empty()) {
        for (std::size_t b = 0; b < B; ++b) {
          if (cache.reset_before[t][b]) {
            for (std::size_t i = 0; i < h; ++i) {
              dm(i, b) = 0.0;
              dc(i, b) = 0.0;
            }
          }
        }
      }
    }
    dx_above = std::move(dx_below);
  }
}

struct PolicyForwardResult {
  std::vector<double> probs;  // action distribution, sums to 1
  std::vector<double> logp;   // element-wise log of probs
  double value = 0.0;
};

/// Single-observation convenience: one recurrent step, batch width 1.
inline PolicyForwardResult policy_forward(const PolicyNet& net,
                                          const std::vector<double>& obs,
                                          RecurrentState& state) {
  require(obs.size() == net.cfg.obs_dim, "policy_forward: obs dim mismatch");
  std::vector<Matrix> x(1);
  x[0].resize(net.cfg.obs_dim, 1);
  for (std::size_t i = 0; i < obs.size(); ++i) x[0](i, 0) = obs[i];
  PolicySeqOut out = policy_seq_forward(net, x, state, nullptr, nullptr);
  PolicyForwardResult r;
  r.value = out.value[0][0];
  r.logp.resize(net.cfg.actions);
  r.probs.resize(net.cfg.actions);
  for (std::size_t a = 0; a < net.cfg.actions; ++a) {
    r.logp[a] = out.logp[0](a, 0);
    r.probs[a] = std::exp(r.logp[a]);
  }
  return r;
}

inline void save_policy(const std::string& path, PolicyNet& net) {
  nnc::save(path, net.tensors());
}

inline void load_policy(const std::string& path, PolicyNet& net) {
  nnc::restore(nnc::load(path), net.tensors());
}

}  // namespace deeptrade
