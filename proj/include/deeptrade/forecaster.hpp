#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "deeptrade/adam.hpp"
#include "deeptrade/dense.hpp"
#include "deeptrade/dropout.hpp"
#include "deeptrade/lstm.hpp"
#include "deeptrade/preprocess.hpp"
#include "deeptrade/rng.hpp"
#include "deeptrade/serialize.hpp"

namespace deeptrade {

inline double mse(const std::vector<double>& predicted,
                  const std::vector<double>& actual) {
  if (predicted.empty() || predicted.size() != actual.size())
    throw std::invalid_argument("mse: inputs must be non-empty equal-length");
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - actual[i];
    sum += d * d;
  }
  return sum / static_cast<double>(predicted.size());
}

struct TrainSchedule {
  double initial_lr = 0.001;
  int max_epochs = 300;
  int lr_patience = 5;
  double lr_factor = 0.2;
  int stop_patience = 10;
  int batch_size = 32;
};

/// Plateau logic of the training protocol, kept free of the training loop so
/// it can be exercised with synthetic validation curves: after lr_patience
/// epochs without a new best valid MSE the learning rate is multiplied by
/// lr_factor, after stop_patience epochs training stops.
class EarlyStopSchedule {
 public:
  explicit EarlyStopSchedule(const TrainSchedule& s)
      : schedule_(s), lr_(s.initial_lr) {}

  struct Decision {
    bool improved = false;
    bool reduce_lr = false;
    bool stop = false;
  };

  Decision observe(int epoch, double valid_mse) {
    Decision d;
    if (valid_mse < best_) {
      best_ = valid_mse;
      best_epoch_ = epoch;
      epochs_since_best_ = 0;
      d.improved = true;
      return d;
    }
    ++epochs_since_best_;
    if (epochs_since_best_ == schedule_.lr_patience) {
      lr_ *= schedule_.lr_factor;
      d.reduce_lr = true;
    }
    if (epochs_since_best_ >= schedule_.stop_patience) d.stop = true;
    return d;
  }

  double lr() const { return lr_; }
  double best() const { return best_; }
  int best_epoch() const { return best_epoch_; }

 private:
  TrainSchedule schedule_;
  double lr_;
  double best_ = std::numeric_limits<double>::infinity();
  int best_epoch_ = -1;
  int epochs_since_best_ = 0;
};

struct ForecasterConfig {
  std::size_t input_dim = 1;
  std::size_t hidden = 50;
  std::size_t layers = 4;
  double dropout = 0.2;
  std::size_t window = 10;
};

/// Stacked peephole LSTM with ReLU between layers (dropout after each
/// inter-layer ReLU during training) and a linear dense head on the last
/// step's top hidden vector.
struct Forecaster {
  ForecasterConfig cfg;
  std::vector<LstmCellParams> cells;
  DenseParams head;

  static Forecaster make(const ForecasterConfig& cfg) {
    Forecaster f;
    f.cfg = cfg;
    std::size_t in = cfg.input_dim;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      f.cells.push_back(make_lstm_cell(cfg.hidden, in));
      in = cfg.hidden;
    }
    f.head = make_dense(1, cfg.hidden, Activation::linear);
    return f;
  }

  void init(Rng& rng) {
    for (auto& c : cells) init_lstm_cell(c, rng);
    init_dense(head, rng);
  }

  std::vector<TensorRef> tensors() {
    std::vector<TensorRef> out;
    for (std::size_t l = 0; l < cells.size(); ++l)
      append_lstm_tensors(out, "lstm" + std::to_string(l), cells[l]);
    out.push_back(ref("head.W", head.W));
    out.push_back(ref("head.b", head.b));
    return out;
  }
};

struct ForecasterGrads {
  std::vector<LstmCellGrads> cells;
  DenseGrads head;

  static ForecasterGrads make(const Forecaster& f) {
    ForecasterGrads g;
    for (const auto& c : f.cells) g.cells.push_back(make_lstm_grads(c));
    g.head = make_dense_grads(f.head);
    return g;
  }

  std::vector<TensorRef> tensors() {
    std::vector<TensorRef> out;
    for (std::size_t l = 0; l < cells.size(); ++l)
      append_lstm_tensors(out, "lstm" + std::to_string(l), cells[l]);
    out.push_back(ref("head.W", head.W));
    out.push_back(ref("head.b", head.b));
    return out;
  }
};

namespace detail {

struct ForecasterTape {
  // caches[l][t]; masks[l][t] holds the combined ReLU/dropout scaling applied
  // to layer l's output before it fed layer l+1.
  std::vector<std::vector<LstmStepCache>> caches;
  std::vector<std::vector<Matrix>> masks;
  DenseCache head;
};

/// Runs the stack over a batch of windows (rows of ws.inputs selected by
/// `idx`). Returns per-sample predictions; fills the tape when training.
inline std::vector<double> forecaster_forward(
    const Forecaster& f, const WindowSet& ws,
    const std::vector<std::size_t>& idx, DropoutMode mode, Rng* dropout_rng,
    ForecasterTape* tape) {
  const std::size_t B = idx.size();
  const std::size_t W = ws.step();
  const std::size_t L = f.cells.size();
  require(W % f.cfg.input_dim == 0,
          "forecaster_forward: window not divisible by input dim");
  const std::size_t steps = W / f.cfg.input_dim;

  if (tape) {
    tape->caches.assign(L, std::vector<LstmStepCache>(steps));
    tape->masks.assign(L, std::vector<Matrix>(steps));
  }

  std::vector<Matrix> inputs(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    Matrix& x = inputs[t];
    x.resize(f.cfg.input_dim, B);
    for (std::size_t d = 0; d < f.cfg.input_dim; ++d)
      for (std::size_t b = 0; b < B; ++b)
        x(d, b) = ws.inputs(idx[b], t * f.cfg.input_dim + d);
  }

  Matrix m, c, m_next, c_next;
  for (std::size_t l = 0; l < L; ++l) {
    m.resize(f.cells[l].hidden_dim(), B);
    c.resize(f.cells[l].hidden_dim(), B);
    for (std::size_t t = 0; t < steps; ++t) {
      lstm_cell_forward(f.cells[l], inputs[t], m, c, m_next, c_next,
                        tape ? &tape->caches[l][t] : nullptr);
      std::swap(m, m_next);
      std::swap(c, c_next);
      if (l + 1 < L) {
        Matrix a = m;
        relu_inplace(a);
        if (mode == DropoutMode::train && f.cfg.dropout > 0.0) {
          require(dropout_rng != nullptr, "forecaster_forward: missing rng");
          Matrix mask = dropout(a, f.cfg.dropout, mode, *dropout_rng);
          if (tape) tape->masks[l][t] = std::move(mask);
        }
        inputs[t] = std::move(a);
      }
    }
  }

  Matrix pred = dense_forward(f.head, m, tape ? &tape->head : nullptr);
  std::vector<double> out(B);
  for (std::size_t b = 0; b < B; ++b) out[b] = pred(0, b);
  return out;
}

/// Backpropagation through time over the whole stack. `dpred` is dL/dy per
/// sample; parameter gradients accumulate into `grads`.
inline void forecaster_backward(const Forecaster& f, const ForecasterTape& tape,
                                const std::vector<double>& dpred,
                                ForecasterGrads& grads) {
  const std::size_t L = f.cells.size();
  const std::size_t steps = tape.caches.empty() ? 0 : tape.caches[0].size();
  const std::size_t B = dpred.size();

  Matrix dy(1, B);
  for (std::size_t b = 0; b < B; ++b) dy(0, b) = dpred[b];
  Matrix dm_head = dense_backward(f.head, tape.head, dy, grads.head);

  // dX flowing into each step of the layer above; empty above the top layer.
  std::vector<Matrix> dx_above;

  for (std::size_t li = L; li-- > 0;) {
    const std::size_t h = f.cells[li].hidden_dim();
    Matrix dm(h, B), dc(h, B);
    std::vector<Matrix> dx_below(steps);
    for (std::size_t t = steps; t-- > 0;) {
      // External gradient on this layer's m_t.
      if (li == L - 1) {
        if (t == steps - 1) {
          for (std::size_t i = 0; i < dm.size(); ++i)
            dm.storage()[i] += dm_head.storage()[i];
        }
      } else {
        Matrix ext = dx_above[t];
        const Matrix& x_above = tape.caches[li + 1][t].x;
        const Matrix* mask = tape.masks[li][t].empty() ? nullptr
                                                       : &tape.masks[li][t];
        for (std::size_t i = 0; i < ext.size(); ++i) {
          double v = ext.storage()[i];
          if (mask) v *= mask->storage()[i];
          if (x_above.storage()[i] <= 0.0) v = 0.0;  // ReLU gate
          ext.storage()[i] = v;
        }
        for (std::size_t i = 0; i < dm.size(); ++i)
          dm.storage()[i] += ext.storage()[i];
      }
      dx_below[t] =
          lstm_cell_backward(f.cells[li], tape.caches[li][t], dm, dc,
                             grads.cells[li]);
    }
    dx_above = std::move(dx_below);
  }
}

}  // namespace detail

/// Eval-mode predictions for a whole window set, processed in bounded
/// sub-batches.
inline std::vector<double> forecaster_predict(const Forecaster& f,
                                              const WindowSet& ws) {
  constexpr std::size_t kChunk = 256;
  std::vector<double> out;
  out.reserve(ws.count());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < ws.count(); start += kChunk) {
    const std::size_t end = std::min(ws.count(), start + kChunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    auto p = detail::forecaster_forward(f, ws, idx, DropoutMode::eval, nullptr,
                                        nullptr);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

/// Single-window convenience used by the trading strategies.
inline double forecaster_predict_one(const Forecaster& f,
                                     const std::vector<double>& window) {
  WindowSet ws;
  ws.inputs.resize(1, window.size());
  for (std::size_t j = 0; j < window.size(); ++j) ws.inputs(0, j) = window[j];
  ws.targets.assign(1, 0.0);
  return forecaster_predict(f, ws)[0];
}

struct EpochRecord {
  int epoch = 0;
  double train_mse = 0.0;
  double valid_mse = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  double best_valid_mse = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
};

inline double forecaster_valid_mse(const Forecaster& f, const WindowSet& ws) {
  return mse(forecaster_predict(f, ws), ws.targets);
}

/// Minimizes MSE with Adam under the plateau schedule. Windows are shuffled
/// once per epoch with the run seed; parameters of the best valid-MSE epoch
/// are restored before returning. Large logical batches are processed in
/// fixed sub-batches with gradient accumulation, so the result does not
/// depend on the sub-batch width.
inline TrainResult train_forecaster(Forecaster& model, const WindowSet& train,
                                    const WindowSet& valid,
                                    const TrainSchedule& schedule,
                                    std::uint64_t seed) {
  if (train.count() == 0 || valid.count() == 0)
    throw std::invalid_argument("train_forecaster: empty split");
  if (schedule.batch_size <= 0)
    throw std::invalid_argument("train_forecaster: batch size must be positive");

  constexpr std::size_t kPhysicalBatch = 64;
  Rng shuffle_rng(substream_seed(seed, "forecaster/shuffle"));
  Rng dropout_rng(substream_seed(seed, "forecaster/dropout"));

  auto params = model.tensors();
  ForecasterGrads grads = ForecasterGrads::make(model);
  auto grad_refs = grads.tensors();
  AdamState adam;
  adam.init(params);

  EarlyStopSchedule stopper(schedule);
  TrainResult result;
  std::vector<std::vector<double>> best_snapshot = snapshot_tensors(params);

  std::vector<std::size_t> order(train.count());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= schedule.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double sq_err_sum = 0.0;
    const std::size_t bs = static_cast<std::size_t>(schedule.batch_size);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      const double batch_n = static_cast<double>(end - start);
      zero_tensors(grad_refs);
      for (std::size_t sub = start; sub < end; sub += kPhysicalBatch) {
        const std::size_t sub_end = std::min(end, sub + kPhysicalBatch);
        std::vector<std::size_t> idx(order.begin() + sub,
                                     order.begin() + sub_end);
        detail::ForecasterTape tape;
        auto pred = detail::forecaster_forward(model, train, idx,
                                               DropoutMode::train,
                                               &dropout_rng, &tape);
        std::vector<double> dpred(idx.size());
        for (std::size_t b = 0; b < idx.size(); ++b) {
          const double err = pred[b] - train.targets[idx[b]];
          if (!std::isfinite(err))
            throw std::runtime_error(
                "train_forecaster: non-finite loss at epoch " +
                std::to_string(epoch));
          sq_err_sum += err * err;
          dpred[b] = 2.0 * err / batch_n;
        }
        detail::forecaster_backward(model, tape, dpred, grads);
      }
      adam_step(params, grad_refs, adam, stopper.lr());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_mse = sq_err_sum / static_cast<double>(train.count());
    rec.valid_mse = forecaster_valid_mse(model, valid);
    rec.lr = stopper.lr();
    result.history.push_back(rec);

    const auto d = stopper.observe(epoch, rec.valid_mse);
    if (d.improved) best_snapshot = snapshot_tensors(params);
    if (d.stop) break;
  }

  restore_tensors(params, best_snapshot);
  result.best_valid_mse = stopper.best();
  result.best_epoch = stopper.best_epoch();
  return result;
}

struct GridPoint {
  int batch_size = 32;
  std::size_t hidden = 50;
  double dropout = 0.2;
};

struct GridSpace {
  std::vector<int> batch_sizes{256, 128, 64, 32, 16};
  std::vector<std::size_t> hidden_units{200, 100, 50, 25};
  std::vector<double> dropout_rates{0.5, 0.4, 0.3, 0.2, 0.1};
  int max_epochs = 60;
};

struct GridOutcome {
  GridPoint point;
  double best_valid_mse = std::numeric_limits<double>::infinity();
  bool failed = false;  // training aborted (divergence); scored as infinity
};

struct GridResult {
  std::vector<GridOutcome> scores;  // enumeration order
  std::size_t best_index = 0;
};

/// Trains every combination at the reduced epoch budget and returns the
/// argmin of valid MSE; ties break toward the earliest enumeration position.
/// Each combination trains from its own derived seed, so the outcome is
/// independent of `jobs`.
inline GridResult grid_search(const GridSpace& space,
                              const ForecasterConfig& base,
                              const TrainSchedule& base_schedule,
                              const WindowSet& train, const WindowSet& valid,
                              std::uint64_t seed, int jobs = 1) {
  std::vector<GridPoint> points;
  for (int bs : space.batch_sizes)
    for (std::size_t h : space.hidden_units)
      for (double dr : space.dropout_rates)
        points.push_back(GridPoint{bs, h, dr});
  if (points.empty()) throw std::invalid_argument("grid_search: empty space");

  GridResult result;
  result.scores.resize(points.size());

  auto run_point = [&](std::size_t i) {
    ForecasterConfig cfg = base;
    cfg.hidden = points[i].hidden;
    cfg.dropout = points[i].dropout;
    TrainSchedule sched = base_schedule;
    sched.batch_size = points[i].batch_size;
    sched.max_epochs = space.max_epochs;
    Forecaster model = Forecaster::make(cfg);
    Rng init_rng(substream_seed(seed, "grid/init/" + std::to_string(i)));
    model.init(init_rng);
    try {
      auto tr = train_forecaster(model, train, valid, sched,
                                 substream_seed(seed, "grid/train/" +
                                                          std::to_string(i)));
      result.scores[i] = GridOutcome{points[i], tr.best_valid_mse, false};
    } catch (const std::runtime_error&) {
      result.scores[i] =
          GridOutcome{points[i], std::numeric_limits<double>::infinity(), true};
    }
  };

  if (jobs <= 1) {
    for (std::size_t i = 0; i < points.size(); ++i) run_point(i);
  } else {
    std::vector<std::thread> pool;
    std::size_t stride = static_cast<std::size_t>(jobs);
    for (std::size_t w = 0; w < stride; ++w) {
      pool.emplace_back([&, w]() {
        for (std::size_t i = w; i < points.size(); i += stride) run_point(i);
      });
    }
    for (auto& t : pool) t.join();
  }

  for (std::size_t i = 1; i < result.scores.size(); ++i)
    if (result.scores[i].best_valid_mse <
        result.scores[result.best_index].best_valid_mse)
      result.best_index = i;
  return result;
}

struct BaselineScores {
  double persistence_mse = 0.0;
  double linear_mse = 0.0;
  bool ridge_fallback = false;
};

/// Two reference forecasters: persistence (predict the last window element)
/// and ordinary least squares on the window, with a tiny-ridge fallback when
/// the normal equations are singular.
inline BaselineScores baseline_forecasters(const WindowSet& train,
                                           const WindowSet& test) {
  if (train.count() == 0 || test.count() == 0)
    throw std::invalid_argument("baseline_forecasters: empty window set");
  BaselineScores scores;

  std::vector<double> persist(test.count());
  for (std::size_t i = 0; i < test.count(); ++i)
    persist[i] = test.inputs(i, test.step() - 1);
  scores.persistence_mse = mse(persist, test.targets);

  const std::size_t k = train.step() + 1;  // weights plus intercept
  Matrix xtx(k, k);
  std::vector<double> xty(k, 0.0);
  std::vector<double> row(k, 1.0);
  for (std::size_t i = 0; i < train.count(); ++i) {
    for (std::size_t j = 0; j < train.step(); ++j) row[j] = train.inputs(i, j);
    row[k - 1] = 1.0;
    for (std::size_t a = 0; a < k; ++a) {
      xty[a] += row[a] * train.targets[i];
      for (std::size_t b = a; b < k; ++b) xtx(a, b) += row[a] * row[b];
    }
  }
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < a; ++b) xtx(a, b) = xtx(b, a);

  std::vector<double> beta;
  if (!cholesky_solve(xtx, xty, beta)) {
    scores.ridge_fallback = true;
    double tr = 0.0;
    for (std::size_t a = 0; a < k; ++a) tr += xtx(a, a);
    const double lambda = std::max(1e-10 * tr / static_cast<double>(k), 1e-12);
    for (std::size_t a = 0; a < k; ++a) xtx(a, a) += lambda;
    if (!cholesky_solve(xtx, xty, beta))
      throw std::runtime_error("baseline_forecasters: singular even with ridge");
  }

  std::vector<double> lin(test.count());
  for (std::size_t i = 0; i < test.count(); ++i) {
    double p = beta[k - 1];
    for (std::size_t j = 0; j < test.step(); ++j)
      p += beta[j] * test.inputs(i, j);
    lin[i] = p;
  }
  scores.linear_mse = mse(lin, test.targets);
  return scores;
}

}  // namespace deeptrade
