#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "deeptrade/csv.hpp"
#include "deeptrade/kv.hpp"
#include "deeptrade/rng.hpp"

namespace deeptrade {

struct EnvConfig {
  double initial_cash = 10000.0;   // USD
  double fee_rate = 0.0025;        // fraction of transaction amount
  double max_slippage = 0.02;      // adverse uniform draw upper bound
  double min_unit = 0.125;         // BTC lot size and quantization grid
  int amount_levels = 8;           // per action kind -> 3 x 8 = 24 actions
  int observation_window = 10;     // normalized diffs per observation
  int omega_window = 60;           // trailing net-worth returns for reward
  double omega_threshold = 0.0;    // target return threshold r
  double omega_cap = 10.0;

  int action_count() const { return 3 * amount_levels; }
  int observation_dim() const { return observation_window + 2; }
};

enum class ActionKind { buy, sell, hold };

inline const char* action_kind_name(ActionKind k) {
  switch (k) {
    case ActionKind::buy: return "buy";
    case ActionKind::sell: return "sell";
    case ActionKind::hold: return "hold";
  }
  return "hold";
}

struct DiscreteAction {
  ActionKind kind = ActionKind::hold;
  int level = 1;  // in [1, amount_levels]
};

inline DiscreteAction decode_action(int index, int amount_levels = 8) {
  if (index < 0 || index >= 3 * amount_levels)
    throw std::invalid_argument("decode_action: index out of range");
  static constexpr ActionKind kKinds[3] = {ActionKind::buy, ActionKind::sell,
                                           ActionKind::hold};
  return DiscreteAction{kKinds[index / amount_levels],
                        index % amount_levels + 1};
}

inline int encode_action(const DiscreteAction& a, int amount_levels = 8) {
  int kind_index = a.kind == ActionKind::buy ? 0
                   : a.kind == ActionKind::sell ? 1
                                                : 2;
  return kind_index * amount_levels + (a.level - 1);
}

struct Portfolio {
  double cash = 0.0;      // USD, never negative
  double holdings = 0.0;  // BTC, non-negative multiple of min_unit
};

struct StepInfo {
  double executed_quantity = 0.0;  // BTC
  double exec_price = 0.0;         // USD, 0 when nothing executed
  double fee_paid = 0.0;           // USD
  double net_worth = 0.0;          // USD at the post-step mark price
};

struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

struct TraceRow {
  long step = 0;
  std::int64_t timestamp = 0;
  double close = 0.0;
  std::string action = "hold";
  int level = 0;  // 0 for explicit-quantity orders
  double exec_price = 0.0;
  double quantity = 0.0;
  double fee = 0.0;
  double cash = 0.0;
  double holdings = 0.0;
  double net_worth = 0.0;
  double reward = 0.0;
};

/// Discrete Omega estimator over the trailing window of net-worth returns:
/// sum of gains over threshold divided by sum of shortfalls below it,
/// clipped to [0, cap]. All-gain windows hit the cap; a window with no
/// movement at all scores 1 (the limit of the ratio as the distribution
/// collapses onto the threshold).
inline double omega_reward(const std::vector<double>& networth_history,
                           const EnvConfig& cfg) {
  if (networth_history.size() < 2) return 0.0;
  const std::size_t returns_available = networth_history.size() - 1;
  const std::size_t window =
      std::min<std::size_t>(returns_available,
                            static_cast<std::size_t>(cfg.omega_window));
  const double r = cfg.omega_threshold;
  double gains = 0.0, losses = 0.0;
  for (std::size_t i = networth_history.size() - window;
       i < networth_history.size(); ++i) {
    const double x =
        networth_history[i] / networth_history[i - 1] - 1.0;
    if (x > r)
      gains += x - r;
    else
      losses += r - x;
  }
  if (losses == 0.0) return gains > 0.0 ? cfg.omega_cap : 1.0;
  const double omega = gains / losses;
  return std::min(std::max(omega, 0.0), cfg.omega_cap);
}

inline double mark_to_market(const Portfolio& p, double close) {
  if (!(close > 0.0))
    throw std::invalid_argument("mark_to_market: price must be positive");
  return p.cash + p.holdings * close;
}

/// Market data for one episode: closes with timestamps plus the aligned
/// normalized close differences used as observation features
/// (norm_diffs[i] corresponds to closes[i+1] - closes[i]).
struct MarketSegment {
  std::vector<std::int64_t> timestamps;
  std::vector<double> closes;
  std::vector<double> norm_diffs;

  void validate() const {
    if (closes.size() != timestamps.size())
      throw std::invalid_argument("MarketSegment: timestamp/close mismatch");
    if (norm_diffs.size() + 1 != closes.size())
      throw std::invalid_argument(
          "MarketSegment: diffs must be one shorter than closes");
    for (double c : closes)
      if (!(c > 0.0))
        throw std::invalid_argument("MarketSegment: non-positive close");
  }
};

/// Episodic simulator: one trade per candle close, adverse uniform slippage,
/// proportional fees, lot quantization, infeasible orders degrade to hold.
/// Deterministic given (seed, data, action sequence).
class TradingEnv {
 public:
  TradingEnv(MarketSegment data, EnvConfig cfg, std::uint64_t seed)
      : data_(std::move(data)), cfg_(cfg), rng_(seed), seed_(seed) {
    data_.validate();
    if (data_.closes.size() <
        static_cast<std::size_t>(cfg_.observation_window) + 2)
      throw std::invalid_argument("TradingEnv: segment too short");
    reset();
  }

  const EnvConfig& config() const { return cfg_; }
  std::size_t obs_dim() const {
    return static_cast<std::size_t>(cfg_.observation_dim());
  }
  int action_count() const { return cfg_.action_count(); }

  /// Restarts the episode. The slippage stream continues across resets;
  /// reseed() rewinds it to the constructor state.
  std::vector<double> reset() {
    portfolio_ = Portfolio{cfg_.initial_cash, 0.0};
    cursor_ = static_cast<std::size_t>(cfg_.observation_window);
    done_ = false;
    step_count_ = 0;
    trace_.clear();
    networth_history_.assign(1, mark_to_market(portfolio_, close_at(cursor_)));
    return observation();
  }

  void reseed(std::uint64_t seed) {
    rng_ = Rng(seed);
    seed_ = seed;
  }
  std::uint64_t seed() const { return seed_; }

  bool done() const { return done_; }
  const Portfolio& portfolio() const { return portfolio_; }
  double net_worth() const { return mark_to_market(portfolio_, close_at(cursor_)); }
  const std::vector<TraceRow>& trace() const { return trace_; }
  std::size_t steps_remaining() const {
    return done_ ? 0 : data_.closes.size() - 1 - cursor_;
  }

  StepResult step(int action_index) {
    const DiscreteAction a = decode_action(action_index, cfg_.amount_levels);
    return execute(a.kind, a.level, 0.0);
  }

  /// Explicit-quantity interface used by the rule-based strategies.
  /// Quantities are floored to the lot grid and capped by what cash or
  /// holdings allow; pass +infinity to trade the maximum.
  StepResult step_order(ActionKind kind, double quantity) {
    return execute(kind, 0, kind == ActionKind::hold ? 0.0 : quantity);
  }

 private:
  double close_at(std::size_t i) const { return data_.closes[i]; }

  double quantize(double qty) const {
    if (!(qty > 0.0)) return 0.0;
    return std::floor(qty / cfg_.min_unit) * cfg_.min_unit;
  }

  std::vector<double> observation() const {
    std::vector<double> obs;
    obs.reserve(obs_dim());
    const std::size_t w = static_cast<std::size_t>(cfg_.observation_window);
    for (std::size_t i = cursor_ - w; i < cursor_; ++i)
      obs.push_back(data_.norm_diffs[i]);
    const double nw = mark_to_market(portfolio_, close_at(cursor_));
    obs.push_back(portfolio_.cash / nw);
    obs.push_back(portfolio_.holdings * close_at(cursor_) / nw);
    return obs;
  }

  /// `level` > 0 selects a fraction level/amount_levels of cash (buy) or
  /// holdings (sell); level 0 means `requested` is an explicit BTC quantity.
  /// Infeasible orders quantize to zero and degrade to hold; the requested
  /// kind is still recorded in the trace with quantity 0.
  StepResult execute(ActionKind kind, int level, double requested) {
    if (done_) throw std::logic_error("TradingEnv: step after episode end");

    const double close = close_at(cursor_);
    double exec_price = 0.0;
    double quantity = 0.0;
    double fee = 0.0;

    if (kind == ActionKind::buy) {
      const double s = rng_.uniform(0.0, cfg_.max_slippage);
      const double price = close * (1.0 + s);
      double target_spend;
      if (level > 0) {
        target_spend = (static_cast<double>(level) /
                        static_cast<double>(cfg_.amount_levels)) *
                       portfolio_.cash;
      } else {
        target_spend = std::isinf(requested)
                           ? portfolio_.cash
                           : requested * price * (1.0 + cfg_.fee_rate);
        target_spend = std::min(target_spend, portfolio_.cash);
      }
      quantity = quantize(target_spend / (price * (1.0 + cfg_.fee_rate)));
      // Guard against a last-ulp overdraw from the division above.
      while (quantity > 0.0 &&
             quantity * price * (1.0 + cfg_.fee_rate) > portfolio_.cash)
        quantity -= cfg_.min_unit;
      if (quantity > 0.0) {
        exec_price = price;
        const double cost = quantity * exec_price;
        fee = cost * cfg_.fee_rate;
        portfolio_.cash -= cost + fee;
        portfolio_.holdings += quantity;
      }
    } else if (kind == ActionKind::sell) {
      const double s = rng_.uniform(0.0, cfg_.max_slippage);
      const double price = close * (1.0 - s);
      double target = level > 0 ? (static_cast<double>(level) /
                                   static_cast<double>(cfg_.amount_levels)) *
                                      portfolio_.holdings
                                : requested;
      target = std::min(target, portfolio_.holdings);
      quantity = quantize(target);
      if (quantity > 0.0) {
        exec_price = price;
        const double proceeds = quantity * exec_price;
        fee = proceeds * cfg_.fee_rate;
        portfolio_.cash += proceeds - fee;
        portfolio_.holdings -= quantity;
      }
    }

    // Advance and mark to market at the new cursor close.
    ++cursor_;
    const double nw = mark_to_market(portfolio_, close_at(cursor_));
    networth_history_.push_back(nw);
    done_ = cursor_ + 1 >= data_.closes.size();

    StepResult result;
    result.reward = omega_reward(networth_history_, cfg_);
    result.done = done_;
    result.info =
        StepInfo{quantity, quantity > 0.0 ? exec_price : 0.0, fee, nw};
    result.observation = observation();

    TraceRow row;
    row.step = step_count_++;
    row.timestamp = data_.timestamps[cursor_ - 1];
    row.close = close;
    row.action = action_kind_name(kind);
    row.level = level;
    row.exec_price = result.info.exec_price;
    row.quantity = quantity;
    row.fee = fee;
    row.cash = portfolio_.cash;
    row.holdings = portfolio_.holdings;
    row.net_worth = nw;
    row.reward = result.reward;
    trace_.push_back(row);
    return result;
  }

  MarketSegment data_;
  EnvConfig cfg_;
  Rng rng_;
  std::uint64_t seed_ = 0;
  Portfolio portfolio_;
  std::size_t cursor_ = 0;
  bool done_ = false;
  long step_count_ = 0;
  std::vector<TraceRow> trace_;
  std::vector<double> networth_history_;
};

inline const char* kTraceHeader =
    "step,timestamp,close,action_kind,level,exec_price,quantity,fee,cash,"
    "holdings,net_worth,reward";

struct Trace {
  std::vector<TraceRow> rows;
  KvFile meta;  // initial_cash, seed, strategy name, config echo
};

inline void write_trace_csv(const std::string& path, const Trace& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace file: " + path);
  for (const auto& [k, v] : trace.meta.entries())
    out << "# " << k << " = " << v << "\n";
  out << kTraceHeader << "\n";
  for (const TraceRow& r : trace.rows) {
    out << r.step << ',' << r.timestamp << ',' << format_double(r.close) << ','
        << r.action << ',' << r.level << ',' << format_double(r.exec_price)
        << ',' << format_double(r.quantity) << ',' << format_double(r.fee)
        << ',' << format_double(r.cash) << ',' << format_double(r.holdings)
        << ',' << format_double(r.net_worth) << ',' << format_double(r.reward)
        << "\n";
  }
  if (!out) throw std::runtime_error("short write to trace file: " + path);
}

inline Trace read_trace_csv(const std::string& path) {
  CsvFile csv = read_csv(path);
  Trace trace;
  std::string meta_text;
  for (const std::string& c : csv.comments) meta_text += c + "\n";
  trace.meta = KvFile::parse_text(meta_text);
  if (csv.header != split_csv_line(kTraceHeader))
    throw std::runtime_error("unexpected trace header in " + path);
  for (const auto& row : csv.rows) {
    if (row.size() != 12)
      throw std::runtime_error("malformed trace row in " + path);
    TraceRow r;
    std::int64_t step = 0;
    if (!parse_i64(row[0], step) || !parse_i64(row[1], r.timestamp))
      throw std::runtime_error("malformed trace row in " + path);
    r.step = static_cast<long>(step);
    std::int64_t level = 0;
    bool ok = parse_double(row[2], r.close);
    r.action = trim(row[3]);
    ok = ok && parse_i64(row[4], level);
    ok = ok && parse_double(row[5], r.exec_price);
    ok = ok && parse_double(row[6], r.quantity);
    ok = ok && parse_double(row[7], r.fee);
    ok = ok && parse_double(row[8], r.cash);
    ok = ok && parse_double(row[9], r.holdings);
    ok = ok && parse_double(row[10], r.net_worth);
    ok = ok && parse_double(row[11], r.reward);
    if (!ok) throw std::runtime_error("malformed trace row in " + path);
    r.level = static_cast<int>(level);
    trace.rows.push_back(r);
  }
  return trace;
}

}  // namespace deeptrade
