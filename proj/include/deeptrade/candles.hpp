#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "deeptrade/csv.hpp"

namespace deeptrade {

struct Candle {
  std::int64_t timestamp = 0;  // epoch seconds, UTC
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  double volume = 0.0;

  bool valid() const {
    return timestamp > 0 && low > 0.0 && volume >= 0.0 && low <= open &&
           open <= high && low <= close && close <= high;
  }
};

/// Time-sorted candle sequence; strictly increasing timestamps.
using CandleSeries = std::vector<Candle>;

struct LoadResult {
  CandleSeries series;
  std::size_t dropped_invalid = 0;    // rows violating candle invariants
  std::size_t dropped_duplicate = 0;  // rows sharing an earlier timestamp
};

/// Reads a `timestamp,open,high,low,close,volume` CSV (extra columns are
/// ignored, order is taken from the header). Invalid rows and duplicate
/// timestamps are dropped and counted, never interpolated.
inline LoadResult load_candles(const std::string& path) {
  CsvFile csv = read_csv(path);
  const char* required[] = {"timestamp", "open", "high",
                            "low",       "close", "volume"};
  int idx[6];
  for (int i = 0; i < 6; ++i) {
    idx[i] = column_index(csv, required[i]);
    if (idx[i] < 0)
      throw std::runtime_error(std::string("candle CSV is missing column '") +
                               required[i] + "': " + path);
  }

  LoadResult result;
  for (const auto& row : csv.rows) {
    Candle c;
    bool ok = row.size() >= csv.header.size();
    std::int64_t ts = 0;
    ok = ok && parse_i64(row[idx[0]], ts);
    ok = ok && parse_double(row[idx[1]], c.open);
    ok = ok && parse_double(row[idx[2]], c.high);
    ok = ok && parse_double(row[idx[3]], c.low);
    ok = ok && parse_double(row[idx[4]], c.close);
    ok = ok && parse_double(row[idx[5]], c.volume);
    c.timestamp = ts;
    if (!ok || !c.valid()) {
      ++result.dropped_invalid;
      continue;
    }
    result.series.push_back(c);
  }

  std::stable_sort(result.series.begin(), result.series.end(),
                   [](const Candle& a, const Candle& b) {
                     return a.timestamp < b.timestamp;
                   });

  CandleSeries unique;
  unique.reserve(result.series.size());
  for (const Candle& c : result.series) {
    if (!unique.empty() && unique.back().timestamp == c.timestamp) {
      ++result.dropped_duplicate;
      continue;
    }
    unique.push_back(c);
  }
  result.series = std::move(unique);

  if (result.series.empty())
    throw std::runtime_error("no valid candle rows in " + path);
  return result;
}

inline std::vector<double> close_prices(const CandleSeries& series) {
  std::vector<double> out;
  out.reserve(series.size());
  for (const Candle& c : series) out.push_back(c.close);
  return out;
}

inline std::vector<std::int64_t> timestamps(const CandleSeries& series) {
  std::vector<std::int64_t> out;
  out.reserve(series.size());
  for (const Candle& c : series) out.push_back(c.timestamp);
  return out;
}

}  // namespace deeptrade
