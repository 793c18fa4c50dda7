#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "deeptrade/matrix.hpp"

namespace deeptrade {

/// Versioned binary parameter container: magic `NNC1`, a shape table
/// (name, rows, cols per tensor), then the concatenated row-major float64
/// payloads, little-endian.
namespace nnc {

inline constexpr char kMagic[4] = {'N', 'N', 'C', '1'};

namespace detail {
template <class T>
void write_le(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T read_le(std::istream& in) {
  unsigned char buf[sizeof(T)];
  in.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (!in) throw std::runtime_error("parameter file truncated");
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}
}  // namespace detail

inline void save(const std::string& path,
                 const std::vector<TensorRef>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write parameter file: " + path);
  out.write(kMagic, 4);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const TensorRef& t : tensors) {
    if (t.name.size() > 0xffff)
      throw std::runtime_error("tensor name too long: " + t.name);
    detail::write_le<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rows));
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.cols));
  }
  for (const TensorRef& t : tensors) {
    if (t.data->size() != t.rows * t.cols)
      throw std::runtime_error("tensor size inconsistent with shape: " + t.name);
    for (double v : *t.data) detail::write_le<double>(out, v);
  }
  if (!out) throw std::runtime_error("short write to parameter file: " + path);
}

struct StoredTensor {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;
};

inline std::map<std::string, StoredTensor> load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open parameter file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("not an NNC1 parameter file: " + path);
  const auto count = detail::read_le<std::uint32_t>(in);
  std::vector<std::pair<std::string, StoredTensor>> order;
  order.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = detail::read_le<std::uint16_t>(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    StoredTensor t;
    t.rows = detail::read_le<std::uint32_t>(in);
    t.cols = detail::read_le<std::uint32_t>(in);
    order.emplace_back(std::move(name), std::move(t));
  }
  for (auto& [name, t] : order) {
    t.data.resize(t.rows * t.cols);
    for (double& v : t.data) v = detail::read_le<double>(in);
  }
  std::map<std::string, StoredTensor> out;
  for (auto& [name, t] : order) {
    if (!out.emplace(name, std::move(t)).second)
      throw std::runtime_error("duplicate tensor name in file: " + name);
  }
  return out;
}

/// Copies stored tensors into live parameter refs; every ref must be present
/// with a matching shape.
inline void restore(const std::map<std::string, StoredTensor>& stored,
                    const std::vector<TensorRef>& tensors) {
  for (const TensorRef& t : tensors) {
    auto it = stored.find(t.name);
    if (it == stored.end())
      throw std::runtime_error("parameter file missing tensor: " + t.name);
    const StoredTensor& s = it->second;
    if (s.rows != t.rows || s.cols != t.cols)
      throw std::runtime_error("parameter shape mismatch for " + t.name);
    *t.data = s.data;
  }
}

}  // namespace nnc

/// Deep copy of the current values behind a tensor list (best-epoch
/// snapshots, divergence recovery).
inline std::vector<std::vector<double>> snapshot_tensors(
    const std::vector<TensorRef>& tensors) {
  std::vector<std::vector<double>> snap;
  snap.reserve(tensors.size());
  for (const TensorRef& t : tensors) snap.push_back(*t.data);
  return snap;
}

inline void restore_tensors(const std::vector<TensorRef>& tensors,
                            const std::vector<std::vector<double>>& snap) {
  if (snap.size() != tensors.size())
    throw std::invalid_argument("restore_tensors: snapshot mismatch");
  for (std::size_t i = 0; i < tensors.size(); ++i) *tensors[i].data = snap[i];
}

}  // namespace deeptrade
