#pragma once

#include "shellmatch/common.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>

namespace shellmatch {

/// Identifies a grid node by a level and integer coordinates in units of
/// 2^-level. Keys are kept in canonical form: level 0, or at least one odd
/// coordinate.
template <int Dim>
struct NodeKey {
  int level = 0;
  std::array<std::uint32_t, Dim> coords{};

  friend bool operator==(const NodeKey&, const NodeKey&) = default;

  Vec<Dim> position() const {
    Vec<Dim> x;
    const double h = std::ldexp(1.0, -level);
    for (int i = 0; i < Dim; ++i) x[i] = coords[i] * h;
    return x;
  }
};

/// Reduces (level, coords) to the canonical key of the same physical point.
/// Throws std::out_of_range when a coordinate lies outside [0, 2^level].
template <int Dim>
NodeKey<Dim> canonical_key(int level, const std::array<std::int64_t, Dim>& coords) {
  if (level < 0 || level > 30) throw std::out_of_range("node key level out of range");
  const std::int64_t extent = std::int64_t{1} << level;
  for (auto c : coords) {
    if (c < 0 || c > extent) throw std::out_of_range("node key coordinate out of range");
  }
  std::array<std::int64_t, Dim> c = coords;
  while (level > 0) {
    bool all_even = true;
    for (auto v : c) all_even = all_even && (v % 2 == 0);
    if (!all_even) break;
    for (auto& v : c) v /= 2;
    --level;
  }
  NodeKey<Dim> key;
  key.level = level;
  for (int i = 0; i < Dim; ++i) key.coords[i] = static_cast<std::uint32_t>(c[i]);
  return key;
}

/// Cell key: level plus the lower-left(-back) corner in units of 2^-level.
template <int Dim>
struct CellKey {
  int level = 0;
  std::array<std::uint32_t, Dim> anchor{};

  friend bool operator==(const CellKey&, const CellKey&) = default;
};

namespace detail {
inline std::size_t mix_hash(std::size_t seed, std::uint64_t v) {
  // splitmix64 finalizer
  v += 0x9e3779b97f4a7c15ULL + seed;
  v = (v ^ (v >> 30)) * 0xbf58476d1ce4e5b9ULL;
  v = (v ^ (v >> 27)) * 0x94d049bb133111ebULL;
  return static_cast<std::size_t>(v ^ (v >> 31));
}
}  // namespace detail

struct KeyHash {
  template <int Dim>
  std::size_t operator()(const NodeKey<Dim>& k) const {
    std::size_t h = detail::mix_hash(0, static_cast<std::uint64_t>(k.level));
    for (auto c : k.coords) h = detail::mix_hash(h, c);
    return h;
  }
  template <int Dim>
  std::size_t operator()(const CellKey<Dim>& k) const {
    std::size_t h = detail::mix_hash(17, static_cast<std::uint64_t>(k.level));
    for (auto c : k.anchor) h = detail::mix_hash(h, c);
    return h;
  }
};

}  // namespace shellmatch
