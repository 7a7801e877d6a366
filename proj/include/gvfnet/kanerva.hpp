#pragma once

// Selective Kanerva coding: a state in the unit hypercube activates its c1,
// c2 and c3 nearest prototypes, one binary block of size K per resolution.

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gvfnet/common.hpp"

namespace gvfnet {

struct ResolutionLevels {
  std::array<std::size_t, 3> counts{500, 100, 25};

  std::size_t total() const { return counts[0] + counts[1] + counts[2]; }

  void validate(std::size_t n_prototypes) const {
    if (!(counts[0] > counts[1] && counts[1] > counts[2] && counts[2] > 0))
      throw ValidationError("resolution levels must be strictly decreasing and positive");
    if (counts[0] > n_prototypes)
      throw ValidationError("resolution level c1 = " + std::to_string(counts[0]) +
                            " exceeds prototype count " + std::to_string(n_prototypes));
  }
};

/// K fixed prototypes drawn i.i.d. uniform over [0,1]^n. Immutable.
class PrototypeSet {
public:
  PrototypeSet() = default;

  static PrototypeSet generate(std::size_t count, std::size_t dims, std::uint64_t seed) {
    if (count == 0 || dims == 0) throw ValidationError("prototype set needs K >= 1 and n >= 1");
    PrototypeSet p;
    p.count_ = count;
    p.dims_ = dims;
    p.seed_ = seed;
    p.coords_.resize(count * dims);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5c0deu};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (double& v : p.coords_) v = unit(rng);
    return p;
  }

  /// Checks K against the resolution levels before drawing.
  static PrototypeSet generate(std::size_t count, std::size_t dims, std::uint64_t seed,
                               const ResolutionLevels& levels) {
    levels.validate(count);
    return generate(count, dims, seed);
  }

  static PrototypeSet from_coordinates(std::size_t count, std::size_t dims, std::uint64_t seed,
                                       std::vector<double> coords) {
    if (coords.size() != count * dims) throw ValidationError("prototype coordinate count mismatch");
    for (double v : coords)
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("prototype coordinate outside [0,1]");
    PrototypeSet p;
    p.count_ = count;
    p.dims_ = dims;
    p.seed_ = seed;
    p.coords_ = std::move(coords);
    return p;
  }

  std::size_t count() const { return count_; }
  std::size_t dims() const { return dims_; }
  std::uint64_t seed() const { return seed_; }
  std::span<const double> coordinates() const { return coords_; }
  std::span<const double> prototype(std::size_t i) const { return {coords_.data() + i * dims_, dims_}; }

  bool operator==(const PrototypeSet&) const = default;

private:
  std::size_t count_ = 0;
  std::size_t dims_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<double> coords_;
};

/// Sparse binary vector: the sorted indices of its 1-bits.
struct FeatureVector {
  std::size_t length = 0;
  std::vector<std::uint32_t> active;

  std::size_t count() const { return active.size(); }
  bool operator==(const FeatureVector&) const = default;
};

/// Indices (ascending) of the c nearest among `candidates` (ascending).
/// Equal distances go to the lower index, matching a stable full sort.
inline void select_nearest(std::span<const double> dist, std::span<const std::uint32_t> candidates,
                           std::size_t c, std::vector<double>& scratch, std::vector<std::uint32_t>& out) {
  out.clear();
  if (c == 0) return;
  if (c >= candidates.size()) {
    out.assign(candidates.begin(), candidates.end());
    return;
  }
  scratch.resize(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) scratch[i] = dist[candidates[i]];
  std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(c) - 1, scratch.end());
  const double cutoff = scratch[c - 1];
  std::size_t below = 0;
  for (auto i : candidates) below += dist[i] < cutoff;
  std::size_t ties = c - below;
  for (auto i : candidates) {
    if (dist[i] < cutoff) {
      out.push_back(i);
    } else if (dist[i] == cutoff && ties > 0) {
      out.push_back(i);
      --ties;
    }
  }
}

/// Indices of the c smallest distances, sorted ascending by index.
inline std::vector<std::uint32_t> quickselect_indices(std::span<const double> dist, std::size_t c) {
  if (c > dist.size()) throw ValidationError("quickselect: c exceeds the number of distances");
  std::vector<std::uint32_t> all(dist.size());
  std::iota(all.begin(), all.end(), 0u);
  std::vector<double> scratch;
  std::vector<std::uint32_t> out;
  select_nearest(dist, all, c, scratch, out);
  return out;
}

/// Encoder with its own scratch buffers; one per thread.
class SkcEncoder {
public:
  SkcEncoder(const PrototypeSet& prototypes, ResolutionLevels levels)
    : proto_(&prototypes), levels_(levels), dist_(prototypes.count()), all_(prototypes.count()),
      tiles_(((prototypes.count() + kTile - 1) / kTile) * kTile * prototypes.dims(), 0.0) {
    levels_.validate(prototypes.count());
    const std::size_t k = prototypes.count(), n = prototypes.dims();
    std::iota(all_.begin(), all_.end(), 0u);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < n; ++j)
        tiles_[(i / kTile) * kTile * n + j * kTile + i % kTile] = prototypes.coordinates()[i * n + j];
  }

  std::size_t feature_length() const { return 3 * proto_->count(); }
  const ResolutionLevels& levels() const { return levels_; }
  const PrototypeSet& prototypes() const { return *proto_; }

  FeatureVector encode(std::span<const double> state) {
    const std::size_t n = proto_->dims();
    const std::size_t k = proto_->count();
    if (state.size() != n)
      throw ValidationError("encode: state has " + std::to_string(state.size()) + " dims, prototypes have " +
                            std::to_string(n));
    for (double v : state)
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("encode: state value outside [0,1]");

    // Squared distance preserves the Euclidean ordering and its ties. Each
    // prototype sums its dimensions in order j = 0..n-1.
    for (std::size_t t = 0; t * kTile < k; ++t) {
      const double* tile = tiles_.data() + t * kTile * n;
      double acc[kTile] = {};
      for (std::size_t j = 0; j < n; ++j) {
        const double sj = state[j];
        for (std::size_t l = 0; l < kTile; ++l) {
          const double d = tile[j * kTile + l] - sj;
          acc[l] += d * d;
        }
      }
      const std::size_t base = t * kTile;
      for (std::size_t l = 0; l < kTile && base + l < k; ++l) dist_[base + l] = acc[l];
    }

    FeatureVector fv;
    fv.length = 3 * k;
    fv.active.reserve(levels_.total());
    // One scan, three nested selections: each level chooses among the previous one.
    std::span<const std::uint32_t> candidates(all_);
    for (std::size_t m = 0; m < 3; ++m) {
      select_nearest(dist_, candidates, levels_.counts[m], scratch_, blocks_[m]);
      candidates = blocks_[m];
    }
    for (std::size_t m = 0; m < 3; ++m) {
      const auto offset = static_cast<std::uint32_t>(m * k);
      for (auto i : blocks_[m]) fv.active.push_back(offset + i);
    }
    return fv;
  }

private:
  const PrototypeSet* proto_;
  ResolutionLevels levels_;
  std::vector<double> dist_;
  std::vector<std::uint32_t> all_;
  std::vector<double> scratch_;
  std::array<std::vector<std::uint32_t>, 3> blocks_;
  static constexpr std::size_t kTile = 8;
  std::vector<double> tiles_;  // [tile][dim][lane], kTile prototypes per tile
};

inline FeatureVector encode(const PrototypeSet& prototypes, const ResolutionLevels& levels,
                            std::span<const double> state) {
  SkcEncoder enc(prototypes, levels);
  return enc.encode(state);
}

// Binary artifact: magic, version, K, n, seed, then K*n doubles.
inline constexpr char kPrototypeMagic[8] = {'G', 'V', 'F', 'N', 'P', 'R', 'O', 'T'};
inline constexpr std::uint32_t kPrototypeVersion = 1;

inline void save_prototypes(const PrototypeSet& p, std::ostream& os) {
  os.write(kPrototypeMagic, sizeof kPrototypeMagic);
  auto put = [&](const auto& v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); };
  put(kPrototypeVersion);
  put(static_cast<std::uint64_t>(p.count()));
  put(static_cast<std::uint64_t>(p.dims()));
  put(p.seed());
  os.write(reinterpret_cast<const char*>(p.coordinates().data()),
           static_cast<std::streamsize>(p.coordinates().size() * sizeof(double)));
  if (!os) throw std::runtime_error("failed to write prototype set");
}

inline PrototypeSet load_prototypes(std::istream& is) {
  char magic[sizeof kPrototypeMagic];
  is.read(magic, sizeof magic);
  if (!is || !std::equal(magic, magic + sizeof magic, kPrototypeMagic))
    throw ValidationError("not a prototype set artifact");
  auto get = [&](auto& v) { is.read(reinterpret_cast<char*>(&v), sizeof v); };
  std::uint32_t version = 0;
  std::uint64_t count = 0, dims = 0, seed = 0;
  get(version);
  if (version != kPrototypeVersion) throw ValidationError("unsupported prototype set version");
  get(count);
  get(dims);
  get(seed);
  if (!is || count == 0 || dims == 0 || count * dims > (1ull << 32))
    throw ValidationError("corrupt prototype set header");
  std::vector<double> coords(count * dims);
  is.read(reinterpret_cast<char*>(coords.data()), static_cast<std::streamsize>(coords.size() * sizeof(double)));
  if (!is) throw ValidationError("truncated prototype set");
  return PrototypeSet::from_coordinates(count, dims, seed, std::move(coords));
}

} // namespace gvfnet
