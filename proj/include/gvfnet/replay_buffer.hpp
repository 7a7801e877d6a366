#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "gvfnet/common.hpp"

namespace gvfnet {

/// One supervised example for the policy net.
struct Sample {
  std::vector<double> actuals;
  std::vector<double> predictions;  // empty when no GVF bank is attached
  std::size_t label = 0;

  bool operator==(const Sample&) const = default;
};

using Batch = std::vector<const Sample*>;

/// Bounded store; at capacity the oldest sample is overwritten.
class ReplayBuffer {
public:
  explicit ReplayBuffer(std::size_t capacity = 1000) : capacity_(capacity) {
    if (capacity == 0) throw ValidationError("replay buffer capacity must be positive");
    storage_.reserve(capacity);
  }

  void push(Sample s) {
    if (storage_.size() < capacity_) {
      storage_.push_back(std::move(s));
    } else {
      storage_[head_] = std::move(s);
      head_ = (head_ + 1) % capacity_;
    }
    ++pushes_;
  }

  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return storage_.empty(); }
  std::uint64_t total_pushes() const { return pushes_; }

  /// i = 0 is the oldest surviving sample.
  const Sample& at(std::size_t i) const { return storage_[(head_ + i) % storage_.size()]; }

  template <class Rng>
  const Sample& sample(Rng& rng) const {
    if (storage_.empty()) throw ValidationError("cannot sample from an empty replay buffer");
    std::uniform_int_distribution<std::size_t> pick(0, storage_.size() - 1);
    return storage_[pick(rng)];
  }

private:
  std::size_t capacity_;
  std::vector<Sample> storage_;
  std::size_t head_ = 0;  // oldest slot once full
  std::uint64_t pushes_ = 0;
};

struct BatchSpec {
  std::size_t recent = 16;
  std::size_t replay = 16;
};

/// New/replay batch: every sample in `recent` (newest last, at most
/// spec.recent of them are used) plus spec.replay uniform draws with
/// replacement from the buffer. While the buffer holds fewer than spec.replay
/// samples, the shortfall is made up by cycling through the recent samples,
/// newest first.
template <class Rng>
Batch assemble_batch(std::span<const Sample* const> recent, const ReplayBuffer& buffer, Rng& rng,
                     BatchSpec spec = {}) {
  if (recent.empty()) throw ValidationError("assemble_batch needs at least one recent sample");
  const std::size_t n_recent = std::min(recent.size(), spec.recent);
  const auto newest = recent.last(n_recent);
  Batch batch(newest.begin(), newest.end());
  const std::size_t n_replay = std::min(spec.replay, buffer.size());
  for (std::size_t i = 0; i < n_replay; ++i) batch.push_back(&buffer.sample(rng));
  for (std::size_t i = 0; i < spec.replay - n_replay; ++i)
    batch.push_back(newest[n_recent - 1 - (i % n_recent)]);
  return batch;
}

} // namespace gvfnet
