#include <gtest/gtest.h>

#include <random>
#include <set>

#include "gvfnet/replay_buffer.hpp"

using namespace gvfnet;

namespace {

Sample numbered(std::size_t i) { return {{static_cast<double>(i)}, {}, i % 7}; }

double id(const Sample* s) { return s->actuals[0]; }

}  // namespace

TEST(ReplayBuffer, RingOverwritesOldest) {
  ReplayBuffer buf(1000);
  for (std::size_t i = 1; i <= 1500; ++i) buf.push(numbered(i));
  EXPECT_EQ(buf.size(), 1000u);
  EXPECT_EQ(buf.total_pushes(), 1500u);
  EXPECT_EQ(buf.at(0).actuals[0], 501.0);
  EXPECT_EQ(buf.at(999).actuals[0], 1500.0);
  for (std::size_t i = 0; i < 1000; ++i) ASSERT_EQ(buf.at(i).actuals[0], 501.0 + static_cast<double>(i));
}

TEST(ReplayBuffer, BelowCapacity) {
  ReplayBuffer buf;
  EXPECT_EQ(buf.capacity(), 1000u);
  EXPECT_TRUE(buf.empty());
  for (std::size_t i = 1; i <= 999; ++i) buf.push(numbered(i));
  EXPECT_EQ(buf.size(), 999u);
  EXPECT_EQ(buf.at(0).actuals[0], 1.0);
}

TEST(ReplayBuffer, SingleElementSample) {
  ReplayBuffer buf(5);
  buf.push(numbered(42));
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(buf.sample(rng), numbered(42));
}

TEST(ReplayBuffer, Errors) {
  EXPECT_THROW(ReplayBuffer(0), ValidationError);
  ReplayBuffer buf(3);
  std::mt19937_64 rng(1);
  EXPECT_THROW(buf.sample(rng), ValidationError);
}

TEST(AssembleBatch, FullBufferSplitsSixteenSixteen) {
  ReplayBuffer buf(1000);
  for (std::size_t i = 0; i < 1000; ++i) buf.push(numbered(10000 + i));
  std::vector<Sample> recent;
  for (std::size_t i = 0; i < 20; ++i) recent.push_back(numbered(i));
  std::vector<const Sample*> ptrs;
  for (const auto& s : recent) ptrs.push_back(&s);
  std::mt19937_64 rng(2);
  const auto b = assemble_batch(std::span<const Sample* const>(ptrs), buf, rng);
  ASSERT_EQ(b.size(), 32u);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(id(b[i]), static_cast<double>(4 + i));
  for (std::size_t i = 16; i < 32; ++i) EXPECT_GE(id(b[i]), 10000.0);
}

TEST(AssembleBatch, EmptyBufferUsesRecentOnly) {
  ReplayBuffer buf(1000);
  std::vector<Sample> recent;
  for (std::size_t i = 0; i < 5; ++i) recent.push_back(numbered(i));
  std::vector<const Sample*> ptrs;
  for (const auto& s : recent) ptrs.push_back(&s);
  std::mt19937_64 rng(3);
  const auto b = assemble_batch(std::span<const Sample* const>(ptrs), buf, rng);
  ASSERT_EQ(b.size(), 21u);
  for (auto* s : b) EXPECT_LT(id(s), 5.0);
  // Shortfall cycles newest first.
  EXPECT_EQ(id(b[5]), 4.0);
  EXPECT_EQ(id(b[6]), 3.0);
  EXPECT_EQ(id(b[10]), 4.0);
}

TEST(AssembleBatch, PartialBufferTopsUpWithRecent) {
  ReplayBuffer buf(1000);
  for (std::size_t i = 0; i < 10; ++i) buf.push(numbered(100 + i));
  std::vector<Sample> recent;
  for (std::size_t i = 0; i < 16; ++i) recent.push_back(numbered(i));
  std::vector<const Sample*> ptrs;
  for (const auto& s : recent) ptrs.push_back(&s);
  std::mt19937_64 rng(4);
  const auto b = assemble_batch(std::span<const Sample* const>(ptrs), buf, rng);
  ASSERT_EQ(b.size(), 32u);
  std::size_t from_buffer = 0;
  for (auto* s : b) from_buffer += id(s) >= 100.0;
  EXPECT_EQ(from_buffer, 10u);
}

TEST(AssembleBatch, SeededAndRequiresRecent) {
  ReplayBuffer buf(1000);
  for (std::size_t i = 0; i < 300; ++i) buf.push(numbered(i));
  std::vector<const Sample*> ptrs = {&buf.at(299)};
  std::mt19937_64 r1(5), r2(5);
  const auto a = assemble_batch(std::span<const Sample* const>(ptrs), buf, r1);
  const auto b = assemble_batch(std::span<const Sample* const>(ptrs), buf, r2);
  EXPECT_EQ(a, b);
  std::vector<const Sample*> none;
  EXPECT_THROW(assemble_batch(std::span<const Sample* const>(none), buf, r1), ValidationError);
}
