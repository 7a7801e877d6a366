#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gvfnet {

/// Thrown when a configuration or input violates a documented precondition.
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a file cannot be parsed; carries the offending 1-based line.
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& what, std::size_t line)
    : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }
private:
  std::size_t line_;
};

enum class TerrainLabel : std::uint8_t {
  EvenGround = 0,
  UnevenGround = 1,
  UpStairs = 2,
  DownStairs = 3,
  UpRamp = 4,
  DownRamp = 5,
  Turns = 6,
};

inline constexpr std::size_t kTerrainCount = 7;

inline constexpr std::array<TerrainLabel, kTerrainCount> kAllTerrains = {
  TerrainLabel::EvenGround, TerrainLabel::UnevenGround, TerrainLabel::UpStairs,
  TerrainLabel::DownStairs, TerrainLabel::UpRamp,       TerrainLabel::DownRamp,
  TerrainLabel::Turns,
};

inline constexpr std::array<std::string_view, kTerrainCount> kTerrainNames = {
  "EvenGround", "UnevenGround", "UpStairs", "DownStairs", "UpRamp", "DownRamp", "Turns",
};

constexpr std::size_t index_of(TerrainLabel t) { return static_cast<std::size_t>(t); }

constexpr std::string_view terrain_name(TerrainLabel t) { return kTerrainNames[index_of(t)]; }

inline TerrainLabel terrain_from_index(long v) {
  if (v < 0 || v >= static_cast<long>(kTerrainCount))
    throw ValidationError("terrain label out of range 0..6: " + std::to_string(v));
  return static_cast<TerrainLabel>(v);
}

inline std::optional<TerrainLabel> terrain_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kTerrainCount; ++i)
    if (kTerrainNames[i] == name) return static_cast<TerrainLabel>(i);
  return std::nullopt;
}

} // namespace gvfnet
