#pragma once

#include <array>
#include <cstdint>

#include "divker/types.hpp"

namespace divker {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key);

/// Standard-normal stream addressed by (seed, path_id, step).
///
/// Every draw is a pure function of the address and the draw index inside
/// the stream, so paths can be generated in any order on any worker.
class GaussianStream {
 public:
  /// Step value reserved for initial-state sampling.
  static constexpr std::uint32_t kInitialStep = 0xFFFFFFFFu;

  GaussianStream(std::uint64_t seed, std::uint64_t path_id, std::uint32_t step);

  double normal();
  /// Uniform on the open interval (0, 1).
  double uniform();
  Vec normals(Eigen::Index n);

 private:
  void refill();

  PhiloxKey key_;
  PhiloxCounter counter_;
  std::array<std::uint32_t, 4> block_{};
  int used_words_ = 4;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace divker
