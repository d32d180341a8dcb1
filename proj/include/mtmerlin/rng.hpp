#pragma once

#include <array>
#include <cstdint>

namespace mtmerlin {

/// Philox4x32-10 block function (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Counter-based random stream.
///
/// A handle is fully described by (seed, stream, position). Block `i` of a
/// stream is philox(counter = {i, stream}, key = seed), so two handles with the
/// same seed and stream produce the same sequence regardless of which thread
/// draws from them or in what order other streams are consumed.
class RngHandle {
 public:
  RngHandle() = default;
  explicit RngHandle(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }

  /// Fresh handle on another stream of the same seed.
  RngHandle stream(std::uint64_t id) const { return RngHandle(seed_, id); }

  /// Derives an independent child seed; used to give sub-experiments their own
  /// stream namespace.
  RngHandle split(std::uint64_t salt) const;

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller.
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  void refill();

  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int used_ = 4;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

/// SplitMix64 finalizer, used for hashing seeds together.
std::uint64_t mix64(std::uint64_t x);

}  // namespace mtmerlin
