#pragma once

#include <cstdint>
#include <vector>

namespace elsm::rng {

// Philox4x32-10 counter-based generator. Streams are cheap value types keyed
// by (seed, stream id); substreams derived from a stream never collide with
// the parent draws, so per-entity substreams keep parallel generation
// deterministic regardless of call order. Each draw consumes one counter
// block, so the full stream state is (seed, stream_id, counter).
class Stream {
 public:
  Stream() : Stream(0, 0) {}
  Stream(std::uint64_t seed, std::uint64_t stream_id);

  // Child stream with an independent id derived from this stream's identity.
  Stream substream(std::uint64_t index) const;

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  // Uniform on [0, 1).
  double uniform();
  // Standard normal via Box-Muller (no state cached across calls).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  bool bernoulli(double p) { return uniform() < p; }
  // Index in [0, probs.size()) for a probability vector.
  std::size_t categorical(const std::vector<double>& probs);
  // Exact Poisson sampling (Knuth for small mean, PTRS rejection otherwise).
  std::uint64_t poisson(double mean);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t counter() const { return counter_; }
  // Restores a previously observed position in the stream.
  void set_counter(std::uint64_t counter) { counter_ = counter; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t stream_id_ = 0;
  std::uint64_t counter_ = 0;  // next 4x32 block index
};

}  // namespace elsm::rng
