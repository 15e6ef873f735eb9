#pragma once

#include <cstdint>

namespace stratboot {

// Counter-based generator: Philox 4x32-10 (Salmon et al., SC'11) keyed by a
// 64-bit seed, with a 64-bit stream id occupying the upper counter words.
// Streams derived through child() are statistically independent, so work can
// be farmed out per replicate and reproduced bit-for-bit on any worker count.
class Rng {
 public:
  explicit Rng(uint64_t seed, uint64_t stream = 0);

  // Independent substream; children of distinct (stream, index) pairs differ.
  Rng child(uint64_t index) const;

  uint64_t next_u64();
  double uniform();      // open interval (0,1)
  double normal();       // standard normal, Marsaglia polar method
  double exponential();  // unit rate
  double gamma(double shape);            // unit scale, Marsaglia-Tsang
  double beta(double a, double b);       // via two gammas
  bool bernoulli(double p);

  uint64_t stream_id() const { return stream_; }

 private:
  void fill_block();

  uint64_t seed_;
  uint64_t stream_;
  uint64_t block_ = 0;   // position within the stream, in 128-bit blocks
  uint32_t out_[4];
  int avail_ = 0;        // unread 32-bit lanes left in out_
  double spare_ = 0.0;   // cached second polar deviate
  bool have_spare_ = false;
};

}  // namespace stratboot
