#include "stratboot/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace stratboot {

namespace {

// SplitMix64 finalizer; bijective mixer used for stream-id derivation.
inline uint64_t mix64(uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

constexpr uint32_t PHILOX_M0 = 0xD2511F53u;
constexpr uint32_t PHILOX_M1 = 0xCD9E8D57u;
constexpr uint32_t PHILOX_W0 = 0x9E3779B9u;
constexpr uint32_t PHILOX_W1 = 0xBB67AE85u;

inline void philox_round(uint32_t ctr[4], const uint32_t key[2]) {
  uint64_t p0 = static_cast<uint64_t>(PHILOX_M0) * ctr[0];
  uint64_t p1 = static_cast<uint64_t>(PHILOX_M1) * ctr[2];
  uint32_t c0 = static_cast<uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0];
  uint32_t c1 = static_cast<uint32_t>(p1);
  uint32_t c2 = static_cast<uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1];
  uint32_t c3 = static_cast<uint32_t>(p0);
  ctr[0] = c0;
  ctr[1] = c1;
  ctr[2] = c2;
  ctr[3] = c3;
}

}  // namespace

Rng::Rng(uint64_t seed, uint64_t stream) : seed_(seed), stream_(stream) {}

Rng Rng::child(uint64_t index) const {
  // Hash-combine the parent stream with the child index. Collisions across
  // the paths used here (depth <= 3, small indices) are negligible.
  uint64_t id = mix64(stream_ + 0x9E3779B97F4A7C15ULL * (index + 1));
  return Rng(seed_, id);
}

void Rng::fill_block() {
  uint32_t ctr[4] = {
      static_cast<uint32_t>(block_), static_cast<uint32_t>(block_ >> 32),
      static_cast<uint32_t>(stream_), static_cast<uint32_t>(stream_ >> 32)};
  uint32_t key[2] = {static_cast<uint32_t>(seed_),
                     static_cast<uint32_t>(seed_ >> 32)};
  for (int round = 0; round < 10; ++round) {
    philox_round(ctr, key);
    key[0] += PHILOX_W0;
    key[1] += PHILOX_W1;
  }
  out_[0] = ctr[0];
  out_[1] = ctr[1];
  out_[2] = ctr[2];
  out_[3] = ctr[3];
  avail_ = 4;
  ++block_;
}

uint64_t Rng::next_u64() {
  if (avail_ < 2) fill_block();
  uint64_t hi = out_[4 - avail_];
  uint64_t lo = out_[5 - avail_];
  avail_ -= 2;
  return (hi << 32) | lo;
}

double Rng::uniform() {
  for (;;) {
    double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    if (u > 0.0) return u;  // exclude exact zero so log(u) is always finite
  }
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  have_spare_ = true;
  return u * f;
}

double Rng::exponential() { return -std::log(uniform()); }

double Rng::gamma(double shape) {
  if (!(shape > 0.0)) throw std::domain_error("gamma shape must be positive");
  if (shape < 1.0) {
    // boost trick: G(a) = G(a+1) * U^(1/a)
    return gamma(shape + 1.0) * std::pow(uniform(), 1.0 / shape);
  }
  // Marsaglia & Tsang (2000) squeeze-rejection
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double z, v;
    do {
      z = normal();
      v = 1.0 + c * z;
    } while (v <= 0.0);
    v = v * v * v;
    double u = uniform();
    if (u < 1.0 - 0.0331 * z * z * z * z) return d * v;
    if (std::log(u) < 0.5 * z * z + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double Rng::beta(double a, double b) {
  double g1 = gamma(a);
  double g2 = gamma(b);
  double s = g1 + g2;
  if (s <= 0.0) {
    // both gammas underflowed (only for tiny shapes); fall back to a coin
    return uniform() < a / (a + b) ? 1.0 - 1e-16 : 1e-16;
  }
  double r = g1 / s;
  // keep strictly inside (0,1) so log densities stay finite
  if (r < 1e-300) r = 1e-300;
  if (r > 1.0 - 1e-16) r = 1.0 - 1e-16;
  return r;
}

bool Rng::bernoulli(double p) { return uniform() < p; }

}  // namespace stratboot
