#include "dfr/rng.hpp"

#include <cmath>
#include <cstring>

#include "dfr/common.hpp"

namespace dfr {

namespace {

constexpr std::uint64_t kSplitmixGamma = 0x9E3779B97F4A7C15ull;

std::uint64_t splitmix64(std::uint64_t x) {
  x += kSplitmixGamma;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

inline void philox_round(std::uint32_t& c0, std::uint32_t& c1, std::uint32_t& c2,
                         std::uint32_t& c3, std::uint32_t k0, std::uint32_t k1) {
  const std::uint64_t m0 = 0xD2511F53ull * c0;
  const std::uint64_t m1 = 0xCD9E8D57ull * c2;
  const std::uint32_t hi0 = static_cast<std::uint32_t>(m0 >> 32);
  const std::uint32_t lo0 = static_cast<std::uint32_t>(m0);
  const std::uint32_t hi1 = static_cast<std::uint32_t>(m1 >> 32);
  const std::uint32_t lo1 = static_cast<std::uint32_t>(m1);
  c0 = hi1 ^ c1 ^ k0;
  c1 = lo1;
  c2 = hi0 ^ c3 ^ k1;
  c3 = lo0;
}

void philox4x32_10(std::uint64_t key, std::uint64_t stream, std::uint64_t counter,
                   std::uint32_t out[4]) {
  std::uint32_t c0 = static_cast<std::uint32_t>(counter);
  std::uint32_t c1 = static_cast<std::uint32_t>(counter >> 32);
  std::uint32_t c2 = static_cast<std::uint32_t>(stream);
  std::uint32_t c3 = static_cast<std::uint32_t>(stream >> 32);
  std::uint32_t k0 = static_cast<std::uint32_t>(key);
  std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
  for (int round = 0; round < 10; ++round) {
    philox_round(c0, c1, c2, c3, k0, k1);
    k0 += 0x9E3779B9u;  // Weyl constants
    k1 += 0xBB67AE85u;
  }
  out[0] = c0;
  out[1] = c1;
  out[2] = c2;
  out[3] = c3;
}

}  // namespace

RngStream::RngStream(std::uint64_t key, std::uint64_t stream_id)
    : key_(key), stream_(stream_id) {}

RngStream RngStream::root(std::uint64_t seed) {
  return RngStream(splitmix64(seed), splitmix64(seed ^ kSplitmixGamma));
}

RngStream RngStream::child(std::uint64_t label) const {
  const std::uint64_t mixed = splitmix64(key_ ^ splitmix64(label));
  return RngStream(mixed, splitmix64(stream_ ^ mixed));
}

RngStream RngStream::child(std::string_view label) const { return child(fnv1a64(label)); }

RngStream RngStream::child(std::string_view label, std::uint64_t index) const {
  return child(fnv1a64(label) ^ splitmix64(index + 1));
}

void RngStream::refill() {
  philox4x32_10(key_, stream_, counter_++, block_);
  avail_ = 4;
}

std::uint32_t RngStream::next_u32() {
  if (avail_ == 0) refill();
  return block_[--avail_];
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t hi = next_u32();
  return (hi << 32) | next_u32();
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double a, double b) { return a + (b - a) * uniform(); }

double RngStream::uniform_open() {
  // 52 random mantissa bits shifted into (0, 1): (k + 0.5) * 2^-52 with k < 2^52
  return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
}

std::uint32_t RngStream::below(std::uint32_t n) {
  // rejection-free would bias for huge n; rejection keeps it exact
  const std::uint32_t limit = UINT32_MAX - UINT32_MAX % n;
  std::uint32_t x;
  do {
    x = next_u32();
  } while (x >= limit);
  return x % n;
}

double RngStream::normal(double mean, double sd) {
  return mean + sd * norm_quantile(uniform_open());
}

double RngStream::gamma(double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0))
    throw Error(ErrorKind::Validation, "rng", "gamma", "shape and scale must be positive");
  if (shape < 1.0) {
    // boost to shape+1 and thin with a uniform power
    const double u = uniform_open();
    return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = norm_quantile(uniform_open());
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_open();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v * scale;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v * scale;
  }
}

double RngStream::beta(double alpha, double beta_param) {
  const double ga = gamma(alpha, 1.0);
  const double gb = gamma(beta_param, 1.0);
  const double denom = ga + gb;
  if (denom == 0.0) return 0.5;  // both underflowed; measure-zero corner
  return ga / denom;
}

double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw Error(ErrorKind::Validation, "rng", "p", "quantile argument must be in (0,1)");
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) *
                    r +
                4.5921953931549871457e+4) *
                   r +
               1.3731693765509461125e+4) *
                  r +
              1.9715909503065514427e+3) *
                 r +
             1.3314166789178437745e+2) *
                r +
            3.3871328727963666080e0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) *
                    r +
                2.1213794301586595867e+4) *
                   r +
               5.3941960214247511077e+3) *
                  r +
              6.8718700749205790830e+2) *
                 r +
             4.2313330701600911252e+1) *
                r +
            1.0);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    value = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) *
                     r +
                 1.27045825245236838258e0) *
                    r +
                3.64784832476320460504e0) *
                   r +
               5.76949722146069140550e0) *
                  r +
              4.63033784615654529590e0) *
                 r +
             1.42343711074968357734e0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) *
                     r +
                 1.48103976427480074590e-1) *
                    r +
                6.89767334985100004550e-1) *
                   r +
               1.67638483018380384940e0) *
                  r +
              2.05319162663775882187e0) *
                 r +
             1.0);
  } else {
    r -= 5.0;
    value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) *
                     r +
                 2.65321895265761230930e-2) *
                    r +
                2.96560571828504891230e-1) *
                   r +
               1.78482653991729133580e0) *
                  r +
              5.46378491116411436990e0) *
                 r +
             6.65790464350110377720e0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) *
                     r +
                 7.86869131145613259100e-4) *
                    r +
                1.48753612908506148525e-2) *
                   r +
               1.36929880922735805310e-1) *
                  r +
              5.99832206555887937690e-1) *
                 r +
             1.0);
  }
  return (q < 0.0) ? -value : value;
}

}  // namespace dfr
