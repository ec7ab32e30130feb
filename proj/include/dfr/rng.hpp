#pragma once

#include <cstdint>
#include <string_view>

namespace dfr {

/// Standard-normal quantile function Phi^{-1}(p), Wichura's AS 241 (PPND16),
/// accurate to ~1e-16 relative over p in (0, 1).
double norm_quantile(double p);

/// Counter-based pseudorandom stream (Philox-4x32-10). A stream is identified
/// by a 64-bit key and a 64-bit stream id; draws advance a counter, never the
/// key, so independent streams can be handed to parallel workers.
///
/// Stream splitting: child streams derive a fresh key from the parent key and
/// a label via splitmix64 mixing. The convention used throughout the library
/// is master seed -> per-run stream -> per-stage stream (e.g.
/// root(seed).child("run", q).child("train")), which makes every Monte Carlo
/// run and every pipeline stage reproducible in isolation.
class RngStream {
 public:
  static RngStream root(std::uint64_t seed);

  /// Derive an independent stream keyed by a label (and optional index).
  RngStream child(std::string_view label) const;
  RngStream child(std::string_view label, std::uint64_t index) const;
  RngStream child(std::uint64_t label) const;

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on [a, b).
  double uniform(double a, double b);
  /// Uniform on the open interval (0, 1); safe to feed to norm_quantile/log.
  double uniform_open();
  /// Uniform integer in [0, n).
  std::uint32_t below(std::uint32_t n);

  double normal(double mean, double sd);
  /// Gamma with given shape and scale (mean = shape*scale), Marsaglia-Tsang.
  double gamma(double shape, double scale);
  double beta(double alpha, double beta);

 private:
  RngStream(std::uint64_t key, std::uint64_t stream_id);
  void refill();

  std::uint64_t key_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::uint32_t block_[4] = {0, 0, 0, 0};
  int avail_ = 0;
};

}  // namespace dfr
