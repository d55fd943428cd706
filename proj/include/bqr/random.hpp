#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace bqr {

/**
 * Counter-based generator (Philox4x32-10) with a 64-bit key and a 64-bit
 * stream id. Output i of stream s under key k is a pure function of (k, s, i),
 * so independent streams can be handed to workers without coordination.
 *
 * split(tag) derives a child generator whose key hashes (key, stream, tag);
 * the parent is left untouched. Nested splits give a tree of streams keyed by
 * e.g. (master seed, replication, purpose).
 */
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

  Rng split(std::uint64_t tag) const noexcept;
  /// A 64-bit seed derived from this stream's identity and `tag`.
  std::uint64_t derive_seed(std::uint64_t tag) const noexcept;

  result_type operator()() noexcept;
  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  /// Uniform on the open interval (0, 1).
  double uniform() noexcept;
  double normal() noexcept;
  /// Exponential with mean 1.
  double exponential() noexcept;
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;

 private:
  void refill() noexcept;

  std::uint64_t key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Gamma(shape, scale = 1) by Marsaglia-Tsang.
double sample_gamma(double shape, Rng& rng);

/// Inverse Gaussian IG(mean, shape) by the Michael-Schucany-Haas transform.
/// An infinite mean yields the Levy limit shape / Z^2.
double sample_inverse_gaussian(double mean, double shape, Rng& rng);

/// Generalized inverse Gaussian with density proportional to
/// x^(lambda-1) exp(-(chi/x + psi*x)/2); chi, psi > 0.
double sample_gig(double lambda, double chi, double psi, Rng& rng);

/// N(mean, sd^2) restricted to [lo, hi] by plain rejection.
double sample_truncated_normal(double mean, double sd, double lo, double hi, Rng& rng);

}  // namespace bqr
