#include "bqr/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace bqr {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t prod = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(prod >> 32);
  lo = static_cast<std::uint32_t>(prod);
}

std::array<std::uint32_t, 4> philox(std::array<std::uint32_t, 4> ctr, std::uint64_t key) {
  std::uint32_t k0 = static_cast<std::uint32_t>(key);
  std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0};
    k0 += kWeyl0;
    k1 += kWeyl1;
  }
  return ctr;
}

}  // namespace

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream) noexcept : key_(seed), stream_(stream) {}

std::uint64_t Rng::derive_seed(std::uint64_t tag) const noexcept {
  return mix64(key_ ^ mix64(stream_ ^ mix64(tag)));
}

Rng Rng::split(std::uint64_t tag) const noexcept { return Rng(derive_seed(tag), 0); }

void Rng::refill() noexcept {
  const std::array<std::uint32_t, 4> ctr{
      static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
      static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
  const auto out = philox(ctr, key_);
  buffer_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
  buffer_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
  buffered_ = 2;
  ++block_;
}

Rng::result_type Rng::operator()() noexcept {
  if (buffered_ == 0) refill();
  return buffer_[static_cast<std::size_t>(2 - buffered_--)];
}

double Rng::uniform() noexcept {
  return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_normal_ = v * f;
  has_spare_ = true;
  return u * f;
}

double Rng::exponential() noexcept { return -std::log(uniform()); }

std::uint64_t Rng::below(std::uint64_t n) noexcept {
  // Lemire's nearly-divisionless method.
  unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = static_cast<unsigned __int128>((*this)()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double sample_gamma(double shape, Rng& rng) {
  if (!(shape > 0.0)) throw std::domain_error("gamma shape must be positive");
  if (shape < 1.0) {
    // Gamma(a) = Gamma(a + 1) * U^(1/a)
    return sample_gamma(shape + 1.0, rng) * std::pow(rng.uniform(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double sample_inverse_gaussian(double mean, double shape, Rng& rng) {
  if (!(mean > 0.0) || !(shape > 0.0)) {
    throw std::domain_error("inverse Gaussian parameters must be positive");
  }
  const double z = rng.normal();
  const double y = z * z;
  if (std::isinf(mean)) return shape / y;
  // Smaller root of the MSH quadratic, written without cancellation.
  const double c = mean * y / (2.0 * shape);
  const double x = mean / (1.0 + c + std::sqrt(c * (2.0 + c)));
  if (rng.uniform() * (mean + x) <= mean) return x;
  return mean * mean / x;
}

namespace {

// Y with density proportional to y^(lambda-1) exp(-omega/2 (y + 1/y)), lambda >= 0.
double sample_gig_standard(double lambda, double omega, Rng& rng) {
  const auto log_g = [&](double x) { return (lambda - 1.0) * std::log(x) - 0.5 * omega * (x + 1.0 / x); };
  const double mode = ((lambda - 1.0) + std::sqrt((lambda - 1.0) * (lambda - 1.0) + omega * omega)) / omega;
  const double log_g_mode = log_g(mode);

  if (lambda > 1.0 || omega > 0.5) {
    // Ratio-of-uniforms with mode shift (Dagpunar, Lehner); u-bounds are the
    // two real roots of a cubic bracketing the mode.
    const double a = -2.0 * (lambda + 1.0) / omega - mode;
    const double b = 2.0 * (lambda - 1.0) * mode / omega - 1.0;
    const double c = mode;
    const double p = b - a * a / 3.0;
    const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    if (p < 0.0) {
      const double arg = std::clamp(-q / 2.0 * std::sqrt(-27.0 / (p * p * p)), -1.0, 1.0);
      const double phi = std::acos(arg);
      const double r = std::sqrt(-4.0 * p / 3.0);
      const double x_lo = r * std::cos(phi / 3.0 + 4.0 * std::numbers::pi / 3.0) - a / 3.0;
      const double x_hi = r * std::cos(phi / 3.0) - a / 3.0;
      if (x_lo > 0.0 && x_lo < mode && x_hi > mode) {
        const double u_lo = (x_lo - mode) * std::exp(0.5 * (log_g(x_lo) - log_g_mode));
        const double u_hi = (x_hi - mode) * std::exp(0.5 * (log_g(x_hi) - log_g_mode));
        for (;;) {
          const double u = u_lo + (u_hi - u_lo) * rng.uniform();
          const double v = rng.uniform();
          const double x = u / v + mode;
          if (x > 0.0 && 2.0 * std::log(v) <= log_g(x) - log_g_mode) return x;
        }
      }
    }
  }

  // Ratio-of-uniforms without shift; valid for all lambda >= 0, omega > 0.
  const double x_hi = ((lambda + 1.0) + std::sqrt((lambda + 1.0) * (lambda + 1.0) + omega * omega)) / omega;
  const double u_hi = x_hi * std::exp(0.5 * (log_g(x_hi) - log_g_mode));
  for (;;) {
    const double u = u_hi * rng.uniform();
    const double v = rng.uniform();
    const double x = u / v;
    if (2.0 * std::log(v) <= log_g(x) - log_g_mode) return x;
  }
}

}  // namespace

double sample_gig(double lambda, double chi, double psi, Rng& rng) {
  if (!(chi > 0.0) || !(psi > 0.0) || !std::isfinite(lambda)) {
    throw std::domain_error("GIG requires chi > 0 and psi > 0");
  }
  const double omega = std::sqrt(chi * psi);
  if (lambda < 0.0) {
    // X ~ GIG(lambda, chi, psi)  <=>  1/X ~ GIG(-lambda, psi, chi)
    return std::sqrt(chi / psi) / sample_gig_standard(-lambda, omega, rng);
  }
  return std::sqrt(chi / psi) * sample_gig_standard(lambda, omega, rng);
}

double sample_truncated_normal(double mean, double sd, double lo, double hi, Rng& rng) {
  if (!(lo < hi) || !(sd > 0.0)) throw std::domain_error("truncated normal: empty support");
  for (int attempt = 0; attempt < 1000000; ++attempt) {
    const double x = mean + sd * rng.normal();
    if (x >= lo && x <= hi) return x;
  }
  throw std::runtime_error("truncated normal: rejection sampler made no progress");
}

}  // namespace bqr
