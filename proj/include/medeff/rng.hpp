#pragma once

// Counter-based random streams.
//
// A stream is a pure function of (key, gamma, counter): the i-th 64-bit output
// is mix64(key + (i + 1) * gamma). Key and gamma are derived by hashing the
// master seed with a domain tag, so a (seed, tag) pair always reproduces the
// same sequence regardless of which thread or in which order it is consumed.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>

namespace medeff {

namespace detail {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Variant 13 of Stafford's mixers, used for gamma derivation.
constexpr std::uint64_t mix64_variant(std::uint64_t z) noexcept {
  z = (z ^ (z >> 33)) * 0xff51afd7ed558ccdULL;
  z = (z ^ (z >> 33)) * 0xc4ceb9fe1a85ec53ULL;
  return z ^ (z >> 33);
}

constexpr std::uint64_t make_gamma(std::uint64_t z) noexcept {
  z = mix64_variant(z) | 1ULL;
  const auto transitions = __builtin_popcountll(z ^ (z >> 1));
  return transitions < 24 ? z ^ 0xaaaaaaaaaaaaaaaaULL : z;
}

constexpr std::uint64_t fnv1a(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

struct ZigguratTables {
  std::array<std::uint64_t, 256> k{};
  std::array<double, 256> w{};
  std::array<double, 256> f{};
};

constexpr double kZigguratR = 3.6541528853610088;

// Marsaglia & Tsang (2000) construction with 256 layers and 52-bit magnitudes.
inline ZigguratTables make_ziggurat_tables() {
  ZigguratTables t;
  constexpr double m = 4503599627370496.0;  // 2^52
  constexpr double v = 4.92867323399e-3;   // area of each layer
  double dn = kZigguratR;
  double tn = dn;
  const double q = v / std::exp(-0.5 * dn * dn);
  t.k[0] = static_cast<std::uint64_t>((dn / q) * m);
  t.k[1] = 0;
  t.w[0] = q / m;
  t.w[255] = dn / m;
  t.f[0] = 1.0;
  t.f[255] = std::exp(-0.5 * dn * dn);
  for (int i = 254; i >= 1; --i) {
    dn = std::sqrt(-2.0 * std::log(v / dn + std::exp(-0.5 * dn * dn)));
    t.k[i + 1] = static_cast<std::uint64_t>((dn / tn) * m);
    tn = dn;
    t.f[i] = std::exp(-0.5 * dn * dn);
    t.w[i] = dn / m;
  }
  return t;
}

inline const ZigguratTables ziggurat = make_ziggurat_tables();

}  // namespace detail

/// Identifies what a stream is used for inside a study: which scenario, which
/// replicate and which purpose ("generation", "gcomp-draws", "bootstrap", ...).
struct DomainTag {
  std::uint64_t scenario = 0;
  std::uint64_t replicate = 0;
  std::string purpose;
};

class RngStream {
public:
  using result_type = std::uint64_t;

  RngStream() : RngStream(0, DomainTag{}) {}

  RngStream(std::uint64_t master_seed, const DomainTag& tag) : master_seed_(master_seed) {
    std::uint64_t h = detail::mix64(master_seed ^ detail::kGolden);
    h = detail::mix64(h ^ detail::mix64(tag.scenario + 0x51ULL));
    h = detail::mix64(h ^ detail::mix64(tag.replicate + 0x52ULL));
    h = detail::mix64(h ^ detail::fnv1a(tag.purpose));
    key_ = h;
    gamma_ = detail::make_gamma(h + detail::kGolden);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return next_u64(); }

  result_type next_u64() noexcept { return detail::mix64(key_ + (++counter_) * gamma_); }

  /// Child stream keyed by an index; independent of the parent's position.
  RngStream substream(std::uint64_t index) const noexcept {
    RngStream child = *this;
    const std::uint64_t h = detail::mix64(key_ ^ detail::mix64(index * detail::kGolden + gamma_));
    child.key_ = h;
    child.gamma_ = detail::make_gamma(h ^ gamma_);
    child.counter_ = 0;
    return child;
  }

  RngStream substream(std::string_view label) const noexcept {
    return substream(detail::fnv1a(label));
  }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on the open interval (0, 1).
  double uniform_open() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Uniform integer in [0, bound).
  std::uint64_t uniform_index(std::uint64_t bound) noexcept {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
  }

  /// Standard normal via the Marsaglia-Tsang ziggurat: the low 8 bits pick
  /// the layer, the top 53 bits give a signed 52-bit magnitude.
  double normal() noexcept {
    const auto& t = detail::ziggurat;
    const std::uint64_t u = next_u64();
    const auto layer = static_cast<std::size_t>(u & 0xffU);
    const std::int64_t hz = static_cast<std::int64_t>(u) >> 11;
    const auto magnitude = static_cast<std::uint64_t>(hz < 0 ? -hz : hz);
    if (magnitude < t.k[layer]) [[likely]] return static_cast<double>(hz) * t.w[layer];
    return normal_rejected(layer, hz);
  }

  double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

  std::uint64_t master_seed() const noexcept { return master_seed_; }
  std::uint64_t position() const noexcept { return counter_; }

private:
  [[gnu::noinline]] double normal_rejected(std::size_t layer, std::int64_t hz) noexcept {
    const auto& t = detail::ziggurat;
    for (;;) {
      const double x = static_cast<double>(hz) * t.w[layer];
      if (layer == 0) {
        double tail = 0.0;
        double y = 0.0;
        do {
          tail = -std::log(uniform_open()) / detail::kZigguratR;
          y = -std::log(uniform_open());
        } while (y + y < tail * tail);
        return hz < 0 ? -(detail::kZigguratR + tail) : detail::kZigguratR + tail;
      }
      if (t.f[layer] + uniform() * (t.f[layer - 1] - t.f[layer]) < std::exp(-0.5 * x * x)) return x;
      const std::uint64_t u = next_u64();
      layer = static_cast<std::size_t>(u & 0xffU);
      hz = static_cast<std::int64_t>(u) >> 11;
      const auto magnitude = static_cast<std::uint64_t>(hz < 0 ? -hz : hz);
      if (magnitude < t.k[layer]) return static_cast<double>(hz) * t.w[layer];
    }
  }

  std::uint64_t master_seed_ = 0;
  std::uint64_t key_ = 0;
  std::uint64_t gamma_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace medeff
