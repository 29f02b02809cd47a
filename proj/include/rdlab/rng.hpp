#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>

#include <boost/random/exponential_distribution.hpp>
#include <pcg/pcg_random.hpp>

namespace rdlab {

/// Substream tags, so that different consumers seeded from the same
/// (seed, replica) never share a generator.
enum class StreamPurpose : std::uint32_t {
  Ctmc = 1,
  CouplingUniforms = 2,
  SdeNoise = 3,
  Rescaled = 4,
  Walk = 5,
};

/// Reproducible random stream identified by (seed, stream_id, substream).
///
/// Backed by pcg64_fast (128-bit MCG, XSL-RR output) seeded through
/// std::seed_seq. Uniforms and normals are converted by hand and
/// exponentials use Boost's ziggurat, so results do not depend on the
/// standard library's distribution implementations.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id,
            StreamPurpose purpose = StreamPurpose::Ctmc, std::uint64_t substream = 0)
      : seed_(seed), stream_id_(stream_id) {
    std::seed_seq seq{
        static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
        static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32),
        static_cast<std::uint32_t>(purpose),
        static_cast<std::uint32_t>(substream), static_cast<std::uint32_t>(substream >> 32)};
    engine_.seed(seq);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1].
  double uniform_open_zero() { return 1.0 - uniform(); }

  /// Exponential(rate).
  double exponential(double rate) { return unit_exponential_(engine_) / rate; }

  /// Pair of independent standard normals (Box-Muller).
  std::pair<double, double> normal_pair() {
    const double r = std::sqrt(-2.0 * std::log(uniform_open_zero()));
    const double theta = 2.0 * std::numbers::pi * uniform();
    return {r * std::cos(theta), r * std::sin(theta)};
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const auto [a, b] = normal_pair();
    spare_ = b;
    has_spare_ = true;
    return a;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  arrow_vendored::pcg_engines::mcg_xsl_rr_128_64 engine_;
  boost::random::exponential_distribution<double> unit_exponential_{1.0};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace rdlab
