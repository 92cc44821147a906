#pragma once

#include <cstdint>
#include <random>

namespace distill {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// Counter-addressed random stream. A stream is identified by (seed, stream,
// substream); the engine state depends only on that triple, so trials drawn
// on different threads or in a different order see identical numbers.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0,
                        std::uint64_t substream = 0)
      : seed_(seed), stream_(stream), substream_(substream),
        engine_(derive(seed, stream, substream)) {}

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  // Uniform on [0, 1).
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

  double normal(double mean = 0.0, double sd = 1.0) {
    return std::normal_distribution<double>(mean, sd)(engine_);
  }

  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t binomial(std::uint64_t n, double p) {
    return std::binomial_distribution<std::uint64_t>(n, p)(engine_);
  }

  std::uint64_t below(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
  }

  // Child stream keyed by `index`; independent of how much of this stream has
  // been consumed.
  RandomStream split(std::uint64_t index) const {
    return RandomStream(derive(seed_, stream_, substream_), index, 0);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t substream() const { return substream_; }

 private:
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream,
                              std::uint64_t substream) {
    std::uint64_t h = detail::splitmix64(seed);
    h = detail::splitmix64(h ^ detail::splitmix64(stream + 0x632be59bd9b4e019ULL));
    h = detail::splitmix64(h ^ detail::splitmix64(substream + 0x85157af5ULL));
    return h;
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t substream_;
  std::mt19937_64 engine_;
};

}  // namespace distill
