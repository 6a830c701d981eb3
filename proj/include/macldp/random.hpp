#ifndef MACLDP_RANDOM_HPP
#define MACLDP_RANDOM_HPP

#include <cstdint>
#include <random>

namespace macldp {

/// Seeded random stream. Equal (seed, stream) pairs reproduce identical draws;
/// distinct stream ids give independent streams. Not shared between threads.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed = 0, std::uint64_t stream = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  /// Uniform on [0, 1).
  double uniform();
  /// Exp(rate) draw, mean 1/rate.
  double exponential(double rate);
  /// Poisson(mean) draw; mean 0 yields 0.
  std::int64_t poisson(double mean);
  /// Uniform index in {0, ..., n-1}.
  int index(int n);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
};

/// Exp(lambda) inter-arrival time.
double next_interarrival(RandomSource& src, double lambda);

}  // namespace macldp

#endif  // MACLDP_RANDOM_HPP
