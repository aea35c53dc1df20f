#pragma once

#include <cstdint>
#include <string_view>

namespace sorl {

// Counter-based 64-bit generator. Each draw hashes (key, counter) through the
// SplitMix64 finalizer, so a stream is fully described by its key and position.
//
// Sub-streams are derived with
//   derive_seed(master, label, index) =
//       splitmix64(master ^ splitmix64(fnv1a64(label) ^ splitmix64(index + 1)))
// which is what every module uses to split one master seed into independent
// named streams ("mdp/core", "data", "corrupt", ...).
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t key) : key_(key) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }

    result_type operator()() { return next(); }
    result_type next();

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
    std::uint64_t below(std::uint64_t n);
    bool bernoulli(double p) { return uniform() < p; }
    double normal();
    /// +1 or -1 with equal probability.
    double sign() { return (next() >> 63) ? 1.0 : -1.0; }

    std::uint64_t key() const { return key_; }
    std::uint64_t position() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t index = 0);

inline CounterRng make_stream(std::uint64_t master, std::string_view label, std::uint64_t index = 0) {
    return CounterRng(derive_seed(master, label, index));
}

}  // namespace sorl
