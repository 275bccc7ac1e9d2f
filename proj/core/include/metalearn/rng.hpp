#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

namespace metalearn {

/// Counter-based random stream. Draw n of stream (seed, stream_id) is a pure
/// function of (seed, stream_id, n), so results never depend on which thread
/// consumed which stream or in what order streams were created.
///
/// Satisfies UniformRandomBitGenerator. The distribution helpers below are
/// implemented here rather than taken from <random> because the standard
/// distributions are not specified bit-for-bit across library vendors.
class RngStream {
public:
    using result_type = std::uint64_t;

    RngStream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }
    std::uint64_t position() const { return counter_; }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type next();
    result_type operator()() { return next(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi);
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }
    /// Uniform integer in [0, n). Unbiased (rejection sampling).
    std::size_t index(std::size_t n);
    /// Uniformly random permutation of 0..n-1 (Fisher-Yates).
    std::vector<std::size_t> permutation(std::size_t n);

    /// Independent stream keyed by (seed, stream_id, id); does not advance this stream.
    RngStream child(std::uint64_t id) const;

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace metalearn
