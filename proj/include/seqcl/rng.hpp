#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "seqcl/matrix.hpp"

namespace seqcl {

/// Keyed deterministic random stream.
///
/// A stream is addressed by (root_seed, step, node, purpose). Identical keys
/// replay identical draw sequences on every platform (the engine and every
/// transform are fully pinned, nothing is delegated to unspecified stdlib
/// distributions). Distinct keys give independent streams, which is what
/// makes parallel per-node scoring independent of evaluation order.
class RngStream {
public:
    RngStream(std::uint64_t root_seed, std::uint64_t step, std::uint64_t node,
              std::string_view purpose);

    std::uint64_t next_u64();

    /// Uniform double in [0, 1), 53 mantissa bits.
    double uniform();

    /// Gaussian via Box-Muller; the paired spare is cached inside the stream.
    double normal(double mean = 0.0, double stddev = 1.0);

    /// True with probability p. Throws DomainError for p outside [0, 1].
    bool bernoulli(double p);

    /// Unbiased integer in [0, bound) via multiply-shift rejection.
    std::uint64_t uniform_below(std::uint64_t bound);

    /// Fisher-Yates permutation of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n);

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// i.i.d. Gaussian fill, row-major draw order. stddev == 0 gives a constant
/// matrix of `mean` without consuming draws.
Matrix rand_normal(RngStream& stream, std::size_t rows, std::size_t cols, double mean,
                   double stddev);

/// Binary mask; each entry is 1 with probability p_keep, independently.
Matrix bernoulli_mask(RngStream& stream, std::size_t rows, std::size_t cols, double p_keep);

} // namespace seqcl
