#include "seqcl/rng.hpp"

#include <cmath>
#include <numbers>

#include "seqcl/errors.hpp"

namespace seqcl {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t step, std::uint64_t node,
                          std::string_view purpose) {
    std::uint64_t s = splitmix64(root);
    s = splitmix64(s ^ splitmix64(step));
    s = splitmix64(s ^ splitmix64(node));
    s = splitmix64(s ^ fnv1a(purpose));
    return s;
}

} // namespace

RngStream::RngStream(std::uint64_t root_seed, std::uint64_t step, std::uint64_t node,
                     std::string_view purpose)
    : engine_(derive_seed(root_seed, step, node, purpose)) {}

std::uint64_t RngStream::next_u64() { return engine_(); }

double RngStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal(double mean, double stddev) {
    if (stddev < 0.0) throw DomainError("normal: stddev must be >= 0");
    if (stddev == 0.0) return mean;
    if (has_spare_) {
        has_spare_ = false;
        return mean + stddev * spare_;
    }
    const double u1 = 1.0 - uniform(); // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return mean + stddev * r * std::cos(theta);
}

bool RngStream::bernoulli(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("bernoulli: p outside [0, 1]");
    if (p == 1.0) return true; // uniform() < 1 always holds, but keep the edge explicit
    return uniform() < p;
}

std::uint64_t RngStream::uniform_below(std::uint64_t bound) {
    if (bound == 0) throw DomainError("uniform_below: bound must be positive");
    // Lemire multiply-shift with rejection; fully deterministic per stream.
    while (true) {
        const std::uint64_t x = next_u64();
        const __uint128_t m = static_cast<__uint128_t>(x) * bound;
        const std::uint64_t low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0ULL - bound) % bound;
            if (low < threshold) continue;
        }
        return static_cast<std::uint64_t>(m >> 64);
    }
}

std::vector<std::size_t> RngStream::permutation(std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(uniform_below(n - i));
        std::swap(idx[i], idx[j]);
    }
    return idx;
}

Matrix rand_normal(RngStream& stream, std::size_t rows, std::size_t cols, double mean,
                   double stddev) {
    if (stddev < 0.0) throw DomainError("rand_normal: stddev must be >= 0");
    Matrix m(rows, cols);
    for (double& v : m.data()) v = stream.normal(mean, stddev);
    if (!m.all_finite()) throw NumericError("rand_normal: produced non-finite entries");
    return m;
}

Matrix bernoulli_mask(RngStream& stream, std::size_t rows, std::size_t cols, double p_keep) {
    if (!(p_keep >= 0.0 && p_keep <= 1.0)) {
        throw DomainError("bernoulli_mask: p_keep outside [0, 1]");
    }
    Matrix m(rows, cols);
    for (double& v : m.data()) v = stream.bernoulli(p_keep) ? 1.0 : 0.0;
    return m;
}

} // namespace seqcl
