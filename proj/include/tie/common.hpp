// Shared low-level utilities: deterministic RNG helpers, a flat row-major
// matrix, key packing and a static-partition parallel_for.
//
// All randomness in the library goes through SplitMix64-derived seeds and
// the raw-bits uniform helpers below so that runs are reproducible across
// platforms (std::uniform_*_distribution is implementation-defined).
#pragma once

#include <cstdint>
#include <cstring>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace tie {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_str(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Derives an independent stream seed from a base seed, a tag naming the
/// use-site and up to two integer qualifiers (e.g. time step, epoch).
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t h = splitmix64(base ^ hash_str(tag));
    h = splitmix64(h ^ a);
    return splitmix64(h ^ b);
}

/// Uniform double in [0, 1) from the top 53 bits of the engine output.
inline double next_double(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n) by rejection; n must be positive.
inline std::uint64_t next_below(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

/// In-place Fisher-Yates using next_below (std::shuffle is not portable).
template <typename T>
void shuffle_vec(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = next_below(rng, i);
        std::swap(v[i - 1], v[j]);
    }
}

inline std::uint64_t pack2(std::uint32_t a, std::uint32_t b) {
    return (std::uint64_t(a) << 32) | b;
}

/// Row-major dense matrix of doubles.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    std::span<double> row(std::size_t i) { return {a.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const {
        return {a.data() + i * cols, cols};
    }
    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

/// Splits [0, n) into contiguous chunks, one per worker, and joins.
/// fn(begin, end, worker_index). Deterministic partition: chunk w covers
/// the w-th slice regardless of scheduling.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    if (n == 0) return;
    int workers = threads > 0 ? threads
                              : int(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    if (std::size_t(workers) > n) workers = int(n);
    if (workers == 1) {
        fn(std::size_t(0), n, 0);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (int w = 1; w < workers; ++w) {
        std::size_t b = std::min(n, chunk * std::size_t(w));
        std::size_t e = std::min(n, b + chunk);
        if (b >= e) continue;
        pool.emplace_back([&fn, b, e, w] { fn(b, e, w); });
    }
    fn(std::size_t(0), std::min(n, chunk), 0);
    for (auto& t : pool) t.join();
}

/// Numerically safe softplus: -ln(1 - sigmoid(x)) == softplus(x).
inline double softplus(double x) {
    if (x > 0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace tie
