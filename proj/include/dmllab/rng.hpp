#ifndef DMLLAB_RNG_HPP
#define DMLLAB_RNG_HPP

#include <cstdint>
#include <cmath>
#include <random>
#include <vector>

namespace dmllab {

/// Splittable, reproducible random stream. Two streams with distinct
/// (seed, stream_id) pairs are independent; the same pair always yields
/// the same draws. Substreams are derived by hashing tags into the
/// stream id, so repetition r / fold k / learner l can each get their
/// own stream without coordination.
class RngStream {
public:
    RngStream() : RngStream(0, 0) {}
    RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
        : seed_(seed), stream_(stream_id), eng_(mix(seed, stream_id)) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_; }

    /// New independent stream keyed by an extra tag (chainable).
    RngStream derive(std::uint64_t tag) const {
        return RngStream(seed_, mix(stream_, tag));
    }
    RngStream derive(std::uint64_t a, std::uint64_t b) const {
        return derive(a).derive(b);
    }
    RngStream derive(std::uint64_t a, std::uint64_t b, std::uint64_t c) const {
        return derive(a).derive(b).derive(c);
    }

    std::uint64_t next_u64() { return eng_(); }

    /// Uniform on [0,1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard normal, polar Box-Muller with one cached spare.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        has_spare_ = true;
        return u * m;
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    /// Student-t via N / sqrt(chi2_df / df); exact for integer df >= 1.
    double student_t(int df) {
        const double z = normal();
        double chi2 = 0.0;
        for (int i = 0; i < df; ++i) {
            const double g = normal();
            chi2 += g * g;
        }
        return z / std::sqrt(chi2 / static_cast<double>(df));
    }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Lemire-style rejection-free enough for our n << 2^64.
        return eng_() % n;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// SplitMix64-based combiner used for stream derivation and cell seeds.
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        std::uint64_t x = a + 0x9e3779b97f4a7c15ULL * (b + 1);
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Stable 64-bit hash of a short string, for deriving cell seeds from
/// label-like identifiers (learner names, scheme names).
inline std::uint64_t hash_tag(const char* s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (; *s; ++s) {
        h ^= static_cast<unsigned char>(*s);
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t hash_tag(const std::string& s) { return hash_tag(s.c_str()); }

} // namespace dmllab

#endif
