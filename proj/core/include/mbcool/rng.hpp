#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace mbcool {

/// SplitMix64: tiny splittable 64-bit generator (Steele, Lea, Flood 2014).
/// Chosen over std:: engines because its output is fully pinned by this file:
/// trial streams stay bit-identical across platforms and library versions.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : state_(seed) {}

    /// Independent substream for one Monte Carlo trial: the (seed, index) pair
    /// is mixed through two finalizer rounds so streams of neighbouring trials
    /// share no structure. Trials can then run in any order or in parallel.
    static RngStream for_trial(std::uint64_t seed, std::uint64_t trial_index) {
        return RngStream(mix(mix(seed ^ 0x9e3779b97f4a7c15ull) + trial_index));
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        return mix(state_);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Fock index of a thermal (Bose-Einstein) state with mean nbar:
    /// p_n = nbar^n/(nbar+1)^(n+1) is geometric with ratio nbar/(nbar+1),
    /// sampled by inverting the CDF. nbar = 0 always yields 0.
    int thermal_n(double nbar) {
        if (nbar < 0.0) throw std::invalid_argument("thermal_n: nbar < 0");
        if (nbar == 0.0) { (void)uniform(); return 0; }
        const double u = uniform();
        const double n = std::floor(std::log1p(-u) / std::log(nbar / (nbar + 1.0)));
        return n < 0.0 ? 0 : static_cast<int>(n);
    }

    /// Poisson(lambda) conditioned on k >= 1, by inverse CDF over the
    /// renormalized tail. Used for heating increments once the "any heating at
    /// all" Bernoulli has fired.
    int truncated_poisson_ge1(double lambda) {
        if (lambda <= 0.0) throw std::invalid_argument("truncated_poisson_ge1: lambda <= 0");
        const double p0 = std::exp(-lambda);
        double u = uniform() * (1.0 - p0); // u targets the k>=1 mass
        double pk = p0;                    // P(k), walked upward from k=0
        double cdf = 0.0;
        for (int k = 1; k < 1024; ++k) {
            pk *= lambda / k;
            cdf += pk;
            if (u < cdf) return k;
        }
        return 1024; // unreachable for any sane lambda; keeps the loop bounded
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

} // namespace mbcool
