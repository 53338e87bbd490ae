#ifndef QHEDGE_RNG_HPP
#define QHEDGE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "qhedge/common.hpp"
#include "qhedge/mathx.hpp"

namespace qhedge {

struct GaussPair {
    Real z1;
    Real z2;
};

/// Deterministic normal generator: mt19937_64 + Box-Muller.
///
/// Market simulation draws exactly one pair per time step regardless of the
/// model, so a SABR path with eta=0 consumes the stream identically to a
/// Black-Scholes path and reproduces it bit for bit.
class NormalSource {
public:
    explicit NormalSource(std::uint64_t seed) : eng_(seed) {}

    /// Uniform in (0, 1]; never returns 0 so log() below is safe.
    Real uniform01() {
        return static_cast<Real>((eng_() >> 11) + 1) * 0x1.0p-53;
    }

    /// One Box-Muller pair of independent standard normals.
    GaussPair next_pair() {
        const Real u1 = uniform01();
        const Real u2 = uniform01();
        const Real r = std::sqrt(-2.0 * std::log(u1));
        const Real th = 2.0 * kPi * u2;
        return {r * std::cos(th), r * std::sin(th)};
    }

    /// Single standard normal (consumes a full pair; spare discarded).
    Real next_gauss() { return next_pair().z1; }

    /// Raw engine output, for integer sampling tasks.
    std::uint64_t next_u64() { return eng_(); }

    std::string state_string() const {
        std::ostringstream os;
        os << eng_;
        return os.str();
    }

    void set_state(const std::string& s) {
        std::istringstream is(s);
        is >> eng_;
        if (is.fail()) throw IoError("bad RNG state string");
    }

private:
    std::mt19937_64 eng_;
};

/// Seed-namespace convention: training consumes [base, base+1e6),
/// evaluation consumes [base+1e6, base+2e6). The two never overlap, which
/// keeps held-out paths genuinely held out.
inline constexpr std::uint64_t kSeedNamespaceSpan = 1'000'000;

inline std::uint64_t train_seed(std::uint64_t base_seed, std::uint64_t index) {
    if (index >= kSeedNamespaceSpan)
        throw ConfigError("train seed index exceeds namespace span");
    return base_seed + index;
}

inline std::uint64_t eval_seed(std::uint64_t base_seed, std::uint64_t index) {
    if (index >= kSeedNamespaceSpan)
        throw ConfigError("eval seed index exceeds namespace span");
    return base_seed + kSeedNamespaceSpan + index;
}

}  // namespace qhedge

#endif
