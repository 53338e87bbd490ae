#ifndef QHEDGE_MARKET_HPP
#define QHEDGE_MARKET_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "qhedge/common.hpp"
#include "qhedge/rng.hpp"

namespace qhedge {

enum class ModelKind { BlackScholes, Sabr };

inline std::string to_string(ModelKind k) {
    return k == ModelKind::BlackScholes ? "bs" : "sabr";
}

/// Market dynamics on the rebalancing grid.
///
/// Spot follows geometric Brownian motion with real-world drift mu. Under
/// the SABR variant the instantaneous volatility is itself a driftless
/// geometric Brownian motion with vol-of-vol eta, correlated with the spot
/// shock by rho. ir is the continuously compounded rate used only for
/// discounting.
struct MarketConfig {
    ModelKind model_kind = ModelKind::BlackScholes;
    Real s0 = 100.0;
    Real mu = 0.05;
    Real sigma0 = 0.2;
    Real eta = 0.0;    // SABR vol-of-vol
    Real rho = 0.0;    // SABR spot-vol correlation
    Real ir = 0.0;
    int n_steps = 30;
    int maturity_days = 30;
    int day_count = 365;

    Real maturity_years() const {
        return static_cast<Real>(maturity_days) / static_cast<Real>(day_count);
    }
    Real dt() const { return maturity_years() / static_cast<Real>(n_steps); }

    void validate() const {
        if (!(s0 > 0.0)) throw ConfigError("market.s0 must be > 0");
        if (!(sigma0 >= 0.0)) throw ConfigError("market.sigma0 must be >= 0");
        if (!(rho >= -1.0 && rho <= 1.0)) throw ConfigError("market.rho must be in [-1,1]");
        if (!(eta >= 0.0)) throw ConfigError("market.eta must be >= 0");
        if (n_steps < 1) throw ConfigError("market.n_steps must be >= 1");
        if (maturity_days <= 0) throw ConfigError("market.maturity_days must be > 0");
        if (day_count <= 0) throw ConfigError("market.day_count must be > 0");
        if (!std::isfinite(mu) || !std::isfinite(ir))
            throw ConfigError("market.mu and market.ir must be finite");
    }
};

/// One simulated trajectory on the grid t_0=0 .. t_N=T.
///
/// spot holds DISCOUNTED prices; vol holds the instantaneous volatility
/// (constant for Black-Scholes). vol is latent: learned agents never see
/// it, only the analytic baselines may read it.
struct MarketPath {
    std::vector<Real> times;  // year fractions, length N+1
    std::vector<Real> spot;   // discounted spot, length N+1
    std::vector<Real> vol;    // instantaneous vol, length N+1
    Real ir = 0.0;            // rate used for the discounting above
    std::uint64_t seed = 0;

    int n_steps() const { return static_cast<int>(times.size()) - 1; }
};

/// Exact log-Euler simulation of one path. Both model kinds draw one
/// normal pair per step, so SABR with eta=0 reproduces Black-Scholes
/// bit for bit at the same seed.
inline MarketPath simulate_path(const MarketConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const int n = cfg.n_steps;
    const Real T = cfg.maturity_years();
    const Real dt = cfg.dt();
    const Real sqdt = std::sqrt(dt);
    const bool sabr = cfg.model_kind == ModelKind::Sabr;
    const Real rho_perp = std::sqrt(std::max(0.0, 1.0 - cfg.rho * cfg.rho));

    MarketPath path;
    path.seed = seed;
    path.ir = cfg.ir;
    path.times.resize(static_cast<std::size_t>(n) + 1);
    path.spot.resize(static_cast<std::size_t>(n) + 1);
    path.vol.resize(static_cast<std::size_t>(n) + 1);

    NormalSource rng(seed);
    Real s = cfg.s0;
    Real sig = cfg.sigma0;
    path.times[0] = 0.0;
    path.spot[0] = s;
    path.vol[0] = sig;
    for (int i = 0; i < n; ++i) {
        const GaussPair z = rng.next_pair();
        s *= std::exp((cfg.mu - 0.5 * sig * sig) * dt + sig * sqdt * z.z1);
        if (sabr) {
            const Real z2 = cfg.rho * z.z1 + rho_perp * z.z2;
            sig *= std::exp(-0.125 * cfg.eta * cfg.eta * dt + 0.5 * cfg.eta * sqdt * z2);
        }
        const std::size_t j = static_cast<std::size_t>(i) + 1;
        path.times[j] = T * static_cast<Real>(i + 1) / static_cast<Real>(n);
        path.spot[j] = s;  // discounted below
        path.vol[j] = sig;
    }
    if (cfg.ir != 0.0) {
        for (std::size_t j = 1; j < path.spot.size(); ++j)
            path.spot[j] *= std::exp(-cfg.ir * path.times[j]);
    }
    return path;
}

/// Batch of paths with seeds base_seed, base_seed+1, ... Path k is
/// identical whether generated alone or as part of a batch.
inline std::vector<MarketPath> simulate_batch(const MarketConfig& cfg, int n_paths,
                                              std::uint64_t base_seed) {
    if (n_paths < 1) throw ConfigError("n_paths must be >= 1");
    std::vector<MarketPath> out;
    out.reserve(static_cast<std::size_t>(n_paths));
    for (int k = 0; k < n_paths; ++k)
        out.push_back(simulate_path(cfg, base_seed + static_cast<std::uint64_t>(k)));
    return out;
}

}  // namespace qhedge

#endif
