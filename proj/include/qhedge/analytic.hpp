#ifndef QHEDGE_ANALYTIC_HPP
#define QHEDGE_ANALYTIC_HPP

#include <cmath>
#include <limits>
#include <stdexcept>

#include "qhedge/ledger.hpp"
#include "qhedge/market.hpp"
#include "qhedge/mathx.hpp"

namespace qhedge {

/// Black-Scholes call quantities on discounted spot/strike.
struct BsGreeks {
    Real price = 0.0;
    Real delta = 0.0;
    Real vega = 0.0;
    Real d_plus = 0.0;
    Real d_minus = 0.0;
};

/// Black-Scholes call on discounted quantities: no rate terms appear
/// because discounting already happened upstream.
///
/// ttm = 0 or vol = 0 falls back to the intrinsic value with a step-function
/// delta (0.5 exactly at the strike, display convention only).
inline BsGreeks bs_call(Real spot_disc, Real strike_disc, Real vol, Real ttm) {
    if (!(spot_disc > 0.0) || !(strike_disc > 0.0))
        throw std::domain_error("bs_call: spot and strike must be > 0");
    if (vol < 0.0 || ttm < 0.0)
        throw std::domain_error("bs_call: vol and ttm must be >= 0");

    BsGreeks g;
    const Real total_vol = vol * std::sqrt(ttm);
    if (total_vol == 0.0) {
        g.price = std::max(spot_disc - strike_disc, 0.0);
        g.delta = spot_disc > strike_disc ? 1.0 : (spot_disc < strike_disc ? 0.0 : 0.5);
        g.vega = 0.0;
        const Real inf = std::numeric_limits<Real>::infinity();
        g.d_plus = spot_disc > strike_disc ? inf : (spot_disc < strike_disc ? -inf : 0.0);
        g.d_minus = g.d_plus;
        return g;
    }
    g.d_plus = std::log(spot_disc / strike_disc) / total_vol + 0.5 * total_vol;
    g.d_minus = g.d_plus - total_vol;
    g.delta = norm_cdf(g.d_plus);
    g.price = spot_disc * g.delta - strike_disc * norm_cdf(g.d_minus);
    g.vega = spot_disc * norm_pdf(g.d_plus) * std::sqrt(ttm);
    return g;
}

namespace detail {
/// Switch point below which the log expressions in the smile factor become
/// ill-conditioned and the series expansion takes over.
inline constexpr Real kSmileSeriesCutoff = 1e-8;
}  // namespace detail

/// Log-normal SABR implied-vol smile factor f(y), where y is the
/// vol-adjusted log-moneyness. Algebraically
///   f(y) = (y/2) / (log(1-rho) - log(sqrt(1+rho*y+y^2/4) - rho - y/2));
/// implemented via the conjugate of the inner surd,
///   f(y) = (y/2) / log((sqrt(1+rho*y+y^2/4) + rho + y/2) / (1+rho)),
/// which avoids subtracting two nearly equal logarithms. Near y=0 the 0/0
/// limit is resolved by the series f(y) = 1 + (rho/4)y + O(y^2).
inline Real sabr_smile_factor(Real y, Real rho) {
    if (!(rho > -1.0 && rho < 1.0))
        throw std::domain_error("sabr_smile_factor: rho must be in (-1,1)");
    if (std::abs(y) < detail::kSmileSeriesCutoff) return 1.0 + 0.25 * rho * y;
    const Real h = std::sqrt(1.0 + rho * y + 0.25 * y * y);
    return (0.5 * y) / std::log((h + rho + 0.5 * y) / (1.0 + rho));
}

/// Closed-form derivative f'(y) of the smile factor, with the exact limit
/// f'(0) = rho/4 at the series switch point.
inline Real sabr_smile_factor_prime(Real y, Real rho) {
    if (!(rho > -1.0 && rho < 1.0))
        throw std::domain_error("sabr_smile_factor_prime: rho must be in (-1,1)");
    if (std::abs(y) < detail::kSmileSeriesCutoff) return 0.25 * rho;
    const Real h = std::sqrt(1.0 + rho * y + 0.25 * y * y);
    const Real L = std::log((h + rho + 0.5 * y) / (1.0 + rho));
    const Real Lp = ((rho + 0.5 * y) / (2.0 * h) + 0.5) / (h + rho + 0.5 * y);
    return 0.5 / L - 0.5 * y * Lp / (L * L);
}

/// Approximate log-normal SABR implied volatility:
/// sigma_hat = sigma_t * f(M), M = (eta/sigma_t) * log(strike/spot).
inline Real sabr_implied_vol(Real spot_disc, Real strike_disc, Real sigma_t, Real eta,
                             Real rho) {
    if (!(spot_disc > 0.0) || !(strike_disc > 0.0))
        throw std::domain_error("sabr_implied_vol: spot and strike must be > 0");
    if (!(sigma_t > 0.0)) throw std::domain_error("sabr_implied_vol: sigma_t must be > 0");
    if (!(eta >= 0.0)) throw std::domain_error("sabr_implied_vol: eta must be >= 0");
    const Real m = (eta / sigma_t) * std::log(strike_disc / spot_disc);
    return sigma_t * sabr_smile_factor(m, rho);
}

/// Approximately variance-optimal hedge ratio under log-normal SABR:
/// the Black-Scholes delta at the approximate implied vol plus a
/// vanna-style correction for the spot-vol correlation,
///   theta = Phi(d+) + (eta/2) phi(d+) sqrt(ttm) (rho f(M) - (rho M + 2) f'(M)),
/// with d+ evaluated at the implied vol. Reduces exactly to the
/// Black-Scholes delta when eta = 0.
inline Real bartlett_delta(Real spot_disc, Real strike_disc, Real sigma_t, Real ttm,
                           Real eta, Real rho) {
    if (ttm <= 0.0) return bs_call(spot_disc, strike_disc, sigma_t, 0.0).delta;
    const Real m = (eta / sigma_t) * std::log(strike_disc / spot_disc);
    const Real f = sabr_smile_factor(m, rho);
    const Real fp = sabr_smile_factor_prime(m, rho);
    const Real vol_hat = sigma_t * f;
    const BsGreeks g = bs_call(spot_disc, strike_disc, vol_hat, ttm);
    const Real correction =
        0.5 * eta * norm_pdf(g.d_plus) * std::sqrt(ttm) * (rho * f - (rho * m + 2.0) * fp);
    return g.delta + correction;
}

/// Premium exchanged at inception: the Black-Scholes value at sigma0
/// (under SABR with eta > 0, at the smile-adjusted implied vol for the
/// strike), signed by position side (received when short, paid when long)
/// and scaled by contract count. Used as the default initial cash so
/// hedging-cost distributions center near zero. Training against a
/// premium-inclusive objective matters under a nonzero equity drift: with
/// zero initial cash the squared-error optimum tilts holdings toward
/// capturing drift instead of minimizing variance.
inline Real default_premium(const MarketConfig& market, const ContractSpec& contract) {
    const Real maturity = market.maturity_years();
    const Real k_disc = contract.strike_disc(market.ir, maturity);
    Real vol = market.sigma0;
    if (market.model_kind == ModelKind::Sabr && market.eta > 0.0 && market.sigma0 > 0.0)
        vol = sabr_implied_vol(market.s0, k_disc, market.sigma0, market.eta, market.rho);
    const Real price = bs_call(market.s0, k_disc, vol, maturity).price;
    return contract.side_sign() * contract.contracts * price;
}

/// Hedge-with-constant-vol baseline: Black-Scholes delta at a fixed
/// volatility, scaled by position size and side. Observable-only.
inline Policy delta_policy(const ContractSpec& contract, const MarketConfig& market) {
    const Real k_disc = contract.strike_disc(market.ir, market.maturity_years());
    const Real vol = market.sigma0;
    const Real scale = contract.side_sign() * contract.contracts;
    Policy p;
    p.name = "delta";
    p.act = [k_disc, vol, scale](const HedgeState& s) {
        return scale * bs_call(s.spot_discounted, k_disc, vol, s.time_to_maturity).delta;
    };
    return p;
}

/// Bartlett hedge baseline: reads the latent instantaneous vol through the
/// privileged channel (baseline privilege; learned agents never see it).
inline Policy bartlett_policy(const ContractSpec& contract, const MarketConfig& market) {
    const Real k_disc = contract.strike_disc(market.ir, market.maturity_years());
    const Real eta = market.eta;
    const Real rho = market.rho;
    const Real scale = contract.side_sign() * contract.contracts;
    Policy p;
    p.name = "bartlett";
    p.act_with_vol = [k_disc, eta, rho, scale](const HedgeState& s, Real sigma_t) {
        return scale *
               bartlett_delta(s.spot_discounted, k_disc, sigma_t, s.time_to_maturity, eta, rho);
    };
    return p;
}

}  // namespace qhedge

#endif
