#ifndef QHEDGE_LEDGER_HPP
#define QHEDGE_LEDGER_HPP

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "qhedge/common.hpp"
#include "qhedge/market.hpp"

namespace qhedge {

enum class OptionSide { ShortCall, LongCall };

inline std::string to_string(OptionSide s) {
    return s == OptionSide::ShortCall ? "short_call" : "long_call";
}

/// European call position being hedged. side_sign is +1 when hedging a
/// short call (we owe the payoff, hedge with +delta shares) and -1 for a
/// long call.
struct ContractSpec {
    Real strike = 100.0;
    OptionSide side = OptionSide::ShortCall;
    Real contracts = 1.0;

    Real side_sign() const { return side == OptionSide::ShortCall ? 1.0 : -1.0; }

    /// Strike discounted to time 0, so payoffs compare against discounted spot.
    Real strike_disc(Real ir, Real maturity_years) const {
        return strike * std::exp(-ir * maturity_years);
    }

    /// Signed discounted payoff owed at maturity (positive = we pay).
    Real payoff_disc(Real spot_disc_T, Real ir, Real maturity_years) const {
        const Real k = strike_disc(ir, maturity_years);
        return side_sign() * contracts * std::max(spot_disc_T - k, 0.0);
    }

    void validate() const {
        if (!(strike > 0.0)) throw ConfigError("contract.strike must be > 0");
        if (!(contracts > 0.0)) throw ConfigError("contract.contracts must be > 0");
    }
};

/// Proportional transaction costs: alpha * spot * |trade|.
/// liquidate_at_maturity charges the final unwind trade; default on,
/// switchable off for ablation runs.
struct CostSpec {
    Real alpha = 0.001;
    bool liquidate_at_maturity = true;

    void validate() const {
        if (!(alpha >= 0.0)) throw ConfigError("cost.alpha must be >= 0");
    }
};

inline Real transaction_cost(Real h_new, Real h_old, Real spot, const CostSpec& cost) {
    return cost.alpha * spot * std::abs(h_new - h_old);
}

/// Observable state handed to hedging policies. Deliberately excludes the
/// latent volatility so learned agents can never condition on it.
struct HedgeState {
    int step_index = 0;
    Real time_to_maturity = 0.0;
    Real spot_discounted = 0.0;
    Real holding_prev = 0.0;
};

/// Builds the observable state at a grid point. The latent vol never
/// enters; analytic baselines that need it receive it through the
/// privileged policy channel instead.
inline HedgeState build_state(const MarketPath& path, int step, Real holding_prev,
                              const ContractSpec& /*contract*/) {
    const int n = path.n_steps();
    if (step < 0 || step > n) throw std::out_of_range("build_state: step outside [0,N]");
    if (step == 0 && holding_prev != 0.0)
        throw std::invalid_argument("build_state: holding before inception must be 0");
    HedgeState s;
    s.step_index = step;
    s.time_to_maturity = path.times[static_cast<std::size_t>(n)] -
                         path.times[static_cast<std::size_t>(step)];
    s.spot_discounted = path.spot[static_cast<std::size_t>(step)];
    s.holding_prev = holding_prev;
    return s;
}

/// A hedging policy maps state -> holding (shares for the coming interval).
///
/// act_with_vol is the privileged channel for analytic baselines that read
/// the latent instantaneous volatility; when set it takes precedence.
/// Learned agents only ever get `act`.
struct Policy {
    std::string name;
    std::function<Real(const HedgeState&)> act;
    std::function<Real(const HedgeState&, Real sigma_t)> act_with_vol;

    Real holding(const HedgeState& s, Real sigma_t) const {
        if (act_with_vol) return act_with_vol(s, sigma_t);
        return act(s);
    }
};

/// Complete record of one strategy run on one path.
///
/// rewards is the cash-flow decomposition: rewards[i] covers the interval
/// starting at t_i (trading gain minus the trade's cost); the last entry
/// additionally folds in the terminal liquidation cost and the payoff
/// exchange. The sum therefore telescopes: y0 + sum(rewards) =
/// terminal_wealth - payoff = -hedging_error.
struct EpisodeLedger {
    std::vector<Real> holdings;  // H_{t_0} .. H_{t_{N-1}}
    std::vector<Real> rewards;   // length N
    Real tc_total = 0.0;
    Real y0 = 0.0;
    Real terminal_wealth = 0.0;  // wealth after the terminal unwind, before paying the claim
    Real payoff = 0.0;
    Real hedging_error = 0.0;    // payoff - terminal_wealth; positive = loss
};

/// Runs a self-financing strategy along one path, charging proportional
/// transaction costs on every trade including the terminal unwind, and
/// settles the option payoff at maturity.
inline EpisodeLedger run_episode(const MarketPath& path, const ContractSpec& contract,
                                 const CostSpec& cost, const Policy& policy, Real y0 = 0.0) {
    contract.validate();
    cost.validate();
    const int n = path.n_steps();
    if (n < 1) throw std::invalid_argument("run_episode: path has no steps");

    EpisodeLedger led;
    led.y0 = y0;
    led.holdings.resize(static_cast<std::size_t>(n));
    led.rewards.assign(static_cast<std::size_t>(n), 0.0);

    const Real maturity = path.times.back();
    Real h_prev = 0.0;
    Real gains = 0.0;
    for (int i = 0; i < n; ++i) {
        const std::size_t j = static_cast<std::size_t>(i);
        const HedgeState state = build_state(path, i, h_prev, contract);
        const Real h = policy.holding(state, path.vol[j]);
        const Real tc = transaction_cost(h, h_prev, path.spot[j], cost);
        const Real gain = h * (path.spot[j + 1] - path.spot[j]);
        led.holdings[j] = h;
        led.rewards[j] = gain - tc;
        led.tc_total += tc;
        gains += gain;
        h_prev = h;
    }
    if (cost.liquidate_at_maturity) {
        const Real tc_term = transaction_cost(0.0, h_prev, path.spot.back(), cost);
        led.rewards.back() -= tc_term;
        led.tc_total += tc_term;
    }
    led.payoff = contract.payoff_disc(path.spot.back(), path.ir, maturity);
    led.rewards.back() -= led.payoff;
    led.terminal_wealth = y0 + gains - led.tc_total;
    led.hedging_error = led.payoff - led.terminal_wealth;
    return led;
}

/// Shifts cash-flow rewards by reference-value increments
/// (reward at t_i gains Ref_{t_i} - Ref_{t_{i-1}}, with Ref before
/// inception treated as 0; the folded terminal reward also gains
/// Ref_{t_N} - Ref_{t_{N-1}}). Requires ref_values[N] = payoff so the
/// shifted sum equals the cash-flow sum plus the payoff.
inline std::vector<Real> rewards_accounting(const EpisodeLedger& ledger,
                                            const std::vector<Real>& ref_values) {
    const std::size_t n = ledger.rewards.size();
    if (ref_values.size() != n + 1)
        throw std::invalid_argument("rewards_accounting: need N+1 reference values");
    std::vector<Real> shifted(ledger.rewards);
    for (std::size_t j = 0; j < n; ++j) {
        const Real ref_prev = j == 0 ? 0.0 : ref_values[j - 1];
        shifted[j] += ref_values[j] - ref_prev;
    }
    shifted[n - 1] += ref_values[n] - ref_values[n - 1];
    return shifted;
}

}  // namespace qhedge

#endif
