#ifndef QHEDGE_FEATURES_HPP
#define QHEDGE_FEATURES_HPP

#include <array>

#include <json.hpp>

#include "qhedge/ledger.hpp"
#include "qhedge/market.hpp"

namespace qhedge {

/// Shared observable-feature builder for every learned agent.
///
/// Raw features are {spot_disc / strike_disc, time-to-maturity in years,
/// holding_prev / contracts}; each is mapped through out = raw * scale +
/// shift. Defaults center and spread them to roughly unit range for the
/// standard 30-day at-the-money setup. The latent vol can never appear
/// here: HedgeState does not carry it.
struct FeatureScaler {
    std::array<Real, 3> scale{10.0, 1.0, 2.0};
    std::array<Real, 3> shift{-10.0, 0.0, -1.0};

    /// Sets the time scale so ttm maps onto [0,1] over the contract life.
    static FeatureScaler for_market(const MarketConfig& market) {
        FeatureScaler f;
        f.scale[1] = 1.0 / market.maturity_years();
        return f;
    }

    /// holding_prev enters side-normalized (short and long hedgers both
    /// see their own position as a positive fraction of the size).
    std::array<Real, 3> build(const HedgeState& s, const ContractSpec& contract,
                              Real strike_disc) const {
        return {
            (s.spot_discounted / strike_disc) * scale[0] + shift[0],
            s.time_to_maturity * scale[1] + shift[1],
            (s.holding_prev * contract.side_sign() / contract.contracts) * scale[2] + shift[2],
        };
    }
};

inline void to_json(nlohmann::json& j, const FeatureScaler& f) {
    j = nlohmann::json{{"scale", f.scale}, {"shift", f.shift}};
}

inline void from_json(const nlohmann::json& j, FeatureScaler& f) {
    j.at("scale").get_to(f.scale);
    j.at("shift").get_to(f.shift);
}

}  // namespace qhedge

#endif
