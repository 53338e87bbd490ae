#ifndef QHEDGE_CONFIG_HPP
#define QHEDGE_CONFIG_HPP

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qhedge/common.hpp"
#include "qhedge/dtsoc.hpp"
#include "qhedge/eval.hpp"
#include "qhedge/ledger.hpp"
#include "qhedge/market.hpp"
#include "qhedge/rlqh.hpp"

namespace qhedge {

// JSON bindings for the core domain types. Kept out of the domain headers
// so the simulation and ledger layers stay dependency-free.

inline void to_json(nlohmann::json& j, const MarketConfig& m) {
    j = nlohmann::json{{"model",
                        m.model_kind == ModelKind::Sabr ? "sabr" : "black_scholes"},
                       {"s0", m.s0},
                       {"mu", m.mu},
                       {"sigma0", m.sigma0},
                       {"eta", m.eta},
                       {"rho", m.rho},
                       {"ir", m.ir},
                       {"n_steps", m.n_steps},
                       {"maturity_days", m.maturity_days},
                       {"day_count", m.day_count}};
}

inline void from_json(const nlohmann::json& j, MarketConfig& m) {
    const std::string model = j.at("model").get<std::string>();
    if (model == "black_scholes")
        m.model_kind = ModelKind::BlackScholes;
    else if (model == "sabr")
        m.model_kind = ModelKind::Sabr;
    else
        throw ConfigError("market.model must be 'black_scholes' or 'sabr', got '" + model + "'");
    j.at("s0").get_to(m.s0);
    j.at("mu").get_to(m.mu);
    j.at("sigma0").get_to(m.sigma0);
    j.at("eta").get_to(m.eta);
    j.at("rho").get_to(m.rho);
    j.at("ir").get_to(m.ir);
    j.at("n_steps").get_to(m.n_steps);
    j.at("maturity_days").get_to(m.maturity_days);
    j.at("day_count").get_to(m.day_count);
}

inline void to_json(nlohmann::json& j, const ContractSpec& c) {
    j = nlohmann::json{
        {"strike", c.strike}, {"side", to_string(c.side)}, {"contracts", c.contracts}};
}

inline void from_json(const nlohmann::json& j, ContractSpec& c) {
    j.at("strike").get_to(c.strike);
    const std::string side = j.at("side").get<std::string>();
    if (side == "short_call")
        c.side = OptionSide::ShortCall;
    else if (side == "long_call")
        c.side = OptionSide::LongCall;
    else
        throw ConfigError("contract.side must be 'short_call' or 'long_call', got '" + side + "'");
    j.at("contracts").get_to(c.contracts);
}

inline void to_json(nlohmann::json& j, const CostSpec& c) {
    j = nlohmann::json{{"alpha", c.alpha}, {"liquidate_at_maturity", c.liquidate_at_maturity}};
}

inline void from_json(const nlohmann::json& j, CostSpec& c) {
    j.at("alpha").get_to(c.alpha);
    j.at("liquidate_at_maturity").get_to(c.liquidate_at_maturity);
}

inline void to_json(nlohmann::json& j, const DtsocTrainConfig& c) {
    j = nlohmann::json{
        {"episodes", c.episodes},
        {"episode_unit", c.episode_unit == EpisodeUnit::Paths ? "paths" : "gradient_steps"},
        {"batch_size", c.batch_size},
        {"lr", c.lr},
        {"lr_decay", c.lr_decay},
        {"lr_decay_every", c.lr_decay_every},
        {"dropout_p", c.dropout_p},
        {"layer_norm", c.layer_norm},
        {"hidden_dims", c.hidden_dims},
        {"shared_network", c.shared_network},
        {"output_init", c.output_init == OutputInit::Zero ? "zero" : "xavier"},
        {"log_every", c.log_every}};
}

inline void from_json(const nlohmann::json& j, DtsocTrainConfig& c) {
    j.at("episodes").get_to(c.episodes);
    const std::string unit = j.at("episode_unit").get<std::string>();
    if (unit == "paths")
        c.episode_unit = EpisodeUnit::Paths;
    else if (unit == "gradient_steps")
        c.episode_unit = EpisodeUnit::GradientSteps;
    else
        throw ConfigError("dtsoc.episode_unit must be 'paths' or 'gradient_steps'");
    j.at("batch_size").get_to(c.batch_size);
    j.at("lr").get_to(c.lr);
    j.at("lr_decay").get_to(c.lr_decay);
    j.at("lr_decay_every").get_to(c.lr_decay_every);
    j.at("dropout_p").get_to(c.dropout_p);
    j.at("layer_norm").get_to(c.layer_norm);
    j.at("hidden_dims").get_to(c.hidden_dims);
    j.at("shared_network").get_to(c.shared_network);
    const std::string init = j.at("output_init").get<std::string>();
    if (init == "zero")
        c.output_init = OutputInit::Zero;
    else if (init == "xavier")
        c.output_init = OutputInit::Xavier;
    else
        throw ConfigError("dtsoc.output_init must be 'zero' or 'xavier'");
    j.at("log_every").get_to(c.log_every);
}

inline void to_json(nlohmann::json& j, const RlqhTrainConfig& c) {
    j = nlohmann::json{{"episodes", c.episodes},
                       {"gamma", c.gamma},
                       {"lr_actor", c.lr_actor},
                       {"lr_critic", c.lr_critic},
                       {"smoothing", c.smoothing},
                       {"smoothing_convention",
                        c.smoothing_convention == SmoothingConvention::OnlineWeight
                            ? "online_weight"
                            : "algorithm_literal"},
                       {"buffer_capacity", c.buffer_capacity},
                       {"minibatch", c.minibatch},
                       {"warmup_transitions", c.warmup_transitions},
                       {"update_every", c.update_every},
                       {"noise_std0", c.noise_std0},
                       {"noise_std1", c.noise_std1},
                       {"hidden_dims", c.hidden_dims},
                       {"critic_layer_norm", c.critic_layer_norm},
                       {"log_every", c.log_every}};
}

inline void from_json(const nlohmann::json& j, RlqhTrainConfig& c) {
    j.at("episodes").get_to(c.episodes);
    j.at("gamma").get_to(c.gamma);
    j.at("lr_actor").get_to(c.lr_actor);
    j.at("lr_critic").get_to(c.lr_critic);
    j.at("smoothing").get_to(c.smoothing);
    const std::string conv = j.at("smoothing_convention").get<std::string>();
    if (conv == "online_weight")
        c.smoothing_convention = SmoothingConvention::OnlineWeight;
    else if (conv == "algorithm_literal")
        c.smoothing_convention = SmoothingConvention::AlgorithmLiteral;
    else
        throw ConfigError(
            "rlqh.smoothing_convention must be 'online_weight' or 'algorithm_literal'");
    j.at("buffer_capacity").get_to(c.buffer_capacity);
    j.at("minibatch").get_to(c.minibatch);
    j.at("warmup_transitions").get_to(c.warmup_transitions);
    j.at("update_every").get_to(c.update_every);
    j.at("noise_std0").get_to(c.noise_std0);
    j.at("noise_std1").get_to(c.noise_std1);
    j.at("hidden_dims").get_to(c.hidden_dims);
    j.at("critic_layer_norm").get_to(c.critic_layer_norm);
    j.at("log_every").get_to(c.log_every);
}

enum class AgentKind { None, Delta, Bartlett, Dtsoc, Rlqh };

inline std::string to_string(AgentKind a) {
    switch (a) {
        case AgentKind::None: return "none";
        case AgentKind::Delta: return "delta";
        case AgentKind::Bartlett: return "bartlett";
        case AgentKind::Dtsoc: return "dtsoc";
        case AgentKind::Rlqh: return "rlqh";
    }
    return "?";
}

inline AgentKind agent_kind_from_string(const std::string& s) {
    if (s == "none") return AgentKind::None;
    if (s == "delta") return AgentKind::Delta;
    if (s == "bartlett") return AgentKind::Bartlett;
    if (s == "dtsoc") return AgentKind::Dtsoc;
    if (s == "rlqh") return AgentKind::Rlqh;
    throw ConfigError("agent must be one of none|delta|bartlett|dtsoc|rlqh, got '" + s + "'");
}

struct EvalSection {
    long n_paths = 10'000;
    int bins = 0;  // 0 = Freedman-Diaconis
    bool charge_premium = true;

    void validate() const {
        if (n_paths < 1) throw ConfigError("eval.n_paths must be >= 1");
        if (bins < 0) throw ConfigError("eval.bins must be >= 0");
    }
};

struct SweepSection {
    std::string axis;  // maturity_days | sigma | alpha; empty = unset
    std::vector<Real> values;

    SweepAxis parse_axis() const {
        if (axis == "maturity_days") return SweepAxis::MaturityDays;
        if (axis == "sigma") return SweepAxis::Sigma;
        if (axis == "alpha") return SweepAxis::Alpha;
        throw ConfigError("sweep.axis must be maturity_days|sigma|alpha, got '" + axis + "'");
    }
};

/// One declarative experiment: market, instrument, frictions, the agent
/// under study, trainer settings, and evaluation protocol.
struct ExperimentConfig {
    std::uint64_t base_seed = 1234;
    std::string output_dir = "runs";
    MarketConfig market;
    ContractSpec contract;
    CostSpec cost;
    AgentKind agent = AgentKind::Delta;
    DtsocTrainConfig dtsoc;
    RlqhTrainConfig rlqh;
    EvalSection eval;
    SweepSection sweep;

    void validate() const {
        market.validate();
        contract.validate();
        cost.validate();
        dtsoc.validate();
        rlqh.validate();
        eval.validate();
        if (!sweep.axis.empty()) {
            sweep.parse_axis();
            if (sweep.values.empty()) throw ConfigError("sweep.values must be nonempty");
        }
    }

    /// Fully resolved echo: defaults applied, canonical key order.
    nlohmann::json resolved() const {
        return nlohmann::json{{"base_seed", base_seed},
                              {"output_dir", output_dir},
                              {"market", market},
                              {"contract", contract},
                              {"cost", cost},
                              {"agent", to_string(agent)},
                              {"dtsoc", dtsoc},
                              {"rlqh", rlqh},
                              {"eval",
                               {{"n_paths", eval.n_paths},
                                {"bins", eval.bins},
                                {"charge_premium", eval.charge_premium}}},
                              {"sweep", {{"axis", sweep.axis}, {"values", sweep.values}}}};
    }

    /// Stable short id of the resolved config; names run directories and
    /// stamps reports. Output path does not influence it.
    std::string fingerprint() const {
        nlohmann::json j = resolved();
        j.erase("output_dir");
        return hex64(fnv1a64(j.dump()));
    }
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const char* section,
                           std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(std::string("config: ") + section + " must be an object");
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (item.key() == a) {
                ok = true;
                break;
            }
        if (!ok)
            throw ConfigError(std::string("config: unknown key '") + item.key() + "' in " +
                              section);
    }
}

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace detail

/// Parses a config document, applying defaults for missing fields and
/// rejecting unknown keys. The SABR vol-of-vol and spot-vol correlation
/// defaults only kick in when the model is sabr and the keys are absent.
inline ExperimentConfig parse_config(const nlohmann::json& doc) {
    detail::reject_unknown(doc, "top level",
                           {"base_seed", "output_dir", "market", "contract", "cost", "agent",
                            "dtsoc", "rlqh", "eval", "sweep"});
    ExperimentConfig cfg;
    detail::read_opt(doc, "base_seed", cfg.base_seed);
    detail::read_opt(doc, "output_dir", cfg.output_dir);

    if (doc.contains("market")) {
        const nlohmann::json& m = doc.at("market");
        detail::reject_unknown(m, "market",
                               {"model", "s0", "mu", "sigma0", "eta", "rho", "ir", "n_steps",
                                "maturity_days", "day_count"});
        if (m.contains("model")) {
            const std::string model = m.at("model").get<std::string>();
            if (model == "black_scholes")
                cfg.market.model_kind = ModelKind::BlackScholes;
            else if (model == "sabr")
                cfg.market.model_kind = ModelKind::Sabr;
            else
                throw ConfigError("market.model must be 'black_scholes' or 'sabr', got '" +
                                  model + "'");
        }
        detail::read_opt(m, "s0", cfg.market.s0);
        detail::read_opt(m, "mu", cfg.market.mu);
        detail::read_opt(m, "sigma0", cfg.market.sigma0);
        detail::read_opt(m, "ir", cfg.market.ir);
        detail::read_opt(m, "day_count", cfg.market.day_count);
        detail::read_opt(m, "maturity_days", cfg.market.maturity_days);
        if (m.contains("n_steps"))
            m.at("n_steps").get_to(cfg.market.n_steps);
        else
            cfg.market.n_steps = cfg.market.maturity_days;  // daily rebalancing grid
        if (cfg.market.model_kind == ModelKind::Sabr) {
            cfg.market.eta = 0.95;
            cfg.market.rho = 0.5;
        }
        detail::read_opt(m, "eta", cfg.market.eta);
        detail::read_opt(m, "rho", cfg.market.rho);
    }
    if (doc.contains("contract")) {
        const nlohmann::json& c = doc.at("contract");
        detail::reject_unknown(c, "contract", {"strike", "side", "contracts"});
        detail::read_opt(c, "strike", cfg.contract.strike);
        if (c.contains("side")) {
            const std::string side = c.at("side").get<std::string>();
            if (side == "short_call")
                cfg.contract.side = OptionSide::ShortCall;
            else if (side == "long_call")
                cfg.contract.side = OptionSide::LongCall;
            else
                throw ConfigError("contract.side must be 'short_call' or 'long_call', got '" +
                                  side + "'");
        }
        detail::read_opt(c, "contracts", cfg.contract.contracts);
    }
    if (doc.contains("cost")) {
        const nlohmann::json& c = doc.at("cost");
        detail::reject_unknown(c, "cost", {"alpha", "liquidate_at_maturity"});
        detail::read_opt(c, "alpha", cfg.cost.alpha);
        detail::read_opt(c, "liquidate_at_maturity", cfg.cost.liquidate_at_maturity);
    }
    if (doc.contains("agent")) cfg.agent = agent_kind_from_string(doc.at("agent").get<std::string>());
    if (doc.contains("dtsoc")) {
        const nlohmann::json& d = doc.at("dtsoc");
        detail::reject_unknown(d, "dtsoc",
                               {"episodes", "episode_unit", "batch_size", "lr", "lr_decay",
                                "lr_decay_every", "dropout_p", "layer_norm", "hidden_dims",
                                "shared_network", "output_init", "log_every"});
        detail::read_opt(d, "episodes", cfg.dtsoc.episodes);
        if (d.contains("episode_unit")) {
            const std::string unit = d.at("episode_unit").get<std::string>();
            if (unit == "paths")
                cfg.dtsoc.episode_unit = EpisodeUnit::Paths;
            else if (unit == "gradient_steps")
                cfg.dtsoc.episode_unit = EpisodeUnit::GradientSteps;
            else
                throw ConfigError("dtsoc.episode_unit must be 'paths' or 'gradient_steps'");
        }
        detail::read_opt(d, "batch_size", cfg.dtsoc.batch_size);
        detail::read_opt(d, "lr", cfg.dtsoc.lr);
        detail::read_opt(d, "lr_decay", cfg.dtsoc.lr_decay);
        detail::read_opt(d, "lr_decay_every", cfg.dtsoc.lr_decay_every);
        detail::read_opt(d, "dropout_p", cfg.dtsoc.dropout_p);
        detail::read_opt(d, "layer_norm", cfg.dtsoc.layer_norm);
        detail::read_opt(d, "hidden_dims", cfg.dtsoc.hidden_dims);
        detail::read_opt(d, "shared_network", cfg.dtsoc.shared_network);
        if (d.contains("output_init")) {
            const std::string init = d.at("output_init").get<std::string>();
            if (init == "zero")
                cfg.dtsoc.output_init = OutputInit::Zero;
            else if (init == "xavier")
                cfg.dtsoc.output_init = OutputInit::Xavier;
            else
                throw ConfigError("dtsoc.output_init must be 'zero' or 'xavier'");
        }
        detail::read_opt(d, "log_every", cfg.dtsoc.log_every);
    }
    if (doc.contains("rlqh")) {
        const nlohmann::json& r = doc.at("rlqh");
        detail::reject_unknown(r, "rlqh",
                               {"episodes", "gamma", "lr_actor", "lr_critic", "smoothing",
                                "smoothing_convention", "buffer_capacity", "minibatch",
                                "warmup_transitions", "update_every", "noise_std0", "noise_std1",
                                "hidden_dims", "critic_layer_norm", "log_every"});
        detail::read_opt(r, "episodes", cfg.rlqh.episodes);
        detail::read_opt(r, "gamma", cfg.rlqh.gamma);
        detail::read_opt(r, "lr_actor", cfg.rlqh.lr_actor);
        detail::read_opt(r, "lr_critic", cfg.rlqh.lr_critic);
        detail::read_opt(r, "smoothing", cfg.rlqh.smoothing);
        if (r.contains("smoothing_convention")) {
            const std::string conv = r.at("smoothing_convention").get<std::string>();
            if (conv == "online_weight")
                cfg.rlqh.smoothing_convention = SmoothingConvention::OnlineWeight;
            else if (conv == "algorithm_literal")
                cfg.rlqh.smoothing_convention = SmoothingConvention::AlgorithmLiteral;
            else
                throw ConfigError(
                    "rlqh.smoothing_convention must be 'online_weight' or 'algorithm_literal'");
        }
        detail::read_opt(r, "buffer_capacity", cfg.rlqh.buffer_capacity);
        detail::read_opt(r, "minibatch", cfg.rlqh.minibatch);
        detail::read_opt(r, "warmup_transitions", cfg.rlqh.warmup_transitions);
        detail::read_opt(r, "update_every", cfg.rlqh.update_every);
        detail::read_opt(r, "noise_std0", cfg.rlqh.noise_std0);
        detail::read_opt(r, "noise_std1", cfg.rlqh.noise_std1);
        detail::read_opt(r, "hidden_dims", cfg.rlqh.hidden_dims);
        detail::read_opt(r, "critic_layer_norm", cfg.rlqh.critic_layer_norm);
        detail::read_opt(r, "log_every", cfg.rlqh.log_every);
    }
    if (doc.contains("eval")) {
        const nlohmann::json& e = doc.at("eval");
        detail::reject_unknown(e, "eval", {"n_paths", "bins", "charge_premium"});
        detail::read_opt(e, "n_paths", cfg.eval.n_paths);
        detail::read_opt(e, "bins", cfg.eval.bins);
        detail::read_opt(e, "charge_premium", cfg.eval.charge_premium);
    }
    if (doc.contains("sweep")) {
        const nlohmann::json& s = doc.at("sweep");
        detail::reject_unknown(s, "sweep", {"axis", "values"});
        detail::read_opt(s, "axis", cfg.sweep.axis);
        detail::read_opt(s, "values", cfg.sweep.values);
    }
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_config(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = text.empty() ? nlohmann::json::object() : nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return parse_config(doc);
}

inline ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_config(ss.str());
}

}  // namespace qhedge

#endif
