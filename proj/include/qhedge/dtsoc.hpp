#ifndef QHEDGE_DTSOC_HPP
#define QHEDGE_DTSOC_HPP

#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qhedge/adam.hpp"
#include "qhedge/features.hpp"
#include "qhedge/ledger.hpp"
#include "qhedge/market.hpp"
#include "qhedge/nn.hpp"
#include "qhedge/rng.hpp"
#include "qhedge/tape.hpp"

namespace qhedge {

enum class EpisodeUnit { Paths, GradientSteps };

/// Trajectory-trained control agent: one small policy network per
/// rebalancing step (optionally a single shared network), rolled out
/// through whole episodes with the terminal squared error
/// back-propagated through the entire holding chain.
struct DtsocTrainConfig {
    long episodes = 50'000;
    /// What one "episode" counts: paths consumed (default) or gradient
    /// steps. Long runs use gradient steps so the decayed learning-rate
    /// schedule has room to act.
    EpisodeUnit episode_unit = EpisodeUnit::Paths;
    int batch_size = 256;
    Real lr = 1e-3;
    Real lr_decay = 0.5;
    long lr_decay_every = 10'000;  // in episodes
    Real dropout_p = 0.0;
    bool layer_norm = false;
    std::vector<int> hidden_dims = {10, 15, 10};
    bool shared_network = false;
    OutputInit output_init = OutputInit::Zero;
    Real y0 = 0.0;
    long log_every = 100;  // gradient steps between log rows

    void validate() const {
        if (episodes < 1) throw ConfigError("dtsoc.episodes must be >= 1");
        if (batch_size < 1) throw ConfigError("dtsoc.batch_size must be >= 1");
        if (!(lr > 0.0)) throw ConfigError("dtsoc.lr must be > 0");
        if (!(lr_decay > 0.0 && lr_decay <= 1.0))
            throw ConfigError("dtsoc.lr_decay must be in (0,1]");
        if (lr_decay_every < 1) throw ConfigError("dtsoc.lr_decay_every must be >= 1");
        if (!(dropout_p >= 0.0 && dropout_p < 1.0))
            throw ConfigError("dtsoc.dropout_p must be in [0,1)");
        if (hidden_dims.empty()) throw ConfigError("dtsoc.hidden_dims must be nonempty");
    }
};

struct DtsocAgent {
    MlpSpec net_spec;
    std::vector<Mlp> nets;  // one per step, or one shared
    bool shared = false;
    int n_steps = 0;
    FeatureScaler scaler;
    ContractSpec contract;
    Real strike_disc = 0.0;

    Mlp& net_at(int step) {
        if (step < 0 || step >= n_steps) throw std::out_of_range("dtsoc: step beyond horizon");
        return shared ? nets.front() : nets[static_cast<std::size_t>(step)];
    }
    const Mlp& net_at(int step) const {
        if (step < 0 || step >= n_steps) throw std::out_of_range("dtsoc: step beyond horizon");
        return shared ? nets.front() : nets[static_cast<std::size_t>(step)];
    }

    std::vector<ad::Tensor*> all_params() {
        std::vector<ad::Tensor*> ps;
        for (auto& n : nets)
            for (auto* p : n.params()) ps.push_back(p);
        return ps;
    }
};

struct TrainLogRow {
    long episodes_done = 0;
    long step = 0;
    Real loss = 0.0;
    Real lr = 0.0;
    long wall_ms = 0;
};

using TrainingLog = std::vector<TrainLogRow>;

/// Builds a fresh agent with seeded initialization.
inline DtsocAgent make_dtsoc_agent(const DtsocTrainConfig& cfg, const MarketConfig& market,
                                   const ContractSpec& contract, std::uint64_t init_seed) {
    DtsocAgent agent;
    agent.net_spec.input_dim = 3;
    agent.net_spec.hidden_dims = cfg.hidden_dims;
    agent.net_spec.output_dim = 1;
    agent.net_spec.output_activation = OutputActivation::Identity;
    agent.net_spec.dropout_p = cfg.dropout_p;
    agent.net_spec.layer_norm = cfg.layer_norm;
    agent.shared = cfg.shared_network;
    agent.n_steps = market.n_steps;
    agent.scaler = FeatureScaler::for_market(market);
    agent.contract = contract;
    agent.strike_disc = contract.strike_disc(market.ir, market.maturity_years());
    NormalSource init_rng(init_seed);
    const int n_nets = cfg.shared_network ? 1 : market.n_steps;
    for (int i = 0; i < n_nets; ++i)
        agent.nets.emplace_back(agent.net_spec, init_rng, cfg.output_init);
    return agent;
}

/// Differentiable rollout of a path batch. Returns the scalar loss node;
/// the terminal-error node is also exposed for diagnostics.
///
/// The network output is the per-contract holding fraction; trading gains
/// and costs are assembled in those units by folding side and size into
/// the price-increment leaves, so gradients flow through |trade| and the
/// previous-holding feature into every earlier step's network.
struct RolloutNodes {
    int loss = -1;
    int terminal_error = -1;  // batch x 1 node of C_T values
};

inline RolloutNodes dtsoc_rollout(ad::Tape& tape, DtsocAgent& agent,
                                  const std::vector<MarketPath>& paths,
                                  const CostSpec& cost, Real y0, bool train,
                                  NormalSource* dropout_rng) {
    const int n = agent.n_steps;
    const int b = static_cast<int>(paths.size());
    if (b < 1) throw std::invalid_argument("dtsoc rollout: empty batch");
    for (const auto& p : paths)
        if (p.n_steps() != n) throw std::invalid_argument("dtsoc rollout: path grid mismatch");

    const Real side_size = agent.contract.side_sign() * agent.contract.contracts;
    const Real tc_scale = cost.alpha * agent.contract.contracts;
    const FeatureScaler& fs = agent.scaler;
    const Real maturity = paths.front().times.back();

    std::vector<Real> col_m(static_cast<std::size_t>(b));   // moneyness feature
    std::vector<Real> col_t(static_cast<std::size_t>(b));   // ttm feature
    std::vector<Real> col_ds(static_cast<std::size_t>(b));  // side*size*(S_{i+1}-S_i)
    std::vector<Real> col_s(static_cast<std::size_t>(b));   // spot level for costs
    std::vector<Real> col_pay(static_cast<std::size_t>(b));

    int c_node = -1;    // accumulated reward sum, batch x 1
    int h_prev = -1;    // previous holding fraction node
    for (int i = 0; i < n; ++i) {
        const std::size_t si = static_cast<std::size_t>(i);
        for (int k = 0; k < b; ++k) {
            const std::size_t sk = static_cast<std::size_t>(k);
            const Real spot = paths[sk].spot[si];
            col_m[sk] = (spot / agent.strike_disc) * fs.scale[0] + fs.shift[0];
            col_t[sk] = (maturity - paths[sk].times[si]) * fs.scale[1] + fs.shift[1];
            col_ds[sk] = side_size * (paths[sk].spot[si + 1] - spot);
            col_s[sk] = spot;
        }
        const int m_leaf = tape.leaf(col_m.data(), b, 1);
        const int t_leaf = tape.leaf(col_t.data(), b, 1);
        int h_feat;
        if (h_prev < 0) {
            h_feat = tape.leaf_fill(fs.shift[2], b, 1);  // zero holding before inception
        } else {
            h_feat = tape.add_scalar(tape.mul_scalar(h_prev, fs.scale[2]), fs.shift[2]);
        }
        const int feat = tape.concat({m_leaf, t_leaf, h_feat});
        const int h = agent.net_at(i).forward(tape, feat, train, dropout_rng);

        const int gain = tape.mul(h, tape.leaf(col_ds.data(), b, 1));
        c_node = c_node < 0 ? gain : tape.add(c_node, gain);
        if (tc_scale > 0.0) {
            const int dh = h_prev < 0 ? h : tape.sub(h, h_prev);
            const int tc =
                tape.mul_scalar(tape.mul(tape.abs(dh), tape.leaf(col_s.data(), b, 1)), tc_scale);
            c_node = tape.sub(c_node, tc);
        }
        h_prev = h;
    }
    // Terminal: unwind cost on the final holding plus the payoff owed.
    if (tc_scale > 0.0 && cost.liquidate_at_maturity) {
        for (int k = 0; k < b; ++k)
            col_s[static_cast<std::size_t>(k)] = paths[static_cast<std::size_t>(k)].spot.back();
        const int tc_term = tape.mul_scalar(
            tape.mul(tape.abs(h_prev), tape.leaf(col_s.data(), b, 1)), tc_scale);
        c_node = tape.sub(c_node, tc_term);
    }
    for (int k = 0; k < b; ++k) {
        const auto& p = paths[static_cast<std::size_t>(k)];
        col_pay[static_cast<std::size_t>(k)] =
            agent.contract.payoff_disc(p.spot.back(), p.ir, maturity) - y0;
    }
    c_node = tape.sub(c_node, tape.leaf(col_pay.data(), b, 1));

    RolloutNodes out;
    out.terminal_error = c_node;
    out.loss = tape.mean_all(tape.square(c_node));
    return out;
}

/// Convenience wrapper. Accumulates parameter gradients and returns the
/// batch loss.
inline Real rollout_loss(DtsocAgent& agent, const std::vector<MarketPath>& paths,
                         const CostSpec& cost, Real y0 = 0.0, bool train = true,
                         NormalSource* dropout_rng = nullptr) {
    ad::Tape tape;
    const RolloutNodes nodes = dtsoc_rollout(tape, agent, paths, cost, y0, train, dropout_rng);
    const Real loss = *tape.value(nodes.loss);
    if (train) tape.backward(nodes.loss);
    return loss;
}

/// Full training loop. Deterministic given (configs, base_seed): path
/// seeds, initialization, and dropout all derive from base_seed. Path
/// seeds wrap within the training namespace when a long run consumes more
/// than the namespace span.
inline DtsocAgent train_dtsoc(const DtsocTrainConfig& cfg, const MarketConfig& market,
                              const ContractSpec& contract, const CostSpec& cost,
                              std::uint64_t base_seed, TrainingLog* log = nullptr,
                              const std::function<void(long, const DtsocAgent&)>& on_checkpoint =
                                  nullptr,
                              long checkpoint_every = 0) {
    cfg.validate();
    market.validate();
    contract.validate();
    cost.validate();

    DtsocAgent agent = make_dtsoc_agent(cfg, market, contract, base_seed ^ 0x5eedf00d);
    NormalSource dropout_rng(base_seed ^ 0xd20b0d7);
    Adam opt(agent.all_params());
    auto params = agent.all_params();

    const long total_steps = cfg.episode_unit == EpisodeUnit::Paths
                                 ? std::max<long>(1, cfg.episodes / cfg.batch_size)
                                 : cfg.episodes;
    const long episodes_per_step = cfg.episode_unit == EpisodeUnit::Paths ? cfg.batch_size : 1;

    ad::Tape tape;
    std::vector<MarketPath> batch(static_cast<std::size_t>(cfg.batch_size));
    const auto t0 = std::chrono::steady_clock::now();
    Real initial_loss = -1.0;
    int blowup_streak = 0;
    std::uint64_t path_counter = 0;

    for (long step = 0; step < total_steps; ++step) {
        const long episodes_done = step * episodes_per_step;
        const Real lr =
            cfg.lr * std::pow(cfg.lr_decay,
                              static_cast<Real>(episodes_done / cfg.lr_decay_every));
        for (int k = 0; k < cfg.batch_size; ++k) {
            batch[static_cast<std::size_t>(k)] = simulate_path(
                market, train_seed(base_seed, path_counter % kSeedNamespaceSpan));
            ++path_counter;
        }
        for (auto* p : params) p->zero_grad();
        tape.clear();
        const RolloutNodes nodes =
            dtsoc_rollout(tape, agent, batch, cost, cfg.y0, true,
                          cfg.dropout_p > 0.0 ? &dropout_rng : nullptr);
        const Real loss = *tape.value(nodes.loss);
        if (!std::isfinite(loss)) throw NumericsError("dtsoc: NaN loss (learning rate too high?)");
        tape.backward(nodes.loss);
        opt.step(params, lr);

        if (initial_loss < 0.0) initial_loss = loss;
        blowup_streak = loss > 1e3 * initial_loss ? blowup_streak + 1 : 0;
        if (blowup_streak >= 5) throw NumericsError("dtsoc: diverged (loss >> initial for 5 steps)");

        if (log != nullptr && (step % std::max<long>(1, cfg.log_every) == 0 ||
                               step == total_steps - 1)) {
            const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::steady_clock::now() - t0)
                                .count();
            log->push_back({episodes_done + episodes_per_step, step, loss, lr, ms});
        }
        if (on_checkpoint && checkpoint_every > 0 && (step + 1) % checkpoint_every == 0)
            on_checkpoint(step + 1, agent);
    }
    return agent;
}

/// Frozen evaluation policy: routes each step to its network. Owns a copy
/// of the agent so the policy outlives the trainer.
inline Policy as_policy(const DtsocAgent& agent) {
    Policy p;
    p.name = "dtsoc";
    p.act = [a = agent](const HedgeState& s) {
        const auto feat = a.scaler.build(s, a.contract, a.strike_disc);
        const Real frac =
            a.net_at(s.step_index).forward_eval_scalar({feat[0], feat[1], feat[2]});
        return a.contract.side_sign() * a.contract.contracts * frac;
    };
    return p;
}

}  // namespace qhedge

#endif
