#ifndef QHEDGE_RLQH_HPP
#define QHEDGE_RLQH_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <utility>
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

/// One step of experience. state/next_state carry already-normalized
/// features; action is the executed (post-clip) action in raw units,
/// normalized into a critic feature on demand.
struct Transition {
    static constexpr int kMaxState = 8;
    std::array<Real, kMaxState> state{};
    std::array<Real, kMaxState> next_state{};
    int state_dim = 0;
    Real action = 0.0;
    Real reward = 0.0;
    bool terminal = false;
};

/// Fixed-capacity FIFO ring with uniform minibatch sampling without
/// replacement inside each draw.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity), stamp_(capacity, -1) {
        if (capacity < 1) throw ConfigError("replay buffer capacity must be >= 1");
        data_.reserve(capacity);
    }

    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }

    void push(const Transition& t) {
        if (data_.size() < capacity_) {
            data_.push_back(t);
        } else {
            data_[head_] = t;  // overwrite oldest
            head_ = (head_ + 1) % capacity_;
        }
    }

    const Transition& at(std::size_t i) const { return data_[i]; }

    /// k distinct uniform indices; k must not exceed current size.
    void sample(NormalSource& rng, std::size_t k, std::vector<const Transition*>& out) {
        if (k > data_.size()) throw std::invalid_argument("replay sample: k > size");
        ++gen_;
        out.clear();
        out.reserve(k);
        while (out.size() < k) {
            const std::size_t i = static_cast<std::size_t>(rng.next_u64() % data_.size());
            if (stamp_[i] == gen_) continue;
            stamp_[i] = gen_;
            out.push_back(&data_[i]);
        }
    }

private:
    std::size_t capacity_;
    std::vector<Transition> data_;
    std::size_t head_ = 0;
    std::vector<long> stamp_;
    long gen_ = 0;
};

enum class SmoothingConvention {
    /// target <- (1-tau) target + tau online, tau = smoothing (slow target).
    OnlineWeight,
    /// target <- rho target + (1-rho) online, rho = smoothing (near copy).
    AlgorithmLiteral,
};

struct RlqhTrainConfig {
    long episodes = 50'000;
    Real gamma = 1.0;
    Real lr_actor = 1e-4;
    Real lr_critic = 1e-4;
    Real smoothing = 1e-5;
    SmoothingConvention smoothing_convention = SmoothingConvention::OnlineWeight;
    long buffer_capacity = 100'000;
    int minibatch = 128;
    long warmup_transitions = 1'000;
    int update_every = 1;  // environment steps between update rounds
    Real noise_std0 = 0.2;   // x contracts, start of training
    Real noise_std1 = 0.02;  // x contracts, end of training
    std::vector<int> hidden_dims = {32, 64};
    bool critic_layer_norm = true;
    Real y0 = 0.0;
    long log_every = 100;  // episodes between log rows

    void validate() const {
        if (episodes < 1) throw ConfigError("rlqh.episodes must be >= 1");
        if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("rlqh.gamma must be in (0,1]");
        if (!(lr_actor > 0.0) || !(lr_critic > 0.0))
            throw ConfigError("rlqh learning rates must be > 0");
        if (!(smoothing >= 0.0 && smoothing <= 1.0))
            throw ConfigError("rlqh.smoothing must be in [0,1]");
        if (buffer_capacity < 1) throw ConfigError("rlqh.buffer_capacity must be >= 1");
        if (minibatch < 1) throw ConfigError("rlqh.minibatch must be >= 1");
        if (warmup_transitions < minibatch)
            throw ConfigError("rlqh.warmup_transitions must be >= minibatch");
        if (update_every < 1) throw ConfigError("rlqh.update_every must be >= 1");
        if (noise_std0 < 0.0 || noise_std1 < 0.0)
            throw ConfigError("rlqh noise stds must be >= 0");
        if (hidden_dims.empty()) throw ConfigError("rlqh.hidden_dims must be nonempty");
    }

    /// Weight kept on the target network per soft update.
    Real target_keep_weight() const {
        return smoothing_convention == SmoothingConvention::OnlineWeight ? 1.0 - smoothing
                                                                         : smoothing;
    }
};

/// Bootstrapped regression targets for the two critics. next_q/next_k are
/// the target networks' values at (s', mu_target(s')); terminal
/// transitions drop every bootstrap term:
///   target_Q = r + gamma q'
///   target_K = r^2 + 2 gamma r q' + gamma^2 k'
inline void bellman_targets(const std::vector<const Transition*>& batch, Real gamma,
                            const std::vector<Real>& next_q, const std::vector<Real>& next_k,
                            std::vector<Real>& target_q, std::vector<Real>& target_k) {
    const std::size_t n = batch.size();
    if (next_q.size() != n || next_k.size() != n)
        throw std::invalid_argument("bellman_targets: size mismatch");
    target_q.resize(n);
    target_k.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Real r = batch[i]->reward;
        if (batch[i]->terminal) {
            target_q[i] = r;
            target_k[i] = r * r;
        } else {
            target_q[i] = r + gamma * next_q[i];
            target_k[i] = r * r + 2.0 * gamma * r * next_q[i] + gamma * gamma * next_k[i];
        }
    }
}

/// Environment-agnostic actor/double-critic core: the actor is trained to
/// DESCEND the second-moment critic K, not the usual Q ascent. Shared by
/// the hedging trainer and the tabular test environments.
class RlqhCore {
public:
    /// Empty shell for deserialization; from_json fills every member.
    RlqhCore() = default;

    RlqhCore(int state_dim, const std::vector<int>& hidden, bool critic_layer_norm,
             Real action_feature_scale, Real action_feature_shift, std::uint64_t init_seed)
        : state_dim_(state_dim), af_scale_(action_feature_scale), af_shift_(action_feature_shift) {
        if (state_dim < 1 || state_dim > Transition::kMaxState)
            throw ConfigError("rlqh: state_dim out of range");
        NormalSource rng(init_seed);
        MlpSpec actor_spec;
        actor_spec.input_dim = state_dim;
        actor_spec.hidden_dims = hidden;
        actor_spec.output_dim = 1;
        actor_spec.output_activation = OutputActivation::Sigmoid;
        MlpSpec critic_spec;
        critic_spec.input_dim = state_dim + 1;
        critic_spec.hidden_dims = hidden;
        critic_spec.output_dim = 1;
        critic_spec.output_activation = OutputActivation::Identity;
        critic_spec.layer_norm = critic_layer_norm;

        actor_ = Mlp(actor_spec, rng, OutputInit::Zero);  // starts at sigmoid(0) = 1/2
        q_ = Mlp(critic_spec, rng, OutputInit::Zero);
        k_ = Mlp(critic_spec, rng, OutputInit::Zero);
        actor_targ_ = actor_;
        q_targ_ = q_;
        k_targ_ = k_;
        adam_actor_ = Adam(actor_.params());
        adam_q_ = Adam(q_.params());
        adam_k_ = Adam(k_.params());
    }

    int state_dim() const { return state_dim_; }
    Mlp& actor() { return actor_; }
    Mlp& critic_q() { return q_; }
    Mlp& critic_k() { return k_; }
    Mlp& actor_target() { return actor_targ_; }
    Mlp& critic_q_target() { return q_targ_; }
    Mlp& critic_k_target() { return k_targ_; }

    /// Actor output in [0,1] for one normalized state.
    Real act_fraction(const Real* state) {
        Real out = 0.0;
        actor_.forward_eval(state, 1, &out);
        return out;
    }

    /// Normalized critic feature for a raw action fraction in [0,1].
    Real action_feature(Real fraction) const { return fraction * af_scale_ + af_shift_; }

    /// Computes Algorithm-style targets from the frozen target networks.
    void targets(const std::vector<const Transition*>& batch, Real gamma,
                 std::vector<Real>& target_q, std::vector<Real>& target_k) {
        const std::size_t n = batch.size();
        fill_next_inputs(batch);
        next_q_.resize(n);
        next_k_.resize(n);
        q_targ_.forward_eval(next_input_.data(), static_cast<int>(n), next_q_.data());
        k_targ_.forward_eval(next_input_.data(), static_cast<int>(n), next_k_.data());
        bellman_targets(batch, gamma, next_q_, next_k_, target_q, target_k);
    }

    struct UpdateStats {
        Real q_loss = 0.0;
        Real k_loss = 0.0;
        Real actor_objective = 0.0;
    };

    /// One gradient step on Q and K toward their bootstrap targets.
    UpdateStats update_critics(const std::vector<const Transition*>& batch, Real gamma,
                               Real lr_critic) {
        UpdateStats stats;
        const int n = static_cast<int>(batch.size());
        targets(batch, gamma, target_q_, target_k_);
        fill_current_inputs(batch);

        tape_.clear();
        q_.zero_grad();
        k_.zero_grad();
        const int in_leaf = tape_.leaf(cur_input_.data(), n, state_dim_ + 1);
        const int q_out = q_.forward(tape_, in_leaf);
        const int k_out = k_.forward(tape_, in_leaf);
        const int tq_leaf = tape_.leaf(target_q_.data(), n, 1);
        const int tk_leaf = tape_.leaf(target_k_.data(), n, 1);
        const int q_loss = tape_.mean_all(tape_.square(tape_.sub(q_out, tq_leaf)));
        const int k_loss = tape_.mean_all(tape_.square(tape_.sub(k_out, tk_leaf)));
        const int joint = tape_.add(q_loss, k_loss);
        stats.q_loss = *tape_.value(q_loss);
        stats.k_loss = *tape_.value(k_loss);
        tape_.backward(joint);
        adam_q_.step(q_.params(), lr_critic);
        adam_k_.step(k_.params(), lr_critic);
        return stats;
    }

    /// One descent step on mean K(s, mu(s)) with respect to actor
    /// parameters only. K's own gradient accumulation is discarded.
    Real update_actor(const std::vector<const Transition*>& batch, Real lr_actor) {
        const int n = static_cast<int>(batch.size());
        fill_states(batch);
        tape_.clear();
        actor_.zero_grad();
        k_.zero_grad();
        const int s_leaf = tape_.leaf(state_input_.data(), n, state_dim_);
        const int frac = actor_.forward(tape_, s_leaf);
        const int act_feat = tape_.add_scalar(tape_.mul_scalar(frac, af_scale_), af_shift_);
        const int joint_in = tape_.concat({s_leaf, act_feat});
        const int k_out = k_.forward(tape_, joint_in);
        const int obj = tape_.mean_all(k_out);
        const Real objective = *tape_.value(obj);
        tape_.backward(obj);
        adam_actor_.step(actor_.params(), lr_actor);
        k_.zero_grad();  // critic was a conduit, not a training target here
        return objective;
    }

    void soft_update_targets(Real keep_weight) {
        soft_update(actor_targ_.params(), std::as_const(actor_).params(), keep_weight);
        soft_update(q_targ_.params(), std::as_const(q_).params(), keep_weight);
        soft_update(k_targ_.params(), std::as_const(k_).params(), keep_weight);
    }

private:
    int state_dim_ = 0;
    Real af_scale_ = 1.0, af_shift_ = 0.0;
    Mlp actor_, q_, k_;
    Mlp actor_targ_, q_targ_, k_targ_;
    Adam adam_actor_, adam_q_, adam_k_;
    ad::Tape tape_;
    // scratch reused across updates
    std::vector<Real> next_state_, next_frac_, next_input_, cur_input_, state_input_;
    std::vector<Real> next_q_, next_k_, target_q_, target_k_;

    void fill_states(const std::vector<const Transition*>& batch) {
        const std::size_t n = batch.size();
        state_input_.resize(n * static_cast<std::size_t>(state_dim_));
        for (std::size_t i = 0; i < n; ++i)
            for (int d = 0; d < state_dim_; ++d)
                state_input_[i * state_dim_ + static_cast<std::size_t>(d)] =
                    batch[i]->state[static_cast<std::size_t>(d)];
    }

    void fill_current_inputs(const std::vector<const Transition*>& batch) {
        const std::size_t n = batch.size();
        const std::size_t w = static_cast<std::size_t>(state_dim_) + 1;
        cur_input_.resize(n * w);
        for (std::size_t i = 0; i < n; ++i) {
            for (int d = 0; d < state_dim_; ++d)
                cur_input_[i * w + static_cast<std::size_t>(d)] =
                    batch[i]->state[static_cast<std::size_t>(d)];
            cur_input_[i * w + static_cast<std::size_t>(state_dim_)] =
                action_feature(batch[i]->action);
        }
    }

    void fill_next_inputs(const std::vector<const Transition*>& batch) {
        const std::size_t n = batch.size();
        next_state_.resize(n * static_cast<std::size_t>(state_dim_));
        for (std::size_t i = 0; i < n; ++i)
            for (int d = 0; d < state_dim_; ++d)
                next_state_[i * state_dim_ + static_cast<std::size_t>(d)] =
                    batch[i]->next_state[static_cast<std::size_t>(d)];
        next_frac_.resize(n);
        actor_targ_.forward_eval(next_state_.data(), static_cast<int>(n), next_frac_.data());
        const std::size_t w = static_cast<std::size_t>(state_dim_) + 1;
        next_input_.resize(n * w);
        for (std::size_t i = 0; i < n; ++i) {
            for (int d = 0; d < state_dim_; ++d)
                next_input_[i * w + static_cast<std::size_t>(d)] =
                    next_state_[i * state_dim_ + static_cast<std::size_t>(d)];
            next_input_[i * w + static_cast<std::size_t>(state_dim_)] =
                action_feature(next_frac_[i]);
        }
    }

    friend void to_json(nlohmann::json& j, const RlqhCore& c) {
        j = nlohmann::json{{"state_dim", c.state_dim_},
                           {"action_feature_scale", c.af_scale_},
                           {"action_feature_shift", c.af_shift_},
                           {"actor", c.actor_},
                           {"critic_q", c.q_},
                           {"critic_k", c.k_},
                           {"actor_target", c.actor_targ_},
                           {"critic_q_target", c.q_targ_},
                           {"critic_k_target", c.k_targ_},
                           {"adam_actor", c.adam_actor_},
                           {"adam_q", c.adam_q_},
                           {"adam_k", c.adam_k_}};
    }

    friend void from_json(const nlohmann::json& j, RlqhCore& c) {
        j.at("state_dim").get_to(c.state_dim_);
        j.at("action_feature_scale").get_to(c.af_scale_);
        j.at("action_feature_shift").get_to(c.af_shift_);
        j.at("actor").get_to(c.actor_);
        j.at("critic_q").get_to(c.q_);
        j.at("critic_k").get_to(c.k_);
        j.at("actor_target").get_to(c.actor_targ_);
        j.at("critic_q_target").get_to(c.q_targ_);
        j.at("critic_k_target").get_to(c.k_targ_);
        j.at("adam_actor").get_to(c.adam_actor_);
        j.at("adam_q").get_to(c.adam_q_);
        j.at("adam_k").get_to(c.adam_k_);
    }
};

/// Trained agent bundle for the hedging environment.
struct RlqhAgent {
    std::shared_ptr<RlqhCore> core;
    FeatureScaler scaler;
    ContractSpec contract;
    Real strike_disc = 0.0;
    int n_steps = 0;
};

struct RlqhLogRow {
    long episode = 0;
    Real mean_reward = 0.0;
    Real q_loss = 0.0;
    Real k_loss = 0.0;
    Real actor_objective = 0.0;
    Real noise_std = 0.0;
};

using RlqhTrainingLog = std::vector<RlqhLogRow>;

/// Full training loop: act with annealed Gaussian exploration noise on the
/// pre-clip action, store transitions, and after warmup run one update
/// round (both critics, actor, soft target refresh) per environment step.
inline RlqhAgent train_rlqh(const RlqhTrainConfig& cfg, const MarketConfig& market,
                            const ContractSpec& contract, const CostSpec& cost,
                            std::uint64_t base_seed, RlqhTrainingLog* log = nullptr) {
    cfg.validate();
    market.validate();
    contract.validate();
    cost.validate();

    RlqhAgent agent;
    agent.scaler = FeatureScaler::for_market(market);
    agent.contract = contract;
    agent.strike_disc = contract.strike_disc(market.ir, market.maturity_years());
    agent.n_steps = market.n_steps;
    agent.core = std::make_shared<RlqhCore>(3, cfg.hidden_dims, cfg.critic_layer_norm,
                                            agent.scaler.scale[2], agent.scaler.shift[2],
                                            base_seed ^ 0x0ddba11);
    RlqhCore& core = *agent.core;

    NormalSource noise_rng(base_seed ^ 0x9015e3d);
    NormalSource sample_rng(base_seed ^ 0x5a3317);
    ReplayBuffer buffer(static_cast<std::size_t>(cfg.buffer_capacity));
    std::vector<const Transition*> batch;

    const Real side = contract.side_sign();
    const Real size = contract.contracts;
    const Real keep = cfg.target_keep_weight();
    const int n = market.n_steps;
    const Real maturity = market.maturity_years();

    long env_steps = 0;
    for (long ep = 0; ep < cfg.episodes; ++ep) {
        const Real frac_done =
            cfg.episodes > 1 ? static_cast<Real>(ep) / static_cast<Real>(cfg.episodes - 1) : 0.0;
        const Real noise_std =
            (cfg.noise_std0 + (cfg.noise_std1 - cfg.noise_std0) * frac_done) * size;
        const MarketPath path = simulate_path(
            market, train_seed(base_seed, static_cast<std::uint64_t>(ep) % kSeedNamespaceSpan));

        Real reward_sum = 0.0;
        Real q_loss = 0.0, k_loss = 0.0, actor_obj = 0.0;
        Real h_prev_frac = 0.0;
        for (int i = 0; i < n; ++i) {
            const std::size_t si = static_cast<std::size_t>(i);
            const HedgeState hs =
                build_state(path, i, side * size * h_prev_frac, contract);
            const auto feat = agent.scaler.build(hs, contract, agent.strike_disc);
            const Real mu_frac = core.act_fraction(feat.data());
            const Real a_frac =
                std::clamp(mu_frac + noise_rng.next_gauss() * noise_std / size, 0.0, 1.0);

            const Real holding = side * size * a_frac;
            const Real holding_prev = side * size * h_prev_frac;
            Real r = holding * (path.spot[si + 1] - path.spot[si]) -
                     transaction_cost(holding, holding_prev, path.spot[si], cost);
            const bool terminal = i == n - 1;
            if (terminal) {
                if (cost.liquidate_at_maturity)
                    r -= transaction_cost(0.0, holding, path.spot.back(), cost);
                r -= contract.payoff_disc(path.spot.back(), path.ir, maturity);
                if (cfg.y0 != 0.0) r += cfg.y0;
            }
            reward_sum += r;

            const HedgeState hs_next = build_state(path, i + 1, holding, contract);
            const auto feat_next = agent.scaler.build(hs_next, contract, agent.strike_disc);
            Transition tr;
            tr.state_dim = 3;
            for (int d = 0; d < 3; ++d) {
                tr.state[static_cast<std::size_t>(d)] = feat[static_cast<std::size_t>(d)];
                tr.next_state[static_cast<std::size_t>(d)] = feat_next[static_cast<std::size_t>(d)];
            }
            tr.action = a_frac;
            tr.reward = r;
            tr.terminal = terminal;
            buffer.push(tr);
            h_prev_frac = a_frac;

            ++env_steps;
            if (static_cast<long>(buffer.size()) >= cfg.warmup_transitions &&
                env_steps % cfg.update_every == 0) {
                buffer.sample(sample_rng, static_cast<std::size_t>(cfg.minibatch), batch);
                const auto stats = core.update_critics(batch, cfg.gamma, cfg.lr_critic);
                actor_obj = core.update_actor(batch, cfg.lr_actor);
                core.soft_update_targets(keep);
                q_loss = stats.q_loss;
                k_loss = stats.k_loss;
                if (!std::isfinite(q_loss) || !std::isfinite(k_loss))
                    throw NumericsError("rlqh: critic loss diverged");
            }
        }
        if (log != nullptr &&
            (ep % std::max<long>(1, cfg.log_every) == 0 || ep == cfg.episodes - 1)) {
            log->push_back({ep, reward_sum / static_cast<Real>(n), q_loss, k_loss, actor_obj,
                            noise_std});
        }
    }
    return agent;
}

/// Frozen deterministic policy: mu(state) scaled back to signed shares.
inline Policy as_policy(const RlqhAgent& agent) {
    Policy p;
    p.name = "rlqh";
    p.act = [a = agent](const HedgeState& s) {
        if (s.step_index >= a.n_steps) throw std::out_of_range("rlqh policy: step beyond horizon");
        const auto feat = a.scaler.build(s, a.contract, a.strike_disc);
        const Real frac = a.core->act_fraction(feat.data());
        return a.contract.side_sign() * a.contract.contracts * frac;
    };
    return p;
}

}  // namespace qhedge

#endif
