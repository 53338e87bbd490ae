// qhedge command-line driver.
//
// One subcommand per invocation; every run writes its artifacts under
// <output_dir>/<config fingerprint>/ together with a fully resolved
// config.json echo, so any artifact directory can be regenerated from the
// echo and the recorded seeds alone.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 missing
// artifact (checkpoint), 4 I/O failure, 5 numerical failure during
// training, 1 unexpected internal error.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qhedge/analytic.hpp"
#include "qhedge/checkpoint.hpp"
#include "qhedge/config.hpp"
#include "qhedge/dtsoc.hpp"
#include "qhedge/eval.hpp"
#include "qhedge/ledger.hpp"
#include "qhedge/market.hpp"
#include "qhedge/rlqh.hpp"
#include "qhedge/rng.hpp"

namespace {

using qhedge::Real;

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitMissingArtifact = 3;
constexpr int kExitIo = 4;
constexpr int kExitNumerics = 5;

/// Everything the flag table can set, collected before dispatch.
struct CliOptions {
    std::string config_path;
    std::uint64_t seed_value = 0;
    bool seed_given = false;
    std::string output_dir;
    int threads = 0;  // 0 = not set on the command line
    bool dump_flags = false;

    long sim_paths = 10;

    std::string checkpoint;       // evaluate
    std::string checkpoint_dir;   // sweep
    std::string dtsoc_checkpoint; // robustness
    std::string rlqh_checkpoint;  // robustness

    Real spot_lo = 70.0;
    Real spot_hi = 130.0;
    int grid_points = 61;
};

/// Config file (or defaults), then environment, then explicit flags.
qhedge::ExperimentConfig load_experiment(const CliOptions& opt) {
    qhedge::ExperimentConfig cfg;
    if (!opt.config_path.empty()) {
        cfg = qhedge::load_config_file(opt.config_path);
    } else {
        cfg.validate();
    }
    if (const char* env = std::getenv("QHEDGE_OUTPUT_DIR"); env != nullptr && *env != '\0')
        cfg.output_dir = env;
    if (!opt.output_dir.empty()) cfg.output_dir = opt.output_dir;
    if (opt.seed_given) cfg.base_seed = opt.seed_value;
    return cfg;
}

/// Worker threads for path evaluation: --threads beats QHEDGE_THREADS
/// beats the single-threaded default. Results are bit-identical at any
/// count; this only trades wall time.
int resolve_threads(const CliOptions& opt) {
    int n = 1;
    if (const char* env = std::getenv("QHEDGE_THREADS"); env != nullptr && *env != '\0') {
        try {
            std::size_t used = 0;
            n = std::stoi(env, &used);
            if (used != std::string(env).size()) throw std::invalid_argument("trailing junk");
        } catch (const std::exception&) {
            throw qhedge::ConfigError("QHEDGE_THREADS must be a positive integer");
        }
    }
    if (opt.threads > 0) n = opt.threads;
    if (n < 1) throw qhedge::ConfigError("thread count must be >= 1");
    return n;
}

std::string run_dir_for(const qhedge::ExperimentConfig& cfg) {
    return cfg.output_dir + "/" + cfg.fingerprint();
}

/// Creates the run directory and drops the resolved-config echo into it.
std::string open_run_dir(const qhedge::ExperimentConfig& cfg) {
    const std::string dir = run_dir_for(cfg);
    qhedge::detail::write_text_file(dir + "/config.json", cfg.resolved().dump(2) + "\n");
    return dir;
}

Real resolved_y0(const qhedge::ExperimentConfig& cfg) {
    return cfg.eval.charge_premium ? qhedge::default_premium(cfg.market, cfg.contract) : 0.0;
}

void require_contract_match(const qhedge::ContractSpec& ckpt, const qhedge::ContractSpec& cfg,
                            const std::string& what) {
    if (ckpt.strike != cfg.strike || ckpt.side != cfg.side || ckpt.contracts != cfg.contracts)
        throw qhedge::ConfigError(what +
                                  ": checkpoint contract differs from the configured contract");
}

void require_horizon_match(int agent_steps, const qhedge::MarketConfig& market,
                           const std::string& what) {
    if (agent_steps != market.n_steps)
        throw qhedge::ConfigError(what + ": agent horizon (" + std::to_string(agent_steps) +
                                  " steps) does not match market n_steps (" +
                                  std::to_string(market.n_steps) + ")");
}

/// Resolves the configured agent to a runnable policy, loading a
/// checkpoint when the agent is a learned one.
qhedge::Policy policy_for_agent(const qhedge::ExperimentConfig& cfg,
                                const std::string& checkpoint_path) {
    switch (cfg.agent) {
        case qhedge::AgentKind::Delta:
            return qhedge::delta_policy(cfg.contract, cfg.market);
        case qhedge::AgentKind::Bartlett:
            return qhedge::bartlett_policy(cfg.contract, cfg.market);
        case qhedge::AgentKind::Dtsoc: {
            if (checkpoint_path.empty())
                throw qhedge::MissingArtifactError("agent=dtsoc needs --checkpoint <file>");
            qhedge::DtsocCheckpoint cp = qhedge::load_dtsoc_checkpoint(checkpoint_path);
            require_contract_match(cp.contract, cfg.contract, "evaluate");
            require_horizon_match(cp.agent.n_steps, cfg.market, "evaluate");
            return qhedge::as_policy(cp.agent);
        }
        case qhedge::AgentKind::Rlqh: {
            if (checkpoint_path.empty())
                throw qhedge::MissingArtifactError("agent=rlqh needs --checkpoint <file>");
            qhedge::RlqhCheckpoint cp = qhedge::load_rlqh_checkpoint(checkpoint_path);
            require_contract_match(cp.contract, cfg.contract, "evaluate");
            require_horizon_match(cp.agent.n_steps, cfg.market, "evaluate");
            return qhedge::as_policy(cp.agent);
        }
        case qhedge::AgentKind::None:
            break;
    }
    throw qhedge::ConfigError("agent=none selects no policy; pick delta|bartlett|dtsoc|rlqh");
}

std::string report_line(const qhedge::EvalReport& r) {
    std::ostringstream os;
    os << "  " << r.policy_name << ": n_paths=" << r.n_paths
       << " mean=" << qhedge::detail::fmt_short(r.mean_cost)
       << " std=" << qhedge::detail::fmt_short(r.std_cost)
       << " mshe=" << qhedge::detail::fmt_short(r.mshe);
    return os.str();
}

int cmd_simulate(const CliOptions& opt) {
    if (opt.sim_paths < 1) throw qhedge::ConfigError("simulate: --n-paths must be >= 1");
    qhedge::ExperimentConfig cfg = load_experiment(opt);
    const std::string dir = open_run_dir(cfg);
    std::ostringstream csv;
    csv << "path_seed,step,time_years,spot_disc,vol\n";
    for (long i = 0; i < opt.sim_paths; ++i) {
        const std::uint64_t seed = qhedge::eval_seed(
            cfg.base_seed, static_cast<std::uint64_t>(i) % qhedge::kSeedNamespaceSpan);
        const qhedge::MarketPath path = qhedge::simulate_path(cfg.market, seed);
        for (int j = 0; j <= path.n_steps(); ++j) {
            const auto k = static_cast<std::size_t>(j);
            csv << seed << ',' << j << ',' << qhedge::detail::fmt_real(path.times[k]) << ','
                << qhedge::detail::fmt_real(path.spot[k]) << ','
                << qhedge::detail::fmt_real(path.vol[k]) << '\n';
        }
    }
    qhedge::detail::write_text_file(dir + "/paths.csv", csv.str());
    std::cout << "simulate: " << opt.sim_paths << " paths x " << (cfg.market.n_steps + 1)
              << " grid points -> " << dir << "/paths.csv\n";
    return kExitOk;
}

int cmd_train_dtsoc(const CliOptions& opt) {
    qhedge::ExperimentConfig cfg = load_experiment(opt);
    const std::string dir = open_run_dir(cfg);
    qhedge::DtsocTrainConfig train = cfg.dtsoc;
    train.y0 = resolved_y0(cfg);
    qhedge::TrainingLog log;
    qhedge::DtsocAgent agent =
        qhedge::train_dtsoc(train, cfg.market, cfg.contract, cfg.cost, cfg.base_seed, &log);

    std::ostringstream csv;
    csv << "epoch,loss,lr,wall_ms\n";
    for (const auto& row : log)
        csv << row.episodes_done << ',' << qhedge::detail::fmt_real(row.loss) << ','
            << qhedge::detail::fmt_real(row.lr) << ',' << row.wall_ms << '\n';
    qhedge::detail::write_text_file(dir + "/training_log.csv", csv.str());

    qhedge::DtsocCheckpoint cp;
    cp.agent = std::move(agent);
    cp.market = cfg.market;
    cp.contract = cfg.contract;
    cp.cost = cfg.cost;
    cp.train = train;
    cp.fingerprint = cfg.fingerprint();
    cp.base_seed = cfg.base_seed;
    cp.y0_train = train.y0;
    qhedge::save_dtsoc_checkpoint(dir + "/dtsoc.ckpt.json", cp);

    std::cout << "train-dtsoc: " << train.episodes << " episodes, final loss "
              << (log.empty() ? std::string("n/a") : qhedge::detail::fmt_short(log.back().loss))
              << " -> " << dir << "/dtsoc.ckpt.json\n";
    return kExitOk;
}

int cmd_train_rlqh(const CliOptions& opt) {
    qhedge::ExperimentConfig cfg = load_experiment(opt);
    const std::string dir = open_run_dir(cfg);
    qhedge::RlqhTrainConfig train = cfg.rlqh;
    train.y0 = resolved_y0(cfg);
    qhedge::RlqhTrainingLog log;
    qhedge::RlqhAgent agent =
        qhedge::train_rlqh(train, cfg.market, cfg.contract, cfg.cost, cfg.base_seed, &log);

    std::ostringstream csv;
    csv << "episode,mean_reward,q_loss,k_loss,actor_obj,noise_std\n";
    for (const auto& row : log)
        csv << row.episode << ',' << qhedge::detail::fmt_real(row.mean_reward) << ','
            << qhedge::detail::fmt_real(row.q_loss) << ',' << qhedge::detail::fmt_real(row.k_loss)
            << ',' << qhedge::detail::fmt_real(row.actor_objective) << ','
            << qhedge::detail::fmt_real(row.noise_std) << '\n';
    qhedge::detail::write_text_file(dir + "/training_log.csv", csv.str());

    qhedge::RlqhCheckpoint cp;
    cp.agent = std::move(agent);
    cp.market = cfg.market;
    cp.contract = cfg.contract;
    cp.cost = cfg.cost;
    cp.train = train;
    cp.fingerprint = cfg.fingerprint();
    cp.base_seed = cfg.base_seed;
    cp.y0_train = train.y0;
    qhedge::save_rlqh_checkpoint(dir + "/rlqh.ckpt.json", cp);

    std::cout << "train-rlqh: " << train.episodes << " episodes -> " << dir
              << "/rlqh.ckpt.json\n";
    return kExitOk;
}

int cmd_evaluate(const CliOptions& opt) {
    qhedge::ExperimentConfig cfg = load_experiment(opt);
    const int threads = resolve_threads(opt);
    const qhedge::Policy policy = policy_for_agent(cfg, opt.checkpoint);
    const std::string dir = open_run_dir(cfg);
    const Real y0 = resolved_y0(cfg);
    qhedge::EvalRun run = qhedge::evaluate(policy, cfg.market, cfg.contract, cfg.cost,
                                           cfg.eval.n_paths, cfg.base_seed, y0, cfg.eval.bins,
                                           threads);
    run.report.fingerprint = cfg.fingerprint();

    const nlohmann::json j = run.report;
    qhedge::detail::write_text_file(dir + "/report.json", j.dump(2) + "\n");
    std::vector<qhedge::EvalRun> runs;
    runs.push_back(std::move(run));
    qhedge::detail::write_text_file(dir + "/costs.csv", qhedge::costs_csv(runs));
    qhedge::detail::write_text_file(dir + "/histogram.svg",
                                    qhedge::render_histogram({runs.front().report}));

    std::cout << "evaluate: y0=" << qhedge::detail::fmt_short(y0) << " -> " << dir << "\n"
              << report_line(runs.front().report) << "\n";
    return kExitOk;
}

Real axis_value_of(qhedge::SweepAxis axis, const qhedge::MarketConfig& market,
                   const qhedge::CostSpec& cost) {
    switch (axis) {
        case qhedge::SweepAxis::MaturityDays:
            return static_cast<Real>(market.maturity_days);
        case qhedge::SweepAxis::Sigma:
            return market.sigma0;
        case qhedge::SweepAxis::Alpha:
            return cost.alpha;
    }
    throw qhedge::ConfigError("unknown sweep axis");
}

/// Axis value as it appears in checkpoint file names and the summary CSV:
/// integral for maturities, shortest round-trip decimal otherwise.
std::string fmt_axis_value(qhedge::SweepAxis axis, Real v) {
    if (axis == qhedge::SweepAxis::MaturityDays)
        return std::to_string(static_cast<long long>(v));
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", static_cast<double>(v));
    return buf;
}

int cmd_sweep(const CliOptions& opt) {
    qhedge::ExperimentConfig cfg = load_experiment(opt);
    if (cfg.sweep.axis.empty())
        throw qhedge::ConfigError("sweep: config needs a sweep section (axis + values)");
    const qhedge::SweepAxis axis = cfg.sweep.parse_axis();
    if (cfg.agent == qhedge::AgentKind::None)
        throw qhedge::ConfigError("agent=none selects no policy; pick delta|bartlett|dtsoc|rlqh");
    const bool learned =
        cfg.agent == qhedge::AgentKind::Dtsoc || cfg.agent == qhedge::AgentKind::Rlqh;
    if (learned && opt.checkpoint_dir.empty())
        throw qhedge::MissingArtifactError(
            "sweep: agent=" + to_string(cfg.agent) +
            " needs --checkpoint-dir with one checkpoint per axis value");
    const std::string dir = open_run_dir(cfg);

    // Learned agents load the checkpoint trained under the cell's own axis
    // value; analytic baselines are rebuilt per cell so their strikes and
    // vols track the cell market.
    const auto provider = [&](const qhedge::MarketConfig& m, const qhedge::ContractSpec& c,
                              const qhedge::CostSpec& k) {
        std::vector<qhedge::Policy> ps;
        ps.push_back(qhedge::delta_policy(c, m));
        const bool sabr = m.model_kind == qhedge::ModelKind::Sabr && m.eta > 0.0;
        if (cfg.agent == qhedge::AgentKind::Bartlett || (learned && sabr))
            ps.push_back(qhedge::bartlett_policy(c, m));
        if (learned) {
            const Real v = axis_value_of(axis, m, k);
            const std::string cell_name = to_string(axis) + "=" + fmt_axis_value(axis, v);
            const std::string file = opt.checkpoint_dir + "/" + to_string(cfg.agent) + "-" +
                                     to_string(axis) + "-" + fmt_axis_value(axis, v) + ".json";
            if (!std::filesystem::exists(file))
                throw qhedge::MissingArtifactError("sweep cell " + cell_name +
                                                   ": missing checkpoint " + file);
            if (cfg.agent == qhedge::AgentKind::Dtsoc) {
                qhedge::DtsocCheckpoint cp = qhedge::load_dtsoc_checkpoint(file);
                require_contract_match(cp.contract, c, "sweep cell " + cell_name);
                require_horizon_match(cp.agent.n_steps, m, "sweep cell " + cell_name);
                ps.push_back(qhedge::as_policy(cp.agent));
            } else {
                qhedge::RlqhCheckpoint cp = qhedge::load_rlqh_checkpoint(file);
                require_contract_match(cp.contract, c, "sweep cell " + cell_name);
                require_horizon_match(cp.agent.n_steps, m, "sweep cell " + cell_name);
                ps.push_back(qhedge::as_policy(cp.agent));
            }
        }
        return ps;
    };

    std::vector<qhedge::SweepCell> cells =
        qhedge::sweep(cfg.market, cfg.contract, cfg.cost, axis, cfg.sweep.values, provider,
                      cfg.eval.n_paths, cfg.base_seed, cfg.eval.charge_premium, cfg.eval.bins);

    std::ostringstream sum;
    sum << "axis,value,policy,n_paths,mean_cost,std_cost,mshe\n";
    nlohmann::json jcells = nlohmann::json::array();
    for (auto& cell : cells) {
        nlohmann::json jc{{"axis", to_string(axis)},
                          {"value", cell.axis_value},
                          {"y0", cell.y0}};
        nlohmann::json jreports = nlohmann::json::array();
        for (auto& run : cell.runs) {
            run.report.fingerprint = cfg.fingerprint();
            jreports.push_back(run.report);
            sum << to_string(axis) << ',' << fmt_axis_value(axis, cell.axis_value) << ','
                << run.report.policy_name << ',' << run.report.n_paths << ','
                << qhedge::detail::fmt_real(run.report.mean_cost) << ','
                << qhedge::detail::fmt_real(run.report.std_cost) << ','
                << qhedge::detail::fmt_real(run.report.mshe) << '\n';
        }
        jc["reports"] = jreports;
        jcells.push_back(std::move(jc));
    }
    qhedge::detail::write_text_file(dir + "/sweep_report.json",
                                    nlohmann::json{{"cells", jcells}}.dump(2) + "\n");
    qhedge::detail::write_text_file(dir + "/sweep_summary.csv", sum.str());

    std::cout << "sweep over " << to_string(axis) << " -> " << dir << "\n";
    for (const auto& cell : cells) {
        std::cout << " " << to_string(axis) << "=" << fmt_axis_value(axis, cell.axis_value)
                  << "\n";
        for (const auto& run : cell.runs) std::cout << " " << report_line(run.report) << "\n";
    }
    return kExitOk;
}

int cmd_robustness(const CliOptions& opt) {
    qhedge::ExperimentConfig cfg = load_experiment(opt);
    const int threads = resolve_threads(opt);
    if (cfg.market.model_kind != qhedge::ModelKind::Sabr)
        throw qhedge::ConfigError("robustness: config market.model must be sabr");
    if (opt.dtsoc_checkpoint.empty() && opt.rlqh_checkpoint.empty())
        throw qhedge::ConfigError(
            "robustness: provide --dtsoc-checkpoint and/or --rlqh-checkpoint");
    const std::string dir = open_run_dir(cfg);

    std::vector<qhedge::Policy> policies;
    std::optional<qhedge::MarketConfig> bs_market;
    const auto adopt_market = [&](const qhedge::MarketConfig& m, const std::string& which) {
        if (m.model_kind != qhedge::ModelKind::BlackScholes)
            throw qhedge::ConfigError("robustness: " + which +
                                      " checkpoint was not trained on black_scholes");
        if (m.sigma0 != cfg.market.sigma0)
            throw qhedge::ConfigError(
                "robustness: " + which + " training vol " + qhedge::detail::fmt_short(m.sigma0) +
                " does not equal sabr sigma0 " + qhedge::detail::fmt_short(cfg.market.sigma0));
        if (m.n_steps != cfg.market.n_steps)
            throw qhedge::ConfigError("robustness: " + which + " horizon (" +
                                      std::to_string(m.n_steps) + " steps) does not match the " +
                                      "sabr market (" + std::to_string(cfg.market.n_steps) + ")");
        if (!bs_market) bs_market = m;
    };
    if (!opt.dtsoc_checkpoint.empty()) {
        qhedge::DtsocCheckpoint cp = qhedge::load_dtsoc_checkpoint(opt.dtsoc_checkpoint);
        adopt_market(cp.market, "dtsoc");
        require_contract_match(cp.contract, cfg.contract, "robustness");
        policies.push_back(qhedge::as_policy(cp.agent));
    }
    if (!opt.rlqh_checkpoint.empty()) {
        qhedge::RlqhCheckpoint cp = qhedge::load_rlqh_checkpoint(opt.rlqh_checkpoint);
        adopt_market(cp.market, "rlqh");
        require_contract_match(cp.contract, cfg.contract, "robustness");
        policies.push_back(qhedge::as_policy(cp.agent));
    }
    policies.push_back(qhedge::bartlett_policy(cfg.contract, cfg.market));

    std::vector<const qhedge::Policy*> ptrs;
    ptrs.reserve(policies.size());
    for (const auto& p : policies) ptrs.push_back(&p);
    const Real y0 = resolved_y0(cfg);
    std::vector<qhedge::EvalRun> runs =
        qhedge::robustness_eval(ptrs, *bs_market, cfg.market, cfg.contract, cfg.cost,
                                cfg.eval.n_paths, cfg.base_seed, y0, cfg.eval.bins, threads);

    nlohmann::json jreports = nlohmann::json::array();
    std::vector<qhedge::EvalReport> reports;
    for (auto& run : runs) {
        run.report.fingerprint = cfg.fingerprint();
        jreports.push_back(run.report);
        reports.push_back(run.report);
    }
    qhedge::detail::write_text_file(dir + "/report.json",
                                    nlohmann::json{{"reports", jreports}}.dump(2) + "\n");
    qhedge::detail::write_text_file(dir + "/costs.csv", qhedge::costs_csv(runs));
    qhedge::detail::write_text_file(dir + "/histogram.svg", qhedge::render_histogram(reports));

    std::cout << "robustness: BS-trained agents on sabr paths, y0="
              << qhedge::detail::fmt_short(y0) << " -> " << dir << "\n";
    for (const auto& r : reports) std::cout << report_line(r) << "\n";
    return kExitOk;
}

int cmd_greeks(const CliOptions& opt) {
    qhedge::ExperimentConfig cfg = load_experiment(opt);
    if (!(opt.spot_hi > opt.spot_lo))
        throw qhedge::ConfigError("greeks: --spot-hi must exceed --spot-lo");
    if (opt.grid_points < 2) throw qhedge::ConfigError("greeks: --points must be >= 2");
    const std::string dir = open_run_dir(cfg);

    const Real ttm = cfg.market.maturity_years();
    const Real k_disc = cfg.contract.strike_disc(cfg.market.ir, ttm);
    const bool sabr = cfg.market.model_kind == qhedge::ModelKind::Sabr &&
                      cfg.market.eta > 0.0 && cfg.market.sigma0 > 0.0;

    std::ostringstream csv;
    csv << "spot,ttm_years,price,delta,vega";
    if (sabr) csv << ",implied_vol,bartlett_delta";
    csv << '\n';
    for (int i = 0; i < opt.grid_points; ++i) {
        const Real s = opt.spot_lo + (opt.spot_hi - opt.spot_lo) * static_cast<Real>(i) /
                                         static_cast<Real>(opt.grid_points - 1);
        Real vol = cfg.market.sigma0;
        Real bartlett = 0.0;
        if (sabr) {
            vol = qhedge::sabr_implied_vol(s, k_disc, cfg.market.sigma0, cfg.market.eta,
                                           cfg.market.rho);
            bartlett = qhedge::bartlett_delta(s, k_disc, cfg.market.sigma0, ttm, cfg.market.eta,
                                              cfg.market.rho);
        }
        const qhedge::BsGreeks g = qhedge::bs_call(s, k_disc, vol, ttm);
        csv << qhedge::detail::fmt_real(s) << ',' << qhedge::detail::fmt_real(ttm) << ','
            << qhedge::detail::fmt_real(g.price) << ',' << qhedge::detail::fmt_real(g.delta)
            << ',' << qhedge::detail::fmt_real(g.vega);
        if (sabr)
            csv << ',' << qhedge::detail::fmt_real(vol) << ','
                << qhedge::detail::fmt_real(bartlett);
        csv << '\n';
    }
    qhedge::detail::write_text_file(dir + "/greeks.csv", csv.str());
    std::cout << csv.str();
    std::cout << "greeks: " << opt.grid_points << " spots on ["
              << qhedge::detail::fmt_short(opt.spot_lo) << ", "
              << qhedge::detail::fmt_short(opt.spot_hi) << "] -> " << dir << "/greeks.csv\n";
    return kExitOk;
}

/// Machine-readable flag inventory: one "<scope> <flag>" line per option.
/// The help-coverage test cross-checks these against --help output, so a
/// flag can never exist without being documented.
void dump_flags(const CLI::App& app) {
    const auto print_scope = [](const std::string& scope, const CLI::App* a) {
        for (const CLI::Option* o : a->get_options())
            std::cout << scope << " " << o->get_name() << "\n";
    };
    print_scope("global", &app);
    for (const CLI::App* sub :
         app.get_subcommands([](const CLI::App*) { return true; }))
        print_scope(sub->get_name(), sub);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qhedge: train and evaluate hedging agents for European calls under "
                 "Black-Scholes and SABR dynamics with proportional transaction costs"};
    app.require_subcommand(0, 1);
    app.fallthrough();

    CliOptions opt;
    app.add_option("--config", opt.config_path,
                   "JSON experiment config; built-in defaults apply when omitted");
    CLI::Option* seed_opt =
        app.add_option("--seed", opt.seed_value, "override base_seed from the config");
    app.add_option("--output-dir", opt.output_dir,
                   "override output_dir (also via QHEDGE_OUTPUT_DIR)");
    app.add_option("--threads", opt.threads,
                   "worker threads for evaluation (also via QHEDGE_THREADS)");
    app.add_flag("--dump-flags", opt.dump_flags,
                 "print every subcommand flag, one per line, and exit");

    CLI::App* sim = app.add_subcommand("simulate", "write simulated market paths as CSV");
    sim->fallthrough();
    sim->add_option("--n-paths", opt.sim_paths, "number of paths to simulate")
        ->default_val(10);

    CLI::App* tdt = app.add_subcommand(
        "train-dtsoc", "train the per-timestep policy-network hedger and checkpoint it");
    tdt->fallthrough();

    CLI::App* trl = app.add_subcommand(
        "train-rlqh", "train the quadratic-hedging DDPG agent and checkpoint it");
    trl->fallthrough();

    CLI::App* ev = app.add_subcommand(
        "evaluate", "run the configured agent on held-out paths and report cost statistics");
    ev->fallthrough();
    ev->add_option("--checkpoint", opt.checkpoint, "trained-agent checkpoint (dtsoc/rlqh)");

    CLI::App* sw = app.add_subcommand(
        "sweep", "evaluate across the axis values in the config's sweep section");
    sw->fallthrough();
    sw->add_option("--checkpoint-dir", opt.checkpoint_dir,
                   "directory holding <agent>-<axis>-<value>.json checkpoints");

    CLI::App* rb = app.add_subcommand(
        "robustness", "evaluate BS-trained agents on SABR paths against Bartlett's delta");
    rb->fallthrough();
    rb->add_option("--dtsoc-checkpoint", opt.dtsoc_checkpoint,
                   "dtsoc checkpoint trained on black_scholes");
    rb->add_option("--rlqh-checkpoint", opt.rlqh_checkpoint,
                   "rlqh checkpoint trained on black_scholes");

    CLI::App* gr = app.add_subcommand("greeks", "tabulate analytic prices and deltas");
    gr->fallthrough();
    gr->add_option("--spot-lo", opt.spot_lo, "lowest spot on the grid")->default_val(70.0);
    gr->add_option("--spot-hi", opt.spot_hi, "highest spot on the grid")->default_val(130.0);
    gr->add_option("--points", opt.grid_points, "grid points")->default_val(61);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }
    opt.seed_given = seed_opt->count() > 0;

    if (opt.dump_flags) {
        dump_flags(app);
        return kExitOk;
    }
    if (app.get_subcommands().empty()) {
        std::cout << app.help();
        return kExitConfig;
    }

    try {
        if (sim->parsed()) return cmd_simulate(opt);
        if (tdt->parsed()) return cmd_train_dtsoc(opt);
        if (trl->parsed()) return cmd_train_rlqh(opt);
        if (ev->parsed()) return cmd_evaluate(opt);
        if (sw->parsed()) return cmd_sweep(opt);
        if (rb->parsed()) return cmd_robustness(opt);
        if (gr->parsed()) return cmd_greeks(opt);
        std::cerr << "error: unknown subcommand\n";
        return kExitConfig;
    } catch (const qhedge::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const qhedge::MissingArtifactError& e) {
        std::cerr << "missing artifact: " << e.what() << "\n";
        return kExitMissingArtifact;
    } catch (const qhedge::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const qhedge::NumericsError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerics;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}
