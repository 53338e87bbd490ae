#ifndef QHEDGE_EVAL_HPP
#define QHEDGE_EVAL_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "qhedge/analytic.hpp"
#include "qhedge/ledger.hpp"
#include "qhedge/market.hpp"
#include "qhedge/mathx.hpp"
#include "qhedge/rng.hpp"

namespace qhedge {

inline constexpr std::array<int, 7> kReportPercentiles = {1, 5, 25, 50, 75, 95, 99};

/// Distribution summary of hedging costs for one frozen policy on one
/// held-out path set. Positive cost = loss.
struct EvalReport {
    std::string policy_name;
    long n_paths = 0;
    Real mean_cost = 0.0;
    Real std_cost = 0.0;
    Real mshe = 0.0;
    std::map<int, Real> percentiles;
    Histogram histogram;
    std::string fingerprint;
    std::uint64_t seed = 0;
    Real y0 = 0.0;
};

/// Report plus the per-path raw material behind it (for costs.csv and
/// cross-policy significance checks).
struct EvalRun {
    EvalReport report;
    std::vector<std::uint64_t> path_seeds;
    std::vector<Real> costs;
};

inline void to_json(nlohmann::json& j, const Histogram& h) {
    j = nlohmann::json{{"edges", h.edges}, {"counts", h.counts}};
}

inline void from_json(const nlohmann::json& j, Histogram& h) {
    j.at("edges").get_to(h.edges);
    j.at("counts").get_to(h.counts);
}

inline void to_json(nlohmann::json& j, const EvalReport& r) {
    nlohmann::json pcts = nlohmann::json::object();
    for (const auto& [p, v] : r.percentiles) pcts[std::to_string(p)] = v;
    j = nlohmann::json{{"policy_name", r.policy_name},
                       {"n_paths", r.n_paths},
                       {"mean_cost", r.mean_cost},
                       {"std_cost", r.std_cost},
                       {"mshe", r.mshe},
                       {"percentiles", pcts},
                       {"histogram", r.histogram},
                       {"fingerprint", r.fingerprint},
                       {"seed", r.seed},
                       {"y0", r.y0}};
}

inline void from_json(const nlohmann::json& j, EvalReport& r) {
    j.at("policy_name").get_to(r.policy_name);
    j.at("n_paths").get_to(r.n_paths);
    j.at("mean_cost").get_to(r.mean_cost);
    j.at("std_cost").get_to(r.std_cost);
    j.at("mshe").get_to(r.mshe);
    r.percentiles.clear();
    for (const auto& [key, v] : j.at("percentiles").items())
        r.percentiles[std::stoi(key)] = v.get<Real>();
    j.at("histogram").get_to(r.histogram);
    j.at("fingerprint").get_to(r.fingerprint);
    j.at("seed").get_to(r.seed);
    j.at("y0").get_to(r.y0);
}

/// Builds the summary statistics and histogram from raw per-path costs.
/// bins = 0 selects Freedman-Diaconis binning.
inline EvalReport summarize_costs(const std::string& policy_name, const std::vector<Real>& costs,
                                  std::uint64_t seed, Real y0, int bins = 0) {
    if (costs.empty()) throw std::invalid_argument("summarize_costs: no costs");
    EvalReport r;
    r.policy_name = policy_name;
    r.n_paths = static_cast<long>(costs.size());
    r.seed = seed;
    r.y0 = y0;
    r.mean_cost = mean(costs);
    r.std_cost = stddev_pop(costs);
    r.mshe = second_moment(costs);
    std::vector<Real> sorted(costs);
    std::sort(sorted.begin(), sorted.end());
    for (int p : kReportPercentiles) r.percentiles[p] = percentile_sorted(sorted, p);
    const int nb = bins > 0 ? bins : fd_bin_count(sorted);
    r.histogram = make_histogram(sorted, nb);
    return r;
}

/// Evaluates several frozen policies over one shared held-out path set
/// (common random numbers, so cross-policy differences are not drowned in
/// independent path noise). Path seeds come from the evaluation namespace.
/// Results are identical for any thread count: each path index owns its
/// output slot and its own path simulation.
inline std::vector<EvalRun> evaluate_policies(const std::vector<const Policy*>& policies,
                                              const MarketConfig& market,
                                              const ContractSpec& contract, const CostSpec& cost,
                                              long n_paths, std::uint64_t base_seed, Real y0,
                                              int bins = 0, int n_threads = 1) {
    market.validate();
    contract.validate();
    cost.validate();
    if (policies.empty()) throw std::invalid_argument("evaluate_policies: no policies");
    if (n_paths < 1) throw ConfigError("evaluate: n_paths must be >= 1");
    if (n_threads < 1) throw ConfigError("evaluate: n_threads must be >= 1");

    std::vector<EvalRun> runs(policies.size());
    for (auto& run : runs) {
        run.path_seeds.assign(static_cast<std::size_t>(n_paths), 0);
        run.costs.assign(static_cast<std::size_t>(n_paths), 0.0);
    }
    const auto work = [&](long lo, long hi) {
        for (long i = lo; i < hi; ++i) {
            const std::uint64_t seed = eval_seed(base_seed, static_cast<std::uint64_t>(i));
            const MarketPath path = simulate_path(market, seed);
            for (std::size_t p = 0; p < policies.size(); ++p) {
                const EpisodeLedger led = run_episode(path, contract, cost, *policies[p], y0);
                runs[p].path_seeds[static_cast<std::size_t>(i)] = seed;
                runs[p].costs[static_cast<std::size_t>(i)] = led.hedging_error;
            }
        }
    };
    const int workers = static_cast<int>(std::min<long>(n_threads, n_paths));
    if (workers <= 1) {
        work(0, n_paths);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
        const long per = (n_paths + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const long lo = static_cast<long>(w) * per;
            const long hi = std::min<long>(lo + per, n_paths);
            pool.emplace_back([&, w, lo, hi] {
                try {
                    work(lo, hi);
                } catch (...) {
                    errors[static_cast<std::size_t>(w)] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (const auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    for (std::size_t p = 0; p < policies.size(); ++p)
        runs[p].report = summarize_costs(policies[p]->name, runs[p].costs, base_seed, y0, bins);
    return runs;
}

inline EvalRun evaluate(const Policy& policy, const MarketConfig& market,
                        const ContractSpec& contract, const CostSpec& cost, long n_paths,
                        std::uint64_t base_seed, Real y0, int bins = 0, int n_threads = 1) {
    auto runs = evaluate_policies({&policy}, market, contract, cost, n_paths, base_seed, y0, bins,
                                  n_threads);
    return std::move(runs.front());
}

enum class SweepAxis { MaturityDays, Sigma, Alpha };

inline std::string to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::MaturityDays: return "maturity_days";
        case SweepAxis::Sigma: return "sigma";
        case SweepAxis::Alpha: return "alpha";
    }
    return "?";
}

/// One evaluated grid point of an experiment sweep.
struct SweepCell {
    Real axis_value = 0.0;
    MarketConfig market;
    ContractSpec contract;
    CostSpec cost;
    Real y0 = 0.0;
    std::vector<EvalRun> runs;
};

/// Supplies the policies for one sweep cell. Learned agents must come from
/// a checkpoint trained under the cell's own axis value; the provider is
/// the hook where that lookup (or retraining) happens.
using PolicyProvider = std::function<std::vector<Policy>(
    const MarketConfig&, const ContractSpec&, const CostSpec&)>;

/// Applies one axis value to the base configuration. Maturity moves the
/// whole daily grid (n_steps tracks maturity_days).
inline void apply_axis(SweepAxis axis, Real value, MarketConfig& market, CostSpec& cost) {
    switch (axis) {
        case SweepAxis::MaturityDays:
            market.maturity_days = static_cast<int>(value);
            market.n_steps = static_cast<int>(value);
            break;
        case SweepAxis::Sigma:
            market.sigma0 = value;
            break;
        case SweepAxis::Alpha:
            cost.alpha = value;
            break;
    }
}

inline std::vector<SweepCell> sweep(const MarketConfig& base_market,
                                    const ContractSpec& contract, const CostSpec& base_cost,
                                    SweepAxis axis, const std::vector<Real>& values,
                                    const PolicyProvider& provider, long n_paths,
                                    std::uint64_t base_seed, bool charge_premium = true,
                                    int bins = 0) {
    if (values.empty()) throw ConfigError("sweep: no axis values");
    std::vector<SweepCell> cells;
    for (Real v : values) {
        SweepCell cell;
        cell.axis_value = v;
        cell.market = base_market;
        cell.contract = contract;
        cell.cost = base_cost;
        apply_axis(axis, v, cell.market, cell.cost);
        cell.market.validate();
        cell.y0 = charge_premium ? default_premium(cell.market, contract) : 0.0;
        const std::vector<Policy> policies = provider(cell.market, cell.contract, cell.cost);
        if (policies.empty()) throw ConfigError("sweep: provider returned no policies");
        std::vector<const Policy*> ptrs;
        for (const auto& p : policies) ptrs.push_back(&p);
        cell.runs = evaluate_policies(ptrs, cell.market, cell.contract, cell.cost, n_paths,
                                      base_seed, cell.y0, bins);
        cells.push_back(std::move(cell));
    }
    return cells;
}

/// Evaluates agents trained on Black-Scholes against the Bartlett baseline
/// on one shared SABR path set. The BS training vol must equal the SABR
/// initial vol or the comparison is meaningless.
inline std::vector<EvalRun> robustness_eval(const std::vector<const Policy*>& policies,
                                            const MarketConfig& bs_market,
                                            const MarketConfig& sabr_market,
                                            const ContractSpec& contract, const CostSpec& cost,
                                            long n_paths, std::uint64_t base_seed, Real y0,
                                            int bins = 0, int n_threads = 1) {
    if (bs_market.model_kind != ModelKind::BlackScholes ||
        sabr_market.model_kind != ModelKind::Sabr)
        throw ConfigError("robustness: need a Black-Scholes training market and a SABR eval market");
    if (bs_market.sigma0 != sabr_market.sigma0)
        throw ConfigError("robustness: BS training vol must equal the SABR initial vol");
    return evaluate_policies(policies, sabr_market, contract, cost, n_paths, base_seed, y0, bins,
                             n_threads);
}

namespace detail {
inline std::string fmt_real(Real v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string fmt_short(Real v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}
}  // namespace detail

/// costs.csv payload: one row per (policy, path), full precision.
inline std::string costs_csv(const std::vector<EvalRun>& runs) {
    std::string out = "path_seed,policy,cost\n";
    for (const auto& run : runs)
        for (std::size_t i = 0; i < run.costs.size(); ++i) {
            out += std::to_string(run.path_seeds[i]);
            out += ',';
            out += run.report.policy_name;
            out += ',';
            out += detail::fmt_real(run.costs[i]);
            out += '\n';
        }
    return out;
}

/// Overlaid step histograms as a standalone SVG document. Byte output is a
/// pure function of the reports.
inline std::string render_histogram(const std::vector<EvalReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("render_histogram: no reports");
    constexpr int width = 720, height = 440;
    constexpr int ml = 60, mr = 20, mt = 40, mb = 50;
    const int pw = width - ml - mr, ph = height - mt - mb;

    Real x_lo = reports.front().histogram.edges.front();
    Real x_hi = reports.front().histogram.edges.back();
    long y_hi = 1;
    for (const auto& r : reports) {
        x_lo = std::min(x_lo, r.histogram.edges.front());
        x_hi = std::max(x_hi, r.histogram.edges.back());
        for (long c : r.histogram.counts) y_hi = std::max(y_hi, c);
    }
    if (x_hi <= x_lo) x_hi = x_lo + 1.0;

    const auto sx = [&](Real x) { return ml + (x - x_lo) / (x_hi - x_lo) * pw; };
    const auto sy = [&](Real y) { return mt + ph - y / static_cast<Real>(y_hi) * ph; };

    static constexpr const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                              "#9467bd", "#ff7f0e", "#8c564b"};
    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
           "\" height=\"" + std::to_string(height) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<line x1=\"" + std::to_string(ml) + "\" y1=\"" + std::to_string(mt + ph) +
           "\" x2=\"" + std::to_string(ml + pw) + "\" y2=\"" + std::to_string(mt + ph) +
           "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + std::to_string(ml) + "\" y1=\"" + std::to_string(mt) + "\" x2=\"" +
           std::to_string(ml) + "\" y2=\"" + std::to_string(mt + ph) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + std::to_string(ml + pw / 2) + "\" y=\"" + std::to_string(height - 12) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
           "total hedging cost</text>\n";
    svg += "<text x=\"18\" y=\"" + std::to_string(mt + ph / 2) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\" "
           "transform=\"rotate(-90 18 " +
           std::to_string(mt + ph / 2) + ")\">paths</text>\n";
    // x tick labels at the range ends and zero if inside
    for (Real tick : {x_lo, 0.0, x_hi}) {
        if (tick < x_lo || tick > x_hi) continue;
        svg += "<text x=\"" + detail::fmt_short(sx(tick)) + "\" y=\"" +
               std::to_string(mt + ph + 18) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
               detail::fmt_short(tick) + "</text>\n";
    }
    svg += "<text x=\"" + std::to_string(ml - 6) + "\" y=\"" + std::to_string(mt + 4) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
           std::to_string(y_hi) + "</text>\n";

    for (std::size_t k = 0; k < reports.size(); ++k) {
        const Histogram& h = reports[k].histogram;
        const char* color = palette[k % (sizeof(palette) / sizeof(palette[0]))];
        std::string d = "M" + detail::fmt_short(sx(h.edges.front())) + " " +
                        detail::fmt_short(sy(0.0));
        for (std::size_t b = 0; b < h.counts.size(); ++b) {
            const Real y = sy(static_cast<Real>(h.counts[b]));
            d += " L" + detail::fmt_short(sx(h.edges[b])) + " " + detail::fmt_short(y);
            d += " L" + detail::fmt_short(sx(h.edges[b + 1])) + " " + detail::fmt_short(y);
        }
        d += " L" + detail::fmt_short(sx(h.edges.back())) + " " + detail::fmt_short(sy(0.0));
        svg += "<path d=\"" + d + "\" fill=\"none\" stroke=\"" + color +
               "\" stroke-width=\"1.5\"/>\n";
        const int ly = mt + 16 + static_cast<int>(k) * 18;
        svg += "<line x1=\"" + std::to_string(ml + pw - 150) + "\" y1=\"" + std::to_string(ly) +
               "\" x2=\"" + std::to_string(ml + pw - 130) + "\" y2=\"" + std::to_string(ly) +
               "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
        svg += "<text x=\"" + std::to_string(ml + pw - 124) + "\" y=\"" + std::to_string(ly + 4) +
               "\" font-family=\"sans-serif\" font-size=\"12\">" + reports[k].policy_name +
               "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace qhedge

#endif
