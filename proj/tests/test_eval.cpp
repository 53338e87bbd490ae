#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "qhedge/analytic.hpp"
#include "qhedge/eval.hpp"
#include "qhedge/market.hpp"
#include "qhedge/mathx.hpp"

using namespace qhedge;

namespace {

Policy do_nothing() {
    Policy p;
    p.name = "idle";
    p.act = [](const HedgeState&) { return Real(0.0); };
    return p;
}

Real mshe_standard_error(const std::vector<Real>& costs) {
    std::vector<Real> sq(costs.size());
    for (std::size_t i = 0; i < costs.size(); ++i) sq[i] = costs[i] * costs[i];
    return std::sqrt(variance_pop(sq) / static_cast<Real>(costs.size()));
}

}  // namespace

TEST_CASE("summary statistics on a tiny vector are exact") {
    const std::vector<Real> costs = {4.0, 1.0, 3.0, 2.0};
    const EvalReport r = summarize_costs("toy", costs, 12, 0.5);
    CHECK(r.policy_name == "toy");
    CHECK(r.n_paths == 4);
    CHECK(r.seed == 12);
    CHECK(r.y0 == 0.5);
    CHECK(r.mean_cost == 2.5);
    CHECK(r.mshe == 7.5);  // (1 + 4 + 9 + 16) / 4
    CHECK(r.std_cost == Catch::Approx(std::sqrt(1.25)).margin(1e-15));
    // linear-interpolation percentiles over the sorted values
    CHECK(r.percentiles.at(50) == Catch::Approx(2.5));
    CHECK(r.percentiles.at(25) == Catch::Approx(1.75));
    CHECK(r.percentiles.at(75) == Catch::Approx(3.25));
    CHECK(r.percentiles.at(1) == Catch::Approx(1.03));
    CHECK(r.percentiles.at(99) == Catch::Approx(3.97));
    CHECK_THROWS_AS(summarize_costs("x", {}, 0, 0.0), std::invalid_argument);
}

TEST_CASE("second moment decomposes into mean and variance") {
    NormalSource rng(3);
    std::vector<Real> costs(500);
    for (auto& c : costs) c = 0.3 + 0.7 * rng.next_gauss();
    const EvalReport r = summarize_costs("mc", costs, 0, 0.0);
    CHECK(r.mshe == Catch::Approx(r.mean_cost * r.mean_cost + r.std_cost * r.std_cost)
                        .margin(1e-12));
}

TEST_CASE("histogram covers the data and counts every point") {
    NormalSource rng(4);
    std::vector<Real> xs(100);
    for (auto& x : xs) x = rng.next_gauss();
    std::sort(xs.begin(), xs.end());
    const Histogram h = make_histogram(xs, 8);
    REQUIRE(h.edges.size() == 9);
    CHECK(h.counts.size() == 8);
    CHECK(h.edges.front() == xs.front());
    CHECK(h.edges.back() == xs.back());
    long total = 0;
    for (long c : h.counts) total += c;
    CHECK(total == static_cast<long>(xs.size()));
    for (std::size_t i = 1; i < h.edges.size(); ++i) CHECK(h.edges[i] > h.edges[i - 1]);
    // degenerate data collapses to one centered bin
    const std::vector<Real> flat(10, 2.0);
    const Histogram hf = make_histogram(flat, 5);
    REQUIRE(hf.counts.size() == 1);
    CHECK(hf.counts[0] == 10);
    CHECK(hf.edges.front() == 1.5);
    CHECK(hf.edges.back() == 2.5);
}

TEST_CASE("policies share the held-out path set") {
    const MarketConfig market;
    const ContractSpec contract;
    const CostSpec cost;
    const Policy d = delta_policy(contract, market);
    const Policy idle = do_nothing();
    const auto runs = evaluate_policies({&d, &idle}, market, contract, cost, 50, 900, 0.0);
    REQUIRE(runs.size() == 2);
    CHECK(runs[0].path_seeds == runs[1].path_seeds);
    REQUIRE(runs[0].costs.size() == 50);
    CHECK(runs[0].costs != runs[1].costs);
    // seeds come from the evaluation namespace, disjoint from training
    for (const auto s : runs[0].path_seeds) CHECK(s >= kSeedNamespaceSpan);
}

TEST_CASE("evaluation is invariant to the thread count") {
    const MarketConfig market;
    const ContractSpec contract;
    CostSpec cost;
    cost.alpha = 0.002;
    const Policy d = delta_policy(contract, market);
    const auto one = evaluate(d, market, contract, cost, 400, 77, 0.1, 0, 1);
    const auto two = evaluate(d, market, contract, cost, 400, 77, 0.1, 0, 2);
    const auto three = evaluate(d, market, contract, cost, 400, 77, 0.1, 0, 3);
    CHECK(one.costs == two.costs);
    CHECK(one.costs == three.costs);
    CHECK(one.report.mean_cost == two.report.mean_cost);
    CHECK(one.report.mshe == three.report.mshe);
}

TEST_CASE("degenerate zero-volatility out-of-the-money market costs nothing") {
    MarketConfig market;
    market.sigma0 = 0.0;
    market.mu = 0.0;
    ContractSpec contract;
    contract.strike = 105.0;
    const CostSpec cost;
    const Policy idle = do_nothing();
    const auto run = evaluate(idle, market, contract, cost, 20, 5, 0.0);
    for (const Real c : run.costs) CHECK(c == 0.0);
    CHECK(run.report.mean_cost == 0.0);
    CHECK(run.report.mshe == 0.0);
}

TEST_CASE("premium-funded delta hedge breaks even on average without costs") {
    const MarketConfig market;
    const ContractSpec contract;
    CostSpec cost;
    cost.alpha = 0.0;
    const Real y0 = default_premium(market, contract);
    const Policy d = delta_policy(contract, market);
    const auto run = evaluate(d, market, contract, cost, 10000, 424, y0);
    CHECK(std::abs(run.report.mean_cost) < 0.05);
    CHECK(run.report.std_cost > 0.1);
    CHECK(run.report.std_cost < 1.0);
}

TEST_CASE("disjoint held-out sets give statistically compatible risk estimates") {
    const MarketConfig market;
    const ContractSpec contract;
    const CostSpec cost;
    const Policy d = delta_policy(contract, market);
    const Real y0 = default_premium(market, contract);
    const auto a = evaluate(d, market, contract, cost, 10000, 500, y0);
    const auto b = evaluate(d, market, contract, cost, 10000, 10500, y0);
    std::set<std::uint64_t> sa(a.path_seeds.begin(), a.path_seeds.end());
    for (const auto s : b.path_seeds) CHECK(sa.count(s) == 0);
    const Real se = std::sqrt(std::pow(mshe_standard_error(a.costs), 2) +
                              std::pow(mshe_standard_error(b.costs), 2));
    CHECK(std::abs(a.report.mshe - b.report.mshe) < 3.0 * se);
}

TEST_CASE("maturity sweep tracks the daily grid and widens the cost spread") {
    const MarketConfig market;
    const ContractSpec contract;
    const CostSpec cost;
    const PolicyProvider provider = [](const MarketConfig& m, const ContractSpec& c,
                                       const CostSpec&) {
        return std::vector<Policy>{delta_policy(c, m)};
    };
    const auto cells =
        sweep(market, contract, cost, SweepAxis::MaturityDays, {10.0, 30.0, 60.0}, provider,
              2000, 321);
    REQUIRE(cells.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(cells[i].market.maturity_days == static_cast<int>(cells[i].axis_value));
        CHECK(cells[i].market.n_steps == cells[i].market.maturity_days);
        CHECK(cells[i].y0 ==
              Catch::Approx(default_premium(cells[i].market, contract)).margin(1e-12));
    }
    CHECK(cells[0].runs[0].report.std_cost < cells[1].runs[0].report.std_cost);
    CHECK(cells[1].runs[0].report.std_cost < cells[2].runs[0].report.std_cost);
    CHECK(cells[0].y0 < cells[1].y0);
    CHECK(cells[1].y0 < cells[2].y0);
}

TEST_CASE("volatility and cost sweeps move the summary statistics the right way") {
    const MarketConfig market;
    const ContractSpec contract;
    const CostSpec cost;
    const PolicyProvider provider = [](const MarketConfig& m, const ContractSpec& c,
                                       const CostSpec&) {
        return std::vector<Policy>{delta_policy(c, m)};
    };
    const auto vol_cells =
        sweep(market, contract, cost, SweepAxis::Sigma, {0.1, 0.3}, provider, 2000, 321);
    CHECK(vol_cells[0].market.sigma0 == 0.1);
    CHECK(vol_cells[1].market.sigma0 == 0.3);
    CHECK(vol_cells[0].runs[0].report.std_cost < vol_cells[1].runs[0].report.std_cost);

    const auto tc_cells =
        sweep(market, contract, cost, SweepAxis::Alpha, {0.0, 0.004}, provider, 2000, 321,
              /*charge_premium=*/false);
    CHECK(tc_cells[0].y0 == 0.0);
    CHECK(tc_cells[1].y0 == 0.0);
    CHECK(tc_cells[0].cost.alpha == 0.0);
    CHECK(tc_cells[1].cost.alpha == 0.004);
    CHECK(tc_cells[0].runs[0].report.mean_cost < tc_cells[1].runs[0].report.mean_cost);

    CHECK_THROWS_AS(sweep(market, contract, cost, SweepAxis::Sigma, {}, provider, 10, 1),
                    ConfigError);
}

TEST_CASE("robustness evaluation validates its market pair") {
    MarketConfig bs;
    MarketConfig sabr;
    sabr.model_kind = ModelKind::Sabr;
    sabr.eta = 0.95;
    sabr.rho = -0.5;
    const ContractSpec contract;
    const CostSpec cost;
    const Policy d = delta_policy(contract, bs);
    CHECK_THROWS_AS(robustness_eval({&d}, sabr, sabr, contract, cost, 10, 1, 0.0), ConfigError);
    CHECK_THROWS_AS(robustness_eval({&d}, bs, bs, contract, cost, 10, 1, 0.0), ConfigError);
    MarketConfig other_vol = sabr;
    other_vol.sigma0 = 0.25;
    CHECK_THROWS_AS(robustness_eval({&d}, bs, other_vol, contract, cost, 10, 1, 0.0),
                    ConfigError);
}

TEST_CASE("robustness evaluation equals direct evaluation on the stress market") {
    MarketConfig bs;
    MarketConfig sabr;
    sabr.model_kind = ModelKind::Sabr;
    sabr.eta = 0.95;
    sabr.rho = -0.5;
    const ContractSpec contract;
    const CostSpec cost;
    const Policy b = bartlett_policy(contract, sabr);
    const Real y0 = default_premium(sabr, contract);
    const auto via_robust = robustness_eval({&b}, bs, sabr, contract, cost, 300, 88, y0);
    const auto direct = evaluate(b, sabr, contract, cost, 300, 88, y0);
    REQUIRE(via_robust.size() == 1);
    CHECK(via_robust[0].costs == direct.costs);
    CHECK(via_robust[0].report.mshe == direct.report.mshe);
}

TEST_CASE("per-path cost table is well formed") {
    const MarketConfig market;
    const ContractSpec contract;
    const CostSpec cost;
    const Policy d = delta_policy(contract, market);
    const Policy idle = do_nothing();
    const auto runs = evaluate_policies({&d, &idle}, market, contract, cost, 5, 66, 0.0);
    const std::string csv = costs_csv(runs);
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        const std::size_t nl = csv.find('\n', pos);
        lines.push_back(csv.substr(pos, nl - pos));
        pos = nl + 1;
    }
    REQUIRE(lines.size() == 11);  // header + 2 policies x 5 paths
    CHECK(lines[0] == "path_seed,policy,cost");
    // first data row round-trips its fields
    const std::string& row = lines[1];
    const std::size_t c1 = row.find(','), c2 = row.find(',', c1 + 1);
    CHECK(std::stoull(row.substr(0, c1)) == runs[0].path_seeds[0]);
    CHECK(row.substr(c1 + 1, c2 - c1 - 1) == "delta");
    CHECK(std::strtod(row.c_str() + c2 + 1, nullptr) ==
          Catch::Approx(runs[0].costs[0]).margin(1e-15));
}

TEST_CASE("histogram rendering is deterministic and labeled") {
    const MarketConfig market;
    const ContractSpec contract;
    const CostSpec cost;
    const Policy d = delta_policy(contract, market);
    const Policy idle = do_nothing();
    const auto runs = evaluate_policies({&d, &idle}, market, contract, cost, 200, 44, 0.0);
    const std::vector<EvalReport> reports = {runs[0].report, runs[1].report};
    const std::string svg1 = render_histogram(reports);
    const std::string svg2 = render_histogram(reports);
    CHECK(svg1 == svg2);
    CHECK(svg1.find("<svg") == 0);
    CHECK(svg1.find("total hedging cost") != std::string::npos);
    CHECK(svg1.find(">delta<") != std::string::npos);
    CHECK(svg1.find(">idle<") != std::string::npos);
    // one step-outline path per report
    std::size_t paths = 0, pos = 0;
    while ((pos = svg1.find("<path", pos)) != std::string::npos) {
        ++paths;
        pos += 5;
    }
    CHECK(paths == 2);
    CHECK_THROWS_AS(render_histogram({}), std::invalid_argument);
}

TEST_CASE("evaluation report serializes losslessly") {
    const MarketConfig market;
    const ContractSpec contract;
    CostSpec cost;
    cost.alpha = 0.001;
    const Policy d = delta_policy(contract, market);
    const auto run = evaluate(d, market, contract, cost, 150, 53, 0.25);
    const nlohmann::json j = run.report;
    const EvalReport back = j.get<EvalReport>();
    CHECK(back.policy_name == run.report.policy_name);
    CHECK(back.n_paths == run.report.n_paths);
    CHECK(back.mean_cost == run.report.mean_cost);
    CHECK(back.std_cost == run.report.std_cost);
    CHECK(back.mshe == run.report.mshe);
    CHECK(back.percentiles == run.report.percentiles);
    CHECK(back.histogram.edges == run.report.histogram.edges);
    CHECK(back.histogram.counts == run.report.histogram.counts);
    CHECK(back.seed == run.report.seed);
    CHECK(back.y0 == run.report.y0);
    const nlohmann::json j2 = back;
    CHECK(j == j2);
}
