#include <doctest.h>

#include <cmath>
#include <vector>

#include "chartnet/backtester.hpp"
#include "chartnet/error.hpp"
#include "chartnet/rng.hpp"

using namespace chartnet;

namespace {

PriceSeries make_prices(const std::vector<double>& prices) {
    PriceSeries s;
    s.ticker = "BT";
    for (std::size_t i = 0; i < prices.size(); ++i) {
        s.dates.push_back(Date::from_day_number(Date{2015, 1, 1}.day_number() + static_cast<std::int64_t>(i)));
        s.prices.push_back(prices[i]);
    }
    return s;
}

std::vector<TrendLabel> holds(std::size_t n) { return std::vector<TrendLabel>(n, TrendLabel::Hold); }

// Straight-line interpreter of the trading scenario, kept structurally
// separate from simulate(): a plain mode flag plus the scenario formulas.
struct OracleOutcome {
    std::vector<double> equity;
    std::vector<std::array<double, 4>> trades;  // buy_idx, sell_idx, gain, capital
    double final_money = 0;
};

OracleOutcome scenario_oracle(const std::vector<double>& price, const std::vector<TrendLabel>& label,
                              const BacktestConfig& cfg) {
    OracleOutcome out;
    double t_money = cfg.start_capital;
    double num_stocks = 0;
    int mode = 0;  // 0 = cash, 1 = holding stock
    double entry_money = 0;
    int entry_day = -1;
    double entry_price = 0;

    for (std::size_t day = 0; day < price.size(); ++day) {
        if (label[day] == TrendLabel::Buy && mode == 0) {
            num_stocks = (t_money - cfg.commission) / price[day];
            entry_money = t_money;
            entry_price = price[day];
            entry_day = static_cast<int>(day);
            t_money = 0;
            mode = 1;
        } else if (label[day] == TrendLabel::Sell && mode == 1) {
            t_money = price[day] * num_stocks - cfg.commission;
            out.trades.push_back({static_cast<double>(entry_day), static_cast<double>(day),
                                  t_money - entry_money, t_money});
            num_stocks = 0;
            mode = 0;
        }
        out.equity.push_back(mode == 1 ? num_stocks * price[day] : t_money);
    }
    if (mode == 1 && cfg.liquidate_at_end) {
        const std::size_t day = price.size() - 1;
        t_money = price[day] * num_stocks - cfg.commission;
        out.trades.push_back({static_cast<double>(entry_day), static_cast<double>(day), t_money - entry_money,
                              t_money});
        out.equity.back() = t_money;
        mode = 0;
    }
    out.final_money = out.equity.back();
    (void)entry_price;
    return out;
}

}  // namespace

TEST_CASE("all-Hold labels leave the capital untouched") {
    const auto prices = make_prices({100, 101, 99, 102, 100});
    const auto result = simulate(prices, holds(5), BacktestConfig{});
    CHECK(result.final_capital == 10000.0);
    CHECK(result.transactions.empty());
    CHECK(result.total_transaction_length == 0);
    for (double e : result.equity_curve) CHECK(e == 10000.0);
}

TEST_CASE("constant price round trip costs exactly two commissions") {
    const auto prices = make_prices(std::vector<double>(6, 100.0));
    std::vector<TrendLabel> labels = holds(6);
    labels[0] = TrendLabel::Buy;
    labels[5] = TrendLabel::Sell;

    const auto result = simulate(prices, labels, BacktestConfig{});
    REQUIRE(result.transactions.size() == 1);
    const auto& t = result.transactions[0];
    CHECK(t.shares == doctest::Approx(99.99).epsilon(1e-12));
    CHECK(t.buy_index == 0);
    CHECK(t.sell_index == 5);
    CHECK(t.length == 5);
    CHECK(t.gain == doctest::Approx(-2.0).epsilon(1e-9));
    CHECK(result.final_capital == doctest::Approx(9998.0).epsilon(1e-12));
    CHECK_FALSE(t.forced);
}

TEST_CASE("rising price buy-sell example") {
    const auto prices = make_prices({100, 103, 107, 110});
    std::vector<TrendLabel> labels = {TrendLabel::Buy, TrendLabel::Hold, TrendLabel::Hold, TrendLabel::Sell};
    const auto result = simulate(prices, labels, BacktestConfig{});
    REQUIRE(result.transactions.size() == 1);
    CHECK(result.final_capital == doctest::Approx(99.99 * 110 - 1).epsilon(1e-12));  // 10997.90
    CHECK(result.transactions[0].length == 3);
}

TEST_CASE("repeated labels act only once") {
    const auto prices = make_prices({100, 100, 100, 100, 100, 100});
    const std::vector<TrendLabel> labels = {TrendLabel::Buy,  TrendLabel::Buy, TrendLabel::Sell,
                                            TrendLabel::Sell, TrendLabel::Buy, TrendLabel::Sell};
    const auto result = simulate(prices, labels, BacktestConfig{});
    REQUIRE(result.transactions.size() == 2);
    CHECK(result.transactions[0].buy_index == 0);
    CHECK(result.transactions[0].sell_index == 2);
    CHECK(result.transactions[1].buy_index == 4);
    CHECK(result.transactions[1].sell_index == 5);
}

TEST_CASE("a sell while flat and a buy while invested are ignored") {
    const auto prices = make_prices({100, 100, 100, 100});
    const std::vector<TrendLabel> labels = {TrendLabel::Sell, TrendLabel::Buy, TrendLabel::Buy, TrendLabel::Hold};
    BacktestConfig cfg;
    cfg.liquidate_at_end = false;
    const auto result = simulate(prices, labels, cfg);
    CHECK(result.transactions.empty());  // only the open buy, never closed
    CHECK(result.equity_curve[0] == 10000.0);
    CHECK(result.equity_curve[3] == doctest::Approx(9999.0));  // mark-to-market of the open position
}

TEST_CASE("an open position is force-liquidated when configured") {
    const auto prices = make_prices({100, 120});
    const std::vector<TrendLabel> labels = {TrendLabel::Buy, TrendLabel::Hold};
    const auto result = simulate(prices, labels, BacktestConfig{});
    REQUIRE(result.transactions.size() == 1);
    CHECK(result.transactions[0].forced);
    CHECK(result.transactions[0].sell_index == 1);
    CHECK(result.final_capital == doctest::Approx(99.99 * 120 - 1).epsilon(1e-12));
    CHECK(result.equity_curve.back() == result.final_capital);
}

TEST_CASE("conservation on a flat series with zero commission") {
    BacktestConfig cfg;
    cfg.commission = 0;
    Rng rng(55);
    // power-of-two price makes the share arithmetic exact
    const auto prices = make_prices(std::vector<double>(40, 64.0));
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<TrendLabel> labels;
        for (int i = 0; i < 40; ++i) labels.push_back(static_cast<TrendLabel>(rng.index(3)));
        const auto result = simulate(prices, labels, cfg);
        CHECK(result.final_capital == 10000.0);
    }
}

TEST_CASE("k flat round trips cost exactly 2kc") {
    BacktestConfig cfg;
    cfg.commission = 0.5;
    const auto prices = make_prices(std::vector<double>(12, 64.0));
    std::vector<TrendLabel> labels = holds(12);
    labels[0] = TrendLabel::Buy;
    labels[2] = TrendLabel::Sell;
    labels[5] = TrendLabel::Buy;
    labels[6] = TrendLabel::Sell;
    labels[8] = TrendLabel::Buy;
    labels[10] = TrendLabel::Sell;
    const auto result = simulate(prices, labels, cfg);
    REQUIRE(result.transactions.size() == 3);
    CHECK(result.final_capital == doctest::Approx(10000.0 - 2 * 3 * 0.5).epsilon(1e-12));
}

TEST_CASE("ledger gains telescope to the final capital") {
    Rng rng(66);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> prices;
        std::vector<TrendLabel> labels;
        const int n = 10 + static_cast<int>(rng.index(40));
        for (int i = 0; i < n; ++i) {
            prices.push_back(rng.uniform(50, 150));
            labels.push_back(static_cast<TrendLabel>(rng.index(3)));
        }
        const auto result = simulate(make_prices(prices), labels, BacktestConfig{});
        double sum = result.start_capital;
        for (const auto& t : result.transactions) sum += t.gain;
        CHECK(sum == doctest::Approx(result.final_capital).epsilon(1e-9));
        CHECK(result.equity_curve.size() == static_cast<std::size_t>(n));
    }
}

TEST_CASE("equity stays constant while flat") {
    const auto prices = make_prices({100, 90, 80, 120, 100});
    std::vector<TrendLabel> labels = holds(5);
    const auto result = simulate(prices, labels, BacktestConfig{});
    for (double e : result.equity_curve) CHECK(e == 10000.0);
}

TEST_CASE("degenerate buys are rejected") {
    BacktestConfig cfg;
    const auto prices = make_prices({0.5, 0.5});
    const std::vector<TrendLabel> labels = {TrendLabel::Buy, TrendLabel::Sell};
    try {
        simulate(prices, labels, cfg);
        FAIL("expected degenerate-trade error");
    } catch (const Error& e) {
        CHECK(e.error_class() == ErrorClass::DegenerateTrade);
    }
}

TEST_CASE("label/price misalignment is a shape error") {
    const auto prices = make_prices({100, 100});
    try {
        simulate(prices, holds(3), BacktestConfig{});
        FAIL("expected shape error");
    } catch (const Error& e) {
        CHECK(e.error_class() == ErrorClass::Shape);
    }
}

TEST_CASE("simulate matches the straight-line scenario interpreter exactly") {
    Rng rng(1234);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 1 + static_cast<int>(rng.index(50));
        std::vector<double> prices;
        std::vector<TrendLabel> labels;
        for (int i = 0; i < n; ++i) {
            prices.push_back(rng.uniform(50, 150));
            labels.push_back(static_cast<TrendLabel>(rng.index(3)));
        }
        BacktestConfig cfg;
        cfg.liquidate_at_end = (trial % 2 == 0);

        const auto result = simulate(make_prices(prices), labels, cfg);
        const auto oracle = scenario_oracle(prices, labels, cfg);

        REQUIRE(result.equity_curve.size() == oracle.equity.size());
        for (std::size_t i = 0; i < oracle.equity.size(); ++i) {
            CHECK(result.equity_curve[i] == oracle.equity[i]);
        }
        CHECK(result.final_capital == oracle.final_money);
        REQUIRE(result.transactions.size() == oracle.trades.size());
        for (std::size_t i = 0; i < oracle.trades.size(); ++i) {
            CHECK(result.transactions[i].buy_index == static_cast<int>(oracle.trades[i][0]));
            CHECK(result.transactions[i].sell_index == static_cast<int>(oracle.trades[i][1]));
            CHECK(result.transactions[i].gain == oracle.trades[i][2]);
            CHECK(result.transactions[i].capital_after == oracle.trades[i][3]);
        }
    }
}

TEST_CASE("ledger csv mirrors the transaction table") {
    const auto prices = make_prices(std::vector<double>(6, 100.0));
    std::vector<TrendLabel> labels = holds(6);
    labels[0] = TrendLabel::Buy;
    labels[5] = TrendLabel::Sell;
    const auto result = simulate(prices, labels, BacktestConfig{});
    const std::string csv = ledger_to_csv(result);
    CHECK(csv ==
          "transaction,interval,gain,instant_capital,forced\n"
          "1,0-5,-2.00,9998.00,0\n");

    const auto empty = simulate(prices, holds(6), BacktestConfig{});
    CHECK(ledger_to_csv(empty) == "transaction,interval,gain,instant_capital,forced\n");

    const std::string equity_csv = equity_to_csv(result, prices);
    CHECK(equity_csv.substr(0, 13) == "date,capital\n");
    CHECK(equity_csv.find("2015-01-01,9999.00") != std::string::npos);
    CHECK(equity_csv.find("2015-01-06,9998.00") != std::string::npos);
}
