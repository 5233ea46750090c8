#include "chartnet/backtester.hpp"

#include <cstdio>

#include "chartnet/error.hpp"

namespace chartnet {

namespace {

std::string money(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

BacktestResult simulate(const PriceSeries& prices, const std::vector<TrendLabel>& labels,
                        const BacktestConfig& config) {
    if (prices.size() == 0) raise(ErrorClass::Validation, "empty price series");
    if (labels.size() != prices.size()) {
        raise(ErrorClass::Shape, "labels (" + std::to_string(labels.size()) + ") do not align with prices (" +
                                     std::to_string(prices.size()) + ")");
    }
    if (config.start_capital <= 0) raise(ErrorClass::Validation, "start capital must be positive");
    if (config.commission < 0) raise(ErrorClass::Validation, "negative commission");

    BacktestResult result;
    result.start_capital = config.start_capital;
    result.total_days = static_cast<int>(prices.size());
    result.equity_curve.reserve(prices.size());

    double cash = config.start_capital;
    bool invested = false;
    double shares = 0;
    double buy_cost = 0;
    double buy_price = 0;
    int buy_index = 0;

    auto close_position = [&](int day, double price, bool forced) {
        const double proceeds = shares * price - config.commission;
        cash = proceeds;
        result.transactions.push_back(Transaction{buy_index, day, buy_price, price, shares, buy_cost,
                                                  proceeds - buy_cost, day - buy_index, cash, forced});
        result.total_transaction_length += day - buy_index;
        invested = false;
        shares = 0;
    };

    for (std::size_t i = 0; i < prices.size(); ++i) {
        const double price = prices.prices[i];
        const TrendLabel label = labels[i];

        if (label == TrendLabel::Buy && !invested) {
            if (price <= config.commission || cash <= config.commission) {
                raise(ErrorClass::DegenerateTrade, "buy on day " + std::to_string(i) + " at price " +
                                                       money(price) + " with capital " + money(cash) +
                                                       " cannot cover the commission");
            }
            shares = (cash - config.commission) / price;
            buy_cost = cash;
            buy_price = price;
            buy_index = static_cast<int>(i);
            cash = 0;
            invested = true;
        } else if (label == TrendLabel::Sell && invested) {
            close_position(static_cast<int>(i), price, false);
        }
        result.equity_curve.push_back(invested ? shares * price : cash);
    }

    if (invested && config.liquidate_at_end) {
        const int last = static_cast<int>(prices.size()) - 1;
        close_position(last, prices.prices.back(), true);
        result.equity_curve.back() = cash;
    }

    result.final_capital = result.equity_curve.back();
    return result;
}

std::string ledger_to_csv(const BacktestResult& result) {
    std::string out = "transaction,interval,gain,instant_capital,forced\n";
    int number = 1;
    for (const auto& t : result.transactions) {
        out += std::to_string(number++);
        out += ',';
        out += std::to_string(t.buy_index) + "-" + std::to_string(t.sell_index);
        out += ',';
        out += money(t.gain);
        out += ',';
        out += money(t.capital_after);
        out += ',';
        out += t.forced ? '1' : '0';
        out += '\n';
    }
    return out;
}

std::string equity_to_csv(const BacktestResult& result, const PriceSeries& prices) {
    if (prices.dates.size() != result.equity_curve.size()) {
        raise(ErrorClass::Shape, "equity curve does not align with the price series");
    }
    std::string out = "date,capital\n";
    for (std::size_t i = 0; i < result.equity_curve.size(); ++i) {
        out += prices.dates[i].to_string();
        out += ',';
        out += money(result.equity_curve[i]);
        out += '\n';
    }
    return out;
}

}  // namespace chartnet
