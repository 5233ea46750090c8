#pragma once

#include <optional>
#include <string>

#include "chartnet/backtester.hpp"
#include "chartnet/market_data.hpp"

namespace chartnet {

/// The twelve trade-statistics metrics of one backtest.
struct MetricsReport {
    double ar = 0;           // annualized return, percent per year
    double bah_ar = 0;       // buy-and-hold annualized return
    double ant = 0;          // transactions per year
    double pos = 0;          // percent of transactions with positive gain
    double apt = 0;          // mean per-transaction percent return
    double avg_length = 0;   // mean transaction length, days
    double mpt = 0;          // best per-transaction percent return
    double mlt = 0;          // worst per-transaction percent return
    double maxc = 0;         // equity-curve maximum
    double minc = 0;         // equity-curve minimum
    double idle_ratio = 0;   // percent of days with no open position
    double mdd = 0;          // maximum drawdown, percent
    std::optional<double> romad;  // total return / MDD; unset when MDD == 0
};

/// ((total/start)^(1/years) - 1) * 100.
double annualized_return(double total, double start, double years);

/// Single round trip: buy the first close, sell the last, commissions on
/// both legs, then annualize.
double buy_and_hold_return(const PriceSeries& prices, double start_capital, double commission,
                           double years);

/// Fills every metric except bah_ar (which needs the price series).
MetricsReport compute_report(const BacktestResult& result, double years);

/// total_days / 252, for series without calendar dates.
double trading_years(int total_days);

std::string report_to_json(const MetricsReport& report, const BacktestResult& result, double years);

std::string report_csv_header();
std::string report_to_csv_row(const std::string& ticker, const MetricsReport& report);

}  // namespace chartnet
