#pragma once

#include <string>
#include <vector>

#include "chartnet/labeler.hpp"
#include "chartnet/market_data.hpp"

namespace chartnet {

struct BacktestConfig {
    double start_capital = 10000.0;
    double commission = 1.0;  // charged once per buy and once per sell
    bool liquidate_at_end = true;
};

/// One completed round trip.
struct Transaction {
    int buy_index = 0;
    int sell_index = 0;
    double buy_price = 0;
    double sell_price = 0;
    double shares = 0;
    double buy_cost = 0;       // capital consumed at the buy, commission included
    double gain = 0;           // sell proceeds - buy_cost
    int length = 0;            // sell_index - buy_index
    double capital_after = 0;
    bool forced = false;       // end-of-period liquidation
};

struct BacktestResult {
    std::vector<Transaction> transactions;
    std::vector<double> equity_curve;  // daily mark-to-market capital
    double start_capital = 0;
    double final_capital = 0;
    int total_days = 0;
    int total_transaction_length = 0;
};

/// Runs the Buy/Hold/Sell capital-allocation state machine over per-day
/// labels. Buy while flat deploys all cash (one commission); Sell while
/// invested liquidates (one commission); everything else is a no-op, which
/// also makes repeated labels act only once. An open position at the end is
/// force-sold at the final close when liquidate_at_end is set.
BacktestResult simulate(const PriceSeries& prices, const std::vector<TrendLabel>& labels,
                        const BacktestConfig& config);

/// Ledger rows: number, interval "buy-sell", gain, instant capital, forced.
std::string ledger_to_csv(const BacktestResult& result);

/// Daily equity as "date,capital" rows.
std::string equity_to_csv(const BacktestResult& result, const PriceSeries& prices);

}  // namespace chartnet
