#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "chartnet/backtester.hpp"
#include "chartnet/date.hpp"
#include "chartnet/labeler.hpp"
#include "chartnet/metrics.hpp"
#include "chartnet/neuralnet.hpp"

namespace chartnet {

/// One configuration drives the whole pipeline: encode -> train -> backtest.
struct PipelineConfig {
    std::vector<std::string> inputs;  // OHLCV CSV paths, one ticker each
    Date train_start{1997, 1, 1};
    Date train_end{2006, 12, 31};
    Date test_start{2007, 1, 1};
    Date test_end{2012, 12, 31};
    bool use_adjusted = true;
    QuantileSpec quantiles;
    ModelConfig model;
    BacktestConfig backtest;
    std::string out_dir = "out";
    std::uint64_t seed = 42;
    std::string labels_override;  // optional per-day label file for backtesting
    bool write_svg = true;

    /// Checks ranges and the leakage guard (training may never read
    /// test-period prices; train windows stay inside the train slice).
    void validate() const;

    static PipelineConfig from_json_file(const std::string& path);
    static PipelineConfig from_json_text(const std::string& text);
    std::string to_json() const;
};

/// Per-ticker artifact paths under out_dir/<ticker>/.
struct TickerPaths {
    std::string dir;
    std::string train_dataset;
    std::string test_dataset;
    std::string model;
    std::string train_report;
    std::string ledger;
    std::string equity;
    std::string metrics;
    std::string svg;
};
TickerPaths ticker_paths(const PipelineConfig& config, const std::string& ticker);

std::string ticker_from_path(const std::string& csv_path);

/// Writes train/test labeled datasets (training-period separation points are
/// reused for the test file) and returns a class-count summary per ticker.
std::vector<std::string> run_encode(const PipelineConfig& config);

/// Resamples the train dataset, trains the model, writes model + epoch CSV.
std::vector<std::string> run_train(const PipelineConfig& config);

struct BacktestArtifacts {
    std::string ticker;
    BacktestResult result;
    MetricsReport report;
    double years = 0;
};

/// Predicts a label per test day (first 29 days are Hold), simulates, and
/// writes ledger/equity/metrics plus the aggregate comparison tables.
std::vector<BacktestArtifacts> run_backtest(const PipelineConfig& config);

/// encode + train + backtest with one seed.
std::vector<BacktestArtifacts> run_all(const PipelineConfig& config);

/// Minimal line-chart rendering of the equity curve.
std::string equity_to_svg(const BacktestResult& result);

}  // namespace chartnet
