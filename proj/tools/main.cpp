#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "chartnet/error.hpp"
#include "chartnet/pipeline.hpp"

namespace {

using chartnet::PipelineConfig;

struct Overrides {
    std::string config_path;
    std::vector<std::string> inputs;
    std::string train_start, train_end, test_start, test_end;
    std::string channel;
    std::string out_dir;
    std::string optimizer;
    std::string labels;
    int epochs = -1;
    int batch_size = -1;
    double learning_rate = -1;
    double commission = -1;
    double capital = -1;
    std::int64_t seed = -1;
    bool no_svg = false;
};

void add_common_options(CLI::App* cmd, Overrides& o) {
    cmd->add_option("-c,--config", o.config_path, "JSON config file");
    cmd->add_option("-i,--input", o.inputs, "OHLCV CSV file (repeatable, one ticker each)");
    cmd->add_option("--train-start", o.train_start, "train range start, YYYY-MM-DD");
    cmd->add_option("--train-end", o.train_end, "train range end");
    cmd->add_option("--test-start", o.test_start, "test range start");
    cmd->add_option("--test-end", o.test_end, "test range end");
    cmd->add_option("--channel", o.channel, "price channel: adjusted (default) or close");
    cmd->add_option("-o,--out", o.out_dir, "output directory");
    cmd->add_option("--epochs", o.epochs, "training epochs");
    cmd->add_option("--batch-size", o.batch_size, "minibatch size");
    cmd->add_option("--lr", o.learning_rate, "learning rate");
    cmd->add_option("--optimizer", o.optimizer, "sgd or adam");
    cmd->add_option("--seed", o.seed, "global deterministic seed");
    cmd->add_option("--commission", o.commission, "commission per transaction leg");
    cmd->add_option("--capital", o.capital, "starting capital");
    cmd->add_flag("--no-svg", o.no_svg, "skip the equity SVG plot");
}

PipelineConfig build_config(const Overrides& o) {
    PipelineConfig c;
    if (!o.config_path.empty()) c = PipelineConfig::from_json_file(o.config_path);
    if (!o.inputs.empty()) c.inputs = o.inputs;
    if (!o.train_start.empty()) c.train_start = chartnet::Date::parse(o.train_start);
    if (!o.train_end.empty()) c.train_end = chartnet::Date::parse(o.train_end);
    if (!o.test_start.empty()) c.test_start = chartnet::Date::parse(o.test_start);
    if (!o.test_end.empty()) c.test_end = chartnet::Date::parse(o.test_end);
    if (!o.channel.empty()) {
        if (o.channel == "adjusted") {
            c.use_adjusted = true;
        } else if (o.channel == "close") {
            c.use_adjusted = false;
        } else {
            chartnet::raise(chartnet::ErrorClass::Config, "--channel must be 'adjusted' or 'close'");
        }
    }
    if (!o.out_dir.empty()) c.out_dir = o.out_dir;
    if (o.epochs >= 0) c.model.epochs = o.epochs;
    if (o.batch_size >= 0) c.model.batch_size = o.batch_size;
    if (o.learning_rate >= 0) c.model.learning_rate = o.learning_rate;
    if (!o.optimizer.empty()) {
        if (o.optimizer == "adam") {
            c.model.optimizer = chartnet::ModelConfig::Optimizer::Adam;
        } else if (o.optimizer == "sgd") {
            c.model.optimizer = chartnet::ModelConfig::Optimizer::Sgd;
        } else {
            chartnet::raise(chartnet::ErrorClass::Config, "--optimizer must be 'sgd' or 'adam'");
        }
    }
    if (o.seed >= 0) c.seed = static_cast<std::uint64_t>(o.seed);
    if (o.commission >= 0) c.backtest.commission = o.commission;
    if (o.capital >= 0) c.backtest.start_capital = o.capital;
    if (!o.labels.empty()) c.labels_override = o.labels;
    if (o.no_svg) c.write_svg = false;
    return c;
}

void print_backtest_summary(const std::vector<chartnet::BacktestArtifacts>& artifacts,
                            const PipelineConfig& config) {
    for (const auto& art : artifacts) {
        std::cout << art.ticker << ": AR " << art.report.ar << "% vs BaH " << art.report.bah_ar << "%, "
                  << art.result.transactions.size() << " transactions, final capital "
                  << art.result.final_capital << "\n";
    }
    std::cout << "tables written to " << config.out_dir << "/table2.csv and table3.csv\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"chart-image trading pipeline: encode, train, backtest"};
    app.require_subcommand(1);

    Overrides o;
    auto* encode = app.add_subcommand("encode", "build labeled train/test image datasets");
    auto* train = app.add_subcommand("train", "train the model on an encoded dataset");
    auto* backtest = app.add_subcommand("backtest", "predict test-day labels and evaluate the trades");
    auto* run_all = app.add_subcommand("run-all", "encode, train and backtest in one go");
    for (auto* cmd : {encode, train, backtest, run_all}) add_common_options(cmd, o);
    backtest->add_option("--labels", o.labels, "per-day label file bypassing the model");
    run_all->add_option("--labels", o.labels, "per-day label file bypassing the model");

    CLI11_PARSE(app, argc, argv);

    try {
        const PipelineConfig config = build_config(o);
        if (encode->parsed()) {
            for (const auto& line : chartnet::run_encode(config)) std::cout << line << "\n";
        } else if (train->parsed()) {
            for (const auto& line : chartnet::run_train(config)) std::cout << line << "\n";
        } else if (backtest->parsed()) {
            print_backtest_summary(chartnet::run_backtest(config), config);
        } else if (run_all->parsed()) {
            print_backtest_summary(chartnet::run_all(config), config);
        }
    } catch (const chartnet::Error& e) {
        std::cerr << "error:" << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error:internal: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
