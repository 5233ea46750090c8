#include "chartnet/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "chartnet/chart_encoder.hpp"
#include "chartnet/error.hpp"

namespace chartnet {

namespace fs = std::filesystem;

namespace {

void write_text_file(const std::string& path, const std::string& content) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorClass::Io, "cannot open '" + path + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) raise(ErrorClass::Io, "failed writing '" + path + "'");
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorClass::Io, "cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Runs fn once per input path, fanning out across tickers; results come back
// in input order.
template <typename F>
auto per_ticker(const PipelineConfig& config, F fn) {
    using R = decltype(fn(std::string()));
    std::vector<std::future<R>> futures;
    futures.reserve(config.inputs.size());
    for (const auto& path : config.inputs) {
        futures.push_back(std::async(std::launch::async, fn, path));
    }
    std::vector<R> out;
    out.reserve(futures.size());
    for (auto& f : futures) out.push_back(f.get());
    return out;
}

struct EncodedPair {
    LabeledDataset train;
    LabeledDataset test;
};

EncodedPair encode_ticker(const PipelineConfig& config, const std::string& csv_path) {
    const OhlcvSeries series = parse_csv_file(csv_path);

    const PriceSeries train_prices =
        close_prices(slice_by_date(series, config.train_start, config.train_end), config.use_adjusted);
    const auto train_windows = sliding_windows(train_prices, true);
    const auto reference = build_reference_list(train_windows);
    const auto sep = separation_points(reference, config.quantiles);

    auto encode_all = [](const std::vector<PriceWindow>& windows) {
        std::vector<ChartImage> images;
        images.reserve(windows.size());
        for (const auto& w : windows) images.push_back(encode_image(normalize_window(w.closes)));
        return images;
    };

    EncodedPair pair;
    pair.train = label_dataset(train_windows, encode_all(train_windows), sep);

    const PriceSeries test_prices =
        close_prices(slice_by_date(series, config.test_start, config.test_end), config.use_adjusted);
    const auto test_windows = sliding_windows(test_prices, true);
    // training-period separation points are reused so no test-period
    // information leaks into the labels
    pair.test = label_dataset(test_windows, encode_all(test_windows), sep);
    return pair;
}

std::string counts_summary(const char* tag, const LabeledDataset& d) {
    const auto counts = class_counts(d);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s: %zu samples (hold=%zu buy=%zu sell=%zu)", tag, d.samples.size(),
                  counts[0], counts[1], counts[2]);
    return buf;
}

std::string epoch_report_csv(const TrainReport& report) {
    std::string out = "epoch,loss,accuracy\n";
    for (const auto& e : report.epochs) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g\n", e.epoch, e.loss, e.accuracy);
        out += buf;
    }
    if (report.validation_accuracy.has_value()) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "# validation_accuracy,%.10g\n", *report.validation_accuracy);
        out += buf;
    }
    return out;
}

std::vector<TrendLabel> read_labels_file(const std::string& path, std::size_t expected) {
    std::ifstream in(path);
    if (!in) raise(ErrorClass::Io, "cannot open '" + path + "'");
    std::vector<TrendLabel> labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        int value = 0;
        auto [p, ec] = std::from_chars(line.data(), line.data() + line.size(), value);
        if (ec != std::errc() || p != line.data() + line.size()) {
            raise(ErrorClass::Parse, path + ": line " + std::to_string(line_no) + ": malformed label");
        }
        labels.push_back(label_from_int(value));
    }
    if (labels.size() != expected) {
        raise(ErrorClass::Alignment, path + ": " + std::to_string(labels.size()) + " labels for " +
                                         std::to_string(expected) + " test days");
    }
    return labels;
}

double evaluation_years(const PriceSeries& prices) {
    const double years = calendar_years(prices.dates.front(), prices.dates.back());
    return years > 0 ? years : trading_years(static_cast<int>(prices.size()));
}

}  // namespace

void PipelineConfig::validate() const {
    if (inputs.empty()) raise(ErrorClass::Config, "no input CSV files");
    if (train_end < train_start) raise(ErrorClass::Config, "train range end precedes start");
    if (test_end < test_start) raise(ErrorClass::Config, "test range end precedes start");
    // leakage guard: train labels consume prices up to 15 trading days past a
    // window's end, and those windows live entirely inside the train slice,
    // so disjoint date ranges are sufficient
    if (!(train_end < test_start)) {
        raise(ErrorClass::Config, "train range must end before the test range starts (train_end " +
                                      train_end.to_string() + " vs test_start " + test_start.to_string() + ")");
    }
    if (!(quantiles.sell_num * quantiles.buy_den <= quantiles.buy_num * quantiles.sell_den)) {
        raise(ErrorClass::Config, "sell quantile must not exceed buy quantile");
    }
}

PipelineConfig PipelineConfig::from_json_text(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) raise(ErrorClass::Config, "config is not valid JSON");

    PipelineConfig c;
    try {
        if (j.contains("inputs")) c.inputs = j["inputs"].get<std::vector<std::string>>();
        if (j.contains("train_start")) c.train_start = Date::parse(j["train_start"].get<std::string>());
        if (j.contains("train_end")) c.train_end = Date::parse(j["train_end"].get<std::string>());
        if (j.contains("test_start")) c.test_start = Date::parse(j["test_start"].get<std::string>());
        if (j.contains("test_end")) c.test_end = Date::parse(j["test_end"].get<std::string>());
        if (j.contains("price_channel")) {
            const auto channel = j["price_channel"].get<std::string>();
            if (channel == "adjusted") {
                c.use_adjusted = true;
            } else if (channel == "close") {
                c.use_adjusted = false;
            } else {
                raise(ErrorClass::Config, "price_channel must be 'adjusted' or 'close'");
            }
        }
        if (j.contains("quantiles")) {
            const auto& q = j["quantiles"];
            c.quantiles.sell_num = q.value("sell_num", 2);
            c.quantiles.sell_den = q.value("sell_den", 5);
            c.quantiles.buy_num = q.value("buy_num", 3);
            c.quantiles.buy_den = q.value("buy_den", 5);
        }
        if (j.contains("model")) {
            const auto& m = j["model"];
            c.model.epochs = m.value("epochs", c.model.epochs);
            c.model.batch_size = m.value("batch_size", c.model.batch_size);
            c.model.learning_rate = m.value("learning_rate", c.model.learning_rate);
            c.model.dropout1 = m.value("dropout1", c.model.dropout1);
            c.model.dropout2 = m.value("dropout2", c.model.dropout2);
            const auto optimizer = m.value("optimizer", std::string("sgd"));
            if (optimizer == "adam") {
                c.model.optimizer = ModelConfig::Optimizer::Adam;
            } else if (optimizer == "sgd") {
                c.model.optimizer = ModelConfig::Optimizer::Sgd;
            } else {
                raise(ErrorClass::Config, "optimizer must be 'sgd' or 'adam'");
            }
            c.model.adam_beta1 = m.value("adam_beta1", c.model.adam_beta1);
            c.model.adam_beta2 = m.value("adam_beta2", c.model.adam_beta2);
            c.model.adam_epsilon = m.value("adam_epsilon", c.model.adam_epsilon);
        }
        if (j.contains("backtest")) {
            const auto& b = j["backtest"];
            c.backtest.start_capital = b.value("start_capital", c.backtest.start_capital);
            c.backtest.commission = b.value("commission", c.backtest.commission);
            c.backtest.liquidate_at_end = b.value("liquidate_at_end", c.backtest.liquidate_at_end);
        }
        if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("labels_override")) c.labels_override = j["labels_override"].get<std::string>();
        if (j.contains("write_svg")) c.write_svg = j["write_svg"].get<bool>();
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorClass::Config, std::string("bad config value: ") + e.what());
    }
    return c;
}

PipelineConfig PipelineConfig::from_json_file(const std::string& path) {
    try {
        return from_json_text(read_text_file(path));
    } catch (const Error& e) {
        throw Error(e.error_class(), path + ": " + e.what());
    }
}

std::string PipelineConfig::to_json() const {
    nlohmann::ordered_json j;
    j["inputs"] = inputs;
    j["train_start"] = train_start.to_string();
    j["train_end"] = train_end.to_string();
    j["test_start"] = test_start.to_string();
    j["test_end"] = test_end.to_string();
    j["price_channel"] = use_adjusted ? "adjusted" : "close";
    j["quantiles"] = {{"sell_num", quantiles.sell_num},
                      {"sell_den", quantiles.sell_den},
                      {"buy_num", quantiles.buy_num},
                      {"buy_den", quantiles.buy_den}};
    j["model"] = {{"epochs", model.epochs},
                  {"batch_size", model.batch_size},
                  {"learning_rate", model.learning_rate},
                  {"optimizer", model.optimizer == ModelConfig::Optimizer::Adam ? "adam" : "sgd"},
                  {"dropout1", model.dropout1},
                  {"dropout2", model.dropout2}};
    j["backtest"] = {{"start_capital", backtest.start_capital},
                     {"commission", backtest.commission},
                     {"liquidate_at_end", backtest.liquidate_at_end}};
    j["out_dir"] = out_dir;
    j["seed"] = seed;
    j["labels_override"] = labels_override;
    j["write_svg"] = write_svg;
    return j.dump(2) + "\n";
}

std::string ticker_from_path(const std::string& csv_path) {
    return fs::path(csv_path).stem().string();
}

TickerPaths ticker_paths(const PipelineConfig& config, const std::string& ticker) {
    TickerPaths p;
    p.dir = (fs::path(config.out_dir) / ticker).string();
    p.train_dataset = p.dir + "/images_train.csv";
    p.test_dataset = p.dir + "/images_test.csv";
    p.model = p.dir + "/model.bin";
    p.train_report = p.dir + "/train_report.csv";
    p.ledger = p.dir + "/ledger.csv";
    p.equity = p.dir + "/equity.csv";
    p.metrics = p.dir + "/metrics.json";
    p.svg = p.dir + "/equity.svg";
    return p;
}

std::vector<std::string> run_encode(const PipelineConfig& config) {
    config.validate();
    return per_ticker(config, [&config](const std::string& csv_path) {
        const std::string ticker = ticker_from_path(csv_path);
        const TickerPaths paths = ticker_paths(config, ticker);
        const EncodedPair pair = encode_ticker(config, csv_path);
        write_text_file(paths.train_dataset, serialize_dataset(pair.train));
        write_text_file(paths.test_dataset, serialize_dataset(pair.test));
        return ticker + " " + counts_summary("train", pair.train) + "; " + counts_summary("test", pair.test);
    });
}

std::vector<std::string> run_train(const PipelineConfig& config) {
    config.validate();
    return per_ticker(config, [&config](const std::string& csv_path) {
        const std::string ticker = ticker_from_path(csv_path);
        const TickerPaths paths = ticker_paths(config, ticker);

        LabeledDataset dataset = deserialize_dataset(read_text_file(paths.train_dataset));
        dataset = resample_balanced(dataset, config.seed);

        std::optional<LabeledDataset> validation;
        if (fs::exists(paths.test_dataset)) {
            validation = deserialize_dataset(read_text_file(paths.test_dataset));
        }

        ModelConfig mc = config.model;
        mc.seed = config.seed;
        auto [model, report] = train(dataset, mc, validation ? &*validation : nullptr);

        save_model_file(model, paths.model);
        write_text_file(paths.train_report, epoch_report_csv(report));

        char buf[160];
        if (report.epochs.empty()) {
            std::snprintf(buf, sizeof(buf), "%s: untrained model written (0 epochs)", ticker.c_str());
        } else {
            std::snprintf(buf, sizeof(buf), "%s: %d epochs, final loss %.4f, accuracy %.3f", ticker.c_str(),
                          static_cast<int>(report.epochs.size()), report.epochs.back().loss,
                          report.epochs.back().accuracy);
        }
        std::string summary(buf);
        if (report.validation_accuracy.has_value()) {
            std::snprintf(buf, sizeof(buf), ", validation accuracy %.3f", *report.validation_accuracy);
            summary += buf;
        }
        return summary;
    });
}

std::vector<BacktestArtifacts> run_backtest(const PipelineConfig& config) {
    config.validate();
    auto artifacts = per_ticker(config, [&config](const std::string& csv_path) {
        const std::string ticker = ticker_from_path(csv_path);
        const TickerPaths paths = ticker_paths(config, ticker);

        const OhlcvSeries series = parse_csv_file(csv_path);
        const PriceSeries prices =
            close_prices(slice_by_date(series, config.test_start, config.test_end), config.use_adjusted);

        std::vector<TrendLabel> labels;
        if (!config.labels_override.empty()) {
            labels = read_labels_file(config.labels_override, prices.size());
        } else {
            const CnnModel model = load_model_file(paths.model);
            const auto windows = sliding_windows(prices, false);
            labels.assign(prices.size(), TrendLabel::Hold);
            for (const auto& w : windows) {
                labels[static_cast<std::size_t>(w.end_index)] =
                    predict(model, encode_image(normalize_window(w.closes))).first;
            }
        }

        BacktestArtifacts art;
        art.ticker = ticker;
        art.result = simulate(prices, labels, config.backtest);
        art.years = evaluation_years(prices);
        art.report = compute_report(art.result, art.years);
        art.report.bah_ar =
            buy_and_hold_return(prices, config.backtest.start_capital, config.backtest.commission, art.years);

        write_text_file(paths.ledger, ledger_to_csv(art.result));
        write_text_file(paths.equity, equity_to_csv(art.result, prices));
        write_text_file(paths.metrics, report_to_json(art.report, art.result, art.years));
        if (config.write_svg) write_text_file(paths.svg, equity_to_svg(art.result));
        return art;
    });

    // aggregate tables, one row per ticker plus the average row
    std::string table2 = "ticker,model_ar,bah_ar\n";
    std::string table3 = report_csv_header();
    double sum_ar = 0, sum_bah = 0;
    for (const auto& art : artifacts) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%s,%.4f,%.4f\n", art.ticker.c_str(), art.report.ar, art.report.bah_ar);
        table2 += buf;
        table3 += report_to_csv_row(art.ticker, art.report);
        sum_ar += art.report.ar;
        sum_bah += art.report.bah_ar;
    }
    if (!artifacts.empty()) {
        const double n = static_cast<double>(artifacts.size());
        char buf[96];
        std::snprintf(buf, sizeof(buf), "Average,%.4f,%.4f\n", sum_ar / n, sum_bah / n);
        table2 += buf;

        MetricsReport avg;
        std::size_t romad_count = 0;
        double romad_sum = 0;
        for (const auto& art : artifacts) {
            avg.ar += art.report.ar;
            avg.bah_ar += art.report.bah_ar;
            avg.ant += art.report.ant;
            avg.pos += art.report.pos;
            avg.apt += art.report.apt;
            avg.avg_length += art.report.avg_length;
            avg.mpt += art.report.mpt;
            avg.mlt += art.report.mlt;
            avg.maxc += art.report.maxc;
            avg.minc += art.report.minc;
            avg.idle_ratio += art.report.idle_ratio;
            avg.mdd += art.report.mdd;
            if (art.report.romad.has_value()) {
                romad_sum += *art.report.romad;
                ++romad_count;
            }
        }
        for (double* field : {&avg.ar, &avg.bah_ar, &avg.ant, &avg.pos, &avg.apt, &avg.avg_length, &avg.mpt,
                              &avg.mlt, &avg.maxc, &avg.minc, &avg.idle_ratio, &avg.mdd}) {
            *field /= n;
        }
        if (romad_count > 0) avg.romad = romad_sum / static_cast<double>(romad_count);
        table3 += report_to_csv_row("Average", avg);
    }
    write_text_file((fs::path(config.out_dir) / "table2.csv").string(), table2);
    write_text_file((fs::path(config.out_dir) / "table3.csv").string(), table3);
    return artifacts;
}

std::vector<BacktestArtifacts> run_all(const PipelineConfig& config) {
    run_encode(config);
    run_train(config);
    return run_backtest(config);
}

std::string equity_to_svg(const BacktestResult& result) {
    const int width = 800, height = 400, pad = 45;
    const auto& curve = result.equity_curve;
    const auto [lo_it, hi_it] = std::minmax_element(curve.begin(), curve.end());
    const double lo = *lo_it, hi = *hi_it;
    const double span = hi > lo ? hi - lo : 1.0;
    const double dx = curve.size() > 1 ? static_cast<double>(width - 2 * pad) / static_cast<double>(curve.size() - 1)
                                       : 0.0;

    std::string svg;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
                  "viewBox=\"0 0 %d %d\">\n",
                  width, height, width, height);
    svg += buf;
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof(buf), "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"none\" stroke=\"#999\"/>\n",
                  pad, pad, width - 2 * pad, height - 2 * pad);
    svg += buf;

    svg += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < curve.size(); ++i) {
        const double x = pad + dx * static_cast<double>(i);
        const double y = height - pad - (curve[i] - lo) / span * (height - 2 * pad);
        std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", x, y);
        svg += buf;
    }
    svg += "\"/>\n";

    std::snprintf(buf, sizeof(buf), "<text x=\"%d\" y=\"%d\" font-size=\"12\">%.2f</text>\n", 2, pad + 4, hi);
    svg += buf;
    std::snprintf(buf, sizeof(buf), "<text x=\"%d\" y=\"%d\" font-size=\"12\">%.2f</text>\n", 2, height - pad, lo);
    svg += buf;
    std::snprintf(buf, sizeof(buf), "<text x=\"%d\" y=\"%d\" font-size=\"12\">equity over %d days</text>\n", pad,
                  height - 8, result.total_days);
    svg += buf;
    svg += "</svg>\n";
    return svg;
}

}  // namespace chartnet
