#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "chartnet/error.hpp"
#include "chartnet/pipeline.hpp"

using namespace chartnet;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("chartnet_tests_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Deterministic sinusoid OHLCV fixture; one row per calendar day.
void write_fixture_csv(const fs::path& path, int days, double period = 37.0) {
    std::ofstream out(path);
    out << "date,open,high,low,close,adjusted_close,volume\n";
    const std::int64_t base = Date{2000, 1, 1}.day_number();
    for (int i = 0; i < days; ++i) {
        const double close = 100.0 + 20.0 * std::sin(2 * 3.141592653589793 * i / period) + 0.01 * i;
        const double open = close * 0.995;
        char line[160];
        std::snprintf(line, sizeof(line), "%s,%.4f,%.4f,%.4f,%.4f,%.4f,%d\n",
                      Date::from_day_number(base + i).to_string().c_str(), open, close * 1.01, open * 0.99,
                      close, close, 1000 + i);
        out << line;
    }
}

PipelineConfig small_config(const fs::path& dir, const fs::path& csv) {
    PipelineConfig c;
    c.inputs = {csv.string()};
    c.train_start = Date{2000, 1, 1};
    c.train_end = Date{2000, 4, 9};   // first 100 days
    c.test_start = Date{2000, 4, 10};
    c.test_end = Date{2000, 12, 31};
    c.out_dir = (dir / "out").string();
    c.model.epochs = 1;
    c.model.batch_size = 64;
    c.model.learning_rate = 0.01;
    c.model.arch = ArchitectureSpec{30, 30, 1, 2, 2, 8, 3};
    c.seed = 5;
    c.write_svg = true;
    return c;
}

int run_cli(const std::string& args, const fs::path& dir, const std::string& tag) {
    const fs::path out = dir / (tag + ".stdout");
    const fs::path err = dir / (tag + ".stderr");
    const std::string cmd = std::string(CHARTNET_CLI_PATH) + " " + args + " >" + out.string() + " 2>" +
                            err.string();
    const int status = std::system(cmd.c_str());
    return status == -1 ? -1 : WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("config validation enforces the range ordering and leakage guard") {
    PipelineConfig c;
    c.inputs = {"x.csv"};
    c.train_start = Date{2000, 1, 1};
    c.train_end = Date{2005, 1, 1};
    c.test_start = Date{2004, 12, 31};  // overlaps the train range
    c.test_end = Date{2006, 1, 1};
    try {
        c.validate();
        FAIL("expected config error");
    } catch (const Error& e) {
        CHECK(e.error_class() == ErrorClass::Config);
    }

    c.test_start = Date{2005, 1, 2};
    CHECK_NOTHROW(c.validate());

    c.inputs.clear();
    CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("config json round trip") {
    PipelineConfig c;
    c.inputs = {"a.csv", "b.csv"};
    c.model.epochs = 7;
    c.model.optimizer = ModelConfig::Optimizer::Adam;
    c.backtest.commission = 2.5;
    c.quantiles = QuantileSpec{1, 3, 2, 3};
    c.seed = 99;
    c.use_adjusted = false;
    const auto parsed = PipelineConfig::from_json_text(c.to_json());
    CHECK(parsed.inputs == c.inputs);
    CHECK(parsed.model.epochs == 7);
    CHECK(parsed.model.optimizer == ModelConfig::Optimizer::Adam);
    CHECK(parsed.backtest.commission == 2.5);
    CHECK(parsed.quantiles.sell_num == 1);
    CHECK(parsed.quantiles.buy_den == 3);
    CHECK(parsed.seed == 99);
    CHECK_FALSE(parsed.use_adjusted);

    CHECK_THROWS_AS(PipelineConfig::from_json_text("not json"), Error);
}

TEST_CASE("encode produces the expected window count on a 100-day train slice") {
    const auto dir = fresh_dir("encode");
    const auto csv = dir / "SYN.csv";
    write_fixture_csv(csv, 300);
    const auto config = small_config(dir, csv);

    const auto summaries = run_encode(config);
    REQUIRE(summaries.size() == 1);
    // 100 - 30 - 15 + 1 labeled windows
    CHECK(summaries[0].find("train: 56 samples") != std::string::npos);

    const auto paths = ticker_paths(config, "SYN");
    REQUIRE(fs::exists(paths.train_dataset));
    REQUIRE(fs::exists(paths.test_dataset));

    const std::string train_text = read_file(paths.train_dataset);
    CHECK(train_text.rfind("#sep,", 0) == 0);
    // test dataset reuses the training separation points
    const std::string test_text = read_file(paths.test_dataset);
    CHECK(test_text.substr(0, test_text.find('\n')) == train_text.substr(0, train_text.find('\n')));
}

TEST_CASE("encode propagates missing-file and short-range errors") {
    const auto dir = fresh_dir("encode_errors");
    PipelineConfig config = small_config(dir, dir / "missing.csv");
    try {
        run_encode(config);
        FAIL("expected io error");
    } catch (const Error& e) {
        CHECK(e.error_class() == ErrorClass::Io);
    }

    const auto csv = dir / "SHORT.csv";
    write_fixture_csv(csv, 60);  // 40 train days: too short for a labeled window
    config = small_config(dir, csv);
    config.train_end = Date{2000, 2, 9};
    CHECK_THROWS_AS(run_encode(config), Error);
}

TEST_CASE("train writes a model and a per-epoch report") {
    const auto dir = fresh_dir("train");
    const auto csv = dir / "SYN.csv";
    write_fixture_csv(csv, 300);
    auto config = small_config(dir, csv);

    run_encode(config);
    const auto summaries = run_train(config);
    REQUIRE(summaries.size() == 1);

    const auto paths = ticker_paths(config, "SYN");
    REQUIRE(fs::exists(paths.model));
    const CnnModel model = load_model_file(paths.model);
    CHECK(model.config.arch == config.model.arch);

    const std::string report = read_file(paths.train_report);
    CHECK(report.rfind("epoch,loss,accuracy\n", 0) == 0);
    CHECK(report.find("\n1,") != std::string::npos);
    CHECK(report.find("# validation_accuracy,") != std::string::npos);

    SUBCASE("epochs=0 still writes a loadable untrained model") {
        auto zero = config;
        zero.model.epochs = 0;
        zero.out_dir = (dir / "out0").string();
        run_encode(zero);
        run_train(zero);
        const auto zp = ticker_paths(zero, "SYN");
        const CnnModel untrained = load_model_file(zp.model);
        ModelConfig expected_cfg = zero.model;
        expected_cfg.seed = zero.seed;
        CHECK(untrained == CnnModel::initialize(expected_cfg));
    }
}

TEST_CASE("backtest with a label override equals a direct simulate") {
    const auto dir = fresh_dir("override");
    const auto csv = dir / "SYN.csv";
    write_fixture_csv(csv, 300);
    auto config = small_config(dir, csv);

    // test slice: days 100..299 of the fixture
    const auto series = parse_csv_file(csv.string());
    const auto prices = close_prices(slice_by_date(series, config.test_start, config.test_end), true);

    std::vector<TrendLabel> labels(prices.size(), TrendLabel::Hold);
    for (std::size_t i = 30; i + 10 < labels.size(); i += 40) {
        labels[i] = TrendLabel::Buy;
        labels[i + 10] = TrendLabel::Sell;
    }
    const auto labels_path = dir / "labels.txt";
    {
        std::ofstream out(labels_path);
        for (TrendLabel l : labels) out << static_cast<int>(l) << "\n";
    }

    config.labels_override = labels_path.string();
    const auto artifacts = run_backtest(config);
    REQUIRE(artifacts.size() == 1);

    const auto direct = simulate(prices, labels, config.backtest);
    CHECK(artifacts[0].result.final_capital == direct.final_capital);
    CHECK(artifacts[0].result.transactions.size() == direct.transactions.size());
    CHECK(ledger_to_csv(artifacts[0].result) == ledger_to_csv(direct));

    const auto paths = ticker_paths(config, "SYN");
    CHECK(fs::exists(paths.ledger));
    CHECK(fs::exists(paths.equity));
    CHECK(fs::exists(paths.metrics));
    CHECK(fs::exists(paths.svg));
    CHECK(fs::exists(fs::path(config.out_dir) / "table2.csv"));
    CHECK(fs::exists(fs::path(config.out_dir) / "table3.csv"));

    const std::string table2 = read_file(fs::path(config.out_dir) / "table2.csv");
    CHECK(table2.rfind("ticker,model_ar,bah_ar\n", 0) == 0);
    CHECK(table2.find("Average,") != std::string::npos);

    SUBCASE("label count mismatch is an alignment error") {
        std::ofstream out(labels_path, std::ios::app);
        out << "0\n";
        out.close();
        CHECK_THROWS_AS(run_backtest(config), Error);
    }
}

TEST_CASE("run_all is deterministic at the byte level") {
    const auto dir = fresh_dir("determinism");
    const auto csv = dir / "SYN.csv";
    write_fixture_csv(csv, 260);
    auto config = small_config(dir, csv);
    config.train_end = Date{2000, 4, 9};
    config.test_start = Date{2000, 4, 10};
    config.test_end = Date{2000, 9, 16};  // 160 test days

    config.out_dir = (dir / "out1").string();
    run_all(config);
    config.out_dir = (dir / "out2").string();
    run_all(config);

    for (const char* name : {"SYN/images_train.csv", "SYN/model.bin", "SYN/metrics.json", "SYN/ledger.csv",
                             "SYN/equity.svg", "table2.csv", "table3.csv"}) {
        const auto a = read_file(dir / "out1" / name);
        const auto b = read_file(dir / "out2" / name);
        CHECK(a == b);
    }
}

TEST_CASE("training artifacts ignore test-period prices") {
    const auto dir = fresh_dir("leakage");
    const auto csv_a = dir / "SYN.csv";
    write_fixture_csv(csv_a, 300);
    auto config = small_config(dir, csv_a);
    config.out_dir = (dir / "outA").string();
    run_encode(config);
    run_train(config);

    // perturb only the test period: rewrite with a different series there
    const auto series = parse_csv_file(csv_a.string());
    OhlcvSeries mutated = series;
    for (auto& bar : mutated.bars) {
        if (config.test_start <= bar.date) {
            bar.open *= 1.5;
            bar.high *= 1.65;
            bar.low *= 1.4;
            bar.close *= 1.5;
            bar.adjusted_close *= 1.5;
        }
    }
    const auto csv_b = dir / "SYN2" ;
    fs::create_directories(csv_b);
    const auto csv_b_file = csv_b / "SYN.csv";
    {
        std::ofstream out(csv_b_file);
        out << serialize_csv(mutated);
    }
    auto config_b = config;
    config_b.inputs = {csv_b_file.string()};
    config_b.out_dir = (dir / "outB").string();
    run_encode(config_b);
    run_train(config_b);

    CHECK(read_file(fs::path(config.out_dir) / "SYN/images_train.csv") ==
          read_file(fs::path(config_b.out_dir) / "SYN/images_train.csv"));
    CHECK(read_file(fs::path(config.out_dir) / "SYN/model.bin") ==
          read_file(fs::path(config_b.out_dir) / "SYN/model.bin"));
}

TEST_CASE("cli entry points") {
    const auto dir = fresh_dir("cli");
    const auto csv = dir / "SYN.csv";
    write_fixture_csv(csv, 300);

    SUBCASE("missing input exits nonzero with an error class") {
        const int rc = run_cli("encode -i " + (dir / "nope.csv").string() + " --train-start 2000-01-01"
                               " --train-end 2000-04-09 --test-start 2000-04-10 --test-end 2000-12-31 -o " +
                                   (dir / "o").string(),
                               dir, "missing");
        CHECK(rc != 0);
        const std::string err = read_file(dir / "missing.stderr");
        CHECK(err.find("error:io_error") != std::string::npos);
    }
    SUBCASE("encode runs from a config file with flag overrides") {
        PipelineConfig c = small_config(dir, csv);
        const auto cfg_path = dir / "config.json";
        {
            std::ofstream out(cfg_path);
            out << c.to_json();
        }
        const int rc = run_cli("encode -c " + cfg_path.string() + " -o " + (dir / "ov").string(), dir, "encode");
        CHECK(rc == 0);
        CHECK(fs::exists(dir / "ov" / "SYN" / "images_train.csv"));
        const std::string stdout_text = read_file(dir / "encode.stdout");
        CHECK(stdout_text.find("SYN train: 56 samples") != std::string::npos);
    }
    SUBCASE("bad subcommand exits nonzero") {
        CHECK(run_cli("frobnicate", dir, "bad") != 0);
    }
}

TEST_CASE("multi-ticker runs produce one table row per ticker plus the average") {
    const auto dir = fresh_dir("multi");
    const auto csv1 = dir / "AAA.csv";
    const auto csv2 = dir / "BBB.csv";
    write_fixture_csv(csv1, 300, 37.0);
    write_fixture_csv(csv2, 300, 53.0);

    auto config = small_config(dir, csv1);
    config.inputs = {csv1.string(), csv2.string()};

    // bypass training: hand the backtest an explicit label file
    const auto series = parse_csv_file(csv1.string());
    const auto prices = close_prices(slice_by_date(series, config.test_start, config.test_end), true);
    const auto labels_path = dir / "labels.txt";
    {
        std::ofstream out(labels_path);
        for (std::size_t i = 0; i < prices.size(); ++i) out << (i % 2) << "\n";  // Hold/Buy alternation
    }
    config.labels_override = labels_path.string();

    const auto artifacts = run_backtest(config);
    REQUIRE(artifacts.size() == 2);
    CHECK(artifacts[0].ticker == "AAA");
    CHECK(artifacts[1].ticker == "BBB");

    const std::string table3 = read_file(fs::path(config.out_dir) / "table3.csv");
    CHECK(table3.find("AAA,") != std::string::npos);
    CHECK(table3.find("BBB,") != std::string::npos);
    CHECK(table3.find("Average,") != std::string::npos);
}
