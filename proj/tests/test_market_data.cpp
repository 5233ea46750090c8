#include <doctest.h>

#include <string>

#include "chartnet/error.hpp"
#include "chartnet/market_data.hpp"
#include "chartnet/rng.hpp"

using namespace chartnet;

namespace {

const std::string kHeader = "date,open,high,low,close,adjusted_close,volume\n";

OhlcvSeries random_series(Rng& rng, int n) {
    OhlcvSeries s;
    s.ticker = "TEST";
    std::int64_t day = Date{2000, 1, 3}.day_number();
    for (int i = 0; i < n; ++i) {
        OhlcvBar bar;
        bar.date = Date::from_day_number(day);
        day += 1 + static_cast<std::int64_t>(rng.index(3));
        bar.open = rng.uniform(10.0, 100.0);
        bar.close = rng.uniform(10.0, 100.0);
        bar.low = std::min(bar.open, bar.close) - rng.uniform(0.0, 5.0);
        bar.high = std::max(bar.open, bar.close) + rng.uniform(0.0, 5.0);
        bar.adjusted_close = bar.close * rng.uniform(0.5, 1.0);
        bar.volume = static_cast<double>(rng.index(1000000));
        s.bars.push_back(bar);
    }
    return s;
}

}  // namespace

TEST_CASE("parse_csv accepts well-formed rows in date order") {
    const std::string text = kHeader +
                             "2007-01-03,10,11,9,10.5,10.1,1000\n"
                             "2007-01-04,10.5,12,10,11,10.6,1100\n"
                             "2007-01-05,11,11.5,10.2,10.4,10.0,900\n";
    const auto series = parse_csv(text, "ABC");
    REQUIRE(series.bars.size() == 3);
    CHECK(series.ticker == "ABC");
    CHECK(series.bars[0].date == Date{2007, 1, 3});
    CHECK(series.bars[2].close == doctest::Approx(10.4));
    CHECK(series.bars[0].date < series.bars[1].date);
    CHECK(series.bars[1].date < series.bars[2].date);
}

TEST_CASE("parse_csv rejects a negative close and names the row") {
    const std::string text = kHeader +
                             "2007-01-03,10,11,9,10.5,10.1,1000\n"
                             "2007-01-04,10,11,9,-1,10.1,1000\n";
    try {
        parse_csv(text);
        FAIL("expected validation error");
    } catch (const Error& e) {
        CHECK(e.error_class() == ErrorClass::Validation);
        CHECK(std::string(e.what()).find("row 3") != std::string::npos);
    }
}

TEST_CASE("parse_csv rejects out-of-order and duplicate dates") {
    const std::string out_of_order = kHeader +
                                     "2007-01-03,10,11,9,10,10,1\n"
                                     "2007-01-02,10,11,9,10,10,1\n";
    CHECK_THROWS_WITH_AS(parse_csv(out_of_order), doctest::Contains("not after"), Error);

    const std::string duplicate = kHeader +
                                  "2007-01-03,10,11,9,10,10,1\n"
                                  "2007-01-03,10,11,9,10,10,1\n";
    try {
        parse_csv(duplicate);
        FAIL("expected ordering error");
    } catch (const Error& e) {
        CHECK(e.error_class() == ErrorClass::Ordering);
    }
}

TEST_CASE("parse_csv rejects malformed numbers and missing cells") {
    const std::string bad_number = kHeader + "2007-01-03,10,11,9,abc,10,1\n";
    try {
        parse_csv(bad_number);
        FAIL("expected parse error");
    } catch (const Error& e) {
        CHECK(e.error_class() == ErrorClass::Parse);
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }

    const std::string missing_cell = kHeader + "2007-01-03,10,11,9,10,10\n";
    try {
        parse_csv(missing_cell);
        FAIL("expected parse error");
    } catch (const Error& e) {
        CHECK(e.error_class() == ErrorClass::Parse);
    }

    const std::string empty_cell = kHeader + "2007-01-03,10,,9,10,10,1\n";
    CHECK_THROWS_AS(parse_csv(empty_cell), Error);
}

TEST_CASE("parse_csv rejects OHLC range violations") {
    // high below close
    const std::string text = kHeader + "2007-01-03,10,10.2,9,10.5,10.1,1000\n";
    try {
        parse_csv(text);
        FAIL("expected validation error");
    } catch (const Error& e) {
        CHECK(e.error_class() == ErrorClass::Validation);
    }
}

TEST_CASE("parse_csv detects columns from the header, not their position") {
    const std::string text =
        "Volume,Close,Date,Low,High,Open,Adj Close\n"
        "1000,10.5,2007-01-03,9,11,10,10.1\n";
    const auto series = parse_csv(text);
    REQUIRE(series.bars.size() == 1);
    CHECK(series.bars[0].close == doctest::Approx(10.5));
    CHECK(series.bars[0].adjusted_close == doctest::Approx(10.1));
    CHECK(series.bars[0].volume == doctest::Approx(1000));
}

TEST_CASE("parse_csv requires all seven columns") {
    CHECK_THROWS_AS(parse_csv(std::string("date,open,high,low,close,volume\n")), Error);
    CHECK_THROWS_AS(parse_csv(std::string("")), Error);
    CHECK_THROWS_AS(parse_csv(kHeader), Error);  // header only, no data rows
}

TEST_CASE("serialize then parse is the identity on random series") {
    Rng rng(20240901);
    for (int trial = 0; trial < 25; ++trial) {
        const auto series = random_series(rng, 1 + static_cast<int>(rng.index(40)));
        const auto round_tripped = parse_csv(serialize_csv(series), series.ticker);
        CHECK(round_tripped == series);
    }
}

TEST_CASE("slice_by_date keeps the inclusive date range") {
    Rng rng(7);
    auto series = random_series(rng, 10);

    SUBCASE("covering slice is the identity") {
        const auto all = slice_by_date(series, series.bars.front().date, series.bars.back().date);
        CHECK(all == series);
    }
    SUBCASE("middle slice keeps exactly the middle bars") {
        const auto mid = slice_by_date(series, series.bars[3].date, series.bars[6].date);
        REQUIRE(mid.bars.size() == 4);
        for (int i = 0; i < 4; ++i) CHECK(mid.bars[static_cast<std::size_t>(i)] == series.bars[static_cast<std::size_t>(i + 3)]);
    }
    SUBCASE("no overlap is an empty-slice error") {
        try {
            slice_by_date(series, Date{1990, 1, 1}, Date{1990, 12, 31});
            FAIL("expected empty-slice error");
        } catch (const Error& e) {
            CHECK(e.error_class() == ErrorClass::EmptySlice);
        }
    }
    SUBCASE("slicing twice with the same bounds is idempotent") {
        const auto once = slice_by_date(series, series.bars[2].date, series.bars[8].date);
        const auto twice = slice_by_date(once, series.bars[2].date, series.bars[8].date);
        CHECK(once == twice);
    }
}

TEST_CASE("close_prices projects the requested channel") {
    Rng rng(11);
    const auto series = random_series(rng, 3);

    const auto raw = close_prices(series, false);
    const auto adj = close_prices(series, true);
    REQUIRE(raw.size() == 3);
    REQUIRE(adj.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(raw.prices[i] == series.bars[i].close);
        CHECK(adj.prices[i] == series.bars[i].adjusted_close);
        CHECK(raw.dates[i] == series.bars[i].date);
    }

    const auto single = random_series(rng, 1);
    CHECK(close_prices(single, true).size() == 1);
}

TEST_CASE("date arithmetic round-trips through day numbers") {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const auto day = static_cast<std::int64_t>(rng.index(40000));
        const Date d = Date::from_day_number(day);
        CHECK(d.day_number() == day);
        CHECK(Date::parse(d.to_string()) == d);
    }
    CHECK(Date{1970, 1, 1}.day_number() == 0);
    CHECK(calendar_years(Date{2000, 1, 1}, Date{2001, 1, 1}) == doctest::Approx(366.0 / 365.25));
    CHECK_THROWS_AS(Date::parse("2007-13-01"), Error);
    CHECK_THROWS_AS(Date::parse("2007-02-30"), Error);
    CHECK_THROWS_AS(Date::parse("garbage"), Error);
}
