#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "chartnet/date.hpp"

namespace chartnet {

/// One trading day of OHLCV data. All five prices are strictly positive,
/// low <= min(open, close) and high >= max(open, close).
struct OhlcvBar {
    Date date;
    double open = 0;
    double high = 0;
    double low = 0;
    double close = 0;
    double adjusted_close = 0;
    double volume = 0;

    bool operator==(const OhlcvBar&) const = default;
};

/// Date-ordered daily bars for one ticker. Non-empty, dates strictly increasing.
struct OhlcvSeries {
    std::string ticker;
    std::vector<OhlcvBar> bars;

    bool operator==(const OhlcvSeries&) const = default;
};

/// Extracted close channel: one positive price per date.
struct PriceSeries {
    std::string ticker;
    std::vector<Date> dates;
    std::vector<double> prices;

    std::size_t size() const { return prices.size(); }

    bool operator==(const PriceSeries&) const = default;
};

/// Parses CSV with a header naming date, open, high, low, close,
/// adjusted close and volume in any order. Unknown columns are ignored.
/// Rows must be date-ascending; every bar is validated on the way in.
OhlcvSeries parse_csv(std::istream& in, std::string ticker = "");
OhlcvSeries parse_csv(const std::string& text, std::string ticker = "");

/// Reads and parses a CSV file; the ticker defaults to the file-name stem.
OhlcvSeries parse_csv_file(const std::string& path, std::string ticker = "");

/// Inverse of parse_csv: numbers are printed shortest-round-trip so
/// parse(serialize(s)) == s exactly.
std::string serialize_csv(const OhlcvSeries& series);

/// Bars with start <= date <= end, order preserved. Empty result is an error.
OhlcvSeries slice_by_date(const OhlcvSeries& series, Date start, Date end);

/// One price per bar: adjusted_close when use_adjusted, else close.
PriceSeries close_prices(const OhlcvSeries& series, bool use_adjusted);

}  // namespace chartnet
