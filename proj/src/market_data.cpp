#include "chartnet/market_data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "chartnet/error.hpp"

namespace chartnet {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

// Header cells are matched case-insensitively with spaces, underscores and
// dots stripped, so "Adj Close", "adj_close" and "Adjusted Close" all work.
std::string normalize_header(const std::string& cell) {
    std::string out;
    for (char ch : cell) {
        if (ch == ' ' || ch == '_' || ch == '.' || ch == '"') continue;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
    return out;
}

double parse_number(const std::string& cell, std::size_t line_no, const std::string& column) {
    double value = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
        raise(ErrorClass::Parse, "row " + std::to_string(line_no) + ": malformed number '" + cell +
                                     "' in column " + column);
    }
    return value;
}

void validate_bar(const OhlcvBar& bar, std::size_t line_no) {
    auto fail = [&](const std::string& what) {
        raise(ErrorClass::Validation, "row " + std::to_string(line_no) + " (" + bar.date.to_string() +
                                          "): " + what);
    };
    if (bar.open <= 0 || bar.high <= 0 || bar.low <= 0 || bar.close <= 0 || bar.adjusted_close <= 0)
        fail("prices must be strictly positive");
    if (bar.low > std::min(bar.open, bar.close)) fail("low exceeds min(open, close)");
    if (bar.high < std::max(bar.open, bar.close)) fail("high below max(open, close)");
    if (bar.volume < 0) fail("negative volume");
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace

OhlcvSeries parse_csv(std::istream& in, std::string ticker) {
    std::string line;
    if (!std::getline(in, line)) raise(ErrorClass::Parse, "empty input, expected a header row");

    const auto header = split_fields(line);
    std::unordered_map<std::string, std::size_t> columns;
    for (std::size_t i = 0; i < header.size(); ++i) {
        columns.emplace(normalize_header(header[i]), i);
    }

    auto column = [&](std::initializer_list<const char*> names) -> std::size_t {
        for (const char* name : names) {
            if (auto it = columns.find(name); it != columns.end()) return it->second;
        }
        raise(ErrorClass::Parse, std::string("header is missing column '") + *names.begin() + "'");
    };

    const std::size_t col_date = column({"date"});
    const std::size_t col_open = column({"open"});
    const std::size_t col_high = column({"high"});
    const std::size_t col_low = column({"low"});
    const std::size_t col_close = column({"close"});
    const std::size_t col_adj = column({"adjustedclose", "adjclose"});
    const std::size_t col_volume = column({"volume"});

    OhlcvSeries series;
    series.ticker = std::move(ticker);

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_fields(line);
        if (fields.size() != header.size()) {
            raise(ErrorClass::Parse, "row " + std::to_string(line_no) + ": expected " +
                                         std::to_string(header.size()) + " fields, got " +
                                         std::to_string(fields.size()));
        }
        OhlcvBar bar;
        try {
            bar.date = Date::parse(fields[col_date]);
        } catch (const Error& e) {
            raise(ErrorClass::Parse, "row " + std::to_string(line_no) + ": " + e.what());
        }
        bar.open = parse_number(fields[col_open], line_no, "open");
        bar.high = parse_number(fields[col_high], line_no, "high");
        bar.low = parse_number(fields[col_low], line_no, "low");
        bar.close = parse_number(fields[col_close], line_no, "close");
        bar.adjusted_close = parse_number(fields[col_adj], line_no, "adjusted close");
        bar.volume = parse_number(fields[col_volume], line_no, "volume");
        validate_bar(bar, line_no);

        if (!series.bars.empty() && !(series.bars.back().date < bar.date)) {
            raise(ErrorClass::Ordering, "row " + std::to_string(line_no) + ": date " +
                                            bar.date.to_string() + " not after " +
                                            series.bars.back().date.to_string());
        }
        series.bars.push_back(bar);
    }

    if (series.bars.empty()) raise(ErrorClass::Parse, "no data rows");
    return series;
}

OhlcvSeries parse_csv(const std::string& text, std::string ticker) {
    std::istringstream in(text);
    return parse_csv(in, std::move(ticker));
}

OhlcvSeries parse_csv_file(const std::string& path, std::string ticker) {
    std::ifstream in(path);
    if (!in) raise(ErrorClass::Io, "cannot open '" + path + "'");
    if (ticker.empty()) ticker = std::filesystem::path(path).stem().string();
    try {
        return parse_csv(in, std::move(ticker));
    } catch (const Error& e) {
        throw Error(e.error_class(), path + ": " + e.what());
    }
}

std::string serialize_csv(const OhlcvSeries& series) {
    std::string out = "date,open,high,low,close,adjusted_close,volume\n";
    for (const auto& bar : series.bars) {
        out += bar.date.to_string();
        for (double v : {bar.open, bar.high, bar.low, bar.close, bar.adjusted_close, bar.volume}) {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    }
    return out;
}

OhlcvSeries slice_by_date(const OhlcvSeries& series, Date start, Date end) {
    if (end < start) raise(ErrorClass::Validation, "slice start after end");
    OhlcvSeries out;
    out.ticker = series.ticker;
    for (const auto& bar : series.bars) {
        if (start <= bar.date && bar.date <= end) out.bars.push_back(bar);
    }
    if (out.bars.empty()) {
        raise(ErrorClass::EmptySlice, series.ticker + ": no bars between " + start.to_string() +
                                          " and " + end.to_string());
    }
    return out;
}

PriceSeries close_prices(const OhlcvSeries& series, bool use_adjusted) {
    if (series.bars.empty()) raise(ErrorClass::Validation, "empty series");
    PriceSeries out;
    out.ticker = series.ticker;
    out.dates.reserve(series.bars.size());
    out.prices.reserve(series.bars.size());
    for (const auto& bar : series.bars) {
        out.dates.push_back(bar.date);
        out.prices.push_back(use_adjusted ? bar.adjusted_close : bar.close);
    }
    return out;
}

}  // namespace chartnet
