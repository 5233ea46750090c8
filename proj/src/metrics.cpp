#include "chartnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "chartnet/error.hpp"

namespace chartnet {

double annualized_return(double total, double start, double years) {
    if (start <= 0) raise(ErrorClass::Domain, "start capital must be positive");
    if (years <= 0) raise(ErrorClass::Domain, "years must be positive");
    if (total <= 0) raise(ErrorClass::Domain, "non-positive final capital");
    return (std::pow(total / start, 1.0 / years) - 1.0) * 100.0;
}

double buy_and_hold_return(const PriceSeries& prices, double start_capital, double commission,
                           double years) {
    if (prices.size() == 0) raise(ErrorClass::Validation, "empty price series");
    const double first = prices.prices.front();
    const double last = prices.prices.back();
    const double shares = (start_capital - commission) / first;
    const double final_capital = shares * last - commission;
    return annualized_return(final_capital, start_capital, years);
}

double trading_years(int total_days) { return static_cast<double>(total_days) / 252.0; }

namespace {

double transaction_pct(const Transaction& t) { return 100.0 * t.gain / t.buy_cost; }

double max_drawdown_pct(const std::vector<double>& equity) {
    double peak = equity.empty() ? 0.0 : equity.front();
    double worst = 0;
    for (double e : equity) {
        peak = std::max(peak, e);
        if (peak > 0) worst = std::max(worst, (peak - e) / peak);
    }
    return 100.0 * worst;
}

}  // namespace

MetricsReport compute_report(const BacktestResult& result, double years) {
    if (years <= 0) raise(ErrorClass::Domain, "years must be positive");

    MetricsReport r;
    const auto& txs = result.transactions;
    const std::size_t count = txs.size();

    r.ar = annualized_return(result.final_capital, result.start_capital, years);

    if (count > 0) {
        r.ant = static_cast<double>(count) / years;
        std::size_t wins = 0;
        double pct_sum = 0;
        r.mpt = transaction_pct(txs.front());
        r.mlt = r.mpt;
        for (const auto& t : txs) {
            if (t.gain > 0) ++wins;
            const double pct = transaction_pct(t);
            pct_sum += pct;
            r.mpt = std::max(r.mpt, pct);
            r.mlt = std::min(r.mlt, pct);
        }
        r.pos = 100.0 * static_cast<double>(wins) / static_cast<double>(count);
        r.apt = pct_sum / static_cast<double>(count);
        r.avg_length = static_cast<double>(result.total_transaction_length) / static_cast<double>(count);
    }

    if (!result.equity_curve.empty()) {
        const auto [lo, hi] = std::minmax_element(result.equity_curve.begin(), result.equity_curve.end());
        r.minc = *lo;
        r.maxc = *hi;
    } else {
        r.minc = r.maxc = result.start_capital;
    }

    if (result.total_days > 0) {
        r.idle_ratio = 100.0 * static_cast<double>(result.total_days - result.total_transaction_length) /
                       static_cast<double>(result.total_days);
    } else {
        r.idle_ratio = 100.0;
    }

    r.mdd = max_drawdown_pct(result.equity_curve);
    if (r.mdd > 0) {
        const double total_pct = 100.0 * (result.final_capital - result.start_capital) / result.start_capital;
        r.romad = total_pct / r.mdd;
    }
    return r;
}

std::string report_to_json(const MetricsReport& report, const BacktestResult& result, double years) {
    nlohmann::ordered_json j;
    j["ar"] = report.ar;
    j["bah_ar"] = report.bah_ar;
    j["ant"] = report.ant;
    j["pos"] = report.pos;
    j["apt"] = report.apt;
    j["avg_length"] = report.avg_length;
    j["mpt"] = report.mpt;
    j["mlt"] = report.mlt;
    j["maxc"] = report.maxc;
    j["minc"] = report.minc;
    j["idle_ratio"] = report.idle_ratio;
    j["mdd"] = report.mdd;
    if (report.romad.has_value()) {
        j["romad"] = *report.romad;
    } else {
        j["romad"] = nullptr;
    }
    j["start_capital"] = result.start_capital;
    j["final_capital"] = result.final_capital;
    j["transaction_count"] = result.transactions.size();
    j["total_days"] = result.total_days;
    j["years"] = years;
    return j.dump(2) + "\n";
}

std::string report_csv_header() {
    return "ticker,ar,ant,pos,apt,avg_length,mpt,mlt,maxc,minc,idle_ratio,mdd,romad\n";
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

}  // namespace

std::string report_to_csv_row(const std::string& ticker, const MetricsReport& r) {
    std::string out = ticker;
    for (double v : {r.ar, r.ant, r.pos, r.apt, r.avg_length, r.mpt, r.mlt, r.maxc, r.minc, r.idle_ratio, r.mdd}) {
        out += ',';
        out += fmt(v);
    }
    out += ',';
    out += r.romad.has_value() ? fmt(*r.romad) : std::string("");
    out += '\n';
    return out;
}

}  // namespace chartnet
