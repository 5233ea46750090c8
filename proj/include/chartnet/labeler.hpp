#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "chartnet/chart_encoder.hpp"
#include "chartnet/date.hpp"

namespace chartnet {

enum class TrendLabel : int { Hold = 0, Buy = 1, Sell = 2 };

constexpr const char* to_string(TrendLabel label) {
    switch (label) {
        case TrendLabel::Hold: return "Hold";
        case TrendLabel::Buy: return "Buy";
        case TrendLabel::Sell: return "Sell";
    }
    return "?";
}

TrendLabel label_from_int(int value);

/// Sorted ascending reference slopes (price units per day), n >= 5.
struct SlopeReferenceList {
    std::vector<double> slopes;
};

/// Sell/Hold and Hold/Buy boundaries taken from the sorted reference list.
struct SeparationPoints {
    double first = 0;   // Sell below this
    double second = 0;  // Buy above this
};

/// Order-statistic picks, exact rational indices floor(num*n/den).
struct QuantileSpec {
    int sell_num = 2, sell_den = 5;
    int buy_num = 3, buy_den = 5;
};

struct LabeledSample {
    ChartImage image;
    TrendLabel label = TrendLabel::Hold;
    std::string ticker;
    Date end_date;
    double slope_current = 0;
};

struct DatasetProvenance {
    std::string ticker;
    Date start;
    Date end;
};

struct LabeledDataset {
    std::vector<LabeledSample> samples;
    SeparationPoints separation;
    DatasetProvenance provenance;
};

/// 4-day-ahead slope from the window's last close: (future_4 - closes[29]) / 4.
double reference_slope(const PriceWindow& window);

/// 15-day-ahead slope: (future_15 - closes[29]) / 15.
double current_slope(const PriceWindow& window);

/// Sorted reference slopes over all windows; needs at least 5 of them.
SlopeReferenceList build_reference_list(const std::vector<PriceWindow>& windows);

/// first = slopes[floor(2n/5)], second = slopes[floor(3n/5)] (0-based).
SeparationPoints separation_points(const SlopeReferenceList& list, const QuantileSpec& quantiles = {});

/// Buy above second, Sell below first, Hold otherwise (ties go to Hold).
TrendLabel assign_label(double slope_current, const SeparationPoints& sep);

/// Zips windows and images into samples, preserving order.
LabeledDataset label_dataset(const std::vector<PriceWindow>& windows,
                             const std::vector<ChartImage>& images, const SeparationPoints& sep);

/// Random oversampling with replacement until every class matches the
/// majority count. Originals are kept and come first; duplicates are
/// appended per class in label-value order. Deterministic under the seed.
LabeledDataset resample_balanced(const LabeledDataset& dataset, std::uint64_t seed);

std::array<std::size_t, 3> class_counts(const LabeledDataset& dataset);

/// One sample per line: "label,p0,...,p899", pixels row-major from the bottom
/// row. The separation points ride along in a '#sep,first,second' header.
std::string serialize_dataset(const LabeledDataset& dataset);
LabeledDataset deserialize_dataset(std::istream& in);
LabeledDataset deserialize_dataset(const std::string& text);

}  // namespace chartnet
