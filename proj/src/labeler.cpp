#include "chartnet/labeler.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "chartnet/error.hpp"
#include "chartnet/rng.hpp"

namespace chartnet {

TrendLabel label_from_int(int value) {
    if (value < 0 || value > 2) {
        raise(ErrorClass::Validation, "label value " + std::to_string(value) + " outside {0,1,2}");
    }
    return static_cast<TrendLabel>(value);
}

double reference_slope(const PriceWindow& window) {
    if (!window.future_4.has_value()) {
        raise(ErrorClass::LookaheadMissing,
              "window ending " + window.end_date.to_string() + " has no +4 day price");
    }
    return (*window.future_4 - window.closes[kWindowDays - 1]) / kRefLookahead;
}

double current_slope(const PriceWindow& window) {
    if (!window.future_15.has_value()) {
        raise(ErrorClass::LookaheadMissing,
              "window ending " + window.end_date.to_string() + " has no +15 day price");
    }
    return (*window.future_15 - window.closes[kWindowDays - 1]) / kCurrentLookahead;
}

SlopeReferenceList build_reference_list(const std::vector<PriceWindow>& windows) {
    if (windows.size() < 5) {
        raise(ErrorClass::InsufficientData,
              "need at least 5 windows to build a reference list, got " + std::to_string(windows.size()));
    }
    SlopeReferenceList list;
    list.slopes.reserve(windows.size());
    for (const auto& w : windows) list.slopes.push_back(reference_slope(w));
    std::sort(list.slopes.begin(), list.slopes.end());
    return list;
}

SeparationPoints separation_points(const SlopeReferenceList& list, const QuantileSpec& quantiles) {
    const std::size_t n = list.slopes.size();
    if (n < 5) raise(ErrorClass::InsufficientData, "reference list needs at least 5 slopes");
    if (quantiles.sell_den <= 0 || quantiles.buy_den <= 0 || quantiles.sell_num < 0 || quantiles.buy_num < 0) {
        raise(ErrorClass::Validation, "quantile fractions must be non-negative with positive denominators");
    }
    auto pick = [&](int num, int den) {
        std::size_t idx = n * static_cast<std::size_t>(num) / static_cast<std::size_t>(den);
        return list.slopes[std::min(idx, n - 1)];
    };
    SeparationPoints sep;
    sep.first = pick(quantiles.sell_num, quantiles.sell_den);
    sep.second = pick(quantiles.buy_num, quantiles.buy_den);
    if (sep.second < sep.first) raise(ErrorClass::Validation, "separation points out of order");
    return sep;
}

TrendLabel assign_label(double slope_current, const SeparationPoints& sep) {
    if (!std::isfinite(slope_current)) raise(ErrorClass::Validation, "non-finite slope");
    if (slope_current > sep.second) return TrendLabel::Buy;
    if (slope_current < sep.first) return TrendLabel::Sell;
    return TrendLabel::Hold;
}

LabeledDataset label_dataset(const std::vector<PriceWindow>& windows,
                             const std::vector<ChartImage>& images, const SeparationPoints& sep) {
    if (windows.size() != images.size()) {
        raise(ErrorClass::Alignment, std::to_string(windows.size()) + " windows vs " +
                                         std::to_string(images.size()) + " images");
    }
    if (windows.empty()) raise(ErrorClass::Validation, "empty window list");

    LabeledDataset dataset;
    dataset.separation = sep;
    dataset.provenance = {windows.front().ticker, windows.front().end_date, windows.back().end_date};
    dataset.samples.reserve(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const double slope = current_slope(windows[i]);
        dataset.samples.push_back(LabeledSample{images[i], assign_label(slope, sep), windows[i].ticker,
                                                windows[i].end_date, slope});
    }
    return dataset;
}

std::array<std::size_t, 3> class_counts(const LabeledDataset& dataset) {
    std::array<std::size_t, 3> counts{};
    for (const auto& s : dataset.samples) counts[static_cast<std::size_t>(s.label)]++;
    return counts;
}

LabeledDataset resample_balanced(const LabeledDataset& dataset, std::uint64_t seed) {
    const auto counts = class_counts(dataset);
    for (int c = 0; c < 3; ++c) {
        if (counts[static_cast<std::size_t>(c)] == 0) {
            raise(ErrorClass::EmptyClass,
                  std::string("class ") + to_string(static_cast<TrendLabel>(c)) + " has no samples");
        }
    }
    const std::size_t majority = *std::max_element(counts.begin(), counts.end());

    std::array<std::vector<std::size_t>, 3> members;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        members[static_cast<std::size_t>(dataset.samples[i].label)].push_back(i);
    }

    LabeledDataset out = dataset;
    Rng rng(seed);
    for (int c = 0; c < 3; ++c) {
        const auto& pool = members[static_cast<std::size_t>(c)];
        for (std::size_t k = pool.size(); k < majority; ++k) {
            out.samples.push_back(dataset.samples[pool[rng.index(pool.size())]]);
        }
    }
    return out;
}

std::string serialize_dataset(const LabeledDataset& dataset) {
    std::string out;
    out.reserve(dataset.samples.size() * 2 * ChartImage::kSize * ChartImage::kSize);
    char sep_line[80];
    std::snprintf(sep_line, sizeof(sep_line), "#sep,%.17g,%.17g\n", dataset.separation.first,
                  dataset.separation.second);
    out += sep_line;
    for (const auto& sample : dataset.samples) {
        out += std::to_string(static_cast<int>(sample.label));
        for (std::uint8_t px : sample.image.to_pixels()) {
            out += ',';
            out += static_cast<char>('0' + px);
        }
        out += '\n';
    }
    return out;
}

LabeledDataset deserialize_dataset(std::istream& in) {
    LabeledDataset dataset;
    std::string line;
    std::size_t line_no = 0;
    constexpr std::size_t pixel_count = ChartImage::kSize * ChartImage::kSize;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line.rfind("#sep,", 0) == 0) {
                std::istringstream header(line.substr(5));
                char comma = 0;
                if (!(header >> dataset.separation.first >> comma >> dataset.separation.second) || comma != ',') {
                    raise(ErrorClass::Parse, "line " + std::to_string(line_no) + ": malformed #sep header");
                }
            }
            continue;
        }

        std::vector<std::uint8_t> pixels;
        pixels.reserve(pixel_count);
        const char* p = line.data();
        const char* end = line.data() + line.size();
        int label_value = 0;
        auto [lp, lec] = std::from_chars(p, end, label_value);
        if (lec != std::errc()) {
            raise(ErrorClass::Parse, "line " + std::to_string(line_no) + ": malformed label");
        }
        p = lp;
        while (p != end) {
            if (*p != ',') raise(ErrorClass::Parse, "line " + std::to_string(line_no) + ": expected ','");
            ++p;
            if (p == end || (*p != '0' && *p != '1')) {
                raise(ErrorClass::Parse, "line " + std::to_string(line_no) + ": pixel values must be 0 or 1");
            }
            pixels.push_back(static_cast<std::uint8_t>(*p - '0'));
            ++p;
        }
        if (pixels.size() != pixel_count) {
            raise(ErrorClass::Parse, "line " + std::to_string(line_no) + ": expected " +
                                         std::to_string(pixel_count) + " pixels, got " +
                                         std::to_string(pixels.size()));
        }
        LabeledSample sample;
        try {
            sample.label = label_from_int(label_value);
            sample.image = ChartImage::from_pixels(pixels);
        } catch (const Error& e) {
            raise(ErrorClass::Parse, "line " + std::to_string(line_no) + ": " + e.what());
        }
        dataset.samples.push_back(std::move(sample));
    }

    if (dataset.samples.empty()) raise(ErrorClass::Parse, "no samples in dataset stream");
    return dataset;
}

LabeledDataset deserialize_dataset(const std::string& text) {
    std::istringstream in(text);
    return deserialize_dataset(in);
}

}  // namespace chartnet
