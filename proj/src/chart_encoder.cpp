#include "chartnet/chart_encoder.hpp"

#include <algorithm>
#include <cmath>

#include "chartnet/error.hpp"

namespace chartnet {

ChartImage ChartImage::from_heights(const std::array<int, kSize>& heights) {
    ChartImage img;
    for (int c = 0; c < kSize; ++c) {
        if (heights[static_cast<std::size_t>(c)] < 1 || heights[static_cast<std::size_t>(c)] > kSize) {
            raise(ErrorClass::Validation, "column " + std::to_string(c) + " height " +
                                              std::to_string(heights[static_cast<std::size_t>(c)]) +
                                              " outside [1, 30]");
        }
        img.heights_[static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(heights[static_cast<std::size_t>(c)]);
    }
    return img;
}

ChartImage ChartImage::from_pixels(std::span<const std::uint8_t> pixels) {
    if (pixels.size() != kSize * kSize) {
        raise(ErrorClass::Parse, "expected " + std::to_string(kSize * kSize) + " pixels, got " +
                                     std::to_string(pixels.size()));
    }
    ChartImage img;
    for (int c = 0; c < kSize; ++c) {
        int height = 0;
        bool run_ended = false;
        for (int r = 0; r < kSize; ++r) {
            const bool set = pixels[static_cast<std::size_t>(r * kSize + c)] != 0;
            if (set && run_ended) {
                raise(ErrorClass::Parse, "column " + std::to_string(c) + " is not a contiguous bar from row 0");
            }
            if (set) {
                ++height;
            } else {
                run_ended = true;
            }
        }
        if (height == 0) raise(ErrorClass::Parse, "column " + std::to_string(c) + " has no set pixels");
        img.heights_[static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(height);
    }
    return img;
}

std::array<std::uint8_t, ChartImage::kSize * ChartImage::kSize> ChartImage::to_pixels() const {
    std::array<std::uint8_t, kSize * kSize> out{};
    for (int r = 0; r < kSize; ++r) {
        for (int c = 0; c < kSize; ++c) {
            out[static_cast<std::size_t>(r * kSize + c)] = pixel(r, c) ? 1 : 0;
        }
    }
    return out;
}

std::string ChartImage::to_text_grid() const {
    std::string out;
    out.reserve((kSize + 1) * kSize);
    for (int r = kSize - 1; r >= 0; --r) {
        for (int c = 0; c < kSize; ++c) {
            out.push_back(pixel(r, c) ? '#' : '.');
        }
        out.push_back('\n');
    }
    return out;
}

std::vector<PriceWindow> sliding_windows(const PriceSeries& prices, bool require_lookahead) {
    const int n = static_cast<int>(prices.size());
    const int min_len = require_lookahead ? kWindowDays + kCurrentLookahead : kWindowDays;
    if (n < min_len) {
        raise(ErrorClass::InsufficientData, prices.ticker + ": " + std::to_string(n) +
                                                " days, need at least " + std::to_string(min_len));
    }

    std::vector<PriceWindow> windows;
    for (int end = kWindowDays - 1; end < n; ++end) {
        PriceWindow w;
        w.ticker = prices.ticker;
        w.end_index = end;
        w.end_date = prices.dates[static_cast<std::size_t>(end)];
        std::copy_n(prices.prices.begin() + (end - kWindowDays + 1), kWindowDays, w.closes.begin());
        if (end + kRefLookahead < n) w.future_4 = prices.prices[static_cast<std::size_t>(end + kRefLookahead)];
        if (end + kCurrentLookahead < n) w.future_15 = prices.prices[static_cast<std::size_t>(end + kCurrentLookahead)];
        if (require_lookahead && !w.future_15.has_value()) continue;
        windows.push_back(std::move(w));
    }
    return windows;
}

std::array<double, kWindowDays> normalize_window(std::span<const double, kWindowDays> closes) {
    for (double c : closes) {
        if (!(c > 0)) raise(ErrorClass::Validation, "window prices must be positive");
    }
    const auto [lo_it, hi_it] = std::minmax_element(closes.begin(), closes.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    std::array<double, kWindowDays> out{};
    if (hi == lo) {
        out.fill(0.5);
        return out;
    }
    for (int i = 0; i < kWindowDays; ++i) {
        out[static_cast<std::size_t>(i)] = (closes[static_cast<std::size_t>(i)] - lo) / (hi - lo);
    }
    return out;
}

ChartImage encode_image(std::span<const double, kWindowDays> normalized) {
    std::array<int, kWindowDays> heights{};
    for (int i = 0; i < kWindowDays; ++i) {
        const double v = normalized[static_cast<std::size_t>(i)];
        if (!(v >= 0.0 && v <= 1.0)) {
            raise(ErrorClass::Validation, "normalized value outside [0, 1]");
        }
        // round half away from zero; v is non-negative
        heights[static_cast<std::size_t>(i)] = 1 + static_cast<int>(std::floor(v * (kWindowDays - 1) + 0.5));
    }
    return ChartImage::from_heights(heights);
}

}  // namespace chartnet
