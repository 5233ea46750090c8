#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chartnet/date.hpp"
#include "chartnet/market_data.hpp"

namespace chartnet {

inline constexpr int kWindowDays = 30;
/// Lookahead offsets in trading days from a window's last day.
inline constexpr int kRefLookahead = 4;
inline constexpr int kCurrentLookahead = 15;

/// A 30-day close-price window plus the two lookahead prices used for
/// labeling. future_4 is present whenever future_15 is.
struct PriceWindow {
    std::string ticker;
    int end_index = 0;
    Date end_date;
    std::array<double, kWindowDays> closes{};
    std::optional<double> future_4;
    std::optional<double> future_15;
};

/// 30x30 binary bar-chart image. Row 0 is the bottom price row, column 0 the
/// oldest day. Each column is a solid bar of 1..30 pixels filled from row 0,
/// so the image is stored as one height per column.
class ChartImage {
public:
    static constexpr int kSize = kWindowDays;

    ChartImage() { heights_.fill(1); }

    static ChartImage from_heights(const std::array<int, kSize>& heights);

    /// Rebuilds an image from 900 row-major pixels (bottom row first).
    /// Rejects non-contiguous columns and empty columns.
    static ChartImage from_pixels(std::span<const std::uint8_t> pixels);

    bool pixel(int row, int col) const { return row < heights_[static_cast<std::size_t>(col)]; }

    int column_height(int col) const { return heights_[static_cast<std::size_t>(col)]; }

    std::array<std::uint8_t, kSize * kSize> to_pixels() const;

    /// 30-line debug grid, '#' = set, '.' = unset, bottom row printed last.
    std::string to_text_grid() const;

    bool operator==(const ChartImage&) const = default;

private:
    std::array<std::uint8_t, kSize> heights_{};
};

/// One window per end_index, step one day. With require_lookahead only
/// windows whose +4 and +15 day prices exist are emitted (training mode);
/// otherwise futures are attached where available (inference mode).
std::vector<PriceWindow> sliding_windows(const PriceSeries& prices, bool require_lookahead);

/// Min-max normalization to [0, 1]; a flat window maps to all 0.5.
std::array<double, kWindowDays> normalize_window(std::span<const double, kWindowDays> closes);

/// Column i gets a bar of height 1 + round_half_up(v_i * 29) pixels.
ChartImage encode_image(std::span<const double, kWindowDays> normalized);

}  // namespace chartnet
