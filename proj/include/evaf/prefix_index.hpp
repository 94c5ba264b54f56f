#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "evaf/event.hpp"

namespace evaf {

/*
 * Timestamp-indexed partial sums over an event stream.
 *
 * The global list holds every timestamp in stream order, so the cumulative
 * count of events up to ordinal i is i + 1 and any closed window [a, b] is
 * answered by two binary searches. Per-pixel timestamp lists give the same
 * query resolved per pixel. Built once in a single pass; immutable afterwards
 * and safe to share across threads.
 */
class PrefixIndex {
 public:
  PrefixIndex() = default;

  explicit PrefixIndex(const EventStream& stream)
      : width_(stream.width), height_(stream.height), sweep_(stream.sweep) {
    times_.reserve(stream.size());
    pixel_of_.reserve(stream.size());
    per_pixel_.resize(static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_));
    for (const Event& e : stream.events) {
      const auto id = linear_id(e.x, e.y);
      times_.push_back(e.t);
      pixel_of_.push_back(id);
      auto& list = per_pixel_[id];
      if (list.empty()) active_.push_back(id);
      list.push_back(e.t);
    }
    std::sort(active_.begin(), active_.end());
  }

  int width() const { return width_; }
  int height() const { return height_; }
  const SweepConfig& sweep() const { return sweep_; }
  std::size_t total() const { return times_.size(); }
  bool empty() const { return times_.empty(); }

  /// Global timestamps; the cumulative count at ordinal i is i + 1.
  std::span<const Timestamp> timestamps() const { return times_; }

  /// Pixels with at least one event, in row-major order.
  std::size_t active_pixel_count() const { return active_.size(); }

  std::span<const Timestamp> pixel_timestamps(Pixel px) const {
    if (px.x < 0 || px.y < 0 || px.x >= width_ || px.y >= height_) return {};
    return per_pixel_[linear_id(px.x, px.y)];
  }

  /// Number of events with a <= t <= b.
  std::size_t count_window(Timestamp a, Timestamp b) const {
    check_window(a, b);
    const auto [lo, hi] = ordinal_range(a, b);
    return hi - lo;
  }

  /// Events of one pixel inside [a, b].
  std::size_t pixel_count(Pixel px, Timestamp a, Timestamp b) const {
    check_window(a, b);
    return count_sorted(pixel_timestamps(px), a, b);
  }

  /// Sparse per-pixel counts over [a, b]; only pixels with at least one event appear.
  std::map<Pixel, std::size_t> per_pixel_counts(Timestamp a, Timestamp b) const {
    check_window(a, b);
    std::map<Pixel, std::size_t> out;
    visit_counts(a, b, [&](std::uint32_t id, std::size_t n) { out.emplace(pixel_of_id(id), n); });
    return out;
  }

  /// Sum over pixels of the squared window count. Exact integer arithmetic.
  std::uint64_t sum_squared_counts(Timestamp a, Timestamp b) const {
    check_window(a, b);
    std::uint64_t acc = 0;
    visit_counts(a, b, [&](std::uint32_t, std::size_t n) { acc += static_cast<std::uint64_t>(n) * n; });
    return acc;
  }

 private:
  std::uint32_t linear_id(std::int32_t x, std::int32_t y) const {
    return static_cast<std::uint32_t>(y) * static_cast<std::uint32_t>(width_) + static_cast<std::uint32_t>(x);
  }

  Pixel pixel_of_id(std::uint32_t id) const {
    return {static_cast<std::int32_t>(id % static_cast<std::uint32_t>(width_)),
            static_cast<std::int32_t>(id / static_cast<std::uint32_t>(width_))};
  }

  static void check_window(Timestamp a, Timestamp b) {
    if (a > b) {
      throw InvalidArgument("window start " + std::to_string(a) + " after end " + std::to_string(b));
    }
  }

  static std::size_t count_sorted(std::span<const Timestamp> ts, Timestamp a, Timestamp b) {
    const auto lo = std::lower_bound(ts.begin(), ts.end(), a);
    const auto hi = std::upper_bound(lo, ts.end(), b);
    return static_cast<std::size_t>(hi - lo);
  }

  std::pair<std::size_t, std::size_t> ordinal_range(Timestamp a, Timestamp b) const {
    const auto lo = std::lower_bound(times_.begin(), times_.end(), a);
    const auto hi = std::upper_bound(lo, times_.end(), b);
    return {static_cast<std::size_t>(lo - times_.begin()), static_cast<std::size_t>(hi - times_.begin())};
  }

  // Calls fn(pixel id, count) for every pixel with a non-zero count, in ascending id order.
  // Short windows sort the window's pixel ids; long ones binary-search every active pixel.
  template <typename Fn>
  void visit_counts(Timestamp a, Timestamp b, Fn&& fn) const {
    const auto [lo, hi] = ordinal_range(a, b);
    const std::size_t n = hi - lo;
    if (n == 0) return;
    if (n < active_.size()) {
      std::vector<std::uint32_t> ids(pixel_of_.begin() + static_cast<std::ptrdiff_t>(lo),
                                     pixel_of_.begin() + static_cast<std::ptrdiff_t>(hi));
      std::sort(ids.begin(), ids.end());
      for (std::size_t i = 0; i < ids.size();) {
        std::size_t j = i + 1;
        while (j < ids.size() && ids[j] == ids[i]) ++j;
        fn(ids[i], j - i);
        i = j;
      }
      return;
    }
    for (const std::uint32_t id : active_) {
      const std::size_t c = count_sorted(per_pixel_[id], a, b);
      if (c > 0) fn(id, c);
    }
  }

  int width_ = 0;
  int height_ = 0;
  SweepConfig sweep_;
  std::vector<Timestamp> times_;
  std::vector<std::uint32_t> pixel_of_;
  std::vector<std::vector<Timestamp>> per_pixel_;
  std::vector<std::uint32_t> active_;
};

inline PrefixIndex build_prefix_index(const EventStream& stream) { return PrefixIndex(stream); }

}  // namespace evaf
