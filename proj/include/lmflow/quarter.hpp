#pragma once

#include <compare>
#include <string>
#include <string_view>

namespace lmflow {

/// Calendar quarter. Ordered lexicographically by (year, quarter).
class QuarterId {
 public:
  QuarterId() = default;
  QuarterId(int year, int quarter);

  /// Parses "YYYYQn" with n in 1..4. Throws BadQuarterFormat otherwise.
  static QuarterId parse(std::string_view text);

  int year() const noexcept { return year_; }
  int quarter() const noexcept { return quarter_; }

  QuarterId next() const { return plus(1); }
  QuarterId prev() const { return plus(-1); }
  QuarterId plus(int quarters) const;

  /// Signed number of quarters from `other` to *this.
  int minus(const QuarterId& other) const noexcept { return index() - other.index(); }

  std::string str() const;

  auto operator<=>(const QuarterId&) const = default;

 private:
  int index() const noexcept { return year_ * 4 + (quarter_ - 1); }

  int year_ = 1970;
  int quarter_ = 1;
};

/// Inclusive range of quarters, written "2016Q1:2018Q3".
struct QuarterWindow {
  QuarterId first;
  QuarterId last;

  static QuarterWindow parse(std::string_view text);
  int size() const noexcept { return last.minus(first) + 1; }
  bool contains(const QuarterId& q) const noexcept { return first <= q && q <= last; }
  std::string str() const { return first.str() + ":" + last.str(); }
};

}  // namespace lmflow
