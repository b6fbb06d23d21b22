#include "lmflow/quarter.hpp"

#include <cctype>

#include "lmflow/error.hpp"

namespace lmflow {

QuarterId::QuarterId(int year, int quarter) : year_(year), quarter_(quarter) {
  if (quarter < 1 || quarter > 4) {
    throw Error(ErrorCode::BadQuarterFormat,
                "quarter must be in 1..4, got " + std::to_string(quarter));
  }
}

QuarterId QuarterId::parse(std::string_view text) {
  auto bad = [&] {
    return Error(ErrorCode::BadQuarterFormat,
                 "expected YYYYQn, got '" + std::string(text) + "'");
  };
  if (text.size() != 6 || text[4] != 'Q') throw bad();
  int year = 0;
  for (int i = 0; i < 4; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) throw bad();
    year = year * 10 + (text[i] - '0');
  }
  const char q = text[5];
  if (q < '1' || q > '4') throw bad();
  return QuarterId(year, q - '0');
}

QuarterId QuarterId::plus(int quarters) const {
  const int idx = index() + quarters;
  // floor division keeps negative offsets well-defined
  int year = idx / 4;
  int rem = idx % 4;
  if (rem < 0) {
    rem += 4;
    year -= 1;
  }
  return QuarterId(year, rem + 1);
}

std::string QuarterId::str() const {
  std::string y = std::to_string(year_);
  while (y.size() < 4) y.insert(y.begin(), '0');
  return y + "Q" + std::to_string(quarter_);
}

QuarterWindow QuarterWindow::parse(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw Error(ErrorCode::BadQuarterFormat,
                "expected FIRST:LAST window, got '" + std::string(text) + "'");
  }
  QuarterWindow w{QuarterId::parse(text.substr(0, colon)),
                  QuarterId::parse(text.substr(colon + 1))};
  if (w.last < w.first) {
    throw Error(ErrorCode::InvalidArgument, "window end precedes start: " + std::string(text));
  }
  return w;
}

}  // namespace lmflow
