#include "lmflow/panel.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "lmflow/error.hpp"
#include "lmflow/flow_io.hpp"

namespace lmflow {

namespace {

constexpr std::array<const char*, 8> kColumns = {
    "person_id", "period", "state", "weight", "sex", "age", "education", "region"};

std::string read_gzip(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::string out;
  std::array<char, 1 << 16> buf{};
  int n = 0;
  while ((n = gzread(f, buf.data(), static_cast<unsigned>(buf.size()))) > 0) {
    out.append(buf.data(), static_cast<std::size_t>(n));
  }
  int errnum = 0;
  const char* msg = gzerror(f, &errnum);
  const bool failed = n < 0 || (errnum != Z_OK && errnum != Z_STREAM_END);
  const std::string detail = failed ? std::string(msg) : std::string();
  gzclose(f);
  if (failed) throw Error(ErrorCode::IoError, "gzip read failed for " + path.string() + ": " + detail);
  return out;
}

void split_into(const std::string& line, std::vector<std::string>& cells) {
  cells.clear();
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      cells.emplace_back(line.substr(start));
      break;
    }
    cells.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

Sex parse_sex(const std::string& s, long row) {
  if (s.empty()) return Sex::Unknown;
  if (s == "M") return Sex::Male;
  if (s == "F") return Sex::Female;
  throw Error(ErrorCode::BadField, "sex must be M, F or empty, got '" + s + "'", row);
}

Education parse_education(const std::string& s, long row) {
  if (s.empty()) return Education::Unknown;
  if (s == "low") return Education::Low;
  if (s == "high") return Education::High;
  throw Error(ErrorCode::BadField, "education must be low, high or empty, got '" + s + "'", row);
}

Region parse_region(const std::string& s, long row) {
  if (s.empty()) return Region::Unknown;
  if (s == "north_center") return Region::NorthCenter;
  if (s == "south") return Region::South;
  throw Error(ErrorCode::BadField, "region must be north_center, south or empty, got '" + s + "'",
              row);
}

const char* sex_str(Sex s) {
  switch (s) {
    case Sex::Male: return "M";
    case Sex::Female: return "F";
    case Sex::Unknown: return "";
  }
  return "";
}

const char* education_str(Education e) {
  switch (e) {
    case Education::Low: return "low";
    case Education::High: return "high";
    case Education::Unknown: return "";
  }
  return "";
}

const char* region_str(Region r) {
  switch (r) {
    case Region::NorthCenter: return "north_center";
    case Region::South: return "south";
    case Region::Unknown: return "";
  }
  return "";
}

}  // namespace

std::vector<PersonQuarterRecord> parse_panel_text(const std::string& text,
                                                  const PanelOptions& options) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MissingColumn, "panel file has no header");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> cells;
  split_into(line, cells);
  std::array<std::size_t, kColumns.size()> col{};
  for (std::size_t c = 0; c < kColumns.size(); ++c) {
    auto it = std::find(cells.begin(), cells.end(), kColumns[c]);
    if (it == cells.end()) {
      throw Error(ErrorCode::MissingColumn, std::string("missing column '") + kColumns[c] + "'");
    }
    col[c] = static_cast<std::size_t>(it - cells.begin());
  }
  const std::size_t width = cells.size();

  std::vector<PersonQuarterRecord> records;
  long row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++row;
    if (line.empty()) continue;
    split_into(line, cells);
    if (cells.size() != width) {
      throw Error(ErrorCode::BadField,
                  "expected " + std::to_string(width) + " fields, got " + std::to_string(cells.size()),
                  row);
    }
    PersonQuarterRecord r;
    r.person_id = cells[col[0]];
    if (r.person_id.empty()) throw Error(ErrorCode::BadField, "empty person_id", row);
    try {
      r.period = QuarterId::parse(cells[col[1]]);
    } catch (const Error& e) {
      throw Error(ErrorCode::BadQuarterFormat, e.what(), row);
    }
    auto state = options.space.find(cells[col[2]]);
    if (!state) throw Error(ErrorCode::BadStateLabel, "unknown state '" + cells[col[2]] + "'", row);
    r.state = *state;

    const std::string& w = cells[col[3]];
    auto [wp, wec] = std::from_chars(w.data(), w.data() + w.size(), r.weight);
    if (wec != std::errc() || wp != w.data() + w.size() || !std::isfinite(r.weight)) {
      throw Error(ErrorCode::BadField, "weight is not a number: '" + w + "'", row);
    }
    if (!(r.weight > 0.0)) throw Error(ErrorCode::NonPositiveWeight, "weight must be > 0", row);

    r.sex = parse_sex(cells[col[4]], row);
    const std::string& a = cells[col[5]];
    if (!a.empty()) {
      auto [ap, aec] = std::from_chars(a.data(), a.data() + a.size(), r.age);
      if (aec != std::errc() || ap != a.data() + a.size() || r.age < 0) {
        throw Error(ErrorCode::BadField, "age must be a non-negative integer, got '" + a + "'", row);
      }
    }
    r.education = parse_education(cells[col[6]], row);
    r.region = parse_region(cells[col[7]], row);

    if (options.working_age_only && r.age != kUnknownAge && (r.age < 15 || r.age > 64)) continue;
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<PersonQuarterRecord> parse_panel(const std::filesystem::path& path,
                                             const PanelOptions& options) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::IoError, "input file not found: " + path.string());
  }
  const std::string text =
      path.extension() == ".gz" ? read_gzip(path) : io::read_text_file(path);
  return parse_panel_text(text, options);
}

std::string panel_to_csv(const std::vector<PersonQuarterRecord>& records,
                         const StateSpace& space) {
  std::string out = "person_id,period,state,weight,sex,age,education,region\n";
  out.reserve(records.size() * 48);
  for (const auto& r : records) {
    out += r.person_id;
    out += ',';
    out += r.period.str();
    out += ',';
    out += space.label(r.state);
    out += ',';
    out += io::format_double(r.weight);
    out += ',';
    out += sex_str(r.sex);
    out += ',';
    if (r.age != kUnknownAge) out += std::to_string(r.age);
    out += ',';
    out += education_str(r.education);
    out += ',';
    out += region_str(r.region);
    out += '\n';
  }
  return out;
}

void write_panel(const std::filesystem::path& path,
                 const std::vector<PersonQuarterRecord>& records, const StateSpace& space) {
  const std::string text = panel_to_csv(records, space);
  if (path.extension() == ".gz") {
    gzFile f = gzopen(path.string().c_str(), "wb");
    if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    const int written = gzwrite(f, text.data(), static_cast<unsigned>(text.size()));
    gzclose(f);
    if (written != static_cast<int>(text.size())) {
      throw Error(ErrorCode::IoError, "gzip write failed for " + path.string());
    }
    return;
  }
  io::write_text_file(path, text);
}

std::vector<TransitionRecord> link_transitions(const std::vector<PersonQuarterRecord>& records,
                                               const LinkOptions& options) {
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ra = records[a];
    const auto& rb = records[b];
    if (ra.person_id != rb.person_id) return ra.person_id < rb.person_id;
    return ra.period < rb.period;
  });

  std::vector<TransitionRecord> out;
  for (std::size_t k = 1; k < order.size(); ++k) {
    const auto& prev = records[order[k - 1]];
    const auto& cur = records[order[k]];
    if (prev.person_id != cur.person_id) continue;
    if (prev.period == cur.period) {
      throw Error(ErrorCode::DuplicateObservation,
                  "person " + cur.person_id + " observed twice in " + cur.period.str());
    }
    if (cur.period != prev.period.next()) continue;
    const double w = options.weight == WeightConvention::Destination ? cur.weight : prev.weight;
    out.push_back(TransitionRecord{cur.person_id, prev.state, cur.state, cur.period, w});
  }
  std::stable_sort(out.begin(), out.end(), [](const TransitionRecord& a, const TransitionRecord& b) {
    return a.period < b.period;
  });
  return out;
}

SubgroupFilter SubgroupFilter::all() { return SubgroupFilter(); }

SubgroupFilter SubgroupFilter::parse(const std::string& expr, int young_cutoff) {
  SubgroupFilter f;
  f.young_cutoff_ = young_cutoff;
  f.name_ = expr.empty() ? "all" : expr;

  std::string normalized = expr;
  std::replace(normalized.begin(), normalized.end(), '&', ',');
  std::stringstream ss(normalized);
  std::string term;
  auto bad = [&](const std::string& t) {
    return Error(ErrorCode::InvalidArgument, "unrecognised filter term '" + t + "'");
  };
  auto parse_int = [&](const std::string& s, const std::string& t) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw bad(t);
    return v;
  };
  while (std::getline(ss, term, ',')) {
    if (term.empty() || term == "all") continue;
    if (term == "young") {
      f.terms_.push_back({Field::Age, Op::Less, young_cutoff});
    } else if (term == "sex=M" || term == "sex=F") {
      f.terms_.push_back({Field::Sex, Op::Eq, static_cast<int>(term.back() == 'F' ? Sex::Female : Sex::Male)});
    } else if (term.rfind("age>=", 0) == 0) {
      f.terms_.push_back({Field::Age, Op::GreaterEq, parse_int(term.substr(5), term)});
    } else if (term.rfind("age<", 0) == 0) {
      f.terms_.push_back({Field::Age, Op::Less, parse_int(term.substr(4), term)});
    } else if (term == "edu=low" || term == "edu=high") {
      f.terms_.push_back({Field::Education, Op::Eq,
                          static_cast<int>(term == "edu=low" ? Education::Low : Education::High)});
    } else if (term == "region=south" || term == "region=north_center") {
      f.terms_.push_back({Field::Region, Op::Eq,
                          static_cast<int>(term == "region=south" ? Region::South : Region::NorthCenter)});
    } else {
      throw bad(term);
    }
  }
  return f;
}

bool SubgroupFilter::accepts(const PersonQuarterRecord& r) const {
  for (const auto& t : terms_) {
    switch (t.field) {
      case Field::Sex:
        if (static_cast<int>(r.sex) != t.value) return false;
        break;
      case Field::Education:
        if (static_cast<int>(r.education) != t.value) return false;
        break;
      case Field::Region:
        if (static_cast<int>(r.region) != t.value) return false;
        break;
      case Field::Age:
        if (r.age == kUnknownAge) return false;
        if (t.op == Op::Less && !(r.age < t.value)) return false;
        if (t.op == Op::GreaterEq && !(r.age >= t.value)) return false;
        break;
    }
  }
  return true;
}

std::vector<PersonQuarterRecord> apply_filter(const std::vector<PersonQuarterRecord>& records,
                                              const SubgroupFilter& filter) {
  if (filter.is_all()) return records;
  std::vector<PersonQuarterRecord> out;
  for (const auto& r : records) {
    if (filter.accepts(r)) out.push_back(r);
  }
  return out;
}

LinkedPanel prepare_panel(const std::vector<PersonQuarterRecord>& records,
                          const StateSpace& space, const SubgroupFilter& filter,
                          const LinkOptions& options) {
  LinkedPanel panel{space, apply_filter(records, filter), {}};
  panel.transitions = link_transitions(panel.records, options);
  return panel;
}

}  // namespace lmflow
