#include "lmflow/flow_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include "lmflow/error.hpp"

namespace lmflow::io {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, sep)) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::vector<std::string> nonempty_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

double parse_number(const std::string& s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorCode::BadField, "not a number: '" + s + "'");
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string matrix_to_csv(const TransitionMatrix& m) {
  std::ostringstream os;
  os << "from";
  for (const auto& l : m.space().labels()) os << ',' << l;
  os << '\n';
  for (int i = 0; i < m.size(); ++i) {
    os << m.space().label(i);
    for (int j = 0; j < m.size(); ++j) os << ',' << format_double(m(i, j));
    os << '\n';
  }
  return os.str();
}

TransitionMatrix matrix_from_csv(const std::string& text, QuarterId period) {
  const auto lines = nonempty_lines(text);
  if (lines.empty()) throw Error(ErrorCode::InvalidMatrix, "empty matrix CSV");
  auto header = split(lines[0], ',');
  if (header.size() < 3) throw Error(ErrorCode::InvalidMatrix, "matrix CSV header too short");
  StateSpace space(std::vector<std::string>(header.begin() + 1, header.end()));
  const int k = space.size();
  if (static_cast<int>(lines.size()) != k + 1) {
    throw Error(ErrorCode::InvalidMatrix, "matrix CSV must have one row per state");
  }
  Eigen::MatrixXd entries(k, k);
  std::vector<bool> seen(k, false);
  for (int r = 0; r < k; ++r) {
    auto cells = split(lines[r + 1], ',');
    if (static_cast<int>(cells.size()) != k + 1) {
      throw Error(ErrorCode::InvalidMatrix, "matrix CSV row has wrong width", r + 1);
    }
    const int i = space.index_of(cells[0]);
    if (seen[i]) throw Error(ErrorCode::InvalidMatrix, "origin state repeated", r + 1);
    seen[i] = true;
    for (int j = 0; j < k; ++j) entries(i, j) = parse_number(cells[j + 1]);
  }
  return TransitionMatrix(space, entries, period);
}

std::string shares_to_csv(const ShareVector& s) {
  std::ostringstream os;
  os << "period";
  for (const auto& l : s.space().labels()) os << ',' << l;
  os << '\n' << s.period().str();
  for (int i = 0; i < s.values().size(); ++i) os << ',' << format_double(s[i]);
  os << '\n';
  return os.str();
}

ShareVector shares_from_csv(const std::string& text) {
  const auto lines = nonempty_lines(text);
  if (lines.size() != 2) throw Error(ErrorCode::InvalidShareVector, "expected header plus one row");
  auto header = split(lines[0], ',');
  auto cells = split(lines[1], ',');
  if (header.size() < 3 || cells.size() != header.size()) {
    throw Error(ErrorCode::InvalidShareVector, "share CSV row width mismatch");
  }
  StateSpace space(std::vector<std::string>(header.begin() + 1, header.end()));
  Eigen::RowVectorXd v(space.size());
  for (int i = 0; i < space.size(); ++i) v(i) = parse_number(cells[i + 1]);
  return ShareVector(space, v, QuarterId::parse(cells[0]));
}

nlohmann::json to_json(const TransitionMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.size(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.size(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return {{"space", m.space().labels()}, {"period", m.period().str()}, {"entries", rows}};
}

nlohmann::json to_json(const ShareVector& s) {
  std::vector<double> v(s.values().data(), s.values().data() + s.values().size());
  return {{"space", s.space().labels()}, {"period", s.period().str()}, {"entries", v}};
}

TransitionMatrix matrix_from_json(const nlohmann::json& j) {
  try {
    StateSpace space(j.at("space").get<std::vector<std::string>>());
    const auto rows = j.at("entries").get<std::vector<std::vector<double>>>();
    const int k = space.size();
    if (static_cast<int>(rows.size()) != k) {
      throw Error(ErrorCode::InvalidMatrix, "entries must have K rows");
    }
    Eigen::MatrixXd e(k, k);
    for (int r = 0; r < k; ++r) {
      if (static_cast<int>(rows[r].size()) != k) {
        throw Error(ErrorCode::InvalidMatrix, "entries must have K columns");
      }
      for (int c = 0; c < k; ++c) e(r, c) = rows[r][c];
    }
    return TransitionMatrix(space, e, QuarterId::parse(j.at("period").get<std::string>()));
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::InvalidMatrix, std::string("malformed matrix JSON: ") + ex.what());
  }
}

ShareVector shares_from_json(const nlohmann::json& j) {
  try {
    StateSpace space(j.at("space").get<std::vector<std::string>>());
    const auto v = j.at("entries").get<std::vector<double>>();
    Eigen::RowVectorXd values = Eigen::Map<const Eigen::RowVectorXd>(v.data(), v.size());
    return ShareVector(space, values, QuarterId::parse(j.at("period").get<std::string>()));
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::InvalidShareVector, std::string("malformed share JSON: ") + ex.what());
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

TransitionMatrix read_matrix_file(const std::filesystem::path& path, QuarterId period) {
  const std::string text = read_text_file(path);
  if (path.extension() == ".json") {
    try {
      return matrix_from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::parse_error& ex) {
      throw Error(ErrorCode::InvalidMatrix, std::string("invalid JSON: ") + ex.what());
    }
  }
  return matrix_from_csv(text, period);
}

}  // namespace lmflow::io
