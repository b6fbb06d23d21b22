#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>

#include "lmflow/flow_core.hpp"

namespace lmflow::io {

// CSV layout: header row "from,<labels...>" then one row per origin state.
std::string matrix_to_csv(const TransitionMatrix& m);
/// Period is not stored in the CSV layout and must be supplied.
TransitionMatrix matrix_from_csv(const std::string& text, QuarterId period);

// CSV layout: header row "period,<labels...>" then a single data row.
std::string shares_to_csv(const ShareVector& s);
ShareVector shares_from_csv(const std::string& text);

// {"space": [...], "period": "2018Q3", "entries": [[...], ...]}
nlohmann::json to_json(const TransitionMatrix& m);
nlohmann::json to_json(const ShareVector& s);
TransitionMatrix matrix_from_json(const nlohmann::json& j);
ShareVector shares_from_json(const nlohmann::json& j);

/// Reads a matrix file, dispatching on the .json / .csv extension.
TransitionMatrix read_matrix_file(const std::filesystem::path& path,
                                  QuarterId period = QuarterId(2000, 1));

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Shortest decimal form that round-trips the double.
std::string format_double(double v);

}  // namespace lmflow::io
