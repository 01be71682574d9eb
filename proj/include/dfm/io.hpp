#pragma once

#include "dfm/model.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace dfm::io {

/// A labelled table as found in CSV files: first row holds column names
/// (with the index header first), first column holds row labels. Missing
/// cells ("" or "NA") are NaN in `values`.
struct CsvTable {
    std::string index_name = "t";
    std::vector<std::string> row_labels;
    std::vector<std::string> col_names;
    Matrix values;  // rows x cols
};

/// Throws InputError with the 1-based line and column of the first bad cell.
CsvTable parse_csv(std::istream& in);
CsvTable read_csv(const std::string& path);

void write_csv(std::ostream& out, const CsvTable& table);
void write_csv(const std::string& path, const CsvTable& table);

/// Shortest round-trip form (17 significant digits at most); "NA" for NaN.
std::string format_double(double x);

/// Build a table from a variables x time matrix (the panel orientation), writing time down the rows.
CsvTable from_series(const Matrix& series_by_row, const std::vector<std::string>& names,
                     const std::vector<std::string>& time_labels, const std::string& index_name = "t");

/// Integer time labels first, first+1, ...
std::vector<std::string> time_range(int first, int count);

nlohmann::json to_json(const Matrix& m);
nlohmann::json to_json(const Vector& v);
Matrix matrix_from_json(const nlohmann::json& j);
Vector vector_from_json(const nlohmann::json& j);

nlohmann::json read_json(const std::string& path);
void write_json(const std::string& path, const nlohmann::json& j);

void write_text(const std::string& path, const std::string& text);

}  // namespace dfm::io
