#include "dfm/io.hpp"

#include "dfm/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace dfm::io {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        const char c = line[k];
        if (quoted) {
            if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
                cell += '"';
                ++k;
            } else if (c == '"') {
                quoted = false;
            } else {
                cell += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cell);
            cell.clear();
        } else {
            cell += c;
        }
    }
    out.push_back(cell);
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

CsvTable parse_csv(std::istream& in) {
    CsvTable table;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        std::vector<std::string> cells = split_line(line);
        if (!have_header) {
            if (cells.size() < 2) {
                throw InputError("CSV line " + std::to_string(lineno) + ": header needs an index column and at least one variable");
            }
            table.index_name = trim(cells[0]);
            for (std::size_t c = 1; c < cells.size(); ++c) table.col_names.push_back(trim(cells[c]));
            have_header = true;
            continue;
        }
        if (cells.size() != table.col_names.size() + 1) {
            throw InputError("CSV line " + std::to_string(lineno) + ": expected " +
                             std::to_string(table.col_names.size() + 1) + " columns, found " +
                             std::to_string(cells.size()));
        }
        table.row_labels.push_back(trim(cells[0]));
        std::vector<double> vals;
        vals.reserve(cells.size() - 1);
        for (std::size_t c = 1; c < cells.size(); ++c) {
            const std::string cell = trim(cells[c]);
            if (cell.empty() || cell == "NA") {
                vals.push_back(std::numeric_limits<double>::quiet_NaN());
                continue;
            }
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
                throw InputError("CSV line " + std::to_string(lineno) + ", column " + std::to_string(c + 1) +
                                 ": cannot parse '" + cell + "' as a number");
            }
            vals.push_back(v);
        }
        rows.push_back(std::move(vals));
    }
    if (!have_header) throw InputError("CSV input is empty");
    table.values = Matrix(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(table.col_names.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return table;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open CSV file '" + path + "'");
    return parse_csv(in);
}

std::string format_double(double x) {
    if (std::isnan(x)) return "NA";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc()) throw InputError("cannot format number");
    return std::string(buf, ptr);
}

void write_csv(std::ostream& out, const CsvTable& table) {
    out << quote_if_needed(table.index_name);
    for (const auto& name : table.col_names) out << ',' << quote_if_needed(name);
    out << '\n';
    for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
        out << quote_if_needed(table.row_labels.at(static_cast<std::size_t>(r)));
        for (Eigen::Index c = 0; c < table.values.cols(); ++c) out << ',' << format_double(table.values(r, c));
        out << '\n';
    }
}

void write_csv(const std::string& path, const CsvTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path + "'");
    write_csv(out, table);
}

CsvTable from_series(const Matrix& series_by_row, const std::vector<std::string>& names,
                     const std::vector<std::string>& time_labels, const std::string& index_name) {
    if (static_cast<Eigen::Index>(names.size()) != series_by_row.rows() ||
        static_cast<Eigen::Index>(time_labels.size()) != series_by_row.cols()) {
        throw StructuralError("from_series: label counts do not match matrix shape");
    }
    CsvTable t;
    t.index_name = index_name;
    t.col_names = names;
    t.row_labels = time_labels;
    t.values = series_by_row.transpose();
    return t;
}

std::vector<std::string> time_range(int first, int count) {
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(std::max(count, 0)));
    for (int k = 0; k < count; ++k) out.push_back(std::to_string(first + k));
    return out;
}

nlohmann::json to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

nlohmann::json to_json(const Vector& v) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v(k));
    return out;
}

Matrix matrix_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw InputError("expected a JSON array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = j.at(static_cast<std::size_t>(r));
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw InputError("ragged JSON matrix");
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
    return m;
}

Vector vector_from_json(const nlohmann::json& j) {
    if (j.is_number()) return Vector::Constant(1, j.get<double>());
    if (!j.is_array()) throw InputError("expected a JSON array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t k = 0; k < j.size(); ++k) v(static_cast<Eigen::Index>(k)) = j.at(k).get<double>();
    return v;
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError("invalid JSON in '" + path + "': " + e.what());
    }
}

void write_json(const std::string& path, const nlohmann::json& j) {
    write_text(path, j.dump(2) + "\n");
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path + "'");
    out << text;
}

}  // namespace dfm::io
