#include "dfm/errors.hpp"
#include "dfm/io.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

using namespace dfm;

TEST_CASE("parse_csv reads labels, values and missing markers") {
    std::istringstream in("date,a,b\n2001,1.5,NA\n2002,,-2\r\n2003,3e-2, 4 \n");
    const io::CsvTable t = io::parse_csv(in);
    CHECK(t.index_name == "date");
    CHECK(t.col_names == std::vector<std::string>{"a", "b"});
    CHECK(t.row_labels == std::vector<std::string>{"2001", "2002", "2003"});
    REQUIRE(t.values.rows() == 3);
    CHECK(t.values(0, 0) == 1.5);
    CHECK(std::isnan(t.values(0, 1)));
    CHECK(std::isnan(t.values(1, 0)));
    CHECK(t.values(1, 1) == -2.0);
    CHECK(t.values(2, 0) == 0.03);
    CHECK(t.values(2, 1) == 4.0);
}

TEST_CASE("parse_csv handles quoted labels") {
    std::istringstream in("t,\"x, y\",z\n1,2,3\n");
    const io::CsvTable t = io::parse_csv(in);
    CHECK(t.col_names[0] == "x, y");
    CHECK(t.values(0, 1) == 3.0);
}

TEST_CASE("parse_csv reports the line and column of bad cells") {
    std::istringstream bad("t,a,b\n1,2,3\n2,4,abc\n");
    try {
        (void)io::parse_csv(bad);
        FAIL("expected InputError");
    } catch (const InputError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 3") != std::string::npos);
        CHECK(msg.find("column 3") != std::string::npos);
    }
    std::istringstream ragged("t,a,b\n1,2\n");
    CHECK_THROWS_AS(io::parse_csv(ragged), InputError);
    std::istringstream empty("");
    CHECK_THROWS_AS(io::parse_csv(empty), InputError);
    CHECK_THROWS_AS(io::read_csv("/nonexistent/file.csv"), InputError);
}

TEST_CASE("format_double round-trips and marks NaN") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> normal(0.0, 1e3);
    for (int k = 0; k < 1000; ++k) {
        const double x = normal(rng) * std::pow(10.0, k % 20 - 10);
        CHECK(std::stod(io::format_double(x)) == x);
    }
    CHECK(io::format_double(std::numeric_limits<double>::quiet_NaN()) == "NA");
    CHECK(io::format_double(0.5) == "0.5");
}

TEST_CASE("write_csv then parse_csv reproduces the table") {
    Matrix series(2, 3);
    series << 1.0 / 3.0, std::nan(""), 2.0, -1e-300, 5.0, 7.25;
    const io::CsvTable t = io::from_series(series, {"u", "v"}, io::time_range(0, 3));
    std::stringstream buf;
    io::write_csv(buf, t);
    const io::CsvTable back = io::parse_csv(buf);
    CHECK(back.row_labels == std::vector<std::string>{"0", "1", "2"});
    CHECK(back.col_names == t.col_names);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 2; ++c) {
            if (std::isnan(series(c, r))) CHECK(std::isnan(back.values(r, c)));
            else CHECK(back.values(r, c) == series(c, r));
        }
}

TEST_CASE("json matrix helpers round-trip") {
    Matrix m(2, 3);
    m << 1, 2, 3, 4, 5, 6.5;
    CHECK(io::matrix_from_json(io::to_json(m)) == m);
    Vector v(3);
    v << 0.1, 0.2, 0.3;
    CHECK(io::vector_from_json(io::to_json(v)) == v);
    CHECK(io::vector_from_json(nlohmann::json(2.0)).size() == 1);
}
