#pragma once

#include <string>
#include <vector>

namespace xens {

// Rectangular report with pre-formatted cells. Written in three sibling
// formats: CSV, JSON and a gnuplot-friendly whitespace table (.dat).
struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> cells);
};

std::string fmt_num(double v);        // fixed 4 decimals
std::string fmt_num6(double v);       // fixed 6 decimals

std::string table_to_csv(const Table& t);
std::string table_to_json(const Table& t);
std::string table_to_dat(const Table& t);
std::string table_to_text(const Table& t);  // aligned, for stdout

// Writes <dir>/<name>.csv, .json and .dat.
void write_table(const Table& t, const std::string& dir);

}  // namespace xens
