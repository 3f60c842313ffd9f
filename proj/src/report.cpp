#include "xens/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "xens/error.hpp"

namespace xens {

using json = nlohmann::ordered_json;

void Table::add_row(std::vector<std::string> cells) {
    if (cells.size() != columns.size())
        fail_invalid("table '" + name + "': row width " + std::to_string(cells.size()) +
                     " does not match " + std::to_string(columns.size()) + " columns");
    rows.push_back(std::move(cells));
}

std::string fmt_num(double v) {
    char buf[64];
    snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::string fmt_num6(double v) {
    char buf[64];
    snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

namespace {

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

std::string dat_cell(const std::string& s) {
    std::string out = s.empty() ? "-" : s;
    for (char& c : out)
        if (c == ' ' || c == '\t') c = '_';
    return out;
}

}  // namespace

std::string table_to_csv(const Table& t) {
    std::ostringstream os;
    for (size_t i = 0; i < t.columns.size(); ++i)
        os << (i ? "," : "") << csv_escape(t.columns[i]);
    os << "\n";
    for (const auto& row : t.rows) {
        for (size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_escape(row[i]);
        os << "\n";
    }
    return os.str();
}

std::string table_to_json(const Table& t) {
    json doc;
    doc["name"] = t.name;
    doc["columns"] = t.columns;
    json rows = json::array();
    for (const auto& row : t.rows) {
        json r = json::object();
        for (size_t i = 0; i < row.size(); ++i) r[t.columns[i]] = row[i];
        rows.push_back(std::move(r));
    }
    doc["rows"] = std::move(rows);
    return doc.dump(2) + "\n";
}

std::string table_to_dat(const Table& t) {
    std::ostringstream os;
    os << "#";
    for (const auto& c : t.columns) os << " " << dat_cell(c);
    os << "\n";
    for (const auto& row : t.rows) {
        for (size_t i = 0; i < row.size(); ++i) os << (i ? " " : "") << dat_cell(row[i]);
        os << "\n";
    }
    return os.str();
}

std::string table_to_text(const Table& t) {
    std::vector<size_t> width(t.columns.size());
    for (size_t i = 0; i < t.columns.size(); ++i) width[i] = t.columns[i].size();
    for (const auto& row : t.rows)
        for (size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
    std::ostringstream os;
    os << t.name << "\n";
    auto line = [&](const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            os << cells[i] << std::string(width[i] - cells[i].size(), ' ');
            os << (i + 1 < cells.size() ? "  " : "");
        }
        os << "\n";
    };
    line(t.columns);
    for (const auto& row : t.rows) line(row);
    return os.str();
}

void write_table(const Table& t, const std::string& dir) {
    auto put = [&](const std::string& ext, const std::string& content) {
        const std::string path = dir + "/" + t.name + ext;
        std::ofstream out(path, std::ios::binary);
        if (!out) fail_data("cannot open '" + path + "' for writing");
        out << content;
        if (!out) fail_data("failed writing '" + path + "'");
    };
    put(".csv", table_to_csv(t));
    put(".json", table_to_json(t));
    put(".dat", table_to_dat(t));
}

}  // namespace xens
