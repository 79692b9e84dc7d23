#include "isp/csv.hpp"

#include "isp/errors.hpp"

#include <cstdio>
#include <sstream>

namespace isp {

std::string format_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::string& path) : out_(path) {
    require(out_.good(), ErrorCategory::io, "cannot open for writing: " + path);
}

void CsvWriter::header(const std::vector<std::string>& names) {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) out_ << ',';
        out_ << names[i];
    }
    out_ << '\n';
}

void CsvWriter::cell(const std::string& s) {
    if (row_started_) out_ << ',';
    out_ << s;
    row_started_ = true;
}

void CsvWriter::cell(double v) { cell(format_full(v)); }

void CsvWriter::cell(long long v) { cell(std::to_string(v)); }

void CsvWriter::end_row() {
    out_ << '\n';
    row_started_ = false;
}

int CsvTable::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return static_cast<int>(i);
    return -1;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCategory::io, "cannot open for reading: " + path);

    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.push_back("");
        if (first) {
            table.columns = std::move(cells);
            first = false;
        } else {
            require(cells.size() == table.columns.size(), ErrorCategory::io,
                    "ragged CSV row in " + path);
            table.rows.push_back(std::move(cells));
        }
    }
    require(!first, ErrorCategory::io, "empty CSV: " + path);
    return table;
}

} // namespace isp
