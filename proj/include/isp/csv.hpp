#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace isp {

/// CSV writer emitting doubles with 17 significant digits so that values
/// round-trip bit-exactly through text.
class CsvWriter {
public:
    explicit CsvWriter(const std::string& path);

    void header(const std::vector<std::string>& names);
    void cell(const std::string& s);
    void cell(double v);
    void cell(long long v);
    void end_row();

private:
    std::ofstream out_;
    bool row_started_ = false;
};

std::string format_full(double v);

/// Minimal CSV reader: one header line, then homogeneous rows.
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    int column_index(const std::string& name) const; // -1 if absent
};

CsvTable read_csv(const std::string& path);

} // namespace isp
