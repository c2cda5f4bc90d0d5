#pragma once

#include <string>
#include <vector>

namespace rodsim {

// Shortest text that round-trips the double exactly.
std::string format_double(double v);

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    int column_index(const std::string& name) const;
    std::vector<double> column(const std::string& name) const;
    std::string to_string() const;
};

void write_csv(const CsvTable& table, const std::string& path);
CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text);

}  // namespace rodsim
