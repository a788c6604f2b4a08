#pragma once

#include <cstddef>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "scovreg/stack.hpp"

namespace scovreg::cli {

struct NumericTable {
    std::vector<std::string> header;
    Matrix values;
};

/// Header row plus numeric body. Errors carry "path:line:column".
NumericTable read_numeric_csv(const std::string& path);

struct TextTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> lines; ///< source line of each row
};

TextTable read_text_csv(const std::string& path);

std::vector<std::string> split_csv_line(std::string_view line);

/// 17 significant digits, enough to round-trip any double.
std::string format_double(double v);

double parse_double(std::string_view cell, const std::string& where);

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path);
    CsvWriter& cell(std::string_view text);
    CsvWriter& cell(double v);
    CsvWriter& cell(std::size_t v);
    void end_row();
    void close();

private:
    std::ofstream out_;
    std::string path_;
    bool first_ = true;
};

} // namespace scovreg::cli
