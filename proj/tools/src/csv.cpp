#include "scovreg_cli/csv.hpp"

#include <charconv>
#include <cmath>

#include "scovreg/error.hpp"

namespace scovreg::cli {
namespace {

std::string location(const std::string& path, std::size_t line, std::size_t col) {
    return path + ":" + std::to_string(line) + ":" + std::to_string(col);
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError(path + ": cannot open file");
    }
    return in;
}

} // namespace

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.emplace_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.emplace_back(trim(cur));
    return out;
}

double parse_double(std::string_view cell, const std::string& where) {
    cell = trim(cell);
    if (!cell.empty() && cell.front() == '+') {
        cell.remove_prefix(1);
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw InputError(where + ": non-numeric cell '" + std::string(cell) + "'");
    }
    if (!std::isfinite(v)) {
        throw InputError(where + ": non-finite value '" + std::string(cell) + "'");
    }
    return v;
}

TextTable read_text_csv(const std::string& path) {
    auto in = open_input(path);
    TextTable t;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) {
            continue;
        }
        if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
            line.erase(0, 3);
        }
        auto cells = split_csv_line(line);
        if (!have_header) {
            t.header = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != t.header.size()) {
            throw InputError(location(path, lineno, std::min(cells.size(), t.header.size()) + 1) +
                             ": ragged row with " + std::to_string(cells.size()) + " fields, header has " +
                             std::to_string(t.header.size()));
        }
        t.rows.push_back(std::move(cells));
        t.lines.push_back(lineno);
    }
    if (!have_header) {
        throw InputError(path + ": empty file (a header row is required)");
    }
    return t;
}

NumericTable read_numeric_csv(const std::string& path) {
    TextTable text = read_text_csv(path);
    NumericTable t;
    t.header = std::move(text.header);
    t.values.resize(static_cast<Eigen::Index>(text.rows.size()), static_cast<Eigen::Index>(t.header.size()));
    for (std::size_t r = 0; r < text.rows.size(); ++r) {
        for (std::size_t c = 0; c < t.header.size(); ++c) {
            t.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                parse_double(text.rows[r][c], location(path, text.lines[r], c + 1));
        }
    }
    return t;
}

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

CsvWriter::CsvWriter(const std::string& path) : out_(path), path_(path) {
    if (!out_) {
        throw InputError(path + ": cannot open for writing");
    }
}

CsvWriter& CsvWriter::cell(std::string_view text) {
    if (!first_) {
        out_ << ',';
    }
    first_ = false;
    if (text.find_first_of(",\"\n") != std::string_view::npos) {
        out_ << '"';
        for (char c : text) {
            out_ << c;
            if (c == '"') {
                out_ << '"';
            }
        }
        out_ << '"';
    } else {
        out_ << text;
    }
    return *this;
}

CsvWriter& CsvWriter::cell(double v) { return cell(format_double(v)); }

CsvWriter& CsvWriter::cell(std::size_t v) { return cell(std::to_string(v)); }

void CsvWriter::end_row() {
    out_ << '\n';
    first_ = true;
}

void CsvWriter::close() {
    out_.close();
    if (!out_) {
        throw InputError(path_ + ": write failed");
    }
}

} // namespace scovreg::cli
