#include "betula/csv.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "betula/serialization.hpp"

namespace betula {

namespace {

std::vector<std::string_view> split_line(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            cells.push_back(line.substr(start));
            return cells;
        }
        cells.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool try_parse_finite(std::string_view cell, double& out) {
    try {
        out = parse_double(cell);
    } catch (const std::invalid_argument&) {
        return false;
    }
    return std::isfinite(out);
}

}  // namespace

LabeledPoints points_from_csv(std::string_view text, std::string_view source_name) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t pos = text.find('\n', start);
        if (pos == std::string_view::npos) pos = text.size();
        std::string_view line = text.substr(start, pos - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        start = pos + 1;
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty()) throw std::runtime_error(std::string(source_name) + ": empty input");

    auto fail = [&](std::size_t row, const std::string& what) -> void {
        throw std::runtime_error(std::string(source_name) + ":" + std::to_string(row + 1) + ": " + what);
    };

    // Header detection: a first row with any non-numeric cell is a header.
    const auto first_cells = split_line(lines[0]);
    bool has_header = false;
    for (std::string_view cell : first_cells) {
        double unused;
        if (!try_parse_finite(cell, unused)) {
            has_header = true;
            break;
        }
    }

    std::ptrdiff_t label_col = -1;
    if (has_header) {
        for (std::size_t i = 0; i < first_cells.size(); ++i)
            if (lower(first_cells[i]) == "label") label_col = static_cast<std::ptrdiff_t>(i);
    }

    const std::size_t columns = first_cells.size();
    const std::size_t dim = columns - (label_col >= 0 ? 1 : 0);
    if (dim == 0) fail(0, "no coordinate columns");

    LabeledPoints out;
    out.dim = dim;
    for (std::size_t row = has_header ? 1 : 0; row < lines.size(); ++row) {
        if (lines[row].empty()) fail(row, "empty row");
        const auto cells = split_line(lines[row]);
        if (cells.size() != columns)
            fail(row, "expected " + std::to_string(columns) + " columns, got " + std::to_string(cells.size()));
        for (std::size_t col = 0; col < cells.size(); ++col) {
            double value;
            if (!try_parse_finite(cells[col], value))
                fail(row, "column " + std::to_string(col + 1) + ": not a finite number: '" +
                              std::string(cells[col]) + "'");
            if (static_cast<std::ptrdiff_t>(col) == label_col)
                out.labels.push_back(static_cast<std::int32_t>(std::llround(value)));
            else
                out.coords.push_back(value);
        }
    }
    if (out.coords.empty()) fail(has_header ? 1 : 0, "no data rows");
    return out;
}

LabeledPoints read_points_csv(const std::string& path) {
    return points_from_csv(read_file(path), path);
}

std::string points_to_csv(const LabeledPoints& points) {
    const bool labeled = !points.labels.empty();
    std::string out;
    for (std::size_t j = 0; j < points.dim; ++j) {
        if (j) out += ',';
        out += 'x' + std::to_string(j + 1);
    }
    if (labeled) out += ",label";
    out += '\n';
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = 0; j < points.dim; ++j) {
            if (j) out += ',';
            out += format_double(points.coords[i * points.dim + j]);
        }
        if (labeled) {
            out += ',';
            out += std::to_string(points.labels[i]);
        }
        out += '\n';
    }
    return out;
}

void write_points_csv(const std::string& path, const LabeledPoints& points) {
    write_file(path, points_to_csv(points));
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace betula
