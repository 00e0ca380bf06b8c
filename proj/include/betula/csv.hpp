#pragma once

#include <string>
#include <string_view>

#include "betula/datagen.hpp"

namespace betula {

// Point CSV: optional header row; when a header column is named "label"
// (case-insensitive) that column is kept as the cluster label and the rest
// are coordinates. Without a header every column is a coordinate. Cells
// must be finite numbers; anything else is rejected with its row and
// column. Rows must all have the same width.
LabeledPoints points_from_csv(std::string_view text, std::string_view source_name = "csv");
LabeledPoints read_points_csv(const std::string& path);

// Writes header x1,...,xd[,label] and one row per point with 17
// significant digits.
std::string points_to_csv(const LabeledPoints& points);
void write_points_csv(const std::string& path, const LabeledPoints& points);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace betula
