#include "betula/serialization.hpp"

#include <charconv>
#include <cstdio>
#include <stdexcept>
#include <vector>

namespace betula {

namespace {

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = text.find(sep, start);
        if (pos == std::string_view::npos) {
            parts.push_back(text.substr(start));
            return parts;
        }
        parts.push_back(text.substr(start, pos - start));
        start = pos + 1;
    }
}

std::vector<double> parse_vector(std::string_view text, const char* what) {
    std::vector<double> out;
    for (std::string_view part : split(text, ',')) {
        if (part.empty()) throw std::invalid_argument(std::string(what) + ": empty component");
        out.push_back(parse_double(part));
    }
    return out;
}

}  // namespace

std::string format_double(double value) {
    char buf[40];
    const int n = std::snprintf(buf, sizeof(buf), "%.17g", value);
    return std::string(buf, static_cast<std::size_t>(n));
}

double parse_double(std::string_view text) {
    double value{};
    const char* first = text.data();
    const char* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last)
        throw std::invalid_argument("not a number: '" + std::string(text) + "'");
    return value;
}

std::string to_text(const BetulaFeature& f) {
    std::string out = format_double(f.weight);
    out += ';';
    for (std::size_t i = 0; i < f.mean.size(); ++i) {
        if (i) out += ',';
        out += format_double(f.mean[i]);
    }
    out += ';';
    for (std::size_t i = 0; i < f.sq_dev.size(); ++i) {
        if (i) out += ',';
        out += format_double(f.sq_dev[i]);
    }
    return out;
}

std::string to_text(const BirchFeature& f) {
    std::string out = std::to_string(f.count);
    out += ';';
    for (std::size_t i = 0; i < f.linear_sum.size(); ++i) {
        if (i) out += ',';
        out += format_double(f.linear_sum[i]);
    }
    out += ';';
    out += format_double(f.sum_squares);
    return out;
}

BetulaFeature betula_feature_from_text(std::string_view text) {
    const auto parts = split(text, ';');
    if (parts.size() != 3) throw std::invalid_argument("betula feature: expected n;mu;S");
    BetulaFeature f;
    f.weight = parse_double(parts[0]);
    f.mean = parse_vector(parts[1], "betula feature mean");
    f.sq_dev = parse_vector(parts[2], "betula feature sq_dev");
    if (f.mean.size() != f.sq_dev.size())
        throw std::invalid_argument("betula feature: mean and sq_dev dimensionality differ");
    return f;
}

BirchFeature birch_feature_from_text(std::string_view text) {
    const auto parts = split(text, ';');
    if (parts.size() != 3) throw std::invalid_argument("birch feature: expected N;LS;SS");
    BirchFeature f;
    f.count = static_cast<std::int64_t>(parse_double(parts[0]));
    f.linear_sum = parse_vector(parts[1], "birch feature linear_sum");
    f.sum_squares = parse_double(parts[2]);
    return f;
}

}  // namespace betula
