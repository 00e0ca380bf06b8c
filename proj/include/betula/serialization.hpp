#pragma once

#include <string>
#include <string_view>

#include "betula/cluster_features.hpp"

namespace betula {

// 17 significant digits; enough for exact double round-trips.
std::string format_double(double value);
double parse_double(std::string_view text);  // rejects non-numeric and trailing garbage

// Line-oriented feature text forms used by the CLI dump/inspect commands:
//   BetulaFeature: n;mu_1,...,mu_d;S_1,...,S_d
//   BirchFeature:  N;LS_1,...,LS_d;SS
std::string to_text(const BetulaFeature& f);
std::string to_text(const BirchFeature& f);
BetulaFeature betula_feature_from_text(std::string_view text);
BirchFeature birch_feature_from_text(std::string_view text);

}  // namespace betula
