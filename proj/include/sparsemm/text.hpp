#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace sparsemm {

/// Fixed real formatting for every emitted file: 12 significant digits,
/// "inf"/"-inf"/"nan" for non-finite values.
std::string format_real(double value);

std::string_view trim(std::string_view text);
/// Splits on `sep` and trims each piece; empty input gives no pieces.
std::vector<std::string> split_list(std::string_view text, char sep = ',');
/// Whole-string parse; throws std::invalid_argument naming `what` on failure.
double parse_real(std::string_view text, std::string_view what);
long long parse_integer(std::string_view text, std::string_view what);
std::vector<double> parse_real_list(std::string_view text, std::string_view what);

}  // namespace sparsemm
