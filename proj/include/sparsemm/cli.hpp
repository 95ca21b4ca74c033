#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sparsemm {

/// Runs one command line (without the program name). Results go to `out`
/// or to the --out path, diagnostics to `err`.
/// Returns 0 on success, 2 on usage errors, 1 on runtime failures.
int parse_and_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Reads a regression CSV: header "y,x1,...,xp", then numeric rows.
struct RegressionCsv {
  std::vector<double> y;
  std::vector<std::vector<double>> rows;
};
RegressionCsv parse_regression_csv(const std::string& text);

}  // namespace sparsemm
