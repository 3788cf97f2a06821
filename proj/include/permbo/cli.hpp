#pragma once

#include <string>
#include <vector>

namespace permbo {

/// Exit codes: 0 success, 1 runtime failure, 2 invalid configuration or usage.
int run_cli(int argc, char** argv);
int run_cli(const std::vector<std::string>& args);

/// 17 significant digits; "nan", "inf" and "-inf" for non-finite values.
std::string format_double(double x);

}  // namespace permbo
