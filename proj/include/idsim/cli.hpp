#pragma once

#include <string>
#include <vector>

namespace idsim {

// Batch front-end. Exit codes: 0 success, 2 configuration error,
// 3 calibration failure, 4 acceptance-threshold failure.
int run_cli(const std::vector<std::string>& args);

} // namespace idsim
