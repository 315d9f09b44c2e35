#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "hwnas/hw_model.hpp"

namespace hwnas::cli {

enum ExitCode { kOk = 0, kInternal = 1, kConfig = 2, kEvaluator = 3, kIo = 4 };

/// Entry point behind the `hwnas` binary. Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Writes through a sibling temporary file and renames it into place.
/// Throws IoError.
void write_file_atomic(const std::string& path, const std::string& content);

/// Throws IoError.
std::string read_file(const std::string& path);

/// Per-layer table followed by the totals.
std::string format_cost_table(const NetworkCost& cost);

}  // namespace hwnas::cli
