#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace forpkg::cli {

// Exit statuses.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailures = 1;  // per-document failures under --strict, or a fatal error
inline constexpr int kExitConfig = 2;    // invalid flags, config values or input paths

// Runs one command line. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// "<dir>/<stem>.report.json" beside a graph snapshot.
std::filesystem::path report_path(const std::filesystem::path& output);

}  // namespace forpkg::cli
