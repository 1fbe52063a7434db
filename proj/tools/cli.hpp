#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace biggp::cli {

enum ExitCode { Ok = 0, Failure = 1, ConfigError = 2, NumericalError = 3, WorkerFailure = 4 };

/// Runs the command line `args` (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// Headered numeric CSV. Throws InvalidArgument on malformed input.
Table read_csv(const std::string& path);
void write_csv(const std::string& path, const Table& table);

}  // namespace biggp::cli
