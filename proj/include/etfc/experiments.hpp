#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace etfc {
class Error;
}

namespace etfc::experiments {

enum ExitCode : int {
  kOk = 0,
  kOther = 1,
  kConfig = 2,
  kNumeric = 3,
  kCheckFailed = 4,
  kIo = 5,
};

int exit_code_for(const Error& e) noexcept;

struct Outcome {
  int exit_code = kOk;
  std::string message;
  /// The command's summary document (also written to the output directory).
  std::string summary_json;
};

/// Each command takes a JSON config document and an output directory, writes
/// its CSV/JSON/SVG artifacts plus manifest.json there, and never throws.
Outcome cmd_etf(const std::string& config_json, const std::filesystem::path& out);
Outcome cmd_peeled(const std::string& config_json, const std::filesystem::path& out);
Outcome cmd_regularity(const std::string& config_json, const std::filesystem::path& out);
Outcome cmd_train(const std::string& config_json, const std::filesystem::path& out);
Outcome cmd_report(const std::string& config_json, const std::filesystem::path& out);

/// Dispatch by name ("etf", "peeled", "regularity", "train", "report").
Outcome run_command(const std::string& name, const std::string& config_json, const std::filesystem::path& out);
const std::vector<std::string>& command_names();

}  // namespace etfc::experiments
