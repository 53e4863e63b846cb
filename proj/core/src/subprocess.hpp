#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

namespace demix::detail {

struct ProcessResult {
  int exit_code = -1;
  bool timed_out = false;
  /// Combined stdout/stderr, truncated to the last few kilobytes.
  std::string output;
};

/// Runs argv[0] (PATH lookup) with stdout and stderr captured in `log_path`.
/// Kills the child after `timeout`. Throws BackendError if it cannot start.
ProcessResult run_process(const std::vector<std::string>& argv, const std::filesystem::path& log_path,
                          std::chrono::duration<double> timeout);

/// Unique directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& prefix);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace demix::detail
