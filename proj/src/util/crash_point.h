#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace alsm::io {
class FileSystem;
}

// Process-wide crash injection for the crash harness. A point is armed by
// AISLSM_CRASH_POINT=name or name:k (crash on the k-th hit, default 1).
// Crashing writes the registered report to $AISLSM_CRASH_REPORT, cuts every
// tracked file back to its synced length and exits immediately.
namespace alsm::crash {

inline constexpr int kCrashExitCode = 86;

void ConfigureFromEnv();
void Configure(std::string name, uint64_t nth);
void Disarm();

void SetFileSystem(io::FileSystem* fs);
void SetReporter(std::function<std::string()> fn);

// Counts a hit of `name`; true exactly when this hit must crash.
bool Armed(std::string_view name);
[[noreturn]] void Crash(std::string_view name);
inline void Hit(std::string_view name) {
  if (Armed(name)) Crash(name);
}

// Every point compiled into the engine, in pipeline order.
const std::vector<std::string>& KnownPoints();

}  // namespace alsm::crash
