#ifndef APDFRANK_TIMESTAMP_H_
#define APDFRANK_TIMESTAMP_H_

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace apdfrank {

// UTC instant with millisecond resolution (dump timestamps carry .mmm).
using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

// Accepts "YYYY-MM-DDTHH:MM:SS", optionally followed by ".f{1,3}" and/or "Z".
std::optional<Timestamp> ParseTimestamp(std::string_view text);

// Always "YYYY-MM-DDTHH:MM:SS.mmmZ", so ParseTimestamp(Format(t)) == t.
std::string FormatTimestamp(Timestamp t);

}  // namespace apdfrank

#endif  // APDFRANK_TIMESTAMP_H_
