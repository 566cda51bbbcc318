#pragma once

#include <functional>
#include <string>

namespace regime_mef::log {

using Sink = std::function<void(const std::string&)>;

/// Routes warnings; the default sink prints "warning: <msg>" to stderr.
/// Returns the previous sink so tests can capture and restore.
Sink set_warning_sink(Sink sink);

void warn(const std::string& message);

}  // namespace regime_mef::log
