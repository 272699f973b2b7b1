#pragma once

#include <functional>
#include <string>

namespace kdde {

using WarningHandler = std::function<void(const std::string&)>;

/// Installs a sink for library warnings and returns the previous one.
/// The default sink writes "kdde: warning: ..." to stderr.
WarningHandler set_warning_handler(WarningHandler handler);

void warn(const std::string& message);

}  // namespace kdde
