#pragma once

#include <functional>
#include <string>

namespace typr {

using WarningSink = std::function<void(const std::string&)>;

/// Non-fatal diagnostics (font overflow, summarizer fallback). Default sink
/// writes to stderr. Returns the previous sink.
WarningSink set_warning_sink(WarningSink sink);
void warn(const std::string& message);

}  // namespace typr
