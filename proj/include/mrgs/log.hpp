#pragma once

#include <functional>
#include <string>

namespace mrgs {

// Warnings go to stderr unless a different sink is installed (tests silence
// them or capture them).
using WarningSink = std::function<void(const std::string&)>;

void set_warning_sink(WarningSink sink);
void warn(const std::string& message);

}  // namespace mrgs
