#pragma once

#include <iosfwd>

namespace smf::apps {

/// Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.
int cli_main(int argc, const char* const* argv);
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace smf::apps
