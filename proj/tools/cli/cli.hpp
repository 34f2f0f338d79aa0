#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "ssbc/llm_gateway.hpp"

namespace ssbc::cli {

/// Entry point of `ssbc-audit`. Returns the process exit code: 0 when every
/// requested stage succeeded, 1 on a stage or configuration error, 2 on a
/// usage error. `transport` replaces the HTTP client when set.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            std::function<std::unique_ptr<HttpTransport>()> transport = {});

}  // namespace ssbc::cli
