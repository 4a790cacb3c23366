#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace avaca {

// Entry point of the `avaca` tool. Returns 0 on success, 1 on contract,
// format or I/O errors, 2 on usage errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace avaca
