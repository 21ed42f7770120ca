#pragma once

#include <iosfwd>

namespace meshvae {

/// Entry point of the meshvae tool. Returns 0, 2 (input or config error) or
/// 3 (numerical failure).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace meshvae
