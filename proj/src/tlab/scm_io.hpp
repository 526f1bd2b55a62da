#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "tlab/scm.hpp"

namespace tlab::scm {

// SCM definition files are line-oriented text:
//
//   scm <name>
//   variable <name> <domain size>
//   exogenous <name> <p0> <p1> ...
//   mechanism <variable> parents=<a,b,...> exo=<u,v,...>
//   parents=<values>; exo=<values>; value=<v>     (one row per input combination)
//   end
//
// '#' starts a comment. Rows may appear in any order but must cover the
// whole input space exactly once.
DiscreteScm parse_scm(std::string_view text);
std::string format_scm(const DiscreteScm& scm);

DiscreteScm load_scm(const std::filesystem::path& path);
void save_scm(const DiscreteScm& scm, const std::filesystem::path& path);

}  // namespace tlab::scm
