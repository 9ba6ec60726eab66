#pragma once

#include <stdexcept>
#include <string>

namespace peerchurn {

// Thrown for contract violations: malformed input files, inconsistent
// configuration, rank-deficient designs, non-convergence. Record-level data
// problems (a bad CDR row) are reported as data, not exceptions.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace peerchurn
