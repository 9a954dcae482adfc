#pragma once

#include <stdexcept>
#include <string>

namespace pumpsim {

// Precondition violations throw std::invalid_argument. The types below carry
// the outcome categories the command-line tool maps onto exit codes.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pumpsim
