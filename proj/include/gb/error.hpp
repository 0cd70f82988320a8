#pragma once

#include <stdexcept>
#include <string>

namespace gb {

// Numeric or contract failure inside the engine. The CLI maps this to
// exit code 3; config/input validation problems use ValidationError (exit 2).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gb
