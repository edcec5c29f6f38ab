#pragma once

#include <stdexcept>
#include <string>

namespace boxlab {

// Raised for malformed user input: bad files, bad ids, incompatible tables.
// The CLI maps this to exit code 2; everything else is an internal fault (1).
class input_error : public std::runtime_error {
public:
    explicit input_error(const std::string& what) : std::runtime_error(what) {}
};

class dimension_mismatch : public input_error {
public:
    dimension_mismatch(std::size_t a, std::size_t b)
        : input_error("dimension mismatch: " + std::to_string(a) + " vs " + std::to_string(b)) {}
};

}  // namespace boxlab
