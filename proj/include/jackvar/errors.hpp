#pragma once

#include <stdexcept>
#include <string>

namespace jackvar {

/// Bad user input: malformed data, unknown keys, out-of-range parameters.
class input_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical routine failed to reach its requested accuracy.
class numerical_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace jackvar
