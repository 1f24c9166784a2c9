#ifndef SPARQ_ERRORS_HPP
#define SPARQ_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace sparq {

/// Invalid argument supplied by the caller (dimension mismatch, bad range, ...).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Linear-algebra failure that survived jitter escalation.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what, std::vector<double> jitters = {})
        : std::runtime_error(what), jitter_attempts(std::move(jitters)) {}

    /// Diagonal jitter levels that were tried before giving up.
    std::vector<double> jitter_attempts;
};

/// Malformed configuration or data file.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what),
          line_number(line) {}

    std::size_t line_number;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace sparq

#endif
