#pragma once

#include <stdexcept>
#include <string>

namespace mbcool {

/// Adaptive stepper could not make progress (step size underflowed) or was
/// handed a non-finite state. Carries the integration time at which it gave up.
class IntegrationError : public std::runtime_error {
public:
    IntegrationError(const std::string& what, double t_fail)
        : std::runtime_error(what + " (t = " + std::to_string(t_fail) + " s)"),
          t_fail_(t_fail) {}

    double time_of_failure() const noexcept { return t_fail_; }

private:
    double t_fail_;
};

/// Population leaked into the top of the truncated Fock space beyond the
/// allowed budget; results would silently depend on the cutoff.
class TruncationOverflow : public std::runtime_error {
public:
    TruncationOverflow(const std::string& what, double top_population)
        : std::runtime_error(what + " (top-level population = " +
                             std::to_string(top_population) + ")"),
          top_population_(top_population) {}

    double top_population() const noexcept { return top_population_; }

private:
    double top_population_;
};

/// Bad or inconsistent run configuration (schema violations, out-of-range
/// values, unknown keys).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Filesystem failure: file missing, unreadable, or not writable.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed data file. Carries the 1-based line number of the offending row.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, int line)
        : std::runtime_error("line " + std::to_string(line) + ": " + what),
          line_(line) {}

    int line() const noexcept { return line_; }

private:
    int line_;
};

} // namespace mbcool
