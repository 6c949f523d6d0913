/**
 * Exception types shared by every module.
 *
 * Each error carries a category that the command-line front end maps onto
 * its documented exit codes.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace cellhiggs {

enum class ErrorKind
{
    Domain = 1,   // a mathematical precondition failed (bad complex, bad rep)
    Config = 2,   // malformed input file or option
    Numeric = 3   // a numerical routine failed (branch cut, non-convergence)
};

class Error : public std::runtime_error
{
  public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

  private:
    ErrorKind kind_;
};

struct DomainError : Error
{
    explicit DomainError(const std::string& what) : Error(ErrorKind::Domain, what) {}
};

struct ConfigError : Error
{
    explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

struct NumericError : Error
{
    explicit NumericError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

/// Raised by parsers; remembers the offending 1-based line.
struct ParseError : ConfigError
{
    ParseError(int line, const std::string& what)
        : ConfigError("line " + std::to_string(line) + ": " + what), line(line)
    {
    }
    int line;
};

}  // namespace cellhiggs
