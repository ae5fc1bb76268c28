#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bridgekit {

// Every failure raised by the library carries a category so the CLI can emit a
// single machine-parseable line ("error: <category>: <message>").
enum class ErrorCategory {
    Domain,     // argument outside the mathematical domain of a function
    Schedule,   // schedule not Markov-realizable, or invalid schedule config
    Shape,      // tensor shape mismatch
    Variant,    // operation not defined for the selected schedule variant
    Numeric,    // non-finite value encountered
    Oracle,     // two independent computations disagree
    Io,         // file system failures
    Format,     // malformed container or checkpoint bytes
    Config,     // invalid or unknown configuration keys
    Usage,      // bad command-line usage
};

std::string_view category_name(ErrorCategory c) noexcept;

class Error : public std::runtime_error {
  public:
    Error(ErrorCategory category, const std::string& message)
        : std::runtime_error(message), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

  private:
    ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory c, const std::string& message) { throw Error(c, message); }

}  // namespace bridgekit
