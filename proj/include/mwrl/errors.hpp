#pragma once

#include <stdexcept>
#include <string>

namespace mwrl {

// Exit-code classes used by the CLI: user/config problems map to 2,
// environment or I/O failures to 3, numerical blow-ups to 4.
class UserError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DivergedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public UserError {
public:
    ParseError(std::size_t line, const std::string& what)
        : UserError("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

}  // namespace mwrl
