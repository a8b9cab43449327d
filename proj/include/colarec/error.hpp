#pragma once

#include <stdexcept>
#include <string>

namespace colarec {

// Error kinds surface in the CLI's single-line error output, so keep the
// names stable.
enum class ErrorKind {
    parse,
    shape,
    capacity,
    missing_artifact,
    config,
    format,
    numeric,
    invalid_argument,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace colarec
