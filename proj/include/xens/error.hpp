#pragma once

#include <stdexcept>
#include <string>

namespace xens {

// Error categories map onto process exit codes: Config -> 2, everything
// else that is caused by bad inputs or files -> 3.
enum class ErrorKind {
    Config,     // bad configuration document or CLI usage
    Data,       // bad file contents, schema violations, missing artifacts
    Dimension,  // shape or size mismatch between tensors/models
    Invalid,    // invalid argument or state
};

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

  private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail_config(const std::string& msg) { throw Error(ErrorKind::Config, msg); }
[[noreturn]] inline void fail_data(const std::string& msg) { throw Error(ErrorKind::Data, msg); }
[[noreturn]] inline void fail_dim(const std::string& msg) { throw Error(ErrorKind::Dimension, msg); }
[[noreturn]] inline void fail_invalid(const std::string& msg) { throw Error(ErrorKind::Invalid, msg); }

}  // namespace xens
