#pragma once

#include <stdexcept>
#include <string>

namespace bdforge {

// Every domain error carries a stable machine-readable code ("age-overflow",
// "vacuous-node", "budget-exceeded", ...) next to the human-readable message.
class Error : public std::runtime_error {
  public:
    Error(std::string code, const std::string& msg)
        : std::runtime_error(code + ": " + msg), code_(std::move(code)) {}

    const std::string& code() const { return code_; }

  private:
    std::string code_;
};

[[noreturn]] inline void fail(const std::string& code, const std::string& msg) {
    throw Error(code, msg);
}

}  // namespace bdforge
