#pragma once

#include <stdexcept>
#include <string>

namespace koopman {

/// Bad arguments, domain violations, unparseable input. CLI exit code 1.
class input_error : public std::runtime_error {
  public:
    explicit input_error(const std::string& what) : std::runtime_error(what) {}
};

/// Trajectory left the valid domain or became non-finite. Carries the step
/// at which it happened. CLI exit code 2.
class divergence_error : public std::runtime_error {
  public:
    divergence_error(const std::string& what, long step)
        : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
    long step() const { return step_; }

  private:
    long step_;
};

/// Ill-conditioning, degenerate kernels, range overflow. CLI exit code 2.
class numerical_error : public std::runtime_error {
  public:
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace koopman
