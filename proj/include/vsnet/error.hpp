#ifndef VSNET_ERROR_HPP
#define VSNET_ERROR_HPP

#include <stdexcept>
#include <string>

namespace vsnet {

// Operation called on an object that is not ready for it (e.g. solving with too few candidates).
class invalid_state : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

// Rank-deficient or numerically singular linear system.
class singular_system : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class io_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Scenario parse/validation failure. line() is 1-based, 0 when not tied to a line.
class validation_error : public std::runtime_error {
public:
  validation_error(std::size_t line, const std::string& what)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

} // namespace vsnet

#endif // VSNET_ERROR_HPP
