#pragma once

#include <stdexcept>
#include <string>

namespace rwre {

// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// The environment law is not in the transient zero-speed regime (no kappa in (0,1)).
class RegimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed configuration, law string, or fixture file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A realized environment window is too short for the requested construction.
// The caller widens the window on the reported side and retries.
class WindowExhausted : public std::runtime_error {
 public:
  enum class Side { left, right };

  WindowExhausted(Side side, long needed_site, const std::string& what)
      : std::runtime_error(what), side_(side), needed_site_(needed_site) {}

  Side side() const noexcept { return side_; }
  long needed_site() const noexcept { return needed_site_; }

 private:
  Side side_;
  long needed_site_;
};

}  // namespace rwre
