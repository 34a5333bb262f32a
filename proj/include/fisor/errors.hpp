#ifndef FISOR_ERRORS_HPP
#define FISOR_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace fisor {

// Configuration problems: bad config files, invalid hyperparameters,
// unknown override keys. CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Dataset / file integrity problems. CLI exit code 3.
class DataError : public std::runtime_error {
public:
  enum class Kind { io, bad_magic, version_mismatch, truncated, manifest_mismatch, empty };

  DataError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

private:
  Kind kind_;
};

// Non-finite values fed into an operation that requires finite inputs.
class InputError : public std::invalid_argument {
public:
  explicit InputError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Training produced non-finite losses or gradients. CLI exit code 4.
class DivergenceError : public std::runtime_error {
public:
  explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;
inline constexpr int config_error = 2;
inline constexpr int data_error = 3;
inline constexpr int divergence = 4;
inline constexpr int usage = 64;
}  // namespace exit_code

}  // namespace fisor

#endif
