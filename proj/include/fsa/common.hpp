#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace fsa {

/// Node identifiers are 32-bit; -1 marks an unused sample slot.
using NodeId = std::int32_t;
inline constexpr NodeId kPad = -1;
inline constexpr std::uint64_t kMaxNodes = (std::uint64_t{1} << 31) - 1;

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Text input that could not be parsed. `line()` is 1-based; 0 when unknown.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}
}  // namespace detail

}  // namespace fsa
