#pragma once

#include <compare>
#include <functional>
#include <string>
#include <string_view>

namespace ctrace {

/// Canonical mobile number: optional leading '+' followed by 8-15 digits.
/// Spaces, dashes, dots and parentheses are stripped before validation.
class PhoneNumber {
public:
  PhoneNumber() = default;

  /// Throws Error(Validation) on malformed input.
  static PhoneNumber parse(std::string_view raw);
  static bool is_valid(std::string_view raw) noexcept;

  const std::string &str() const noexcept { return value_; }
  bool empty() const noexcept { return value_.empty(); }

  /// Keeps the first two and last three digits, e.g. "+88********678".
  std::string masked() const;

  friend auto operator<=>(const PhoneNumber &, const PhoneNumber &) = default;

private:
  explicit PhoneNumber(std::string v) : value_(std::move(v)) {}
  std::string value_;
};

} // namespace ctrace

template <> struct std::hash<ctrace::PhoneNumber> {
  std::size_t operator()(const ctrace::PhoneNumber &p) const noexcept {
    return std::hash<std::string>{}(p.str());
  }
};
