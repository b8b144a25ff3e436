#include "ctrace/phone.hpp"

#include <cctype>
#include <optional>

#include "ctrace/error.hpp"

namespace ctrace {

namespace {

std::optional<std::string> canonicalize(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  std::size_t digits = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const char c = raw[i];
    if (c == '+' && out.empty()) {
      out.push_back(c);
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      out.push_back(c);
      ++digits;
    } else if (c == ' ' || c == '-' || c == '.' || c == '(' || c == ')') {
      continue;
    } else {
      return std::nullopt;
    }
  }
  if (digits < 8 || digits > 15)
    return std::nullopt;
  return out;
}

} // namespace

PhoneNumber PhoneNumber::parse(std::string_view raw) {
  auto canon = canonicalize(raw);
  if (!canon)
    throw Error(ErrorKind::Validation,
                "invalid phone number (expected optional '+' and 8-15 digits): '" +
                    std::string(raw) + "'");
  return PhoneNumber(std::move(*canon));
}

bool PhoneNumber::is_valid(std::string_view raw) noexcept {
  return canonicalize(raw).has_value();
}

std::string PhoneNumber::masked() const {
  std::string m = value_;
  const std::size_t first = (m.starts_with('+') ? 1 : 0) + 2;
  for (std::size_t i = first; i + 3 < m.size(); ++i)
    m[i] = '*';
  return m;
}

} // namespace ctrace
