#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace lps {

// Runtime contract violation (bad inputs, malformed files, broken preconditions).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

// Collects a streamed message ("bad value " << x) into a string.
struct MsgStream {
  std::ostringstream os;
  template <typename T>
  MsgStream& operator<<(const T& v) {
    os << v;
    return *this;
  }
};

[[noreturn]] inline void check_failed(const char* expr, const std::string& msg) {
  std::ostringstream os;
  os << "check failed: " << expr;
  if (!msg.empty()) os << " — " << msg;
  throw Error(os.str());
}

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

}  // namespace detail

}  // namespace lps

#define LPS_CHECK(cond, msg)                                                                   \
  do {                                                                                         \
    if (!(cond)) {                                                                             \
      ::lps::detail::check_failed(#cond, (::lps::detail::MsgStream{} << msg).os.str());        \
    }                                                                                          \
  } while (0)

#define LPS_FAIL(msg) ::lps::detail::fail((::lps::detail::MsgStream{} << msg).os.str())
