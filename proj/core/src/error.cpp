#include "xmusim/error.hpp"

namespace xmusim {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::usage:
      return "usage";
    case ErrorKind::data:
      return "data";
    case ErrorKind::numeric:
      return "numeric";
    case ErrorKind::service:
      return "service";
  }
  return "unknown";
}

}  // namespace xmusim
