#include "bdwd/error.hpp"

namespace bdwd {

std::string_view to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::config: return "config";
    case ErrorCategory::data: return "data";
    case ErrorCategory::numeric: return "numeric";
    case ErrorCategory::resource: return "resource";
  }
  return "unknown";
}

}  // namespace bdwd
