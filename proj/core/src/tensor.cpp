#include "ntmlab/tensor.hpp"

namespace ntmlab {

std::string shape_str(const Shape& shape) {
  std::string s = "{";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "}";
}

}  // namespace ntmlab
