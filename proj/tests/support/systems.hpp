#pragma once

#include <string>

#include "affext/field_set.hpp"

namespace sys {

inline affext::FieldSet identity() { return affext::parse_field_set("X1 = (1, 0); X2 = (0, 1)", 2, 2); }
inline affext::FieldSet heisenberg() {
  return affext::parse_field_set("X1 = (1, 0, -x2/2); X2 = (0, 1, x1/2)", 3, 2);
}
inline affext::FieldSet martinet() {
  return affext::parse_field_set("X1 = (1, 0, x2^2/2); X2 = (0, 1, 0)", 3, 2);
}
inline affext::FieldSet grushin() { return affext::parse_field_set("X1 = (1, 0); X2 = (0, x1)", 2, 2); }

}  // namespace sys
