#include "mixflow/rational.hpp"

#include <cstdio>

namespace mixflow {

std::string Rational::str() const {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", to_double());
  return buf;
}

}  // namespace mixflow
