#include "shapead/error.hpp"

#include <iostream>
#include <utility>

namespace shapead {

DegenerateCellError::DegenerateCellError(int cell, double area)
    : MeshError("degenerate cell " + std::to_string(cell) + " (signed area " + std::to_string(area) +
                ")"),
      cell_(cell),
      area_(area) {}

namespace {
WarningHandler& handler() {
  static WarningHandler h;
  return h;
}
}  // namespace

void warn(std::string_view message) {
  if (handler()) {
    handler()(message);
    return;
  }
  std::cerr << "warning: " << message << '\n';
}

WarningHandler set_warning_handler(WarningHandler h) { return std::exchange(handler(), std::move(h)); }

}  // namespace shapead
