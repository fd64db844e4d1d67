#include "condgpc/log.hpp"

#include <iostream>

namespace condgpc {

namespace {
WarningSink& sink() {
  static WarningSink s = [](const std::string& m) { std::cerr << "warning: " << m << '\n'; };
  return s;
}
}  // namespace

WarningSink set_warning_sink(WarningSink s) {
  auto previous = std::move(sink());
  sink() = std::move(s);
  return previous;
}

void warn(const std::string& message) {
  if (sink()) sink()(message);
}

}  // namespace condgpc
