#pragma once

#include "vesd/errors.hpp"

#include <optional>

template <typename Fn>
std::optional<vesd::ErrorKind> error_kind(Fn&& fn) {
  try {
    fn();
  } catch (const vesd::Error& e) {
    return e.kind();
  }
  return std::nullopt;
}
