#pragma once

#include <stdexcept>
#include <utility>
#include <variant>

namespace dcg {

template <class E>
struct Unexpected {
  E error;
};

template <class E>
constexpr Unexpected<E> unexpected(E e) {
  return Unexpected<E>{std::move(e)};
}

class BadExpectedAccess : public std::logic_error {
 public:
  BadExpectedAccess() : std::logic_error("value() called on an Expected holding an error") {}
};

/// Minimal stand-in for std::expected (C++23) carrying either a value or an error code.
template <class T, class E>
class Expected {
 public:
  Expected(T value) : storage_(std::in_place_index<0>, std::move(value)) {}
  Expected(Unexpected<E> err) : storage_(std::in_place_index<1>, std::move(err.error)) {}

  bool has_value() const { return storage_.index() == 0; }
  explicit operator bool() const { return has_value(); }

  T& value() & {
    if (!has_value()) throw BadExpectedAccess();
    return std::get<0>(storage_);
  }
  const T& value() const& {
    if (!has_value()) throw BadExpectedAccess();
    return std::get<0>(storage_);
  }
  T&& value() && {
    if (!has_value()) throw BadExpectedAccess();
    return std::get<0>(std::move(storage_));
  }

  const E& error() const { return std::get<1>(storage_); }

  T& operator*() & { return value(); }
  const T& operator*() const& { return value(); }
  T* operator->() { return &value(); }
  const T* operator->() const { return &value(); }

 private:
  std::variant<T, E> storage_;
};

}  // namespace dcg
