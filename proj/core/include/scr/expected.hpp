#pragma once

#include <type_traits>
#include <utility>
#include <variant>

namespace scr {

template <typename E>
struct Unexpected {
  E error;
};

template <typename E>
Unexpected<std::decay_t<E>> unexpected(E&& e) {
  return {std::forward<E>(e)};
}

// Value-or-error result for operations whose failure is an ordinary outcome
// (parsing untrusted text). Precondition violations throw scr::Error instead.
template <typename T, typename E>
class Expected {
 public:
  Expected(const T& v) : storage_(std::in_place_index<0>, v) {}
  Expected(T&& v) : storage_(std::in_place_index<0>, std::move(v)) {}
  template <typename U>
  Expected(Unexpected<U> u) : storage_(std::in_place_index<1>, E(std::move(u.error))) {}

  bool has_value() const noexcept { return storage_.index() == 0; }
  explicit operator bool() const noexcept { return has_value(); }

  T& value() & { return std::get<0>(storage_); }
  const T& value() const& { return std::get<0>(storage_); }
  T&& value() && { return std::get<0>(std::move(storage_)); }

  const E& error() const& { return std::get<1>(storage_); }
  E& error() & { return std::get<1>(storage_); }

  const T& operator*() const& { return value(); }
  T& operator*() & { return value(); }
  const T* operator->() const { return &value(); }
  T* operator->() { return &value(); }

  template <typename U>
  T value_or(U&& fallback) const& {
    return has_value() ? value() : static_cast<T>(std::forward<U>(fallback));
  }

  friend bool operator==(const Expected& e, const T& v) {
    return e.has_value() && e.value() == v;
  }

 private:
  std::variant<T, E> storage_;
};

}  // namespace scr
