#pragma once
// Result<T, E> for operations whose rejection is a value, plus the domain
// exception used where the contract says "error".

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>

namespace chiron {

struct Ok {};

template <typename T, typename E>
class Result {
 public:
  Result(T v) : v_(std::in_place_index<0>, std::move(v)) {}
  Result(E e) : v_(std::in_place_index<1>, std::move(e)) {}

  bool ok() const { return v_.index() == 0; }
  explicit operator bool() const { return ok(); }

  T& value() & { return std::get<0>(v_); }
  const T& value() const& { return std::get<0>(v_); }
  T&& value() && { return std::get<0>(std::move(v_)); }

  E& error() & { return std::get<1>(v_); }
  const E& error() const& { return std::get<1>(v_); }

 private:
  std::variant<T, E> v_;
};

enum class Errc {
  PLATFORM_NOT_INITIALIZED,
  ENCLAVE_TERMINATED,
  INVALID_STATE_TRANSITION,
  SEQUENCE_EXHAUSTED,
  LENGTH_MISMATCH,
  EMPTY_INPUT,
  TOO_FEW_ROWS,
  NON_FINITE_INPUT,
  NON_FINITE_LOSS,
  OVERSIZE,
  CRYPTO_FAILURE,
  IO_ERROR,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

}  // namespace chiron
