#pragma once

// PDF object model and tokenizer shared by the file loader and the content
// stream interpreter. Internal to the parser.

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "ccs/error.hpp"

namespace ccs::pdf {

struct Object;
using Array = std::vector<Object>;
using Dict = std::map<std::string, Object, std::less<>>;

struct Name {
  std::string value;
};

struct String {
  std::string bytes;
};

struct Ref {
  std::uint32_t num = 0;
  std::uint32_t gen = 0;
};

struct Stream {
  std::shared_ptr<const Dict> dict;
  std::string raw;  // still encoded
};

/// Operator keyword inside a content stream (never produced by the file loader
/// except for `R`/`obj` handling).
struct Keyword {
  std::string value;
};

struct Object {
  using Variant = std::variant<std::monostate, bool, double, String, Name,
                               std::shared_ptr<const Array>,
                               std::shared_ptr<const Dict>, Ref,
                               std::shared_ptr<const Stream>, Keyword>;
  Variant v;

  Object() = default;
  template <class T>
    requires(!std::is_same_v<std::remove_cvref_t<T>, Object>)
  Object(T&& t) : v(std::forward<T>(t)) {}

  bool is_null() const { return std::holds_alternative<std::monostate>(v); }
  bool is_number() const { return std::holds_alternative<double>(v); }
  bool is_name() const { return std::holds_alternative<Name>(v); }
  bool is_string() const { return std::holds_alternative<String>(v); }
  bool is_ref() const { return std::holds_alternative<Ref>(v); }
  bool is_keyword() const { return std::holds_alternative<Keyword>(v); }

  const double* number() const { return std::get_if<double>(&v); }
  const Name* name() const { return std::get_if<Name>(&v); }
  const String* string() const { return std::get_if<String>(&v); }
  const Ref* ref() const { return std::get_if<Ref>(&v); }
  const Keyword* keyword() const { return std::get_if<Keyword>(&v); }
  const Array* array() const {
    auto p = std::get_if<std::shared_ptr<const Array>>(&v);
    return p ? p->get() : nullptr;
  }
  const Dict* dict() const {
    auto p = std::get_if<std::shared_ptr<const Dict>>(&v);
    return p ? p->get() : nullptr;
  }
  const Stream* stream() const {
    auto p = std::get_if<std::shared_ptr<const Stream>>(&v);
    return p ? p->get() : nullptr;
  }
};

const Object* find(const Dict& d, std::string_view key);
bool name_is(const Object* o, std::string_view name);

/// Byte-level tokenizer for both file syntax and content streams.
class Lexer {
 public:
  explicit Lexer(std::string_view data, std::size_t pos = 0) : data_(data), pos_(pos) {}

  std::size_t pos() const { return pos_; }
  void seek(std::size_t pos) { pos_ = pos; }
  bool at_end();
  std::string_view data() const { return data_; }

  void skip_whitespace();

  /// Parses one object. Keywords (including `R`, `obj`, `stream`) are
  /// returned as Keyword. Indirect references `n g R` are folded into Ref
  /// when `fold_refs` is set. Throws Error{syntax} with the byte offset.
  Object next(bool fold_refs = true, int depth = 0);

  static bool is_whitespace(unsigned char c) {
    return c == 0 || c == 9 || c == 10 || c == 12 || c == 13 || c == 32;
  }
  static bool is_delimiter(unsigned char c) {
    return c == '(' || c == ')' || c == '<' || c == '>' || c == '[' || c == ']' ||
           c == '{' || c == '}' || c == '/' || c == '%';
  }

 private:
  Object read_number();
  String read_literal_string();
  String read_hex_string();
  Name read_name();
  std::string read_regular();
  [[noreturn]] void fail(const std::string& what) const;

  std::string_view data_;
  std::size_t pos_;
};

constexpr int kMaxNesting = 128;

/// Saturating conversion for object numbers and counts read from untrusted
/// input; out-of-range values map to 0.
inline std::uint32_t to_u32(double d) {
  return (d >= 0 && d <= 4294967295.0) ? static_cast<std::uint32_t>(d) : 0;
}

}  // namespace ccs::pdf
