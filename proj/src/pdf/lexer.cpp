#include <cctype>
#include <cmath>
#include <cstdlib>

#include "objects.hpp"

namespace ccs::pdf {

const Object* find(const Dict& d, std::string_view key) {
  auto it = d.find(key);
  return it == d.end() ? nullptr : &it->second;
}

bool name_is(const Object* o, std::string_view name) {
  return o && o->name() && o->name()->value == name;
}

void Lexer::fail(const std::string& what) const {
  throw Error(Errc::syntax, what + " at byte offset " + std::to_string(pos_));
}

bool Lexer::at_end() {
  skip_whitespace();
  return pos_ >= data_.size();
}

void Lexer::skip_whitespace() {
  while (pos_ < data_.size()) {
    auto c = static_cast<unsigned char>(data_[pos_]);
    if (is_whitespace(c)) {
      ++pos_;
    } else if (c == '%') {
      while (pos_ < data_.size() && data_[pos_] != '\n' && data_[pos_] != '\r') ++pos_;
    } else {
      break;
    }
  }
}

std::string Lexer::read_regular() {
  std::size_t start = pos_;
  while (pos_ < data_.size()) {
    auto c = static_cast<unsigned char>(data_[pos_]);
    if (is_whitespace(c) || is_delimiter(c)) break;
    ++pos_;
  }
  return std::string(data_.substr(start, pos_ - start));
}

Object Lexer::read_number() {
  std::size_t start = pos_;
  std::string tok = read_regular();
  // PDF numbers: optional sign, digits, optional single '.'; producers
  // sometimes emit doubled signs ("--5"), which readers accept.
  std::size_t i = 0;
  bool negative = false;
  while (i < tok.size() && (tok[i] == '+' || tok[i] == '-')) negative ^= (tok[i++] == '-');
  double value = 0, scale = 0;
  bool digits = false;
  for (; i < tok.size(); ++i) {
    char c = tok[i];
    if (c >= '0' && c <= '9') {
      digits = true;
      if (scale == 0) {
        value = value * 10 + (c - '0');
      } else {
        value += (c - '0') * scale;
        scale /= 10;
      }
    } else if (c == '.' && scale == 0) {
      scale = 0.1;
    } else {
      break;
    }
  }
  if (i != tok.size()) {
    // Not a number after all: hand it back as a keyword.
    if (!digits) return Keyword{tok};
    // Leave pos_ past the token so a caller resuming at pos_ + 1 moves on.
    throw Error(Errc::syntax, "malformed number '" + tok.substr(0, 32) + (tok.size() > 32 ? "...'" : "'") +
                                  " at byte offset " + std::to_string(start));
  }
  if (!std::isfinite(value)) value = 0;
  return negative ? -value : value;
}

String Lexer::read_literal_string() {
  ++pos_;  // '('
  std::string out;
  int depth = 1;
  while (pos_ < data_.size()) {
    char c = data_[pos_++];
    if (c == '\\') {
      if (pos_ >= data_.size()) break;
      char e = data_[pos_++];
      switch (e) {
        case 'n': out.push_back('\n'); break;
        case 'r': out.push_back('\r'); break;
        case 't': out.push_back('\t'); break;
        case 'b': out.push_back('\b'); break;
        case 'f': out.push_back('\f'); break;
        case '(': case ')': case '\\': out.push_back(e); break;
        case '\r':
          if (pos_ < data_.size() && data_[pos_] == '\n') ++pos_;
          break;
        case '\n': break;
        default:
          if (e >= '0' && e <= '7') {
            int v = e - '0';
            for (int k = 0; k < 2 && pos_ < data_.size() && data_[pos_] >= '0' && data_[pos_] <= '7'; ++k)
              v = v * 8 + (data_[pos_++] - '0');
            out.push_back(static_cast<char>(v & 0xff));
          } else {
            out.push_back(e);
          }
      }
    } else if (c == '(') {
      ++depth;
      out.push_back(c);
    } else if (c == ')') {
      if (--depth == 0) return {std::move(out)};
      out.push_back(c);
    } else {
      out.push_back(c);
    }
  }
  fail("unterminated string");
}

String Lexer::read_hex_string() {
  ++pos_;  // '<'
  std::string out;
  int hi = -1;
  while (pos_ < data_.size()) {
    auto c = static_cast<unsigned char>(data_[pos_++]);
    if (c == '>') {
      if (hi >= 0) out.push_back(static_cast<char>(hi << 4));
      return {std::move(out)};
    }
    if (is_whitespace(c)) continue;
    int v;
    if (c >= '0' && c <= '9') v = c - '0';
    else if (c >= 'a' && c <= 'f') v = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F') v = c - 'A' + 10;
    else {
      --pos_;
      fail("bad hex digit in string");
    }
    if (hi < 0) {
      hi = v;
    } else {
      out.push_back(static_cast<char>((hi << 4) | v));
      hi = -1;
    }
  }
  fail("unterminated hex string");
}

Name Lexer::read_name() {
  ++pos_;  // '/'
  std::string raw = read_regular();
  std::string out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] == '#' && i + 2 < raw.size()) {
      char buf[3] = {raw[i + 1], raw[i + 2], 0};
      char* end = nullptr;
      long v = std::strtol(buf, &end, 16);
      if (end == buf + 2) {
        out.push_back(static_cast<char>(v));
        i += 2;
        continue;
      }
    }
    out.push_back(raw[i]);
  }
  return {std::move(out)};
}

Object Lexer::next(bool fold_refs, int depth) {
  if (depth > kMaxNesting) fail("nesting too deep");
  skip_whitespace();
  if (pos_ >= data_.size()) fail("unexpected end of data");
  auto c = static_cast<unsigned char>(data_[pos_]);
  switch (c) {
    case '(':
      return read_literal_string();
    case '/':
      return read_name();
    case '[': {
      ++pos_;
      Array items;
      for (;;) {
        skip_whitespace();
        if (pos_ >= data_.size()) fail("unterminated array");
        if (data_[pos_] == ']') {
          ++pos_;
          break;
        }
        items.push_back(next(fold_refs, depth + 1));
        if (fold_refs) {
          // Fold "num gen R" in place.
          auto n = items.size();
          if (n >= 3 && items[n - 1].keyword() && items[n - 1].keyword()->value == "R" &&
              items[n - 2].is_number() && items[n - 3].is_number()) {
            Ref r{to_u32(*items[n - 3].number()),
                  to_u32(*items[n - 2].number())};
            items.resize(n - 3);
            items.emplace_back(r);
          }
        }
      }
      return std::make_shared<const Array>(std::move(items));
    }
    case '<': {
      if (pos_ + 1 < data_.size() && data_[pos_ + 1] == '<') {
        pos_ += 2;
        Dict dict;
        for (;;) {
          skip_whitespace();
          if (pos_ >= data_.size()) fail("unterminated dictionary");
          if (data_[pos_] == '>') {
            if (pos_ + 1 < data_.size() && data_[pos_ + 1] == '>') {
              pos_ += 2;
              break;
            }
            fail("stray '>' in dictionary");
          }
          Object key = next(fold_refs, depth + 1);
          if (!key.name()) fail("dictionary key is not a name");
          Object value = next(fold_refs, depth + 1);
          if (fold_refs && value.is_number()) {
            // Possibly the start of "num gen R".
            std::size_t save = pos_;
            skip_whitespace();
            if (pos_ < data_.size() && (std::isdigit(static_cast<unsigned char>(data_[pos_])))) {
              try {
                Object gen = next(false, depth + 1);
                skip_whitespace();
                if (gen.is_number() && pos_ < data_.size() && data_[pos_] == 'R' &&
                    (pos_ + 1 >= data_.size() || is_whitespace(data_[pos_ + 1]) ||
                     is_delimiter(data_[pos_ + 1]))) {
                  ++pos_;
                  value = Ref{to_u32(*value.number()),
                              to_u32(*gen.number())};
                } else {
                  pos_ = save;
                }
              } catch (const Error&) {
                pos_ = save;
              }
            } else {
              pos_ = save;
            }
          }
          dict.insert_or_assign(key.name()->value, std::move(value));
        }
        return std::make_shared<const Dict>(std::move(dict));
      }
      return read_hex_string();
    }
    case ')':
    case '>':
    case ']':
      fail(std::string("unexpected '") + static_cast<char>(c) + "'");
    case '{':
    case '}':
      ++pos_;
      return Keyword{std::string(1, static_cast<char>(c))};
    default:
      break;
  }
  if ((c >= '0' && c <= '9') || c == '+' || c == '-' || c == '.') return read_number();
  std::string word = read_regular();
  if (word.empty()) {
    ++pos_;
    return Keyword{std::string(1, static_cast<char>(c))};
  }
  if (word == "true") return true;
  if (word == "false") return false;
  if (word == "null") return Object{};
  return Keyword{std::move(word)};
}

}  // namespace ccs::pdf
