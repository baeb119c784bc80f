#include "fonts.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <unordered_map>

#include "ccs/pdf_parse.hpp"
#include "objects.hpp"

namespace ccs::pdf {

std::string utf8_from_codepoint(char32_t cp) {
  std::string out;
  if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
  return out;
}

namespace {

constexpr char32_t kWinAnsiHigh[32] = {
    0x20AC, 0, 0x201A, 0x0192, 0x201E, 0x2026, 0x2020, 0x2021, 0x02C6, 0x2030, 0x0160,
    0x2039, 0x0152, 0, 0x017D, 0, 0, 0x2018, 0x2019, 0x201C, 0x201D, 0x2022,
    0x2013, 0x2014, 0x02DC, 0x2122, 0x0161, 0x203A, 0x0153, 0, 0x017E, 0x0178};

constexpr char32_t kMacRomanHigh[128] = {
    0x00C4, 0x00C5, 0x00C7, 0x00C9, 0x00D1, 0x00D6, 0x00DC, 0x00E1, 0x00E0, 0x00E2, 0x00E4,
    0x00E3, 0x00E5, 0x00E7, 0x00E9, 0x00E8, 0x00EA, 0x00EB, 0x00ED, 0x00EC, 0x00EE, 0x00EF,
    0x00F1, 0x00F3, 0x00F2, 0x00F4, 0x00F6, 0x00F5, 0x00FA, 0x00F9, 0x00FB, 0x00FC, 0x2020,
    0x00B0, 0x00A2, 0x00A3, 0x00A7, 0x2022, 0x00B6, 0x00DF, 0x00AE, 0x00A9, 0x2122, 0x00B4,
    0x00A8, 0x2260, 0x00C6, 0x00D8, 0x221E, 0x00B1, 0x2264, 0x2265, 0x00A5, 0x00B5, 0x2202,
    0x2211, 0x220F, 0x03C0, 0x222B, 0x00AA, 0x00BA, 0x03A9, 0x00E6, 0x00F8, 0x00BF, 0x00A1,
    0x00AC, 0x221A, 0x0192, 0x2248, 0x2206, 0x00AB, 0x00BB, 0x2026, 0x00A0, 0x00C0, 0x00C3,
    0x00D5, 0x0152, 0x0153, 0x2013, 0x2014, 0x201C, 0x201D, 0x2018, 0x2019, 0x00F7, 0x25CA,
    0x00FF, 0x0178, 0x2044, 0x20AC, 0x2039, 0x203A, 0xFB01, 0xFB02, 0x2021, 0x00B7, 0x201A,
    0x201E, 0x2030, 0x00C2, 0x00CA, 0x00C1, 0x00CB, 0x00C8, 0x00CD, 0x00CE, 0x00CF, 0x00CC,
    0x00D3, 0x00D4, 0xF8FF, 0x00D2, 0x00DA, 0x00DB, 0x00D9, 0x0131, 0x02C6, 0x02DC, 0x00AF,
    0x02D8, 0x02D9, 0x02DA, 0x00B8, 0x02DD, 0x02DB, 0x02C7};

struct StdEntry {
  unsigned char code;
  char32_t cp;
};

constexpr StdEntry kStandardHigh[] = {
    {0xA1, 0x00A1}, {0xA2, 0x00A2}, {0xA3, 0x00A3}, {0xA4, 0x2044}, {0xA5, 0x00A5},
    {0xA6, 0x0192}, {0xA7, 0x00A7}, {0xA8, 0x00A4}, {0xA9, 0x0027}, {0xAA, 0x201C},
    {0xAB, 0x00AB}, {0xAC, 0x2039}, {0xAD, 0x203A}, {0xAE, 0xFB01}, {0xAF, 0xFB02},
    {0xB1, 0x2013}, {0xB2, 0x2020}, {0xB3, 0x2021}, {0xB4, 0x00B7}, {0xB6, 0x00B6},
    {0xB7, 0x2022}, {0xB8, 0x201A}, {0xB9, 0x201E}, {0xBA, 0x201D}, {0xBB, 0x00BB},
    {0xBC, 0x2026}, {0xBD, 0x2030}, {0xBF, 0x00BF}, {0xC1, 0x0060}, {0xC2, 0x00B4},
    {0xC3, 0x02C6}, {0xC4, 0x02DC}, {0xC5, 0x00AF}, {0xC6, 0x02D8}, {0xC7, 0x02D9},
    {0xC8, 0x00A8}, {0xCA, 0x02DA}, {0xCB, 0x00B8}, {0xCD, 0x02DD}, {0xCE, 0x02DB},
    {0xCF, 0x02C7}, {0xD0, 0x2014}, {0xE1, 0x00C6}, {0xE3, 0x00AA}, {0xE8, 0x0141},
    {0xE9, 0x00D8}, {0xEA, 0x0152}, {0xEB, 0x00BA}, {0xF1, 0x00E6}, {0xF5, 0x0131},
    {0xF8, 0x0142}, {0xF9, 0x00F8}, {0xFA, 0x0153}, {0xFB, 0x00DF}};

const std::unordered_map<std::string_view, char32_t>& glyph_table() {
  static const std::unordered_map<std::string_view, char32_t> table = {
      {"space", ' '}, {"exclam", '!'}, {"quotedbl", '"'}, {"numbersign", '#'},
      {"dollar", '$'}, {"percent", '%'}, {"ampersand", '&'}, {"quotesingle", '\''},
      {"quoteright", 0x2019}, {"quoteleft", 0x2018}, {"parenleft", '('}, {"parenright", ')'},
      {"asterisk", '*'}, {"plus", '+'}, {"comma", ','}, {"hyphen", '-'}, {"period", '.'},
      {"slash", '/'}, {"zero", '0'}, {"one", '1'}, {"two", '2'}, {"three", '3'},
      {"four", '4'}, {"five", '5'}, {"six", '6'}, {"seven", '7'}, {"eight", '8'},
      {"nine", '9'}, {"colon", ':'}, {"semicolon", ';'}, {"less", '<'}, {"equal", '='},
      {"greater", '>'}, {"question", '?'}, {"at", '@'}, {"bracketleft", '['},
      {"backslash", '\\'}, {"bracketright", ']'}, {"asciicircum", '^'}, {"underscore", '_'},
      {"grave", '`'}, {"braceleft", '{'}, {"bar", '|'}, {"braceright", '}'},
      {"asciitilde", '~'}, {"endash", 0x2013}, {"emdash", 0x2014}, {"bullet", 0x2022},
      {"quotedblleft", 0x201C}, {"quotedblright", 0x201D}, {"quotesinglbase", 0x201A},
      {"quotedblbase", 0x201E}, {"ellipsis", 0x2026}, {"dagger", 0x2020},
      {"daggerdbl", 0x2021}, {"dotlessi", 0x0131}, {"minus", 0x2212}, {"multiply", 0x00D7},
      {"divide", 0x00F7}, {"degree", 0x00B0}, {"plusminus", 0x00B1}, {"section", 0x00A7},
      {"paragraph", 0x00B6}, {"copyright", 0x00A9}, {"registered", 0x00AE},
      {"trademark", 0x2122}, {"germandbls", 0x00DF}, {"ff", 0xFB00}, {"fi", 0xFB01},
      {"fl", 0xFB02}, {"ffi", 0xFB03}, {"ffl", 0xFB04}, {"periodcentered", 0x00B7},
      {"acute", 0x00B4}, {"dieresis", 0x00A8}, {"circumflex", 0x02C6}, {"tilde", 0x02DC},
      {"macron", 0x00AF}, {"ring", 0x02DA}, {"cedilla", 0x00B8}, {"caron", 0x02C7},
      {"breve", 0x02D8}, {"dotaccent", 0x02D9}, {"hungarumlaut", 0x02DD}, {"ogonek", 0x02DB},
      {"eacute", 0x00E9}, {"egrave", 0x00E8}, {"aacute", 0x00E1}, {"agrave", 0x00E0},
      {"adieresis", 0x00E4}, {"odieresis", 0x00F6}, {"udieresis", 0x00FC},
      {"Adieresis", 0x00C4}, {"Odieresis", 0x00D6}, {"Udieresis", 0x00DC},
      {"ccedilla", 0x00E7}, {"ntilde", 0x00F1}, {"Eacute", 0x00C9}, {"oslash", 0x00F8},
      {"aring", 0x00E5}, {"ae", 0x00E6}, {"oe", 0x0153}, {"AE", 0x00C6}, {"OE", 0x0152},
      {"alpha", 0x03B1}, {"beta", 0x03B2}, {"gamma", 0x03B3}, {"delta", 0x03B4},
      {"epsilon", 0x03B5}, {"zeta", 0x03B6}, {"eta", 0x03B7}, {"theta", 0x03B8},
      {"iota", 0x03B9}, {"kappa", 0x03BA}, {"lambda", 0x03BB}, {"mu", 0x03BC},
      {"nu", 0x03BD}, {"xi", 0x03BE}, {"omicron", 0x03BF}, {"pi", 0x03C0}, {"rho", 0x03C1},
      {"sigma", 0x03C3}, {"tau", 0x03C4}, {"upsilon", 0x03C5}, {"phi", 0x03C6},
      {"chi", 0x03C7}, {"psi", 0x03C8}, {"omega", 0x03C9}, {"Gamma", 0x0393},
      {"Delta", 0x0394}, {"Theta", 0x0398}, {"Lambda", 0x039B}, {"Xi", 0x039E},
      {"Pi", 0x03A0}, {"Sigma", 0x03A3}, {"Phi", 0x03A6}, {"Psi", 0x03A8},
      {"Omega", 0x03A9}, {"infinity", 0x221E}, {"partialdiff", 0x2202},
      {"lessequal", 0x2264}, {"greaterequal", 0x2265}, {"notequal", 0x2260},
      {"approxequal", 0x2248}, {"summation", 0x2211}, {"integral", 0x222B},
      {"radical", 0x221A}, {"Euro", 0x20AC}, {"sterling", 0x00A3}, {"yen", 0x00A5},
      {"cent", 0x00A2}, {"guillemotleft", 0x00AB}, {"guillemotright", 0x00BB},
      {"exclamdown", 0x00A1}, {"questiondown", 0x00BF}, {"nbspace", 0x00A0}};
  return table;
}

char32_t parse_hex_codepoint(std::string_view hex, bool& ok) {
  ok = !hex.empty() && hex.size() <= 6;
  char32_t v = 0;
  for (char c : hex) {
    int d;
    if (c >= '0' && c <= '9') d = c - '0';
    else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
    else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
    else {
      ok = false;
      return 0;
    }
    v = v * 16 + static_cast<char32_t>(d);
  }
  return v;
}

/// UTF-16BE bytes (as found in CMap destination strings) to UTF-8.
std::string utf16be_to_utf8(std::string_view bytes) {
  std::string out;
  for (std::size_t i = 0; i + 1 < bytes.size(); i += 2) {
    char32_t u = (static_cast<unsigned char>(bytes[i]) << 8) | static_cast<unsigned char>(bytes[i + 1]);
    if (u >= 0xD800 && u <= 0xDBFF && i + 3 < bytes.size()) {
      char32_t lo = (static_cast<unsigned char>(bytes[i + 2]) << 8) | static_cast<unsigned char>(bytes[i + 3]);
      if (lo >= 0xDC00 && lo <= 0xDFFF) {
        u = 0x10000 + ((u - 0xD800) << 10) + (lo - 0xDC00);
        i += 2;
      }
    }
    out += utf8_from_codepoint(u);
  }
  if (bytes.size() == 1) out += utf8_from_codepoint(static_cast<unsigned char>(bytes[0]));
  return out;
}

unsigned code_of(std::string_view bytes) {
  unsigned v = 0;
  for (std::size_t i = 0; i < bytes.size() && i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(bytes[i]);
  return v;
}

bool contains(std::string_view hay, std::string_view needle) {
  return hay.find(needle) != std::string_view::npos;
}

}  // namespace

std::array<std::string, 256> base_encoding(BaseEncoding enc) {
  std::array<std::string, 256> table;
  for (unsigned c = 32; c < 127; ++c) table[c] = std::string(1, static_cast<char>(c));
  switch (enc) {
    case BaseEncoding::win_ansi:
      for (unsigned c = 0x80; c < 0xA0; ++c)
        if (kWinAnsiHigh[c - 0x80]) table[c] = utf8_from_codepoint(kWinAnsiHigh[c - 0x80]);
      for (unsigned c = 0xA0; c < 0x100; ++c) table[c] = utf8_from_codepoint(c);
      break;
    case BaseEncoding::mac_roman:
      for (unsigned c = 0x80; c < 0x100; ++c) table[c] = utf8_from_codepoint(kMacRomanHigh[c - 0x80]);
      break;
    case BaseEncoding::standard:
      table[0x27] = utf8_from_codepoint(0x2019);
      table[0x60] = utf8_from_codepoint(0x2018);
      for (const auto& e : kStandardHigh) table[e.code] = utf8_from_codepoint(e.cp);
      break;
  }
  return table;
}

std::string glyph_name_to_utf8(std::string_view name) {
  if (auto dot = name.find('.'); dot != std::string_view::npos && dot > 0) name = name.substr(0, dot);
  if (name.size() == 1 && static_cast<unsigned char>(name[0]) < 0x80 &&
      std::isalpha(static_cast<unsigned char>(name[0])))
    return std::string(name);
  const auto& table = glyph_table();
  if (auto it = table.find(name); it != table.end()) return utf8_from_codepoint(it->second);
  bool ok = false;
  if (name.size() >= 7 && name.substr(0, 3) == "uni") {
    std::string out;
    for (std::size_t i = 3; i + 4 <= name.size(); i += 4) {
      char32_t cp = parse_hex_codepoint(name.substr(i, 4), ok);
      if (!ok) return {};
      out += utf8_from_codepoint(cp);
    }
    return out;
  }
  if (name.size() >= 5 && name.size() <= 7 && name[0] == 'u') {
    char32_t cp = parse_hex_codepoint(name.substr(1), ok);
    if (ok) return utf8_from_codepoint(cp);
  }
  return {};
}

std::map<unsigned, std::string> parse_to_unicode(std::string_view cmap) {
  std::map<unsigned, std::string> out;
  Lexer lex(cmap);
  std::vector<Object> operands;
  enum { none, bfchar, bfrange } mode = none;
  try {
    while (!lex.at_end()) {
      Object o = lex.next(false);
      if (const Keyword* k = o.keyword()) {
        if (k->value == "beginbfchar") mode = bfchar;
        else if (k->value == "beginbfrange") mode = bfrange;
        else if (k->value == "endbfchar" || k->value == "endbfrange") mode = none;
        operands.clear();
        continue;
      }
      if (mode == none) continue;
      operands.push_back(std::move(o));
      if (mode == bfchar && operands.size() == 2) {
        if (operands[0].string() && operands[1].string())
          out[code_of(operands[0].string()->bytes)] = utf16be_to_utf8(operands[1].string()->bytes);
        operands.clear();
      } else if (mode == bfrange && operands.size() == 3) {
        const String* lo = operands[0].string();
        const String* hi = operands[1].string();
        if (lo && hi) {
          unsigned a = code_of(lo->bytes), b = code_of(hi->bytes);
          if (b >= a && b - a <= 0xFFFF) {
            if (const String* dst = operands[2].string()) {
              std::string base = dst->bytes;
              for (unsigned c = a; c <= b; ++c) {
                out[c] = utf16be_to_utf8(base);
                // Increment the last UTF-16 unit.
                if (!base.empty()) {
                  auto last = static_cast<unsigned char>(base.back());
                  base.back() = static_cast<char>(last + 1);
                  if (last == 0xFF && base.size() >= 2)
                    base[base.size() - 2] = static_cast<char>(static_cast<unsigned char>(base[base.size() - 2]) + 1);
                }
              }
            } else if (const Array* arr = operands[2].array()) {
              for (unsigned c = a; c <= b && c - a < arr->size(); ++c)
                if (const String* s = (*arr)[c - a].string()) out[c] = utf16be_to_utf8(s->bytes);
            }
          }
        }
        operands.clear();
      }
    }
  } catch (const Error&) {
    // Keep whatever was decoded before the damage.
  }
  return out;
}

TextStyle infer_style(std::string_view font_name, long flags, double font_weight) {
  constexpr long kItalicFlag = 1L << 6;
  constexpr long kForceBoldFlag = 1L << 18;
  bool bold = (flags & kForceBoldFlag) != 0 || font_weight >= 700 || contains(font_name, "Bold");
  bool italic = (flags & kItalicFlag) != 0 || contains(font_name, "Italic") ||
                contains(font_name, "Oblique");
  if (bold) return TextStyle::bold;
  if (italic) return TextStyle::italic;
  return TextStyle::normal;
}

double FontInfo::advance(unsigned code) const {
  if (!composite && code >= static_cast<unsigned>(std::max(first_char, 0))) {
    std::size_t idx = code - static_cast<unsigned>(std::max(first_char, 0));
    if (idx < widths.size() && widths[idx] > 0) return widths[idx] / 1000.0;
  }
  return (missing_width > 0 ? missing_width : 500) / 1000.0;
}

std::string FontInfo::unicode(unsigned code) const {
  if (auto it = to_unicode.find(code); it != to_unicode.end()) return it->second;
  if (!composite && code < 256) {
    if (!encoding[code].empty()) return encoding[code];
    return code < 32 ? std::string() : utf8_from_codepoint(0xFFFD);
  }
  return utf8_from_codepoint(0xFFFD);
}

FontInfo FontInfo::fallback() {
  FontInfo f;
  f.base_font = "(fallback)";
  f.encoding = base_encoding(BaseEncoding::win_ansi);
  return f;
}

}  // namespace ccs::pdf
