#pragma once

#include <array>
#include <map>
#include <string>
#include <string_view>

namespace ccs::pdf {

enum class BaseEncoding { standard, win_ansi, mac_roman };

std::array<std::string, 256> base_encoding(BaseEncoding enc);

/// UTF-8 for an Adobe glyph name ("A", "fi", "uni00E9", ...); empty if unknown.
std::string glyph_name_to_utf8(std::string_view name);

std::string utf8_from_codepoint(char32_t cp);

/// bfchar / bfrange entries of a ToUnicode CMap. Code width is taken from
/// the source hex string length.
std::map<unsigned, std::string> parse_to_unicode(std::string_view cmap);

}  // namespace ccs::pdf
