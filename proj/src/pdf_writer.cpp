#include "ccs/pdf_writer.hpp"

#include <zlib.h>

#include <cstdio>

namespace ccs {

namespace {

constexpr double kCourierAdvance = 0.6;

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  std::string s(buf);
  while (s.back() == '0') s.pop_back();
  if (s.back() == '.') s.pop_back();
  if (s == "-0") s = "0";
  return s;
}

std::string literal(std::string_view text) {
  std::string out = "(";
  for (char c : text) {
    if (c == '(' || c == ')' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out + ")";
}

const char* font_for(TextStyle s) {
  switch (s) {
    case TextStyle::italic: return "/F2";
    case TextStyle::bold: return "/F3";
    default: return "/F1";
  }
}

std::string show(std::string_view text, bool kern) {
  if (!kern) return literal(text) + " Tj";
  std::string out = "[";
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t j = text.find(' ', i);
    if (j == std::string_view::npos) j = text.size();
    if (j > i) out += literal(text.substr(i, j - i));
    std::size_t spaces = 0;
    while (j < text.size() && text[j] == ' ') ++j, ++spaces;
    if (spaces) out += " " + num(-600.0 * static_cast<double>(spaces)) + " ";
    i = j;
  }
  return out + "] TJ";
}

std::string page_content(const PdfPageSpec& page, const PdfWriteOptions& opt) {
  std::string out;
  for (const auto& s : page.snippets) {
    const std::string shown = show(s.text, opt.kern_spaces);
    switch (opt.positioning) {
      case Positioning::td:
        out += "BT " + std::string(font_for(s.style)) + " " + num(s.font_size) + " Tf " + num(s.x) + " " +
               num(s.y) + " Td " + shown + " ET\n";
        break;
      case Positioning::tm:
        out += "BT " + std::string(font_for(s.style)) + " " + num(s.font_size) + " Tf 1 0 0 1 " + num(s.x) +
               " " + num(s.y) + " Tm " + shown + " ET\n";
        break;
      case Positioning::cm:
        out += "q 2 0 0 2 " + num(s.x) + " " + num(s.y) + " cm BT " + font_for(s.style) + " " +
               num(s.font_size / 2) + " Tf 0 0 Td " + shown + " ET Q\n";
        break;
    }
  }
  out += page.extra_content;
  return out;
}

std::string deflate(const std::string& data) {
  uLongf size = compressBound(static_cast<uLong>(data.size()));
  std::string out(size, '\0');
  compress2(reinterpret_cast<Bytef*>(out.data()), &size, reinterpret_cast<const Bytef*>(data.data()),
            static_cast<uLong>(data.size()), Z_BEST_COMPRESSION);
  out.resize(size);
  return out;
}

std::string stream_object(const std::string& dict_entries, const std::string& data, bool compress) {
  std::string body = compress ? deflate(data) : data;
  std::string filter = compress ? " /Filter /FlateDecode" : "";
  return "<< " + dict_entries + filter + " /Length " + std::to_string(body.size()) + " >>\nstream\n" + body +
         "\nendstream";
}

std::string courier_font(const char* name) {
  std::string widths;
  for (int c = 32; c <= 126; ++c) widths += (c == 32 ? "" : " ") + std::string("600");
  return std::string("<< /Type /Font /Subtype /Type1 /BaseFont /") + name +
         " /Encoding /WinAnsiEncoding /FirstChar 32 /LastChar 126 /Widths [" + widths + "] >>";
}

}  // namespace

double courier_width(std::string_view text, double font_size) {
  return static_cast<double>(text.size()) * kCourierAdvance * font_size;
}

BBox snippet_bbox(const PdfSnippet& s) {
  return {s.x, s.y, s.x + courier_width(s.text, s.font_size), s.y + s.font_size};
}

std::string write_pdf(std::span<const PdfPageSpec> pages, const PdfWriteOptions& opt) {
  // 1 catalog, 2 page tree, 3-5 fonts, then (page, content) pairs.
  std::vector<std::string> objects;
  std::string kids;
  for (std::size_t i = 0; i < pages.size(); ++i) kids += std::to_string(6 + 2 * i) + " 0 R ";
  objects.push_back("<< /Type /Catalog /Pages 2 0 R >>");
  objects.push_back("<< /Type /Pages /Kids [" + kids + "] /Count " + std::to_string(pages.size()) + " >>");
  objects.push_back(courier_font("Courier"));
  objects.push_back(courier_font("Courier-Oblique"));
  objects.push_back(courier_font("Courier-Bold"));
  for (std::size_t i = 0; i < pages.size(); ++i) {
    const auto& p = pages[i];
    objects.push_back("<< /Type /Page /Parent 2 0 R /MediaBox [0 0 " + num(p.width) + " " + num(p.height) +
                      "] /Resources << /Font << /F1 3 0 R /F2 4 0 R /F3 5 0 R >> >> /Contents " +
                      std::to_string(7 + 2 * i) + " 0 R >>");
    objects.push_back(stream_object("", page_content(p, opt), opt.compress));
  }

  std::string out = "%PDF-1.5\n%\xe2\xe3\xcf\xd3\n";
  std::vector<std::size_t> offsets;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    offsets.push_back(out.size());
    out += std::to_string(i + 1) + " 0 obj\n" + objects[i] + "\nendobj\n";
  }
  const std::size_t size = objects.size() + 1;
  if (!opt.xref_stream) {
    const std::size_t xref = out.size();
    out += "xref\n0 " + std::to_string(size) + "\n0000000000 65535 f \n";
    for (std::size_t off : offsets) {
      char line[32];
      std::snprintf(line, sizeof line, "%010zu 00000 n \n", off);
      out += line;
    }
    out += "trailer\n<< /Size " + std::to_string(size) + " /Root 1 0 R >>\nstartxref\n" + std::to_string(xref) +
           "\n%%EOF\n";
    return out;
  }

  // Cross-reference stream, /W [1 4 2], covering itself as the last object.
  const std::size_t xref = out.size();
  offsets.push_back(xref);
  std::string rows;
  auto row = [&rows](int type, std::size_t field2, unsigned field3) {
    rows.push_back(static_cast<char>(type));
    for (int shift = 24; shift >= 0; shift -= 8) rows.push_back(static_cast<char>((field2 >> shift) & 0xff));
    rows.push_back(static_cast<char>((field3 >> 8) & 0xff));
    rows.push_back(static_cast<char>(field3 & 0xff));
  };
  row(0, 0, 65535);
  for (std::size_t off : offsets) row(1, off, 0);
  const std::string count = std::to_string(size + 1);
  out += std::to_string(size) + " 0 obj\n" +
         stream_object("/Type /XRef /Size " + count + " /W [1 4 2] /Root 1 0 R", rows, opt.compress) +
         "\nendobj\nstartxref\n" + std::to_string(xref) + "\n%%EOF\n";
  return out;
}

}  // namespace ccs
