#include "ccs/doc_model.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "ccs/error.hpp"
#include "ccs/json_io.hpp"

namespace ccs {

using nlohmann::json;

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::syntax: return "syntax";
    case Errc::invariant: return "invariant";
    case Errc::unsupported: return "unsupported";
    case Errc::malformed: return "malformed";
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::not_found: return "not_found";
    case Errc::conflict: return "conflict";
    case Errc::schema_mismatch: return "schema_mismatch";
    case Errc::version: return "version";
    case Errc::checksum: return "checksum";
    case Errc::empty_selection: return "empty_selection";
    case Errc::busy: return "busy";
    case Errc::internal: return "internal";
  }
  return "unknown";
}

BBox united(const BBox& a, const BBox& b) {
  return {std::min(a.x0, b.x0), std::min(a.y0, b.y0), std::max(a.x1, b.x1),
          std::max(a.y1, b.y1)};
}

std::optional<BBox> intersection(const BBox& a, const BBox& b) {
  BBox r{std::max(a.x0, b.x0), std::max(a.y0, b.y0), std::min(a.x1, b.x1),
         std::min(a.y1, b.y1)};
  if (r.x0 > r.x1 || r.y0 > r.y1) return std::nullopt;
  return r;
}

BBox translated(const BBox& b, double dx, double dy) {
  return {b.x0 + dx, b.y0 + dy, b.x1 + dx, b.y1 + dy};
}

std::string_view to_string(TextStyle s) {
  switch (s) {
    case TextStyle::normal: return "normal";
    case TextStyle::italic: return "italic";
    case TextStyle::bold: return "bold";
  }
  return "normal";
}

TextStyle text_style_from_string(std::string_view s) {
  if (s == "normal") return TextStyle::normal;
  if (s == "italic") return TextStyle::italic;
  if (s == "bold") return TextStyle::bold;
  throw Error(Errc::syntax, "unknown text style '" + std::string(s) + "'");
}

std::string content_digest(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xf]);
  }
  return out;
}

double quantize(double v) {
  double q = std::round(v * 1000.0) / 1000.0;
  return q == 0.0 ? 0.0 : q;  // no negative zero
}

std::string_view trim(std::string_view s) {
  auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

namespace {

std::string locus(const Page& p) { return "page " + std::to_string(p.number); }
std::string locus(const Page& p, const Cell& c) {
  return "page " + std::to_string(p.number) + ", cell " + std::to_string(c.id);
}

bool finite(const BBox& b) {
  return std::isfinite(b.x0) && std::isfinite(b.y0) && std::isfinite(b.x1) &&
         std::isfinite(b.y1);
}

}  // namespace

std::vector<Violation> validate_document(const ParsedDocument& doc) {
  std::vector<Violation> out;
  if (doc.total_pages != static_cast<int>(doc.pages.size()))
    out.push_back({"ParsedDocument.total_pages",
                   "document (total_pages=" + std::to_string(doc.total_pages) +
                       ", pages=" + std::to_string(doc.pages.size()) + ")"});
  for (std::size_t i = 0; i < doc.pages.size(); ++i) {
    const Page& p = doc.pages[i];
    if (p.number != static_cast<int>(i) + 1)
      out.push_back({"Page.number", locus(p) + " at position " + std::to_string(i + 1)});
    if (!(p.width > 0) || !(p.height > 0) || !std::isfinite(p.width) || !std::isfinite(p.height))
      out.push_back({"Page.size", locus(p)});
    for (std::size_t k = 0; k < p.cells.size(); ++k) {
      const Cell& c = p.cells[k];
      if (c.id != static_cast<int>(k))
        out.push_back({"Cell.id", locus(p, c) + " at position " + std::to_string(k)});
      if (!finite(c.bbox)) {
        out.push_back({"BBox.finite", locus(p, c)});
        continue;
      }
      if (c.bbox.x0 > c.bbox.x1 || c.bbox.y0 > c.bbox.y1)
        out.push_back({"BBox.order", locus(p, c)});
      else if (!intersection(c.bbox, p.rect()))
        out.push_back({"Page.cell_inside", locus(p, c)});
      if (trim(c.text).empty()) out.push_back({"Cell.text", locus(p, c)});
      if (!(c.font_size > 0) || !std::isfinite(c.font_size))
        out.push_back({"Cell.font_size", locus(p, c)});
    }
  }
  return out;
}

json to_json(const BBox& b) {
  return json::array({quantize(b.x0), quantize(b.y0), quantize(b.x1), quantize(b.y1)});
}

BBox bbox_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4)
    throw Error(Errc::syntax, "bbox must be an array of 4 numbers");
  for (const auto& v : j)
    if (!v.is_number()) throw Error(Errc::syntax, "bbox must be an array of 4 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

json to_json(const Cell& c) {
  return {{"id", c.id},
          {"bbox", to_json(c.bbox)},
          {"text", c.text},
          {"style", std::string(to_string(c.style))},
          {"font_size", quantize(c.font_size)}};
}

json to_json(const Page& p) {
  json cells = json::array();
  for (const auto& c : p.cells) cells.push_back(to_json(c));
  return {{"number", p.number},
          {"width", quantize(p.width)},
          {"height", quantize(p.height)},
          {"cells", std::move(cells)}};
}

json to_json(const ParsedDocument& d) {
  json pages = json::array();
  for (const auto& p : d.pages) pages.push_back(to_json(p));
  return {{"format", "ccs-document/1"},
          {"doc_id", d.doc_id},
          {"source_hash", d.source_hash},
          {"total_pages", d.total_pages},
          {"pages", std::move(pages)}};
}

json to_json(const StructuredDocument& d) {
  json elements = json::array();
  for (const auto& e : d.elements)
    elements.push_back({{"label", e.label},
                        {"text", e.text},
                        {"page", e.page},
                        {"bbox", to_json(e.bbox)},
                        {"source_cell_ids", e.source_cell_ids}});
  return {{"format", "ccs-structured/1"}, {"doc_id", d.doc_id}, {"elements", std::move(elements)}};
}

namespace {

template <class T>
T field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw Error(Errc::syntax, std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::syntax, std::string("field '") + key + "' has the wrong type");
  }
}

const json& array_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_array())
    throw Error(Errc::syntax, std::string("missing array field '") + key + "'");
  return *it;
}

}  // namespace

Page page_from_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::syntax, "page must be an object");
  Page p;
  p.number = field<int>(j, "number");
  p.width = field<double>(j, "width");
  p.height = field<double>(j, "height");
  for (const auto& cj : array_field(j, "cells")) {
    if (!cj.is_object()) throw Error(Errc::syntax, "cell must be an object");
    Cell c;
    c.id = field<int>(cj, "id");
    c.bbox = bbox_from_json(cj.at("bbox"));
    c.text = field<std::string>(cj, "text");
    c.style = text_style_from_string(field<std::string>(cj, "style"));
    c.font_size = field<double>(cj, "font_size");
    p.cells.push_back(std::move(c));
  }
  return p;
}

ParsedDocument document_from_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::syntax, "document must be a JSON object");
  if (auto it = j.find("format"); it != j.end() && *it != "ccs-document/1")
    throw Error(Errc::version, "unsupported document format " + it->dump());
  ParsedDocument d;
  d.doc_id = field<std::string>(j, "doc_id");
  d.source_hash = field<std::string>(j, "source_hash");
  d.total_pages = field<int>(j, "total_pages");
  for (const auto& pj : array_field(j, "pages")) d.pages.push_back(page_from_json(pj));
  return d;
}

StructuredDocument structured_from_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::syntax, "structured document must be an object");
  StructuredDocument d;
  d.doc_id = field<std::string>(j, "doc_id");
  for (const auto& ej : array_field(j, "elements")) {
    StructuredElement e;
    e.label = field<std::string>(ej, "label");
    e.text = field<std::string>(ej, "text");
    e.page = field<int>(ej, "page");
    e.bbox = bbox_from_json(ej.at("bbox"));
    e.source_cell_ids = field<std::vector<int>>(ej, "source_cell_ids");
    d.elements.push_back(std::move(e));
  }
  return d;
}

std::string serialize_document(const ParsedDocument& doc) { return to_json(doc).dump(); }

ParsedDocument deserialize_document(std::string_view bytes) {
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw Error(Errc::syntax, std::string("malformed document JSON: ") + e.what());
  }
  ParsedDocument d = document_from_json(j);
  auto violations = validate_document(d);
  if (!violations.empty()) {
    std::ostringstream msg;
    msg << "document violates invariants:";
    for (const auto& v : violations) msg << " [" << v.invariant << " at " << v.locus << "]";
    throw Error(Errc::invariant, msg.str());
  }
  return d;
}

}  // namespace ccs
