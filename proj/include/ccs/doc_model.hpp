#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ccs/error.hpp"

namespace ccs {

/// Axis-aligned box in PDF user space: points, origin at the bottom-left.
struct BBox {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }

  bool operator==(const BBox&) const = default;
};

BBox united(const BBox& a, const BBox& b);
/// Intersection; an empty intersection yields a zero-area box.
std::optional<BBox> intersection(const BBox& a, const BBox& b);
BBox translated(const BBox& b, double dx, double dy);

enum class TextStyle : std::uint8_t { normal, italic, bold };

std::string_view to_string(TextStyle s);
TextStyle text_style_from_string(std::string_view s);

struct Cell {
  int id = 0;
  BBox bbox;
  std::string text;
  TextStyle style = TextStyle::normal;
  double font_size = 0;

  bool operator==(const Cell&) const = default;
};

struct Page {
  int number = 1;
  double width = 0, height = 0;
  std::vector<Cell> cells;

  BBox rect() const { return {0, 0, width, height}; }
  bool operator==(const Page&) const = default;
};

struct ParsedDocument {
  std::string doc_id;
  std::string source_hash;
  std::vector<Page> pages;
  int total_pages = 0;

  bool operator==(const ParsedDocument&) const = default;
};

struct Label {
  std::string name;
  std::string color;  // "#rrggbb"

  bool operator==(const Label&) const = default;
};

struct StructuredElement {
  std::string label;
  std::string text;
  int page = 1;
  BBox bbox;
  std::vector<int> source_cell_ids;

  bool operator==(const StructuredElement&) const = default;
};

struct StructuredDocument {
  std::string doc_id;
  std::vector<StructuredElement> elements;

  bool operator==(const StructuredDocument&) const = default;
};

struct Violation {
  std::string invariant;  // e.g. "BBox.order"
  std::string locus;      // e.g. "page 2, cell 7"

  bool operator==(const Violation&) const = default;
};

/// Lower-case hex SHA-256 of `bytes`.
std::string content_digest(std::string_view bytes);

/// Rounds to the 3-decimal grid used by the internal format.
double quantize(double v);

std::vector<Violation> validate_document(const ParsedDocument& doc);

/// Canonical `.ccs.json` bytes: sorted keys, no whitespace, coordinates on the
/// 3-decimal grid. Equal documents serialize to identical bytes.
std::string serialize_document(const ParsedDocument& doc);

/// Throws Error{syntax} for unparsable input and Error{invariant} (with the
/// offending page/cell) when the decoded document breaks a type invariant.
ParsedDocument deserialize_document(std::string_view bytes);

/// Trims ASCII whitespace from both ends.
std::string_view trim(std::string_view s);

}  // namespace ccs
