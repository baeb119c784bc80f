#pragma once

#include <span>
#include <string>
#include <vector>

#include "ccs/doc_model.hpp"

namespace ccs {

/// One line of text placed with its baseline origin at (x, y). Text must be
/// printable ASCII; it is set in Courier, so each glyph advances 0.6 em.
struct PdfSnippet {
  double x = 0, y = 0;
  std::string text;
  double font_size = 10;
  TextStyle style = TextStyle::normal;
};

struct PdfPageSpec {
  double width = 612, height = 792;
  std::vector<PdfSnippet> snippets;
  /// Appended verbatim after the snippets' text objects.
  std::string extra_content;
};

enum class Positioning { td, tm, cm };

struct PdfWriteOptions {
  bool compress = false;     // Flate content streams (and the xref stream)
  bool xref_stream = false;  // cross-reference stream instead of a table
  bool kern_spaces = false;  // spaces become TJ displacements of one glyph width
  Positioning positioning = Positioning::td;
};

/// Width Courier gives `text` at `font_size`.
double courier_width(std::string_view text, double font_size);

/// Bounding box the parser is expected to report for a snippet.
BBox snippet_bbox(const PdfSnippet& s);

std::string write_pdf(std::span<const PdfPageSpec> pages, const PdfWriteOptions& options = {});

}  // namespace ccs
