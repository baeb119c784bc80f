#pragma once

#include <array>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ccs/doc_model.hpp"

namespace ccs::pdf {

/// What the interpreter needs to know about a font: advance widths, how codes
/// map to Unicode and the style inferred from the descriptor.
struct FontInfo {
  std::string base_font;
  bool composite = false;  // Type0: two-byte codes
  int first_char = 0;
  std::vector<double> widths;  // glyph-space units (1/1000 em)
  double missing_width = 500;
  TextStyle style = TextStyle::normal;
  /// UTF-8 per single-byte code; used for simple fonts without ToUnicode.
  std::array<std::string, 256> encoding;
  std::map<unsigned, std::string> to_unicode;

  /// Advance of `code` in em units.
  double advance(unsigned code) const;
  std::string unicode(unsigned code) const;

  /// Simple font with every width missing: the 0.5 em fallback font.
  static FontInfo fallback();
};

/// Infers bold/italic from descriptor flags and the font name. Bold-italic
/// collapses to bold.
TextStyle infer_style(std::string_view font_name, long descriptor_flags, double font_weight = 0);

struct FormXObject;

struct Resources {
  std::map<std::string, FontInfo, std::less<>> fonts;
  std::map<std::string, std::shared_ptr<const FormXObject>, std::less<>> forms;
};

struct FormXObject {
  std::string content;                     // decoded
  std::array<double, 6> matrix{1, 0, 0, 1, 0, 0};
  std::shared_ptr<const Resources> resources;  // null: inherit the caller's
};

struct Point {
  double x = 0, y = 0;
};

/// Text shown by one string operand of Tj/TJ/'/" inside a BT/ET object.
struct GlyphRun {
  std::string text;              // UTF-8
  Point start, end;              // baseline, user space
  double font_size = 0;          // effective size in user space
  TextStyle style = TextStyle::normal;
  std::vector<double> advances;  // per glyph, user space
  BBox bbox;                     // baseline .. baseline + font_size
  bool rotated = false;          // non axis-aligned text matrix
  int text_object = 0;           // ordinal of the enclosing BT/ET
};

/// Interprets a decoded content stream. Unknown operators are skipped;
/// recoverable problems (missing fonts, unbalanced BT/ET, syntax garbage) are
/// appended to `warnings` instead of aborting.
std::vector<GlyphRun> interpret_content(std::string_view stream, const Resources& resources,
                                        std::vector<std::string>* warnings = nullptr);

struct MergeOptions {
  double baseline_tolerance = 0.15;  // in units of max font size
  double gap_tolerance = 0.75;       // in units of font size
  double word_space = 0.15;          // gap (em) above which a space is inserted
};

/// Groups runs into cells by connected components of the "same line, close,
/// same style" relation. Output is sorted top-to-bottom, left-to-right, ids
/// 0..n-1, clamped to the page, with coordinates on the 3-decimal grid.
std::vector<Cell> merge_glyph_runs(std::span<const GlyphRun> runs, const Page& page,
                                   const MergeOptions& options = {},
                                   std::vector<std::string>* warnings = nullptr);

struct ParseOptions {
  MergeOptions merge;
  std::string doc_id;  // empty: derived from the content digest
  int workers = 1;     // page-parallel interpretation
};

struct ParseWarning {
  int page = 0;  // 0: document level
  std::string message;
};

struct ParseResult {
  ParsedDocument document;
  std::vector<ParseWarning> warnings;
};

class PdfFile;

/// Loaded object model. Immutable after load(), so pages may be interpreted
/// concurrently.
class PdfDocumentModel {
 public:
  /// Throws Error{unsupported} for encryption / filters outside the subset and
  /// Error{malformed} or Error{syntax} (with byte offsets) for broken files.
  static PdfDocumentModel load(std::string bytes);

  PdfDocumentModel(PdfDocumentModel&&) noexcept;
  PdfDocumentModel& operator=(PdfDocumentModel&&) noexcept;
  ~PdfDocumentModel();

  int page_count() const;
  const std::string& source_hash() const;
  const std::vector<std::string>& warnings() const;

  struct PageResult {
    Page page;
    std::vector<std::string> warnings;
  };
  /// `index` is 0-based. Thread-safe.
  PageResult parse_page(int index, const MergeOptions& options = {}) const;

 private:
  explicit PdfDocumentModel(std::unique_ptr<PdfFile> file);
  std::unique_ptr<PdfFile> file_;
};

ParseResult parse_pdf(std::string_view bytes, const ParseOptions& options = {});

/// Inflates zlib (RFC 1950) or raw deflate (RFC 1951) data.
std::string inflate(std::string_view data, std::size_t max_output = std::size_t{1} << 28);

}  // namespace ccs::pdf
