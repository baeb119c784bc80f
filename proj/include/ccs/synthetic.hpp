#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ccs/doc_model.hpp"
#include "ccs/features.hpp"
#include "ccs/pdf_writer.hpp"

namespace ccs {

/// Vertical band of the first page, as fractions of the page height measured
/// from the bottom edge.
struct PageBand {
  double lo = 0, hi = 0;
};

/// Layout template of a two-column journal. Every generated cell carries one
/// of the six preset labels.
struct TemplateSpec {
  double page_width = 612, page_height = 792;
  double margin = 54;
  double column_gap = 18;
  PageBand title_band{0.9, 0.95};   // Title lines, page 1 only
  PageBand author_band{0.84, 0.89};  // Author lines, page 1 only

  double title_size = 16;
  double author_size = 11;
  double abstract_size = 9;
  double subtitle_size = 10;
  double text_size = 10;
  double caption_size = 9;
  double picture_size = 7;
  double table_size = 8;

  double jitter = 1.5;  // max positional offset of a block, pt
  double subtitle_probability = 0.08;
  double figure_probability = 0.07;
  double table_probability = 0.07;
  double inline_style_probability = 0.04;  // italic/bold span inside a text line
  int min_doc_pages = 4, max_doc_pages = 10;
};

/// Throws invalid_argument for overlapping or out-of-page bands, non-positive
/// sizes, probabilities outside [0,1] and columns too narrow to hold text.
void validate_template(const TemplateSpec& spec);

const std::vector<std::string>& synthetic_label_names();

struct SyntheticCorpus {
  std::vector<ParsedDocument> documents;  // parsed back from `pdfs`
  std::vector<CellLabels> annotations;    // aligned with documents
  std::vector<std::string> pdfs;
  std::vector<std::vector<PdfPageSpec>> layouts;
  std::vector<std::vector<std::vector<std::string>>> snippet_labels;  // [doc][page][snippet]

  std::size_t page_count() const;
};

/// Documents of min..max pages until `n_pages` pages exist. Each cell of the
/// parsed documents is exactly one placed snippet with its ground-truth label.
SyntheticCorpus generate_synthetic_corpus(const TemplateSpec& spec, int n_pages, std::uint64_t seed);

}  // namespace ccs
