#include <atomic>
#include <thread>

#include "ccs/pdf_parse.hpp"
#include "file.hpp"

namespace ccs::pdf {

PdfDocumentModel::PdfDocumentModel(std::unique_ptr<PdfFile> file) : file_(std::move(file)) {}
PdfDocumentModel::PdfDocumentModel(PdfDocumentModel&&) noexcept = default;
PdfDocumentModel& PdfDocumentModel::operator=(PdfDocumentModel&&) noexcept = default;
PdfDocumentModel::~PdfDocumentModel() = default;

PdfDocumentModel PdfDocumentModel::load(std::string bytes) {
  return PdfDocumentModel(std::make_unique<PdfFile>(std::move(bytes)));
}

int PdfDocumentModel::page_count() const { return static_cast<int>(file_->pages().size()); }
const std::string& PdfDocumentModel::source_hash() const { return file_->source_hash(); }
const std::vector<std::string>& PdfDocumentModel::warnings() const { return file_->warnings(); }

PdfDocumentModel::PageResult PdfDocumentModel::parse_page(int index, const MergeOptions& options) const {
  if (index < 0 || index >= page_count())
    throw Error(Errc::not_found, "page index " + std::to_string(index) + " out of range");
  const PageNode& node = file_->pages()[static_cast<std::size_t>(index)];
  PageResult out;
  out.page.number = index + 1;
  out.page.width = quantize(node.media.width());
  out.page.height = quantize(node.media.height());
  if (node.rotate % 360 != 0)
    out.warnings.push_back("/Rotate " + std::to_string(node.rotate) + " ignored; cells are in unrotated page space");

  Resources resources = file_->build_resources(node.resources.get(), out.warnings);
  std::string content = file_->page_content(node);
  std::vector<GlyphRun> runs = interpret_content(content, resources, &out.warnings);
  if (node.media.x0 != 0 || node.media.y0 != 0) {
    for (auto& r : runs) {
      r.bbox = translated(r.bbox, -node.media.x0, -node.media.y0);
      r.start = {r.start.x - node.media.x0, r.start.y - node.media.y0};
      r.end = {r.end.x - node.media.x0, r.end.y - node.media.y0};
    }
  }
  out.page.cells = merge_glyph_runs(runs, out.page, options, &out.warnings);
  return out;
}

ParseResult parse_pdf(std::string_view bytes, const ParseOptions& options) {
  PdfDocumentModel model = PdfDocumentModel::load(std::string(bytes));
  const int n = model.page_count();
  std::vector<PdfDocumentModel::PageResult> pages(static_cast<std::size_t>(n));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));

  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        pages[static_cast<std::size_t>(i)] = model.parse_page(i, options.merge);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  const int workers = std::max(1, std::min(options.workers, n));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    for (int w = 0; w < workers; ++w) threads.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  ParseResult result;
  ParsedDocument& doc = result.document;
  doc.source_hash = model.source_hash();
  doc.doc_id = options.doc_id.empty() ? doc.source_hash.substr(0, 16) : options.doc_id;
  doc.total_pages = n;
  for (const auto& w : model.warnings()) result.warnings.push_back({0, w});
  for (auto& p : pages) {
    for (auto& w : p.warnings) result.warnings.push_back({p.page.number, std::move(w)});
    doc.pages.push_back(std::move(p.page));
  }
  return result;
}

}  // namespace ccs::pdf
