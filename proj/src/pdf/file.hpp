#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "ccs/pdf_parse.hpp"
#include "objects.hpp"

namespace ccs::pdf {

struct PageNode {
  std::shared_ptr<const Dict> dict;
  std::shared_ptr<const Dict> resources;  // inherited if absent on the leaf
  BBox media;
  int rotate = 0;
};

/// Whole-file object model: every object referenced by the cross-reference
/// chain is parsed up front so the model is read-only afterwards.
class PdfFile {
 public:
  explicit PdfFile(std::string bytes);

  const Object& resolve(const Object& o) const;
  const Dict* resolve_dict(const Object* o) const;
  std::optional<double> resolve_number(const Object* o) const;

  /// Applies the stream's filter chain. Only Flate (with PNG predictors) is
  /// supported.
  std::string decode(const Stream& s) const;

  const std::vector<PageNode>& pages() const { return pages_; }
  const std::string& source_hash() const { return source_hash_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  Resources build_resources(const Dict* resources, std::vector<std::string>& warnings,
                            int depth = 0) const;
  FontInfo build_font(const Dict& font, std::vector<std::string>& warnings) const;
  std::string page_content(const PageNode& page) const;

 private:
  struct XrefEntry {
    int type = 0;  // 1: offset, 2: in object stream
    std::size_t offset = 0;
    std::uint32_t stream_num = 0;
    std::uint32_t index = 0;
  };

  void read_xref_chain(std::size_t start);
  std::size_t read_xref_table(std::size_t offset, Dict& trailer);
  void read_xref_stream(std::size_t offset, Dict& trailer);
  void reconstruct(const std::string& reason);
  /// Parses "n g obj ... endobj" at offset; returns the object number.
  std::uint32_t parse_indirect(std::size_t offset, Object& out) const;
  void load_objects();
  void load_object_stream(std::uint32_t num);
  void collect_pages();

  std::string bytes_;
  std::size_t base_ = 0;  // offset of "%PDF-"
  std::string source_hash_;
  std::unordered_map<std::uint32_t, XrefEntry> xref_;
  std::unordered_map<std::uint32_t, Object> objects_;
  Dict trailer_;
  std::vector<PageNode> pages_;
  std::vector<std::string> warnings_;
};

}  // namespace ccs::pdf
