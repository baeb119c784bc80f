#include "file.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <functional>
#include <optional>
#include <set>

#include "filters.hpp"
#include "fonts.hpp"

namespace ccs::pdf {

namespace {

[[noreturn]] void malformed(const std::string& what, std::size_t offset) {
  throw Error(Errc::malformed, what + " at byte offset " + std::to_string(offset));
}

bool is_boundary(std::string_view data, std::size_t pos) {
  if (pos >= data.size()) return true;
  auto c = static_cast<unsigned char>(data[pos]);
  return Lexer::is_whitespace(c) || Lexer::is_delimiter(c);
}

const Object kNull;

int int_or(const std::optional<double>& v, int fallback) {
  if (!v || !std::isfinite(*v) || std::fabs(*v) > 1e9) return fallback;
  return static_cast<int>(*v);
}

}  // namespace

PdfFile::PdfFile(std::string bytes) : bytes_(std::move(bytes)) {
  source_hash_ = content_digest(bytes_);
  std::string_view head(bytes_.data(), std::min<std::size_t>(bytes_.size(), 1024));
  std::size_t hdr = head.find("%PDF-");
  if (hdr == std::string_view::npos) malformed("missing %PDF- header", 0);
  base_ = hdr;

  try {
    std::size_t sx = bytes_.rfind("startxref");
    if (sx == std::string::npos) malformed("missing startxref", bytes_.size());
    Lexer lex(bytes_, sx + 9);
    Object off = lex.next(false);
    if (!off.number() || *off.number() < 0 || base_ + *off.number() >= bytes_.size())
      malformed("startxref points outside the file", sx);
    read_xref_chain(base_ + static_cast<std::size_t>(*off.number()));
    if (!find(trailer_, "Root")) malformed("trailer has no /Root", sx);
    load_objects();
  } catch (const Error& e) {
    if (e.code() == Errc::unsupported) throw;
    reconstruct(e.what());
  }

  if (find(trailer_, "Encrypt")) throw Error(Errc::unsupported, "encryption");
  collect_pages();
}

const Object& PdfFile::resolve(const Object& o) const {
  const Object* cur = &o;
  for (int hops = 0; hops < 16 && cur->ref(); ++hops) {
    auto it = objects_.find(cur->ref()->num);
    if (it == objects_.end()) return kNull;
    cur = &it->second;
  }
  return cur->ref() ? kNull : *cur;
}

const Dict* PdfFile::resolve_dict(const Object* o) const {
  if (!o) return nullptr;
  const Object& r = resolve(*o);
  if (const Dict* d = r.dict()) return d;
  if (const Stream* s = r.stream()) return s->dict.get();
  return nullptr;
}

std::optional<double> PdfFile::resolve_number(const Object* o) const {
  if (!o) return std::nullopt;
  const double* n = resolve(*o).number();
  if (!n) return std::nullopt;
  return *n;
}

std::uint32_t PdfFile::parse_indirect(std::size_t offset, Object& out) const {
  Lexer lex(bytes_, offset);
  Object num = lex.next(false);
  Object gen = lex.next(false);
  Object kw = lex.next(false);
  if (!num.number() || !gen.number() || !kw.keyword() || kw.keyword()->value != "obj")
    malformed("expected 'n g obj'", offset);
  std::uint32_t id = to_u32(*num.number());
  Object value = lex.next(true);
  lex.skip_whitespace();
  std::size_t pos = lex.pos();
  if (bytes_.compare(pos, 6, "stream") == 0 && value.dict()) {
    pos += 6;
    if (pos < bytes_.size() && bytes_[pos] == '\r') ++pos;
    if (pos < bytes_.size() && bytes_[pos] == '\n') ++pos;
    std::shared_ptr<const Dict> dict = std::get<std::shared_ptr<const Dict>>(value.v);
    std::size_t end = std::string::npos;
    if (const Object* len = find(*dict, "Length"); len && len->number()) {
      double l = *len->number();
      if (l >= 0 && l <= static_cast<double>(bytes_.size()) && pos + static_cast<std::size_t>(l) <= bytes_.size()) {
        std::size_t cand = pos + static_cast<std::size_t>(l);
        Lexer after(bytes_, cand);
        after.skip_whitespace();
        if (bytes_.compare(after.pos(), 9, "endstream") == 0) end = cand;
      }
    }
    if (end == std::string::npos) {
      std::size_t es = bytes_.find("endstream", pos);
      if (es == std::string::npos) malformed("unterminated stream", pos);
      end = es;
      if (end > pos && bytes_[end - 1] == '\n') --end;
      if (end > pos && bytes_[end - 1] == '\r') --end;
    }
    out = std::make_shared<const Stream>(Stream{dict, bytes_.substr(pos, end - pos)});
  } else {
    out = std::move(value);
  }
  return id;
}

void PdfFile::read_xref_chain(std::size_t start) {
  std::set<std::size_t> visited;
  std::size_t offset = start;
  for (int rounds = 0; rounds < 1024; ++rounds) {
    if (!visited.insert(offset).second) break;
    Dict trailer;
    Lexer lex(bytes_, offset);
    lex.skip_whitespace();
    if (bytes_.compare(lex.pos(), 4, "xref") == 0) {
      read_xref_table(lex.pos() + 4, trailer);
      if (auto stm = find(trailer, "XRefStm"); stm && stm->number() && *stm->number() >= 0 && *stm->number() < 1e15) {
        Dict ignored;
        std::size_t so = base_ + static_cast<std::size_t>(*stm->number());
        if (so < bytes_.size()) read_xref_stream(so, ignored);
      }
    } else {
      read_xref_stream(offset, trailer);
    }
    for (auto& [k, v] : trailer)
      if (k != "Prev" && k != "XRefStm" && !trailer_.count(k)) trailer_.emplace(k, v);
    const Object* prev = find(trailer, "Prev");
    if (!prev || !prev->number()) break;
    double p = *prev->number();
    if (!(p >= 0) || base_ + p >= bytes_.size()) malformed("/Prev points outside the file", offset);
    offset = base_ + static_cast<std::size_t>(p);
  }
}

std::size_t PdfFile::read_xref_table(std::size_t offset, Dict& trailer) {
  Lexer lex(bytes_, offset);
  for (;;) {
    Object first = lex.next(false);
    if (first.keyword() && first.keyword()->value == "trailer") {
      Object t = lex.next(true);
      if (!t.dict()) malformed("trailer is not a dictionary", lex.pos());
      trailer = *t.dict();
      return lex.pos();
    }
    Object count = lex.next(false);
    if (!first.number() || !count.number() || *count.number() < 0 || *count.number() > 1e7)
      malformed("bad xref subsection header", lex.pos());
    auto start = to_u32(*first.number());
    auto n = to_u32(*count.number());
    for (std::uint32_t i = 0; i < n; ++i) {
      Object off = lex.next(false);
      Object gen = lex.next(false);
      Object kind = lex.next(false);
      if (!off.number() || !gen.number() || !kind.keyword())
        malformed("bad xref entry", lex.pos());
      std::uint32_t num = start + i;
      if (xref_.count(num)) continue;  // newer section already defined it
      if (kind.keyword()->value == "n" && *off.number() > 0 && *off.number() < 1e15) {
        xref_[num] = {1, static_cast<std::size_t>(*off.number()), 0, 0};
      } else {
        xref_[num] = {0, 0, 0, 0};
      }
    }
  }
}

void PdfFile::read_xref_stream(std::size_t offset, Dict& trailer) {
  Object obj;
  parse_indirect(offset, obj);
  const Stream* s = obj.stream();
  if (!s || !name_is(find(*s->dict, "Type"), "XRef")) malformed("expected xref table or stream", offset);
  trailer = *s->dict;
  std::string data = decode(*s);
  const Array* w = resolve(find(*s->dict, "W") ? *find(*s->dict, "W") : kNull).array();
  if (!w || w->size() != 3) malformed("xref stream without /W", offset);
  int widths[3];
  for (int i = 0; i < 3; ++i) {
    const double* v = (*w)[i].number();
    if (!v || *v < 0 || *v > 8) malformed("bad /W entry", offset);
    widths[i] = static_cast<int>(*v);
  }
  const std::size_t entry = static_cast<std::size_t>(widths[0] + widths[1] + widths[2]);
  if (entry == 0) malformed("empty xref stream entries", offset);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> sections;
  if (const Array* idx = resolve(find(*s->dict, "Index") ? *find(*s->dict, "Index") : kNull).array()) {
    for (std::size_t i = 0; i + 1 < idx->size(); i += 2) {
      const double* a = (*idx)[i].number();
      const double* b = (*idx)[i + 1].number();
      if (a && b) sections.emplace_back(to_u32(*a), to_u32(*b));
    }
  } else {
    sections.emplace_back(0, to_u32(resolve_number(find(*s->dict, "Size")).value_or(0)));
  }
  std::size_t pos = 0;
  auto field = [&](int width, std::uint64_t fallback) -> std::uint64_t {
    if (width == 0) return fallback;
    std::uint64_t v = 0;
    for (int k = 0; k < width; ++k) v = (v << 8) | static_cast<unsigned char>(data[pos++]);
    return v;
  };
  for (auto [start, count] : sections) {
    for (std::uint32_t i = 0; i < count; ++i) {
      if (pos + entry > data.size()) return;
      auto type = field(widths[0], 1);
      auto f2 = field(widths[1], 0);
      auto f3 = field(widths[2], 0);
      std::uint32_t num = start + i;
      if (xref_.count(num)) continue;
      if (type == 1 && f2 > 0) xref_[num] = {1, static_cast<std::size_t>(f2), 0, 0};
      else if (type == 2) xref_[num] = {2, 0, static_cast<std::uint32_t>(f2), static_cast<std::uint32_t>(f3)};
      else xref_[num] = {0, 0, 0, 0};
    }
  }
}

void PdfFile::load_objects() {
  std::vector<std::uint32_t> streams;
  for (const auto& [num, e] : xref_) {
    if (e.type == 1) {
      Object o;
      std::size_t at = base_ + e.offset;
      if (at >= bytes_.size()) malformed("xref entry for object " + std::to_string(num) + " points outside the file", at);
      std::uint32_t got = parse_indirect(at, o);
      if (got != num) malformed("xref entry for object " + std::to_string(num) + " points at object " + std::to_string(got), at);
      objects_.emplace(num, std::move(o));
    } else if (e.type == 2) {
      streams.push_back(e.stream_num);
    }
  }
  std::sort(streams.begin(), streams.end());
  streams.erase(std::unique(streams.begin(), streams.end()), streams.end());
  for (auto s : streams) load_object_stream(s);
}

void PdfFile::load_object_stream(std::uint32_t num) {
  auto it = objects_.find(num);
  if (it == objects_.end() || !it->second.stream()) {
    warnings_.push_back("object stream " + std::to_string(num) + " missing");
    return;
  }
  const Stream& s = *it->second.stream();
  std::string data;
  try {
    data = decode(s);
  } catch (const Error& e) {
    if (e.code() == Errc::unsupported) throw;
    warnings_.push_back("object stream " + std::to_string(num) + ": " + e.what());
    return;
  }
  int n = int_or(resolve_number(find(*s.dict, "N")), 0);
  int first = int_or(resolve_number(find(*s.dict, "First")), 0);
  if (n < 0 || first < 0 || static_cast<std::size_t>(first) > data.size()) return;
  Lexer header(data);
  std::vector<std::pair<std::uint32_t, std::size_t>> entries;
  try {
    for (int i = 0; i < n; ++i) {
      Object on = header.next(false);
      Object off = header.next(false);
      if (!on.number() || !off.number()) break;
      entries.emplace_back(to_u32(*on.number()), static_cast<std::size_t>(to_u32(*off.number())));
    }
  } catch (const Error&) {
  }
  for (auto [objnum, off] : entries) {
    auto x = xref_.find(objnum);
    // Only objects the xref says live here (or any, when reconstructing).
    if (x != xref_.end() && !(x->second.type == 2 && x->second.stream_num == num)) continue;
    if (objects_.count(objnum)) continue;
    std::size_t at = static_cast<std::size_t>(first) + off;
    if (at >= data.size()) continue;
    try {
      Lexer lex(data, at);
      objects_.emplace(objnum, lex.next(true));
    } catch (const Error&) {
      warnings_.push_back("object " + std::to_string(objnum) + " in stream " + std::to_string(num) + " unreadable");
    }
  }
}

void PdfFile::reconstruct(const std::string& reason) {
  warnings_.push_back("cross-reference damaged (" + reason + "); rebuilt by scanning");
  xref_.clear();
  objects_.clear();
  trailer_.clear();
  std::string_view data(bytes_);
  std::size_t pos = base_;
  while ((pos = data.find("obj", pos)) != std::string_view::npos) {
    std::size_t kw = pos;
    pos += 3;
    if (!is_boundary(data, pos) || kw == 0) continue;
    // Walk back over "num ws gen ws".
    std::size_t p = kw;
    auto skip_ws = [&] { while (p > 0 && Lexer::is_whitespace(data[p - 1])) --p; };
    auto skip_digits = [&] {
      std::size_t end = p;
      while (p > 0 && std::isdigit(static_cast<unsigned char>(data[p - 1]))) --p;
      return end - p;
    };
    skip_ws();
    if (p == kw || skip_digits() == 0) continue;
    std::size_t before = p;
    skip_ws();
    if (p == before || skip_digits() == 0) continue;
    if (p > 0 && !Lexer::is_whitespace(data[p - 1]) && !Lexer::is_delimiter(data[p - 1])) continue;
    Object o;
    try {
      std::uint32_t num = parse_indirect(p, o);
      if (const Stream* s = o.stream(); s && name_is(find(*s->dict, "Type"), "XRef")) {
        for (auto& [k, v] : *s->dict)
          if (k == "Root" || k == "Info" || k == "Encrypt" || k == "ID") trailer_.insert_or_assign(k, v);
      }
      objects_.insert_or_assign(num, std::move(o));
    } catch (const Error&) {
    }
  }
  for (std::size_t t = data.find("trailer", base_); t != std::string_view::npos; t = data.find("trailer", t + 7)) {
    try {
      Lexer lex(data, t + 7);
      Object d = lex.next(true);
      if (d.dict())
        for (auto& [k, v] : *d.dict())
          if (k != "Prev" && k != "Size" && k != "XRefStm") trailer_.insert_or_assign(k, v);
    } catch (const Error&) {
    }
  }
  std::vector<std::uint32_t> objstms;
  for (const auto& [num, o] : objects_)
    if (const Stream* s = o.stream(); s && name_is(find(*s->dict, "Type"), "ObjStm")) objstms.push_back(num);
  std::sort(objstms.begin(), objstms.end());
  for (auto n : objstms) load_object_stream(n);

  if (!find(trailer_, "Root")) {
    // Last resort: any catalog object.
    for (const auto& [num, o] : objects_)
      if (const Dict* d = o.dict(); d && name_is(find(*d, "Type"), "Catalog")) {
        trailer_.insert_or_assign("Root", Ref{num, 0});
        break;
      }
  }
  if (!find(trailer_, "Root")) malformed("no document catalog found (" + reason + ")", 0);
}

std::string PdfFile::decode(const Stream& s) const {
  const Object* filter_obj = find(*s.dict, "Filter");
  const Object* parms_obj = find(*s.dict, "DecodeParms");
  std::vector<std::string> filters;
  std::vector<const Dict*> parms;
  if (filter_obj) {
    const Object& f = resolve(*filter_obj);
    if (const Name* n = f.name()) {
      filters.push_back(n->value);
    } else if (const Array* a = f.array()) {
      for (const auto& e : *a)
        if (const Name* n = resolve(e).name()) filters.push_back(n->value);
    }
  }
  if (parms_obj) {
    const Object& p = resolve(*parms_obj);
    if (const Dict* d = p.dict()) {
      parms.push_back(d);
    } else if (const Array* a = p.array()) {
      for (const auto& e : *a) parms.push_back(resolve(e).dict());
    }
  }
  std::string data = s.raw;
  for (std::size_t i = 0; i < filters.size(); ++i) {
    const std::string& f = filters[i];
    if (f != "FlateDecode" && f != "Fl") throw Error(Errc::unsupported, "filter /" + f);
    data = inflate(data);
    if (i < parms.size() && parms[i]) {
      PredictorParams pp;
      pp.predictor = int_or(resolve_number(find(*parms[i], "Predictor")), 1);
      pp.colors = int_or(resolve_number(find(*parms[i], "Colors")), 1);
      pp.bits = int_or(resolve_number(find(*parms[i], "BitsPerComponent")), 8);
      pp.columns = int_or(resolve_number(find(*parms[i], "Columns")), 1);
      data = apply_predictor(std::move(data), pp);
    }
  }
  return data;
}

void PdfFile::collect_pages() {
  const Dict* root = resolve_dict(find(trailer_, "Root"));
  if (!root) malformed("document catalog is missing", 0);
  const Object* pages = find(*root, "Pages");
  if (!pages) malformed("catalog has no /Pages", 0);

  std::set<const Dict*> visited;
  struct Inherited {
    std::shared_ptr<const Dict> resources;
    std::optional<BBox> media;
    int rotate = 0;
  };
  auto read_box = [&](const Dict& d) -> std::optional<BBox> {
    const Object* mb = find(d, "MediaBox");
    if (!mb) return std::nullopt;
    const Array* a = resolve(*mb).array();
    if (!a || a->size() != 4) return std::nullopt;
    double v[4];
    for (int i = 0; i < 4; ++i) {
      auto n = resolve_number(&(*a)[i]);
      if (!n || !std::isfinite(*n)) return std::nullopt;
      v[i] = *n;
    }
    BBox b{std::min(v[0], v[2]), std::min(v[1], v[3]), std::max(v[0], v[2]), std::max(v[1], v[3])};
    if (b.width() <= 0 || b.height() <= 0) return std::nullopt;
    return b;
  };

  std::function<void(const Object&, Inherited, int)> walk = [&](const Object& node, Inherited inh, int depth) {
    if (depth > 64) malformed("page tree too deep", 0);
    const Object& r = resolve(node);
    const Dict* d = r.dict();
    if (!d || !visited.insert(d).second) return;
    if (const Object* res = find(*d, "Resources")) {
      const Object& rr = resolve(*res);
      if (auto p = std::get_if<std::shared_ptr<const Dict>>(&rr.v)) inh.resources = *p;
    }
    if (auto box = read_box(*d)) inh.media = box;
    if (auto rot = resolve_number(find(*d, "Rotate"))) inh.rotate = int_or(rot, 0);
    const Object* kids = find(*d, "Kids");
    if (kids && !name_is(find(*d, "Type"), "Page")) {
      if (const Array* a = resolve(*kids).array())
        for (const auto& k : *a) walk(k, inh, depth + 1);
      return;
    }
    PageNode page;
    page.dict = std::get<std::shared_ptr<const Dict>>(r.v);
    page.resources = inh.resources;
    if (inh.media) {
      page.media = *inh.media;
    } else {
      page.media = {0, 0, 612, 792};
      warnings_.push_back("page " + std::to_string(pages_.size() + 1) + " has no usable /MediaBox; assuming US Letter");
    }
    page.rotate = inh.rotate;
    pages_.push_back(std::move(page));
  };
  walk(*pages, Inherited{}, 0);
}

std::string PdfFile::page_content(const PageNode& page) const {
  const Object* contents = find(*page.dict, "Contents");
  if (!contents) return {};
  const Object& c = resolve(*contents);
  if (const Stream* s = c.stream()) return decode(*s);
  std::string out;
  if (const Array* a = c.array()) {
    for (const auto& part : *a) {
      if (const Stream* s = resolve(part).stream()) {
        out += decode(*s);
        out.push_back('\n');
      }
    }
  }
  return out;
}

FontInfo PdfFile::build_font(const Dict& font, std::vector<std::string>& warnings) const {
  FontInfo info;
  const Object& subtype = resolve(find(font, "Subtype") ? *find(font, "Subtype") : kNull);
  std::string sub = subtype.name() ? subtype.name()->value : "";
  if (const Name* bf = resolve(find(font, "BaseFont") ? *find(font, "BaseFont") : kNull).name())
    info.base_font = bf->value;

  const Dict* descriptor = resolve_dict(find(font, "FontDescriptor"));
  if (sub == "Type0") {
    info.composite = true;
    if (const Array* desc = resolve(find(font, "DescendantFonts") ? *find(font, "DescendantFonts") : kNull).array();
        desc && !desc->empty()) {
      if (const Dict* cid = resolve_dict(&(*desc)[0])) descriptor = resolve_dict(find(*cid, "FontDescriptor"));
    }
    warnings.push_back("composite font " + info.base_font + ": glyph widths fall back to 0.5em");
  } else {
    info.first_char = int_or(resolve_number(find(font, "FirstChar")), 0);
    double scale = 1.0;
    if (sub == "Type3") {
      if (const Array* fm = resolve(find(font, "FontMatrix") ? *find(font, "FontMatrix") : kNull).array();
          fm && !fm->empty())
        scale = resolve_number(&(*fm)[0]).value_or(0.001) * 1000.0;
    }
    if (const Array* w = resolve(find(font, "Widths") ? *find(font, "Widths") : kNull).array()) {
      info.widths.reserve(w->size());
      for (const auto& e : *w) {
        double v = resolve_number(&e).value_or(0) * scale;
        info.widths.push_back(std::isfinite(v) ? v : 0);
      }
    } else {
      warnings.push_back("font " + info.base_font + " has no /Widths; using 0.5em");
    }
  }

  long flags = 0;
  double weight = 0;
  std::string descriptor_name;
  if (descriptor) {
    flags = static_cast<long>(int_or(resolve_number(find(*descriptor, "Flags")), 0));
    weight = resolve_number(find(*descriptor, "FontWeight")).value_or(0);
    if (auto mw = resolve_number(find(*descriptor, "MissingWidth")); mw && *mw > 0 && std::isfinite(*mw))
      info.missing_width = *mw;
    if (const Name* fnm = resolve(find(*descriptor, "FontName") ? *find(*descriptor, "FontName") : kNull).name())
      descriptor_name = fnm->value;
  }
  info.style = infer_style(info.base_font + " " + descriptor_name, flags, weight);

  if (!info.composite) {
    constexpr long kSymbolic = 1L << 2;
    BaseEncoding base = (sub == "TrueType" && !(flags & kSymbolic)) ? BaseEncoding::win_ansi : BaseEncoding::standard;
    const Object& enc = resolve(find(font, "Encoding") ? *find(font, "Encoding") : kNull);
    const Dict* enc_dict = enc.dict();
    const Name* enc_name = enc.name();
    if (enc_dict) {
      const Object& be = resolve(find(*enc_dict, "BaseEncoding") ? *find(*enc_dict, "BaseEncoding") : kNull);
      enc_name = be.name();
    }
    if (enc_name) {
      if (enc_name->value == "WinAnsiEncoding") base = BaseEncoding::win_ansi;
      else if (enc_name->value == "MacRomanEncoding") base = BaseEncoding::mac_roman;
      else if (enc_name->value == "StandardEncoding") base = BaseEncoding::standard;
    }
    info.encoding = base_encoding(base);
    if (enc_dict) {
      if (const Array* diffs = resolve(find(*enc_dict, "Differences") ? *find(*enc_dict, "Differences") : kNull).array()) {
        int code = 0;
        for (const auto& e : *diffs) {
          const Object& r = resolve(e);
          if (const double* n = r.number()) {
            code = (*n >= 0 && *n < 256) ? static_cast<int>(*n) : 256;
          } else if (const Name* g = r.name()) {
            if (code >= 0 && code < 256) {
              std::string u = glyph_name_to_utf8(g->value);
              info.encoding[code] = u.empty() ? std::string("\xEF\xBF\xBD") : u;
            }
            ++code;
          }
        }
      }
    }
  }

  if (const Object* tu = find(font, "ToUnicode")) {
    if (const Stream* s = resolve(*tu).stream()) {
      try {
        info.to_unicode = parse_to_unicode(decode(*s));
      } catch (const Error& e) {
        warnings.push_back("font " + info.base_font + ": unreadable ToUnicode (" + e.what() + ")");
      }
    }
  }
  return info;
}

Resources PdfFile::build_resources(const Dict* res, std::vector<std::string>& warnings, int depth) const {
  Resources out;
  if (!res) return out;
  if (const Dict* fonts = resolve_dict(find(*res, "Font"))) {
    for (const auto& [name, ref] : *fonts) {
      if (const Dict* fd = resolve_dict(&ref)) out.fonts.emplace(name, build_font(*fd, warnings));
      else warnings.push_back("font resource /" + name + " does not resolve");
    }
  }
  if (const Dict* xobjects = resolve_dict(find(*res, "XObject"))) {
    for (const auto& [name, ref] : *xobjects) {
      const Stream* s = resolve(ref).stream();
      if (!s || !name_is(find(*s->dict, "Subtype"), "Form")) continue;
      auto form = std::make_shared<FormXObject>();
      try {
        form->content = decode(*s);
      } catch (const Error& e) {
        warnings.push_back("form XObject /" + name + " skipped: " + e.what());
        continue;
      }
      if (const Array* m = resolve(find(*s->dict, "Matrix") ? *find(*s->dict, "Matrix") : kNull).array();
          m && m->size() == 6) {
        for (int i = 0; i < 6; ++i) form->matrix[i] = resolve_number(&(*m)[i]).value_or(i == 0 || i == 3 ? 1 : 0);
      }
      if (depth < 4) {
        if (const Dict* fr = resolve_dict(find(*s->dict, "Resources")))
          form->resources = std::make_shared<Resources>(build_resources(fr, warnings, depth + 1));
      }
      out.forms.emplace(name, std::move(form));
    }
  }
  return out;
}

}  // namespace ccs::pdf
