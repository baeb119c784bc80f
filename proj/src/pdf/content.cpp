#include <cmath>
#include <cstring>

#include "ccs/pdf_parse.hpp"
#include "objects.hpp"

namespace ccs::pdf {

namespace {

/// Affine map in PDF row-vector convention: [x y 1] * M.
struct Matrix {
  double a = 1, b = 0, c = 0, d = 1, e = 0, f = 0;

  static Matrix translate(double tx, double ty) { return {1, 0, 0, 1, tx, ty}; }

  Matrix operator*(const Matrix& m) const {
    return {a * m.a + b * m.c,       a * m.b + b * m.d,       c * m.a + d * m.c,
            c * m.b + d * m.d,       e * m.a + f * m.c + m.e, e * m.b + f * m.d + m.f};
  }
  Point apply(double x, double y) const { return {x * a + y * c + e, x * b + y * d + f}; }
};

struct TextState {
  double char_spacing = 0;
  double word_spacing = 0;
  double horizontal_scale = 1;
  double leading = 0;
  double rise = 0;
  double size = 0;
  const FontInfo* font = nullptr;
};

struct GraphicsState {
  Matrix ctm;
  TextState text;
};

constexpr std::size_t kMaxOperands = 64;
constexpr int kMaxFormDepth = 8;
constexpr std::size_t kMaxWarnings = 32;

class Interpreter {
 public:
  Interpreter(std::vector<GlyphRun>& runs, std::vector<std::string>* warnings)
      : runs_(runs), warnings_(warnings) {}

  void run(std::string_view stream, const Resources& resources, int depth) {
    Lexer lex(stream);
    std::vector<Object> operands;
    while (true) {
      Object tok;
      try {
        if (lex.at_end()) break;
        tok = lex.next(false);
      } catch (const Error& e) {
        warn(e.what());
        operands.clear();
        // Resynchronise on the next byte.
        lex.seek(lex.pos() + 1);
        continue;
      }
      const Keyword* op = tok.keyword();
      if (!op) {
        if (operands.size() >= kMaxOperands) operands.erase(operands.begin());
        operands.push_back(std::move(tok));
        continue;
      }
      if (op->value == "BI") {
        skip_inline_image(lex, stream);
      } else {
        execute(op->value, operands, resources, depth);
      }
      operands.clear();
    }
  }

  void finish() {
    if (in_text_) warn("unbalanced BT/ET: missing ET at end of stream");
  }

 private:
  void warn(const std::string& msg) {
    if (!warnings_) return;
    if (warning_count_ < kMaxWarnings) warnings_->push_back(msg);
    else if (warning_count_ == kMaxWarnings) warnings_->push_back("further content warnings suppressed");
    ++warning_count_;
  }

  static bool num(const std::vector<Object>& ops, std::size_t i, double& out) {
    if (i >= ops.size()) return false;
    const double* n = ops[i].number();
    if (!n || !std::isfinite(*n)) return false;
    out = *n;
    return true;
  }

  /// Reads the last `n` operands as numbers.
  static bool tail(const std::vector<Object>& ops, std::size_t n, double* out) {
    if (ops.size() < n) return false;
    std::size_t base = ops.size() - n;
    for (std::size_t i = 0; i < n; ++i)
      if (!num(ops, base + i, out[i])) return false;
    return true;
  }

  void execute(const std::string& op, const std::vector<Object>& ops, const Resources& res, int depth) {
    GraphicsState& gs = state_;
    TextState& ts = gs.text;
    double v[6];
    if (op == "q") {
      if (stack_.size() < 256) stack_.push_back(state_);
    } else if (op == "Q") {
      if (stack_.empty()) {
        warn("Q without matching q");
      } else {
        state_ = stack_.back();
        stack_.pop_back();
      }
    } else if (op == "cm") {
      if (tail(ops, 6, v)) gs.ctm = Matrix{v[0], v[1], v[2], v[3], v[4], v[5]} * gs.ctm;
    } else if (op == "BT") {
      if (in_text_) warn("unbalanced BT/ET: nested BT");
      in_text_ = true;
      ++text_object_;
      tm_ = tlm_ = Matrix{};
    } else if (op == "ET") {
      if (!in_text_) warn("unbalanced BT/ET: ET without BT");
      in_text_ = false;
    } else if (op == "Tf") {
      if (ops.size() >= 2 && ops[ops.size() - 2].name() && num(ops, ops.size() - 1, v[0])) {
        const std::string& name = ops[ops.size() - 2].name()->value;
        auto it = res.fonts.find(name);
        if (it == res.fonts.end()) {
          warn("missing font resource /" + name + "; using fallback widths");
          ts.font = &fallback_;
        } else {
          ts.font = &it->second;
        }
        ts.size = v[0];
      }
    } else if (op == "Tc") {
      if (tail(ops, 1, v)) ts.char_spacing = v[0];
    } else if (op == "Tw") {
      if (tail(ops, 1, v)) ts.word_spacing = v[0];
    } else if (op == "Tz") {
      if (tail(ops, 1, v)) ts.horizontal_scale = v[0] / 100.0;
    } else if (op == "TL") {
      if (tail(ops, 1, v)) ts.leading = v[0];
    } else if (op == "Ts") {
      if (tail(ops, 1, v)) ts.rise = v[0];
    } else if (op == "Td") {
      if (tail(ops, 2, v)) move_line(v[0], v[1]);
    } else if (op == "TD") {
      if (tail(ops, 2, v)) {
        ts.leading = -v[1];
        move_line(v[0], v[1]);
      }
    } else if (op == "Tm") {
      if (tail(ops, 6, v)) tm_ = tlm_ = Matrix{v[0], v[1], v[2], v[3], v[4], v[5]};
    } else if (op == "T*") {
      move_line(0, -ts.leading);
    } else if (op == "Tj") {
      if (!ops.empty() && ops.back().string()) show(ops.back().string()->bytes);
    } else if (op == "'") {
      move_line(0, -ts.leading);
      if (!ops.empty() && ops.back().string()) show(ops.back().string()->bytes);
    } else if (op == "\"") {
      if (ops.size() >= 3 && num(ops, ops.size() - 3, v[0]) && num(ops, ops.size() - 2, v[1])) {
        ts.word_spacing = v[0];
        ts.char_spacing = v[1];
      }
      move_line(0, -ts.leading);
      if (!ops.empty() && ops.back().string()) show(ops.back().string()->bytes);
    } else if (op == "TJ") {
      if (ops.empty() || !ops.back().array()) return;
      for (const auto& item : *ops.back().array()) {
        if (const String* s = item.string()) {
          show(s->bytes);
        } else if (const double* n = item.number(); n && std::isfinite(*n)) {
          double tx = -*n / 1000.0 * ts.size * ts.horizontal_scale;
          tm_ = Matrix::translate(tx, 0) * tm_;
        }
      }
    } else if (op == "Do") {
      if (ops.empty() || !ops.back().name()) return;
      auto it = res.forms.find(ops.back().name()->value);
      if (it == res.forms.end()) return;  // images and unknown XObjects
      if (depth >= kMaxFormDepth) {
        warn("form XObject nesting too deep");
        return;
      }
      const FormXObject& form = *it->second;
      GraphicsState saved = state_;
      bool saved_text = in_text_;
      Matrix saved_tm = tm_, saved_tlm = tlm_;
      state_.ctm = Matrix{form.matrix[0], form.matrix[1], form.matrix[2],
                          form.matrix[3], form.matrix[4], form.matrix[5]} * state_.ctm;
      std::size_t stack_depth = stack_.size();
      run(form.content, form.resources ? *form.resources : res, depth + 1);
      stack_.resize(std::min(stack_.size(), stack_depth));
      state_ = saved;
      in_text_ = saved_text;
      tm_ = saved_tm;
      tlm_ = saved_tlm;
    }
    // Everything else (paths, colours, images, marked content) is irrelevant
    // to text geometry and skipped.
  }

  void move_line(double tx, double ty) {
    tlm_ = Matrix::translate(tx, ty) * tlm_;
    tm_ = tlm_;
  }

  void show(const std::string& bytes) {
    const TextState& ts = state_.text;
    const FontInfo* font = ts.font;
    if (!font) {
      warn("text shown before any Tf; using fallback font");
      font = &fallback_;
    }
    if (!in_text_) warn("text-showing operator outside BT/ET");
    const std::size_t step = font->composite ? 2 : 1;
    if (bytes.size() < step) return;

    GlyphRun run;
    run.style = font->style;
    run.text_object = text_object_;
    const Matrix to_user = tm_ * state_.ctm;
    const double x_scale = std::hypot(to_user.a, to_user.b);
    const double y_scale = std::hypot(to_user.c, to_user.d);
    run.font_size = std::fabs(ts.size) * y_scale;
    const double eps = 1e-6 * std::max(x_scale, y_scale);
    run.rotated = std::fabs(to_user.b) > eps || std::fabs(to_user.c) > eps || to_user.a <= 0 ||
                  to_user.d <= 0 || ts.size < 0;
    run.start = to_user.apply(0, ts.rise);

    Point glyph_end = run.start;
    for (std::size_t i = 0; i + step <= bytes.size(); i += step) {
      unsigned code = static_cast<unsigned char>(bytes[i]);
      if (step == 2) code = (code << 8) | static_cast<unsigned char>(bytes[i + 1]);
      double w0 = font->advance(code);
      const Matrix glyph = tm_ * state_.ctm;
      glyph_end = glyph.apply(w0 * ts.size * ts.horizontal_scale, ts.rise);
      run.text += font->unicode(code);
      double tx = (w0 * ts.size + ts.char_spacing + (step == 1 && code == 32 ? ts.word_spacing : 0)) *
                  ts.horizontal_scale;
      run.advances.push_back(tx * x_scale);
      tm_ = Matrix::translate(tx, 0) * tm_;
    }
    run.end = glyph_end;

    if (!std::isfinite(run.start.x) || !std::isfinite(run.start.y) || !std::isfinite(run.end.x) ||
        !std::isfinite(run.end.y) || !std::isfinite(run.font_size)) {
      warn("non-finite text position dropped");
      return;
    }
    if (!run.rotated) {
      run.bbox = {std::min(run.start.x, run.end.x), run.start.y, std::max(run.start.x, run.end.x),
                  run.start.y + run.font_size};
    } else {
      double ux = 0, uy = 0;
      if (y_scale > 0) {
        ux = to_user.c / y_scale * ts.size;
        uy = to_user.d / y_scale * ts.size;
      }
      Point pts[4] = {run.start, run.end, {run.start.x + ux, run.start.y + uy}, {run.end.x + ux, run.end.y + uy}};
      run.bbox = {pts[0].x, pts[0].y, pts[0].x, pts[0].y};
      for (const auto& p : pts) run.bbox = united(run.bbox, {p.x, p.y, p.x, p.y});
    }
    runs_.push_back(std::move(run));
  }

  void skip_inline_image(Lexer& lex, std::string_view stream) {
    // Dictionary entries up to ID, then binary data terminated by "EI".
    try {
      for (int guard = 0; guard < 4096; ++guard) {
        if (lex.at_end()) return;
        Object o = lex.next(false);
        if (o.keyword() && o.keyword()->value == "ID") break;
      }
    } catch (const Error&) {
      warn("malformed inline image header");
    }
    std::size_t pos = lex.pos() + 1;
    while (pos < stream.size()) {
      std::size_t ei = stream.find("EI", pos);
      if (ei == std::string_view::npos) break;
      bool before = ei > 0 && Lexer::is_whitespace(static_cast<unsigned char>(stream[ei - 1]));
      bool after = ei + 2 >= stream.size() || Lexer::is_whitespace(static_cast<unsigned char>(stream[ei + 2]));
      if (before && after) {
        lex.seek(ei + 2);
        return;
      }
      pos = ei + 2;
    }
    warn("inline image without EI");
    lex.seek(stream.size());
  }

  std::vector<GlyphRun>& runs_;
  std::vector<std::string>* warnings_;
  std::size_t warning_count_ = 0;
  GraphicsState state_;
  std::vector<GraphicsState> stack_;
  Matrix tm_, tlm_;
  bool in_text_ = false;
  int text_object_ = 0;
  FontInfo fallback_ = FontInfo::fallback();
};

}  // namespace

std::vector<GlyphRun> interpret_content(std::string_view stream, const Resources& resources,
                                        std::vector<std::string>* warnings) {
  std::vector<GlyphRun> runs;
  Interpreter interp(runs, warnings);
  interp.run(stream, resources, 0);
  interp.finish();
  return runs;
}

}  // namespace ccs::pdf
