#include <zlib.h>

#include <algorithm>
#include <cstdlib>
#include <cstring>

#include "ccs/pdf_parse.hpp"
#include "filters.hpp"

namespace ccs::pdf {

namespace {

std::string run_inflate(std::string_view data, int window_bits, std::size_t max_output, bool& ok) {
  ok = false;
  z_stream zs;
  std::memset(&zs, 0, sizeof zs);
  if (inflateInit2(&zs, window_bits) != Z_OK) return {};
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  std::string out;
  char buf[16384];
  int rc = Z_OK;
  while (rc == Z_OK) {
    zs.next_out = reinterpret_cast<Bytef*>(buf);
    zs.avail_out = sizeof buf;
    rc = ::inflate(&zs, Z_NO_FLUSH);
    out.append(buf, sizeof buf - zs.avail_out);
    if (out.size() > max_output) {
      inflateEnd(&zs);
      throw Error(Errc::unsupported, "decompressed stream exceeds size limit");
    }
    if (rc == Z_BUF_ERROR && zs.avail_in == 0) break;  // truncated input
  }
  inflateEnd(&zs);
  ok = rc == Z_STREAM_END || (rc == Z_BUF_ERROR && !out.empty());
  return out;
}

}  // namespace

std::string inflate(std::string_view data, std::size_t max_output) {
  bool ok = false;
  std::string out = run_inflate(data, 15, max_output, ok);
  if (ok) return out;
  std::string raw = run_inflate(data, -15, max_output, ok);
  if (ok) return raw;
  if (!out.empty()) return out;  // damaged tail: keep the decoded prefix
  throw Error(Errc::malformed, "corrupt Flate data");
}

std::string apply_predictor(std::string data, const PredictorParams& p) {
  if (p.predictor <= 1) return data;
  if (p.predictor == 2) throw Error(Errc::unsupported, "filter: TIFF predictor");
  if (p.predictor < 10) throw Error(Errc::unsupported, "filter: predictor " + std::to_string(p.predictor));
  if (p.colors < 1 || p.colors > 32 || p.columns < 1 || p.columns > (1 << 20) ||
      (p.bits != 1 && p.bits != 2 && p.bits != 4 && p.bits != 8 && p.bits != 16))
    throw Error(Errc::malformed, "invalid predictor parameters");
  const std::size_t bpp = std::max<std::size_t>(1, (static_cast<std::size_t>(p.colors) * p.bits + 7) / 8);
  const std::size_t row = (static_cast<std::size_t>(p.colors) * p.bits * p.columns + 7) / 8;
  std::string out;
  std::string prev(row, '\0');
  std::size_t pos = 0;
  while (pos < data.size()) {
    auto type = static_cast<unsigned char>(data[pos++]);
    std::string cur = data.substr(pos, row);
    cur.resize(row, '\0');
    pos += row;
    for (std::size_t i = 0; i < row; ++i) {
      auto raw = static_cast<unsigned char>(cur[i]);
      unsigned left = i >= bpp ? static_cast<unsigned char>(cur[i - bpp]) : 0;
      unsigned up = static_cast<unsigned char>(prev[i]);
      unsigned ul = i >= bpp ? static_cast<unsigned char>(prev[i - bpp]) : 0;
      unsigned v = raw;
      switch (type) {
        case 0: break;
        case 1: v = raw + left; break;
        case 2: v = raw + up; break;
        case 3: v = raw + (left + up) / 2; break;
        case 4: {
          int pa = std::abs(static_cast<int>(up) - static_cast<int>(ul));
          int pb = std::abs(static_cast<int>(left) - static_cast<int>(ul));
          int pc = std::abs(static_cast<int>(left + up) - 2 * static_cast<int>(ul));
          unsigned pred = (pa <= pb && pa <= pc) ? left : (pb <= pc ? up : ul);
          v = raw + pred;
          break;
        }
        default:
          throw Error(Errc::malformed, "unknown PNG predictor row type " + std::to_string(type));
      }
      cur[i] = static_cast<char>(v & 0xff);
    }
    out += cur;
    prev = std::move(cur);
  }
  return out;
}

}  // namespace ccs::pdf
