#include "asgn/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace asgn::io {

std::string fmt(double v) {
  char buf[32];
  // %.17g is exact for doubles; fall back through shorter forms when they
  // round-trip, to keep files readable.
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os << content;
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        cells.push_back(line.substr(start));
        break;
      }
      cells.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(os, bits);
}

void put_f64_vec(std::ostream& os, const std::vector<double>& v) {
  put_u64(os, v.size());
  for (double x : v) put_f64(os, x);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw std::runtime_error("binary read: truncated input");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) {
  const std::uint64_t bits = get_u64(is);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

std::vector<double> get_f64_vec(std::istream& is) {
  const std::uint64_t n = get_u64(is);
  if (n > (1ULL << 32)) throw std::runtime_error("binary read: implausible vector length");
  std::vector<double> v(n);
  for (auto& x : v) x = get_f64(is);
  return v;
}

// ---- SVG -------------------------------------------------------------------

namespace {

constexpr int kW = 640, kH = 480, kPad = 48;

struct Range {
  double lo = 0.0, hi = 1.0;
  void expand(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  static Range of(const std::vector<const std::vector<double>*>& arrays) {
    Range r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto* a : arrays)
      for (double v : *a) r.expand(v);
    if (!(r.lo < r.hi)) {
      r.lo -= 0.5;
      r.hi += 0.5;
    }
    return r;
  }
  double map(double v, int lo_px, int hi_px) const {
    return lo_px + (v - lo) / (hi - lo) * (hi_px - lo_px);
  }
};

void svg_header(std::ostringstream& ss, const std::string& title, const std::string& meta) {
  ss << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  ss << "<!-- " << meta << " -->\n";
  ss << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  ss << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title
     << "</text>\n";
}

void svg_axes(std::ostringstream& ss, const Range& rx, const Range& ry) {
  ss << "<rect x=\"" << kPad << "\" y=\"" << kPad << "\" width=\"" << kW - 2 * kPad << "\" height=\""
     << kH - 2 * kPad << "\" fill=\"none\" stroke=\"#888\"/>\n";
  ss << "<text x=\"" << kPad << "\" y=\"" << kH - kPad + 16 << "\" font-size=\"10\">" << fmt(rx.lo)
     << "</text>\n";
  ss << "<text x=\"" << kW - kPad << "\" y=\"" << kH - kPad + 16 << "\" text-anchor=\"end\" font-size=\"10\">"
     << fmt(rx.hi) << "</text>\n";
  ss << "<text x=\"" << kPad - 4 << "\" y=\"" << kH - kPad << "\" text-anchor=\"end\" font-size=\"10\">"
     << fmt(ry.lo) << "</text>\n";
  ss << "<text x=\"" << kPad - 4 << "\" y=\"" << kPad + 10 << "\" text-anchor=\"end\" font-size=\"10\">"
     << fmt(ry.hi) << "</text>\n";
}

}  // namespace

void write_line_svg(const std::filesystem::path& path, const std::string& title,
                    const std::vector<Series>& series, const std::string& meta) {
  std::ostringstream ss;
  svg_header(ss, title, meta);
  std::vector<const std::vector<double>*> xs, ys;
  for (const auto& s : series) {
    xs.push_back(&s.x);
    ys.push_back(&s.y);
  }
  const Range rx = Range::of(xs), ry = Range::of(ys);
  svg_axes(ss, rx, ry);
  int legend_y = kPad + 14;
  for (const auto& s : series) {
    ss << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      ss << fmt(rx.map(s.x[i], kPad, kW - kPad)) << "," << fmt(ry.map(s.y[i], kH - kPad, kPad)) << " ";
    }
    ss << "\"/>\n";
    ss << "<text x=\"" << kW - kPad - 4 << "\" y=\"" << legend_y << "\" text-anchor=\"end\" font-size=\"11\" fill=\""
       << s.color << "\">" << s.label << "</text>\n";
    legend_y += 14;
  }
  ss << "</svg>\n";
  write_text_file(path, ss.str());
}

void write_scatter_svg(const std::filesystem::path& path, const std::string& title,
                       const std::vector<PointSet>& sets, const std::string& meta) {
  std::ostringstream ss;
  svg_header(ss, title, meta);
  Range rx{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  Range ry = rx;
  for (const auto& s : sets) {
    for (std::size_t i = 0; i + 1 < s.xy.size(); i += 2) {
      rx.expand(s.xy[i]);
      ry.expand(s.xy[i + 1]);
    }
  }
  if (!(rx.lo < rx.hi)) {
    rx.lo -= 0.5;
    rx.hi += 0.5;
  }
  if (!(ry.lo < ry.hi)) {
    ry.lo -= 0.5;
    ry.hi += 0.5;
  }
  svg_axes(ss, rx, ry);
  int legend_y = kPad + 14;
  for (const auto& s : sets) {
    for (std::size_t i = 0; i + 1 < s.xy.size(); i += 2) {
      ss << "<circle cx=\"" << fmt(rx.map(s.xy[i], kPad, kW - kPad)) << "\" cy=\""
         << fmt(ry.map(s.xy[i + 1], kH - kPad, kPad)) << "\" r=\"1.5\" fill=\"" << s.color
         << "\" fill-opacity=\"0.5\"/>\n";
    }
    ss << "<text x=\"" << kW - kPad - 4 << "\" y=\"" << legend_y << "\" text-anchor=\"end\" font-size=\"11\" fill=\""
       << s.color << "\">" << s.label << "</text>\n";
    legend_y += 14;
  }
  ss << "</svg>\n";
  write_text_file(path, ss.str());
}

}  // namespace asgn::io
