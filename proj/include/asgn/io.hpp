#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace asgn::io {

// Shortest round-trippable decimal form of a double; used for all CSV and
// config output so files are reproducible byte for byte.
std::string fmt(double v);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

// Minimal CSV reader for the files this project writes (no quoting).
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

// FNV-1a over a string; used to stamp reports with the config they came from.
std::uint64_t fnv1a(const std::string& s);
std::string hex64(std::uint64_t v);

// ---- little-endian binary primitives (checkpoint format) ----

void put_u64(std::ostream& os, std::uint64_t v);
void put_f64(std::ostream& os, double v);
void put_f64_vec(std::ostream& os, const std::vector<double>& v);
std::uint64_t get_u64(std::istream& is);
double get_f64(std::istream& is);
std::vector<double> get_f64_vec(std::istream& is);

// ---- tiny SVG plots ----

struct Series {
  std::string label;
  std::string color;
  std::vector<double> x;
  std::vector<double> y;
};

// Polyline plot of one or more series with simple axes; `meta` is embedded
// as an XML comment (config hash).
void write_line_svg(const std::filesystem::path& path, const std::string& title,
                    const std::vector<Series>& series, const std::string& meta);

// 2D scatter of one or more point sets ([n,2] row-major arrays).
struct PointSet {
  std::string label;
  std::string color;
  std::vector<double> xy;
};

void write_scatter_svg(const std::filesystem::path& path, const std::string& title,
                       const std::vector<PointSet>& sets, const std::string& meta);

}  // namespace asgn::io
