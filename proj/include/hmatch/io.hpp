#pragma once

// File formats:
//   matrix CSV    d lines of n comma-separated reals (one line per feature),
//                 optionally preceded by one line starting with '#'.
//   labels        ground-truth inlier indices, 0-based, ascending, one per line.
//   partition     "index,label" per line with label G or B, every index once.
//   image         binary PPM: "P6" width height 255, one whitespace byte,
//                 then 3*width*height RGB bytes.

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hmatch/classify.hpp"
#include "hmatch/error.hpp"
#include "hmatch/matrix.hpp"

namespace hmatch::io {

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Files staged in memory and written together: every file goes to a
/// temporary sibling first and is renamed into place only after all
/// temporaries were written successfully.
class OutputBatch {
 public:
  void add(fs::path path, std::string content) {
    files_.emplace_back(std::move(path), std::move(content));
  }

  std::vector<fs::path> paths() const {
    std::vector<fs::path> out;
    for (const auto& f : files_) out.push_back(f.first);
    return out;
  }

  void commit() const {
    std::vector<fs::path> temps;
    auto cleanup = [&] {
      std::error_code ec;
      for (const auto& t : temps) fs::remove(t, ec);
    };
    try {
      for (const auto& [path, content] : files_) {
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        fs::path tmp = path;
        tmp += ".tmp";
        temps.push_back(tmp);
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + path.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.close();
        if (!out) throw Error("failed writing " + path.string());
      }
    } catch (const fs::filesystem_error& e) {
      cleanup();
      throw Error(e.what());
    } catch (...) {
      cleanup();
      throw;
    }
    for (std::size_t k = 0; k < files_.size(); ++k) fs::rename(temps[k], files_[k].first);
  }

 private:
  std::vector<std::pair<fs::path, std::string>> files_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

inline double parse_real(std::string_view field, std::size_t line) {
  const std::string s(trim(field));
  if (s.empty()) throw ParseError("line " + std::to_string(line) + ": empty field");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
    throw ParseError("line " + std::to_string(line) + ": '" + s + "' is not a finite number");
  }
  return v;
}

inline std::size_t parse_index(std::string_view field, std::size_t line) {
  field = trim(field);
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError("line " + std::to_string(line) + ": '" + std::string(field) +
                     "' is not a nonnegative integer");
  }
  return v;
}

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// CSV text for a matrix, one line per row (feature), 17 significant digits.
inline std::string format_matrix_csv(const DenseMatrix& m) {
  std::string out = "# rows=" + std::to_string(m.rows()) + " cols=" + std::to_string(m.cols()) + "\n";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += detail::format_real(m(i, j));
    }
    out += '\n';
  }
  return out;
}

inline DenseMatrix parse_matrix_csv(std::string_view text) {
  auto lines = detail::split_lines(text);
  std::size_t first = 0;
  if (!lines.empty() && detail::trim(lines.front()).starts_with('#')) first = 1;
  if (first >= lines.size()) throw ParseError("matrix CSV: no data rows");

  const std::size_t rows = lines.size() - first;
  std::vector<std::vector<double>> parsed(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t lineno = first + r + 1;
    std::string_view line = lines[first + r];
    if (detail::trim(line).empty()) throw ParseError("line " + std::to_string(lineno) + ": empty row");
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = line.find(',', start);
      parsed[r].push_back(detail::parse_real(line.substr(start, comma - start), lineno));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (parsed[r].size() != parsed[0].size()) {
      throw ParseError("line " + std::to_string(lineno) + ": expected " +
                       std::to_string(parsed[0].size()) + " fields, found " +
                       std::to_string(parsed[r].size()));
    }
  }
  const std::size_t cols = parsed[0].size();
  DenseMatrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = parsed[i][j];
  return m;
}

inline DenseMatrix read_matrix_csv(const fs::path& path) {
  try {
    return parse_matrix_csv(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline std::string format_labels(const std::vector<std::size_t>& inliers) {
  std::string out;
  for (std::size_t i : inliers) out += std::to_string(i) + '\n';
  return out;
}

/// Sorted, duplicate-free inlier indices.
inline std::vector<std::size_t> parse_labels(std::string_view text) {
  std::vector<std::size_t> out;
  const auto lines = detail::split_lines(text);
  for (std::size_t k = 0; k < lines.size(); ++k) {
    auto line = detail::trim(lines[k]);
    if (line.empty() || line.starts_with('#')) continue;
    out.push_back(detail::parse_index(line, k + 1));
  }
  std::sort(out.begin(), out.end());
  if (std::adjacent_find(out.begin(), out.end()) != out.end()) {
    throw ParseError("labels: duplicate index");
  }
  return out;
}

inline std::string format_partition(const LabelPartition& p) {
  const auto mask = p.mask();
  std::string out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    out += std::to_string(i);
    out += mask[i] ? ",G\n" : ",B\n";
  }
  return out;
}

inline LabelPartition parse_partition(std::string_view text) {
  const auto lines = detail::split_lines(text);
  std::vector<int> label;  // -1 unseen, 0 B, 1 G
  for (std::size_t k = 0; k < lines.size(); ++k) {
    auto line = detail::trim(lines[k]);
    if (line.empty() || line.starts_with('#')) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string_view::npos) {
      throw ParseError("partition line " + std::to_string(k + 1) + ": expected 'index,label'");
    }
    const std::size_t idx = detail::parse_index(line.substr(0, comma), k + 1);
    const auto tag = detail::trim(line.substr(comma + 1));
    if (tag != "G" && tag != "B") {
      throw ParseError("partition line " + std::to_string(k + 1) + ": label must be G or B");
    }
    if (idx >= label.size()) label.resize(idx + 1, -1);
    if (label[idx] != -1) throw ParseError("partition: index " + std::to_string(idx) + " repeated");
    label[idx] = tag == "G" ? 1 : 0;
  }
  if (label.empty()) throw ParseError("partition: no entries");
  std::vector<bool> mask(label.size());
  for (std::size_t i = 0; i < label.size(); ++i) {
    if (label[i] == -1) throw ParseError("partition: index " + std::to_string(i) + " missing");
    mask[i] = label[i] == 1;
  }
  return LabelPartition::from_mask(mask);
}

struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  /// Row-major RGB triples.
  std::vector<std::uint8_t> rgb;

  std::size_t pixels() const noexcept { return width * height; }
  friend bool operator==(const Image&, const Image&) = default;
};

inline Image parse_ppm(std::string_view bytes) {
  std::size_t pos = 0;
  auto skip_space_and_comments = [&] {
    while (pos < bytes.size()) {
      const char c = bytes[pos];
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto token = [&]() -> std::string_view {
    skip_space_and_comments();
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw ParseError("PPM: truncated header");
    return bytes.substr(start, pos - start);
  };

  if (token() != "P6") throw ParseError("PPM: magic number is not P6");
  Image img;
  img.width = detail::parse_index(token(), 1);
  img.height = detail::parse_index(token(), 1);
  const std::size_t maxval = detail::parse_index(token(), 1);
  if (img.width == 0 || img.height == 0) throw ParseError("PPM: zero image dimension");
  if (maxval != 255) throw ParseError("PPM: maxval must be 255");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw ParseError("PPM: missing whitespace after header");
  }
  ++pos;
  const std::size_t expected = 3 * img.width * img.height;
  if (bytes.size() - pos != expected) {
    throw ParseError("PPM: expected " + std::to_string(expected) + " payload bytes, found " +
                     std::to_string(bytes.size() - pos));
  }
  img.rgb.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return img;
}

inline Image read_ppm(const fs::path& path) {
  try {
    return parse_ppm(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline std::string format_ppm(const Image& img) {
  if (img.rgb.size() != 3 * img.pixels()) throw InvalidArgument("format_ppm: payload size mismatch");
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.rgb.data()), img.rgb.size());
  return out;
}

/// 3 x (width*height) matrix of RGB values, pixels in row-major order.
inline DenseMatrix image_to_points(const Image& img) {
  DenseMatrix m(3, img.pixels());
  for (std::size_t p = 0; p < img.pixels(); ++p)
    for (std::size_t c = 0; c < 3; ++c) m(c, p) = img.rgb[3 * p + c];
  return m;
}

}  // namespace hmatch::io
