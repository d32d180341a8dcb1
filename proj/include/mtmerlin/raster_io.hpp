#pragma once

#include <string>
#include <vector>

#include "mtmerlin/stack.hpp"

namespace mtmerlin {

/// 16-bit binary PGM (P5, big-endian samples). Values are mapped linearly
/// from [lo, hi] to [0, 65535] and clipped; `comment` lines go in the header.
void write_pgm16(const std::string& path, const RealImage& img, double lo, double hi,
                 const std::vector<std::string>& comments = {});

struct Pgm16 {
  int H = 0;
  int W = 0;
  int maxval = 0;
  std::vector<std::string> comments;
  std::vector<std::uint16_t> samples;
};

Pgm16 read_pgm16(const std::string& path);

/// Image as CSV, one row per line, with a leading `# key=value` comment line.
void write_image_csv(const std::string& path, const RealImage& img, const std::string& header_comment = {});

/// Two-column CSV (`index,value`).
void write_series_csv(const std::string& path, const std::string& value_name, const std::vector<double>& values,
                      const std::string& header_comment = {});

}  // namespace mtmerlin
