#include "mtmerlin/raster_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mtmerlin/error.hpp"

namespace mtmerlin {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  return out;
}

}  // namespace

void write_pgm16(const std::string& path, const RealImage& img, double lo, double hi,
                 const std::vector<std::string>& comments) {
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw Error(ErrorCode::InvalidArgument, "PGM range must satisfy lo < hi");
  }
  std::ofstream out = open_out(path);
  out << "P5\n";
  for (const std::string& c : comments) out << "# " << c << "\n";
  out << img.W << " " << img.H << "\n65535\n";
  std::vector<unsigned char> buf(img.size() * 2);
  for (std::size_t i = 0; i < img.size(); ++i) {
    double v = (img.data[i] - lo) / (hi - lo);
    if (!std::isfinite(v)) v = 0.0;
    const auto q = static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
    buf[2 * i] = static_cast<unsigned char>(q >> 8);
    buf[2 * i + 1] = static_cast<unsigned char>(q & 0xff);
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path);
}

Pgm16 read_pgm16(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  Pgm16 p;
  std::string magic;
  std::getline(in, magic);
  if (magic != "P5") throw Error(ErrorCode::Format, path + ": not a binary PGM");
  std::string line;
  while (in.peek() == '#') {
    std::getline(in, line);
    p.comments.push_back(line.size() > 2 ? line.substr(2) : std::string{});
  }
  in >> p.W >> p.H >> p.maxval;
  in.get();
  if (!in || p.W <= 0 || p.H <= 0 || p.maxval != 65535) throw Error(ErrorCode::Format, path + ": bad PGM header");
  std::vector<unsigned char> buf(static_cast<std::size_t>(p.W) * p.H * 2);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size())) throw Error(ErrorCode::Format, path + ": truncated");
  p.samples.resize(buf.size() / 2);
  for (std::size_t i = 0; i < p.samples.size(); ++i) {
    p.samples[i] = static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
  }
  return p;
}

void write_image_csv(const std::string& path, const RealImage& img, const std::string& header_comment) {
  std::ofstream out = open_out(path);
  if (!header_comment.empty()) out << "# " << header_comment << "\n";
  for (int y = 0; y < img.H; ++y) {
    for (int x = 0; x < img.W; ++x) out << (x ? "," : "") << fmt(img(y, x));
    out << "\n";
  }
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path);
}

void write_series_csv(const std::string& path, const std::string& value_name, const std::vector<double>& values,
                      const std::string& header_comment) {
  std::ofstream out = open_out(path);
  if (!header_comment.empty()) out << "# " << header_comment << "\n";
  out << "index," << value_name << "\n";
  for (std::size_t i = 0; i < values.size(); ++i) out << i << "," << fmt(values[i]) << "\n";
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path);
}

}  // namespace mtmerlin
