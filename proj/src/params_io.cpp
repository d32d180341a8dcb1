#include "mtmerlin/params_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "mtmerlin/byte_io.hpp"

namespace mtmerlin {

namespace {

constexpr unsigned char kMagic[4] = {0x4D, 0x4C, 0x50, 0x31};
constexpr const char* kNormName = "normalization";

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string encoding_name(AuxEncoding e) { return e == AuxEncoding::ReIm ? "reim" : "log_intensity"; }

AuxEncoding parse_encoding(const std::string& s) {
  if (s == "log_intensity") return AuxEncoding::LogIntensity;
  if (s == "reim") return AuxEncoding::ReIm;
  throw Error(ErrorCode::Format, "unknown aux encoding '" + s + "'");
}

void put_values(std::ostream& os, const std::vector<double>& v, DType dtype) {
  for (double x : v) {
    if (dtype == DType::F32) bytes::put<float>(os, static_cast<float>(x));
    else bytes::put<double>(os, x);
  }
}

void put_tensor(std::ostream& os, const std::string& name, const std::vector<int>& shape,
                const std::vector<double>& data, DType dtype) {
  bytes::put<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  bytes::put<std::uint8_t>(os, static_cast<std::uint8_t>(shape.size()));
  for (int d : shape) bytes::put<std::uint32_t>(os, static_cast<std::uint32_t>(d));
  put_values(os, data, dtype);
}

}  // namespace

void write_params(std::ostream& os, const EstimatorParams& p, DType dtype) {
  std::ostringstream desc;
  desc << "in_channels=" << p.arch.in_channels << "\n"
       << "depth=" << p.arch.depth << "\n"
       << "base_width=" << p.arch.base_width << "\n"
       << "kernel=" << p.arch.kernel << "\n"
       << "leaky_slope=" << format_double(p.arch.leaky_slope) << "\n"
       << "encoding=" << encoding_name(p.arch.encoding) << "\n"
       << "config_hash=" << p.config_hash << "\n";
  const std::string d = desc.str();
  os.write(reinterpret_cast<const char*>(kMagic), sizeof(kMagic));
  bytes::put<std::uint32_t>(os, static_cast<std::uint32_t>(d.size()));
  os.write(d.data(), static_cast<std::streamsize>(d.size()));
  bytes::put<std::uint8_t>(os, static_cast<std::uint8_t>(dtype));
  bytes::put<std::uint32_t>(os, static_cast<std::uint32_t>(p.tensors.size() + 1));
  for (const auto& t : p.tensors) put_tensor(os, t.name, t.shape, t.data, dtype);

  std::vector<double> norm = p.norm.shift;
  norm.insert(norm.end(), p.norm.scale.begin(), p.norm.scale.end());
  norm.push_back(p.norm.output_offset);
  put_tensor(os, kNormName, {static_cast<int>(norm.size())}, norm, dtype);
  if (!os) throw Error(ErrorCode::Io, "failed writing MLP1 stream");
}

EstimatorParams read_params(std::istream& is) {
  bytes::expect(is, kMagic, sizeof(kMagic), "MLP1");
  const auto desc_len = bytes::get<std::uint32_t>(is);
  if (desc_len > (1u << 20)) throw Error(ErrorCode::Format, "MLP1 descriptor too long");
  std::string desc(desc_len, '\0');
  is.read(desc.data(), desc_len);
  if (!is) throw Error(ErrorCode::Format, "truncated MLP1 descriptor");

  std::map<std::string, std::string> kv;
  std::istringstream lines(desc);
  for (std::string line; std::getline(lines, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::Format, "malformed MLP1 descriptor line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto need = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw Error(ErrorCode::Format, std::string("MLP1 descriptor lacks ") + key);
    return it->second;
  };
  EstimatorParams p;
  try {
    p.arch.in_channels = std::stoi(need("in_channels"));
    p.arch.depth = std::stoi(need("depth"));
    p.arch.base_width = std::stoi(need("base_width"));
    p.arch.kernel = std::stoi(need("kernel"));
    p.arch.leaky_slope = std::stod(need("leaky_slope"));
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::Format, "non-numeric MLP1 descriptor value");
  }
  p.arch.encoding = parse_encoding(need("encoding"));
  p.config_hash = need("config_hash");
  validate(p.arch);

  const auto dtype = bytes::get<std::uint8_t>(is);
  if (dtype > 1) throw Error(ErrorCode::Format, "MLP1 dtype out of range");
  const auto count = bytes::get<std::uint32_t>(is);
  if (count < 1 || count > 4096) throw Error(ErrorCode::Format, "MLP1 tensor count out of range");
  for (std::uint32_t i = 0; i < count; ++i) {
    ParamTensor t;
    const auto name_len = bytes::get<std::uint16_t>(is);
    t.name.resize(name_len);
    is.read(t.name.data(), name_len);
    const auto rank = bytes::get<std::uint8_t>(is);
    if (rank < 1 || rank > 4) throw Error(ErrorCode::Format, "MLP1 tensor rank out of range");
    std::size_t n = 1;
    for (int r = 0; r < rank; ++r) {
      t.shape.push_back(static_cast<int>(bytes::get<std::uint32_t>(is)));
      n *= static_cast<std::size_t>(t.shape.back());
    }
    if (n > (1u << 28)) throw Error(ErrorCode::Format, "MLP1 tensor too large");
    t.data.resize(n);
    for (auto& v : t.data) v = dtype == 0 ? static_cast<double>(bytes::get<float>(is)) : bytes::get<double>(is);
    p.tensors.push_back(std::move(t));
  }
  ParamTensor norm = std::move(p.tensors.back());
  p.tensors.pop_back();
  const int C = p.arch.in_channels;
  if (norm.name != kNormName || norm.data.size() != static_cast<std::size_t>(2 * C + 1)) {
    throw Error(ErrorCode::Format, "MLP1 normalization tensor missing or mis-sized");
  }
  p.norm.shift.assign(norm.data.begin(), norm.data.begin() + C);
  p.norm.scale.assign(norm.data.begin() + C, norm.data.begin() + 2 * C);
  p.norm.output_offset = norm.data.back();

  // The layer layout must be the one the architecture implies.
  const EstimatorParams expected = init_params(p.arch, RngHandle(0));
  if (expected.tensors.size() != p.tensors.size()) throw Error(ErrorCode::Format, "MLP1 tensor count differs from architecture");
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    if (expected.tensors[i].name != p.tensors[i].name || expected.tensors[i].shape != p.tensors[i].shape) {
      throw Error(ErrorCode::Format, "MLP1 tensor '" + p.tensors[i].name + "' does not match the architecture");
    }
    for (double v : p.tensors[i].data) {
      if (!std::isfinite(v)) throw Error(ErrorCode::Format, "MLP1 tensor '" + p.tensors[i].name + "' is not finite");
    }
  }
  return p;
}

void write_params(const std::filesystem::path& path, const EstimatorParams& params, DType dtype) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  write_params(os, params, dtype);
}

EstimatorParams read_params(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return read_params(is);
}

}  // namespace mtmerlin
