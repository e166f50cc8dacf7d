#include "pwinv/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace pwinv {
namespace {

namespace fs = std::filesystem;

constexpr char dataset_magic[8] = {'P', 'W', 'I', 'N', 'V', 'D', 'S', '1'};
constexpr char field_magic[8] = {'P', 'W', 'I', 'N', 'V', 'F', 'D', '1'};

template <class T>
T to_le(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto b = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(b.begin(), b.end());
    return std::bit_cast<T>(b);
  }
  return v;
}

void put_u64(std::ostream& os, std::uint64_t v) {
  v = to_le(v);
  os.write(reinterpret_cast<const char*>(&v), 8);
}

void put_doubles(std::ostream& os, const double* p, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(p), std::streamsize(n * 8));
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const double v = to_le(p[i]);
      os.write(reinterpret_cast<const char*>(&v), 8);
    }
  }
}

void get_exact(std::istream& is, char* p, std::size_t n, const fs::path& file) {
  is.read(p, std::streamsize(n));
  if (std::size_t(is.gcount()) != n)
    throw IOError("format", file.string() + ": truncated file");
}

std::uint64_t get_u64(std::istream& is, const fs::path& file) {
  std::uint64_t v;
  get_exact(is, reinterpret_cast<char*>(&v), 8, file);
  return to_le(v);
}

void get_doubles(std::istream& is, double* p, std::size_t n, const fs::path& file) {
  get_exact(is, reinterpret_cast<char*>(p), n * 8, file);
  if constexpr (std::endian::native == std::endian::big)
    for (std::size_t i = 0; i < n; ++i) p[i] = to_le(p[i]);
}

std::ifstream open_in(const fs::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw IOError("missing-artifact", file.string());
  return is;
}

std::ofstream open_out(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw IOError("format", "cannot write " + file.string());
  return os;
}

nlohmann::json read_header(std::istream& is, const char (&magic)[8], const fs::path& file) {
  char m[8];
  get_exact(is, m, 8, file);
  if (std::memcmp(m, magic, 8) != 0) throw IOError("format", file.string() + ": bad magic");
  const std::uint64_t len = get_u64(is, file);
  if (len > (std::uint64_t(1) << 30)) throw IOError("format", file.string() + ": header too large");
  std::string text(len, '\0');
  get_exact(is, text.data(), len, file);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IOError("format", file.string() + ": header: " + e.what());
  }
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  std::string hex;
  char b[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(b, sizeof b, "%02x", md[i]);
    hex += b;
  }
  return hex;
}

const char* code_version() { return PWINV_VERSION; }

nlohmann::json artifact_stamp(const std::string& scenario_hash) {
  return {{"scenario_hash", scenario_hash}, {"code_version", code_version()}};
}

void write_dataset(const BoundaryDataset& d, const fs::path& file) {
  const std::size_t nodes = d.layout.size();
  if (d.data.size() != d.frames() * nodes * 2)
    throw IOError("format", "dataset frame storage does not match its header");
  nlohmann::json h = {{"format_version", 1},
                      {"grid_n", d.grid_n},
                      {"h", d.h},
                      {"dt", d.dt},
                      {"steps", d.steps},
                      {"T", d.T()},
                      {"half_width", d.half_width},
                      {"area", d.layout.area},
                      {"nodes", nodes},
                      {"eta_final", d.eta_final},
                      {"scenario_hash", d.scenario_hash},
                      {"code_version", d.code_version.empty() ? code_version() : d.code_version},
                      {"node_fields", {"in", "out", "axis", "sign", "x", "y", "z", "sigma_face"}}};
  const std::string text = h.dump();
  std::ofstream os = open_out(file);
  os.write(dataset_magic, 8);
  put_u64(os, text.size());
  os.write(text.data(), std::streamsize(text.size()));
  std::vector<double> table;
  table.reserve(nodes * 8);
  for (const FaceNode& q : d.layout.nodes) {
    const double row[8] = {double(q.in), double(q.out), double(q.axis), double(q.sign),
                           q.x,          q.y,           q.z,           q.sigma_face};
    table.insert(table.end(), row, row + 8);
  }
  put_doubles(os, table.data(), table.size());
  put_doubles(os, d.data.data(), d.data.size());
  if (!os) throw IOError("format", "write failed: " + file.string());
}

BoundaryDataset read_dataset(const fs::path& file) {
  std::ifstream is = open_in(file);
  const nlohmann::json h = read_header(is, dataset_magic, file);
  BoundaryDataset d;
  std::size_t nodes = 0;
  try {
    if (h.at("format_version").get<int>() != 1)
      throw IOError("format", file.string() + ": unsupported format version");
    d.grid_n = h.at("grid_n").get<int>();
    d.h = h.at("h").get<double>();
    d.dt = h.at("dt").get<double>();
    d.steps = h.at("steps").get<int>();
    d.half_width = h.at("half_width").get<double>();
    d.layout.area = h.at("area").get<double>();
    d.eta_final = h.at("eta_final").get<double>();
    d.scenario_hash = h.at("scenario_hash").get<std::string>();
    d.code_version = h.at("code_version").get<std::string>();
    nodes = h.at("nodes").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw IOError("format", file.string() + ": header field: " + e.what());
  }
  std::vector<double> table(nodes * 8);
  get_doubles(is, table.data(), table.size(), file);
  d.layout.nodes.resize(nodes);
  for (std::size_t q = 0; q < nodes; ++q) {
    const double* r = &table[q * 8];
    FaceNode& n = d.layout.nodes[q];
    n.in = std::size_t(r[0]);
    n.out = std::size_t(r[1]);
    n.axis = int(r[2]);
    n.sign = int(r[3]);
    n.x = r[4];
    n.y = r[5];
    n.z = r[6];
    n.sigma_face = r[7];
  }
  d.data.resize(d.frames() * nodes * 2);
  get_doubles(is, d.data.data(), d.data.size(), file);
  if (is.peek() != std::char_traits<char>::eof())
    throw IOError("format", file.string() + ": trailing bytes after the last frame");
  return d;
}

void export_dataset_csv(const BoundaryDataset& d, const fs::path& file) {
  std::ofstream os = open_out(file);
  os << "frame,t,node,axis,sign,x,y,z,u,flux\n";
  char b[256];
  for (int n = 0; n <= d.steps; ++n)
    for (std::size_t q = 0; q < d.layout.size(); ++q) {
      const FaceNode& f = d.layout.nodes[q];
      std::snprintf(b, sizeof b, "%d,%.17g,%zu,%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", n, n * d.dt, q,
                    f.axis, f.sign, f.x, f.y, f.z, d.u(n, q), d.flux(n, q));
      os << b;
    }
}

void write_field(const fs::path& file, const Eigen::ArrayXd& values, nlohmann::json header) {
  header["size"] = values.size();
  const std::string text = header.dump();
  std::ofstream os = open_out(file);
  os.write(field_magic, 8);
  put_u64(os, text.size());
  os.write(text.data(), std::streamsize(text.size()));
  put_doubles(os, values.data(), std::size_t(values.size()));
  if (!os) throw IOError("format", "write failed: " + file.string());
}

Eigen::ArrayXd read_field(const fs::path& file, nlohmann::json* header) {
  std::ifstream is = open_in(file);
  const nlohmann::json h = read_header(is, field_magic, file);
  if (!h.contains("size")) throw IOError("format", file.string() + ": header lacks size");
  Eigen::ArrayXd v(h["size"].get<Eigen::Index>());
  get_doubles(is, v.data(), std::size_t(v.size()), file);
  if (header) *header = h;
  return v;
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream os = open_out(file);
  os << text;
  if (!os) throw IOError("format", "write failed: " + file.string());
}

std::string read_text(const fs::path& file) {
  std::ifstream is = open_in(file);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_json(const fs::path& file, const nlohmann::json& j) { write_text(file, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& file) {
  const std::string text = read_text(file);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IOError("format", file.string() + ": " + e.what());
  }
}

}  // namespace pwinv
