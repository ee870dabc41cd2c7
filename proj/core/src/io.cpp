#include "alignkit/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace alignkit {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr char kMagic[4] = {'V', 'T', 'E', 'N'};
constexpr std::uint8_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "VTEN I/O assumes a little-endian host");

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError("vten: truncated header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  return os;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  return is;
}

// Next header token of a PNM file, skipping whitespace and comments.
std::string pnm_token(std::istream& is) {
  std::string tok;
  int ch;
  while ((ch = is.get()) != EOF) {
    if (ch == '#') {
      while ((ch = is.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

int pnm_int(std::istream& is, const fs::path& path) {
  const std::string tok = pnm_token(is);
  try {
    return std::stoi(tok);
  } catch (const std::exception&) {
    throw IoError("malformed image header in " + path.string());
  }
}

inline std::uint8_t to_code(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f) * 255.0f;
  return static_cast<std::uint8_t>(std::lround(c));
}

}  // namespace

void write_vten(std::ostream& os, const Tensor& t) {
  os.write(kMagic, 4);
  const std::uint8_t header[2] = {kVersion, static_cast<std::uint8_t>(t.rank())};
  os.write(reinterpret_cast<const char*>(header), 2);
  for (int d : t.dims()) put_u32(os, static_cast<std::uint32_t>(d));
  os.write(reinterpret_cast<const char*>(t.raw()),
           static_cast<std::streamsize>(t.size() * sizeof(float)));
  if (!os) throw IoError("vten: write failed");
}

Tensor read_vten(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError("vten: bad magic");
  }
  std::uint8_t header[2];
  if (!is.read(reinterpret_cast<char*>(header), 2)) throw IoError("vten: truncated header");
  if (header[0] != kVersion) {
    throw IoError("vten: unsupported version " + std::to_string(header[0]));
  }
  Shape dims(header[1]);
  for (int& d : dims) {
    const std::uint32_t v = get_u32(is);
    if (v == 0 || v > static_cast<std::uint32_t>(INT32_MAX)) throw IoError("vten: bad extent");
    d = static_cast<int>(v);
  }
  std::size_t n = 1;
  for (int d : dims) n *= static_cast<std::size_t>(d);
  std::vector<float> data(n);
  if (!is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n * sizeof(float)))) {
    throw IoError("vten: truncated payload");
  }
  return Tensor(std::move(dims), std::move(data));
}

void save_vten(const fs::path& path, const Tensor& t) {
  auto os = open_out(path);
  try {
    write_vten(os, t);
  } catch (const IoError& e) {
    throw IoError(std::string(e.what()) + ": " + path.string());
  }
}

Tensor load_vten(const fs::path& path) {
  auto is = open_in(path);
  try {
    return read_vten(is);
  } catch (const IoError& e) {
    throw IoError(std::string(e.what()) + ": " + path.string());
  }
}

void save_image(const fs::path& path, const Tensor& img) {
  require_chw(img, "save_image");
  const int c = img.channels();
  if (c != 1 && c != 3) {
    throw ShapeError("save_image: channel axis must be 1 or 3, got " + std::to_string(c));
  }
  auto os = open_out(path);
  os << (c == 3 ? "P6" : "P5") << '\n' << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<std::uint8_t> buf(img.size());
  const std::size_t n = static_cast<std::size_t>(img.height()) * img.width();
  for (std::size_t i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) buf[i * c + ch] = to_code(img.plane(ch)[i]);
  }
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!os) throw IoError("write failed: " + path.string());
}

Tensor load_image(const fs::path& path) {
  auto is = open_in(path);
  const std::string magic = pnm_token(is);
  int c;
  if (magic == "P6") {
    c = 3;
  } else if (magic == "P5") {
    c = 1;
  } else {
    throw IoError("not a binary PPM/PGM file: " + path.string());
  }
  const int w = pnm_int(is, path), h = pnm_int(is, path), maxval = pnm_int(is, path);
  if (w < 1 || h < 1 || maxval != 255) {
    throw IoError("unsupported image geometry or depth in " + path.string());
  }
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(w) * h * c);
  if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
    throw IoError("truncated image data in " + path.string());
  }
  Tensor out({c, h, w});
  const std::size_t n = static_cast<std::size_t>(h) * w;
  for (std::size_t i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) out.plane(ch)[i] = static_cast<float>(buf[i * c + ch]) / 255.0f;
  }
  return out;
}

Tensor quantize_8bit(const Tensor& t) {
  Tensor out(t.dims());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = static_cast<float>(to_code(t[i])) / 255.0f;
  return out;
}

void TensorArchive::put(const std::string& name, Tensor t) { tensors_[name] = std::move(t); }

const Tensor& TensorArchive::get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw CorruptDataset("archive: missing tensor '" + name + "'");
  return it->second;
}

void TensorArchive::save(const fs::path& dir) const {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  auto os = open_out(dir / "tensors.vten");
  json index = {{"format", "VTEN-archive"}, {"version", 1}, {"tensors", json::array()}};
  for (const auto& [name, t] : tensors_) {
    const auto offset = static_cast<std::uint64_t>(os.tellp());
    write_vten(os, t);
    index["tensors"].push_back({{"name", name}, {"offset", offset}, {"dims", t.dims()}});
  }
  if (!os) throw IoError("write failed: " + (dir / "tensors.vten").string());
  auto js = open_out(dir / "index.json");
  js << index.dump(2) << '\n';
}

TensorArchive TensorArchive::load(const fs::path& dir) {
  const fs::path index_path = dir / "index.json";
  if (!fs::exists(index_path)) throw CorruptDataset("archive: missing " + index_path.string());
  json index;
  try {
    auto js = open_in(index_path);
    index = json::parse(js);
  } catch (const json::exception& e) {
    throw CorruptDataset("archive: unreadable index " + index_path.string() + ": " + e.what());
  }
  auto is = open_in(dir / "tensors.vten");
  TensorArchive ar;
  try {
    for (const auto& entry : index.at("tensors")) {
      is.seekg(static_cast<std::streamoff>(entry.at("offset").get<std::uint64_t>()));
      Tensor t = read_vten(is);
      if (t.dims() != entry.at("dims").get<Shape>()) {
        throw CorruptDataset("archive: extents of '" + entry.at("name").get<std::string>() +
                             "' disagree with the index");
      }
      ar.put(entry.at("name").get<std::string>(), std::move(t));
    }
  } catch (const json::exception& e) {
    throw CorruptDataset("archive: malformed index " + index_path.string() + ": " + e.what());
  } catch (const IoError& e) {
    throw CorruptDataset(std::string("archive: ") + e.what() + " in " + dir.string());
  }
  return ar;
}

}  // namespace alignkit
