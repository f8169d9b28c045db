#include "getnet/hsicube.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "getnet/errors.hpp"

namespace getnet {

namespace fs = std::filesystem;

std::vector<double> HyperCube::spectrum(std::size_t pixel) const {
  std::vector<double> out(bands);
  const std::size_t plane = pixels();
  for (std::size_t k = 0; k < bands; ++k) out[k] = data[k * plane + pixel];
  return out;
}

void HyperCube::validate() const {
  if (height == 0 || width == 0 || bands == 0)
    throw ShapeError("cube dimensions must be >= 1 (got " + std::to_string(height) + "x" +
                     std::to_string(width) + "x" + std::to_string(bands) + ")");
  if (data.size() != height * width * bands)
    throw ShapeError("cube data length " + std::to_string(data.size()) + " != " +
                     std::to_string(height * width * bands));
  if (!wavelengths.empty() && wavelengths.size() != bands)
    throw ShapeError("wavelength list length " + std::to_string(wavelengths.size()) +
                     " != bands " + std::to_string(bands));
  for (std::size_t i = 0; i < data.size(); ++i)
    if (!std::isfinite(data[i]))
      throw DataError("non-finite value at index " + std::to_string(i));
}

void BinaryMap::validate() const {
  if (labels.size() != height * width)
    throw ShapeError("map label count " + std::to_string(labels.size()) + " != " +
                     std::to_string(height * width));
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] > 1) throw DataError("map label at index " + std::to_string(i) + " is not 0/1");
}

void CubePair::validate() const {
  time1.validate();
  time2.validate();
  if (time1.height != time2.height || time1.width != time2.width || time1.bands != time2.bands)
    throw ShapeError("cube pair dimensions differ");
  if (time1.wavelengths != time2.wavelengths) throw ShapeError("cube pair wavelength lists differ");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::map<std::string, std::string> parse_header(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open header " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "ENVI")
    throw FormatError("header " + path.string() + " does not start with 'ENVI'");

  std::map<std::string, std::string> fields;
  while (std::getline(in, line)) {
    if (trim(line).empty() || trim(line)[0] == ';') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError("garbled header line '" + trim(line) + "' in " + path.string());
    std::string key = lower(trim(line.substr(0, eq)));
    std::string value = trim(line.substr(eq + 1));
    if (!value.empty() && value.front() == '{') {
      while (value.find('}') == std::string::npos) {
        std::string more;
        if (!std::getline(in, more))
          throw FormatError("unterminated '{' for field '" + key + "'");
        value += " " + trim(more);
      }
      value = trim(value.substr(1, value.find('}') - 1));
    }
    fields[key] = value;
  }
  return fields;
}

const std::string& require(const std::map<std::string, std::string>& fields,
                           const std::string& key) {
  const auto it = fields.find(key);
  if (it == fields.end() || it->second.empty())
    throw FormatError("header field '" + key + "' is missing");
  return it->second;
}

std::size_t parse_count(const std::map<std::string, std::string>& fields, const std::string& key,
                        bool allow_zero = false) {
  const std::string& text = require(fields, key);
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(text, &pos);
  } catch (const std::exception&) {
    throw FormatError("header field '" + key + "' is not an integer: '" + text + "'");
  }
  if (pos != text.size() || v < 0 || (!allow_zero && v == 0))
    throw FormatError("header field '" + key + "' has invalid value '" + text + "'");
  return static_cast<std::size_t>(v);
}

std::vector<double> parse_list(const std::string& text, const std::string& key) {
  std::vector<double> out;
  std::string item;
  std::stringstream ss(text);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw FormatError("header field '" + key + "' has non-numeric entry '" + item + "'");
    }
  }
  return out;
}

template <typename T>
T load_word(const unsigned char* p, bool big_endian) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, p, sizeof(T));
  if (big_endian != (std::endian::native == std::endian::big)) std::reverse(buf, buf + sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

fs::path strip_hdr(const fs::path& p) {
  if (lower(p.extension().string()) == ".hdr") {
    fs::path base = p;
    base.replace_extension();
    return base;
  }
  return p;
}

}  // namespace

fs::path envi_data_path(const fs::path& header_path) {
  const fs::path base = strip_hdr(header_path);
  for (const char* ext : {"", ".img", ".dat", ".raw", ".bsq", ".bil", ".bip"}) {
    fs::path candidate = base;
    candidate += ext;
    if (candidate != header_path && fs::is_regular_file(candidate)) return candidate;
  }
  throw IoError("no raw data file found next to header " + header_path.string());
}

HyperCube read_envi(const fs::path& header_path) {
  const auto fields = parse_header(header_path);
  const std::size_t samples = parse_count(fields, "samples");
  const std::size_t lines = parse_count(fields, "lines");
  const std::size_t bands = parse_count(fields, "bands");
  const std::string interleave = lower(require(fields, "interleave"));
  if (interleave != "bsq" && interleave != "bil" && interleave != "bip")
    throw FormatError("header field 'interleave' has unsupported value '" + interleave + "'");
  const std::size_t data_type = parse_count(fields, "data type");
  std::size_t word = 0;
  switch (data_type) {
    case 2:
    case 12:
      word = 2;
      break;
    case 4:
      word = 4;
      break;
    default:
      throw FormatError("header field 'data type' has unsupported value " +
                        std::to_string(data_type));
  }
  const std::size_t byte_order = parse_count(fields, "byte order", true);
  if (byte_order > 1) throw FormatError("header field 'byte order' must be 0 or 1");
  const std::size_t offset =
      fields.count("header offset") ? parse_count(fields, "header offset", true) : 0;

  HyperCube cube(lines, samples, bands);
  if (auto it = fields.find("wavelength"); it != fields.end()) {
    cube.wavelengths = parse_list(it->second, "wavelength");
    if (cube.wavelengths.size() != bands)
      throw FormatError("header field 'wavelength' lists " +
                        std::to_string(cube.wavelengths.size()) + " values for " +
                        std::to_string(bands) + " bands");
  }

  const fs::path raw_path = envi_data_path(header_path);
  const std::size_t count = lines * samples * bands;
  const std::size_t expected = offset + count * word;
  const std::size_t actual = fs::file_size(raw_path);
  if (actual != expected) throw SizeError("raw file " + raw_path.string() + " size mismatch", expected, actual);

  std::vector<unsigned char> bytes(actual);
  {
    std::ifstream in(raw_path, std::ios::binary);
    if (!in || !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(actual)))
      throw IoError("cannot read raw file " + raw_path.string());
  }

  const bool big = byte_order == 1;
  const std::size_t plane = lines * samples;
  for (std::size_t k = 0; k < count; ++k) {
    const unsigned char* p = bytes.data() + offset + k * word;
    float v = 0.0f;
    if (data_type == 4) v = load_word<float>(p, big);
    else if (data_type == 12) v = static_cast<float>(load_word<std::uint16_t>(p, big));
    else v = static_cast<float>(load_word<std::int16_t>(p, big));
    if (!std::isfinite(v))
      throw DataError("non-finite value at raw word index " + std::to_string(k) + " of " +
                      raw_path.string());

    std::size_t row, col, band;
    if (interleave == "bsq") {
      band = k / plane;
      row = (k % plane) / samples;
      col = k % samples;
    } else if (interleave == "bil") {
      row = k / (bands * samples);
      band = (k / samples) % bands;
      col = k % samples;
    } else {
      row = k / (samples * bands);
      col = (k / bands) % samples;
      band = k % bands;
    }
    cube.data[band * plane + row * samples + col] = v;
  }
  return cube;
}

void write_envi(const HyperCube& cube, const fs::path& path) {
  cube.validate();
  const fs::path base = strip_hdr(path);
  fs::path header = base;
  header += ".hdr";
  fs::path raw = base;
  raw += ".img";

  std::ofstream h(header);
  if (!h) throw IoError("cannot write " + header.string());
  h << "ENVI\n"
    << "samples = " << cube.width << "\n"
    << "lines = " << cube.height << "\n"
    << "bands = " << cube.bands << "\n"
    << "header offset = 0\n"
    << "file type = ENVI Standard\n"
    << "data type = 4\n"
    << "interleave = bsq\n"
    << "byte order = 0\n";
  if (!cube.wavelengths.empty()) {
    h.precision(17);
    h << "wavelength = {";
    for (std::size_t k = 0; k < cube.wavelengths.size(); ++k)
      h << (k ? ", " : "") << cube.wavelengths[k];
    h << "}\n";
  }
  if (!h) throw IoError("cannot write " + header.string());

  std::vector<unsigned char> bytes(cube.data.size() * 4);
  for (std::size_t i = 0; i < cube.data.size(); ++i) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(cube.data[i]);
    for (int j = 0; j < 4; ++j) bytes[i * 4 + j] = static_cast<unsigned char>(bits >> (8 * j));
  }
  std::ofstream r(raw, std::ios::binary);
  if (!r || !r.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size())))
    throw IoError("cannot write " + raw.string());
}

namespace {

// Next whitespace-delimited PGM token, skipping '#' comments.
std::string pgm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

}  // namespace

BinaryMap read_map(const fs::path& path,
                   std::optional<std::pair<std::size_t, std::size_t>> expected_shape) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open map " + path.string());
  if (pgm_token(in) != "P5") throw FormatError("map " + path.string() + " is not a binary PGM (P5)");
  std::size_t width = 0, height = 0, maxval = 0;
  try {
    width = std::stoul(pgm_token(in));
    height = std::stoul(pgm_token(in));
    maxval = std::stoul(pgm_token(in));
  } catch (const std::exception&) {
    throw FormatError("map " + path.string() + " has a garbled PGM header");
  }
  if (width == 0 || height == 0) throw FormatError("map " + path.string() + " has zero size");
  if (maxval == 0 || maxval > 255)
    throw FormatError("map " + path.string() + " maxval must be in 1..255");
  if (expected_shape && (expected_shape->first != height || expected_shape->second != width))
    throw ShapeError("map " + path.string() + " is " + std::to_string(height) + "x" +
                     std::to_string(width) + ", expected " + std::to_string(expected_shape->first) +
                     "x" + std::to_string(expected_shape->second));

  // pgm_token consumed exactly one whitespace byte after maxval.
  std::vector<unsigned char> bytes(width * height);
  if (!in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size())))
    throw SizeError("map " + path.string() + " pixel data truncated", bytes.size(),
                    static_cast<std::size_t>(in.gcount()));
  BinaryMap map(height, width);
  for (std::size_t i = 0; i < bytes.size(); ++i) map.labels[i] = bytes[i] >= 128 ? 1 : 0;
  return map;
}

void write_map(const BinaryMap& map, const fs::path& path) {
  map.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << map.width << " " << map.height << "\n255\n";
  std::vector<unsigned char> bytes(map.labels.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = map.labels[i] ? 255 : 0;
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

CubePair normalize_pair(const CubePair& pair) {
  pair.validate();
  float peak = 0.0f;
  for (float v : pair.time1.data) peak = std::max(peak, std::abs(v));
  for (float v : pair.time2.data) peak = std::max(peak, std::abs(v));
  CubePair out = pair;
  if (peak == 0.0f) return out;
  for (float& v : out.time1.data) v /= peak;
  for (float& v : out.time2.data) v /= peak;
  return out;
}

HyperCube select_bands(const HyperCube& cube, std::span<const std::size_t> keep) {
  cube.validate();
  if (keep.empty()) throw ConfigError("band selection is empty");
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i] >= cube.bands)
      throw ConfigError("band index " + std::to_string(keep[i]) + " out of range (bands = " +
                        std::to_string(cube.bands) + ")");
    if (i > 0 && keep[i] <= keep[i - 1])
      throw ConfigError("band indices must be strictly increasing");
  }
  HyperCube out(cube.height, cube.width, keep.size());
  const std::size_t plane = cube.pixels();
  for (std::size_t k = 0; k < keep.size(); ++k) {
    std::copy_n(cube.data.begin() + static_cast<std::ptrdiff_t>(keep[k] * plane), plane,
                out.data.begin() + static_cast<std::ptrdiff_t>(k * plane));
    if (!cube.wavelengths.empty()) out.wavelengths.push_back(cube.wavelengths[keep[k]]);
  }
  return out;
}

}  // namespace getnet
