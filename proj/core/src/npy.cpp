#include "lesionuq/npy.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lesionuq {
namespace {

static_assert(std::endian::native == std::endian::little,
              "NPY I/O assumes a little-endian host");

constexpr std::array<char, 6> kMagic = {'\x93', 'N', 'U', 'M', 'P', 'Y'};
constexpr std::size_t kAlign = 64;

struct Header {
  char byte_order = '<';
  char kind = 'f';
  std::size_t item_size = 8;
  bool fortran_order = false;
  std::vector<std::size_t> shape;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (in.bad()) throw IoError("read failure on " + path.string());
  return bytes;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\n')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

// Value text following 'key': in a python dict literal.
std::string_view dict_value(std::string_view dict, std::string_view key) {
  const std::string quoted = "'" + std::string(key) + "'";
  auto pos = dict.find(quoted);
  if (pos == std::string_view::npos) throw FormatError("NPY header lacks key " + quoted);
  pos = dict.find(':', pos + quoted.size());
  if (pos == std::string_view::npos) throw FormatError("NPY header malformed near " + quoted);
  auto rest = trim(dict.substr(pos + 1));
  std::size_t end = 0;
  if (!rest.empty() && rest.front() == '(') {
    end = rest.find(')');
    if (end == std::string_view::npos) throw FormatError("NPY header: unterminated shape tuple");
    return rest.substr(0, end + 1);
  }
  if (!rest.empty() && rest.front() == '\'') {
    end = rest.find('\'', 1);
    if (end == std::string_view::npos) throw FormatError("NPY header: unterminated string");
    return rest.substr(0, end + 1);
  }
  end = rest.find_first_of(",}");
  return trim(rest.substr(0, end));
}

Header parse_header(std::string_view text) {
  text = trim(text);
  if (text.size() < 2 || text.front() != '{' || text.back() != '}') {
    throw FormatError("NPY header is not a dict literal");
  }
  Header h;
  auto descr = dict_value(text, "descr");
  if (descr.size() < 4 || descr.front() != '\'' || descr.back() != '\'') {
    throw FormatError("NPY header: bad descr");
  }
  descr = descr.substr(1, descr.size() - 2);
  h.byte_order = descr[0];
  h.kind = descr[1];
  if (h.byte_order != '<' && h.byte_order != '|' && h.byte_order != '=') {
    throw FormatError("NPY dtype '" + std::string(descr) + "' is not little-endian");
  }
  try {
    h.item_size = std::stoul(std::string(descr.substr(2)));
  } catch (const std::exception&) {
    throw FormatError("NPY header: bad item size in descr");
  }

  const auto fortran = dict_value(text, "fortran_order");
  if (fortran == "True") {
    h.fortran_order = true;
  } else if (fortran != "False") {
    throw FormatError("NPY header: bad fortran_order");
  }

  auto shape = dict_value(text, "shape");
  if (shape.size() < 2 || shape.front() != '(') throw FormatError("NPY header: bad shape");
  shape = shape.substr(1, shape.size() - 2);
  while (!trim(shape).empty()) {
    const auto comma = shape.find(',');
    const auto item = trim(shape.substr(0, comma));
    if (!item.empty()) {
      std::size_t value = 0;
      for (char c : item) {
        if (c < '0' || c > '9') throw FormatError("NPY header: non-integer shape entry");
        value = value * 10 + static_cast<std::size_t>(c - '0');
      }
      h.shape.push_back(value);
    }
    if (comma == std::string_view::npos) break;
    shape.remove_prefix(comma + 1);
  }
  return h;
}

struct RawArray {
  Header header;
  Dims dims;
  std::string_view payload;
};

RawArray parse_npy(const std::string& bytes, std::size_t max_extent) {
  if (bytes.size() < 10 || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw FormatError("missing NPY magic string");
  }
  const auto major = static_cast<unsigned char>(bytes[6]);
  const auto minor = static_cast<unsigned char>(bytes[7]);
  std::size_t header_len = 0;
  std::size_t prefix = 0;
  if (major == 1 && minor == 0) {
    header_len = static_cast<unsigned char>(bytes[8]) |
                 (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
    prefix = 10;
  } else if (major == 2 && minor == 0) {
    if (bytes.size() < 12) throw FormatError("truncated NPY v2 preamble");
    std::uint32_t len = 0;
    std::memcpy(&len, bytes.data() + 8, sizeof(len));
    header_len = len;
    prefix = 12;
  } else {
    throw FormatError("unsupported NPY version " + std::to_string(major) + "." +
                      std::to_string(minor));
  }
  if (bytes.size() < prefix + header_len) throw FormatError("truncated NPY header");

  RawArray raw;
  raw.header = parse_header(std::string_view(bytes).substr(prefix, header_len));
  if (raw.header.shape.size() != 3) {
    throw ShapeError("expected a rank-3 array, got rank " +
                     std::to_string(raw.header.shape.size()));
  }
  if (raw.header.fortran_order) throw ShapeError("fortran-ordered arrays are not supported");
  raw.dims = Dims{raw.header.shape[2], raw.header.shape[1], raw.header.shape[0]};
  raw.dims.validate(max_extent);

  const std::size_t need = raw.dims.voxel_count() * raw.header.item_size;
  const std::size_t have = bytes.size() - prefix - header_len;
  if (have < need) {
    throw FormatError("truncated NPY payload: expected " + std::to_string(need) +
                      " bytes, found " + std::to_string(have));
  }
  raw.payload = std::string_view(bytes).substr(prefix + header_len, need);
  return raw;
}

template <class Src, class Dst>
void convert(std::string_view payload, std::vector<Dst>& out) {
  const std::size_t n = payload.size() / sizeof(Src);
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Src v;
    std::memcpy(&v, payload.data() + i * sizeof(Src), sizeof(Src));
    out[i] = static_cast<Dst>(v);
  }
}

template <class Dst>
bool convert_integer(const Header& h, std::string_view payload, std::vector<Dst>& out) {
  if (h.kind == 'u') {
    switch (h.item_size) {
      case 1: convert<std::uint8_t>(payload, out); return true;
      case 2: convert<std::uint16_t>(payload, out); return true;
      case 4: convert<std::uint32_t>(payload, out); return true;
      case 8: convert<std::uint64_t>(payload, out); return true;
    }
  } else if (h.kind == 'i') {
    switch (h.item_size) {
      case 1: convert<std::int8_t>(payload, out); return true;
      case 2: convert<std::int16_t>(payload, out); return true;
      case 4: convert<std::int32_t>(payload, out); return true;
      case 8: convert<std::int64_t>(payload, out); return true;
    }
  } else if (h.kind == 'b' && h.item_size == 1) {
    convert<std::uint8_t>(payload, out);
    return true;
  }
  return false;
}

std::string make_header(std::string_view descr, const Dims& dims) {
  std::string dict = "{'descr': '" + std::string(descr) +
                     "', 'fortran_order': False, 'shape': (" + std::to_string(dims.nz) +
                     ", " + std::to_string(dims.ny) + ", " + std::to_string(dims.nx) +
                     "), }";
  // Same padding rule numpy uses: magic + version + length + header + '\n'
  // lands on a 64-byte boundary.
  const std::size_t pad = kAlign - ((kMagic.size() + 2 + 2 + dict.size() + 1) % kAlign);
  dict.append(pad, ' ');
  dict.push_back('\n');
  return dict;
}

void write_npy(const std::filesystem::path& path, std::string_view descr, const Dims& dims,
               const void* data, std::size_t bytes) {
  const std::string header = make_header(descr, dims);
  if (header.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw FormatError("NPY header too long for format v1.0");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kMagic.data(), kMagic.size());
  const char version[2] = {1, 0};
  out.write(version, 2);
  const auto len = static_cast<std::uint16_t>(header.size());
  const char len_bytes[2] = {static_cast<char>(len & 0xff), static_cast<char>(len >> 8)};
  out.write(len_bytes, 2);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  out.flush();
  if (!out) throw IoError("write failure on " + path.string());
}

}  // namespace

Volume load_volume(const std::filesystem::path& path, std::size_t max_extent) {
  const std::string bytes = read_file(path);
  const RawArray raw = parse_npy(bytes, max_extent);
  std::vector<double> data;
  const Header& h = raw.header;
  if (h.kind == 'f' && h.item_size == 8) {
    convert<double>(raw.payload, data);
  } else if (h.kind == 'f' && h.item_size == 4) {
    convert<float>(raw.payload, data);
  } else if (!convert_integer(h, raw.payload, data)) {
    throw FormatError("unsupported dtype for a real volume: " + std::string(1, h.kind) +
                      std::to_string(h.item_size));
  }
  Volume v(raw.dims, std::move(data));
  require_finite(v);
  return v;
}

LabelVolume load_labels(const std::filesystem::path& path, std::size_t max_extent) {
  const std::string bytes = read_file(path);
  const RawArray raw = parse_npy(bytes, max_extent);
  std::vector<std::int64_t> wide;
  const Header& h = raw.header;
  if (h.kind == 'u' && h.item_size == 8) {
    std::vector<std::uint64_t> u;
    convert<std::uint64_t>(raw.payload, u);
    if (std::any_of(u.begin(), u.end(),
                    [](std::uint64_t l) { return l > std::numeric_limits<std::uint32_t>::max(); })) {
      throw DataError("label exceeds 32-bit range in " + path.string());
    }
    wide.assign(u.begin(), u.end());
  } else if (!convert_integer(h, raw.payload, wide)) {
    throw FormatError("label volumes need an integer dtype, got " + std::string(1, h.kind) +
                      std::to_string(h.item_size));
  }
  std::vector<std::uint32_t> labels(wide.size());
  for (std::size_t i = 0; i < wide.size(); ++i) {
    if (wide[i] < 0 || wide[i] > std::numeric_limits<std::uint32_t>::max()) {
      throw DataError("label out of range at linear index " + std::to_string(i));
    }
    labels[i] = static_cast<std::uint32_t>(wide[i]);
  }
  return LabelVolume(raw.dims, std::move(labels));
}

void save_volume(const Volume& v, const std::filesystem::path& path) {
  write_npy(path, "<f8", v.dims(), v.values().data(), v.size() * sizeof(double));
}

void save_labels(const LabelVolume& v, const std::filesystem::path& path) {
  if (max_label(v) <= std::numeric_limits<std::uint8_t>::max()) {
    std::vector<std::uint8_t> bytes(v.values().begin(), v.values().end());
    write_npy(path, "|u1", v.dims(), bytes.data(), bytes.size());
  } else {
    write_npy(path, "<u4", v.dims(), v.values().data(), v.size() * sizeof(std::uint32_t));
  }
}

}  // namespace lesionuq
