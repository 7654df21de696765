#include "osteoforge/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include <fmt/format.h>

namespace osteoforge {
namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kDataOffset = 352;  // header + 4-byte extension flag

enum Datatype : std::int16_t {
  kUint8 = 2,
  kInt16 = 4,
  kInt32 = 8,
  kFloat32 = 16,
  kFloat64 = 64,
  kInt8 = 256,
  kUint16 = 512,
  kUint32 = 768,
};

std::size_t datatype_size(std::int16_t datatype) {
  switch (datatype) {
    case kUint8:
    case kInt8:
      return 1;
    case kInt16:
    case kUint16:
      return 2;
    case kInt32:
    case kUint32:
    case kFloat32:
      return 4;
    case kFloat64:
      return 8;
    default:
      return 0;
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError(fmt::format("cannot open {}", path.string()));
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& compressed,
                                 const std::filesystem::path& path) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK) {
    throw Error(ErrorKind::kInternal, "inflateInit2 failed");
  }
  std::vector<std::uint8_t> out;
  std::array<std::uint8_t, 1 << 16> chunk{};
  zs.next_in = const_cast<Bytef*>(compressed.data());
  zs.avail_in = static_cast<uInt>(compressed.size());
  int rc = Z_OK;
  do {
    zs.next_out = chunk.data();
    zs.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw ValidationError(fmt::format("{}: corrupt or truncated gzip stream",
                                        path.string()));
    }
    out.insert(out.end(), chunk.data(), chunk.data() + (chunk.size() - zs.avail_out));
  } while (rc != Z_STREAM_END && (zs.avail_in > 0 || zs.avail_out == 0));
  inflateEnd(&zs);
  if (rc != Z_STREAM_END) {
    throw ValidationError(fmt::format("{}: truncated gzip stream", path.string()));
  }
  return out;
}

std::vector<std::uint8_t> gzip(std::span<const std::uint8_t> raw) {
  z_stream zs{};
  // windowBits 15 + 16 selects a gzip wrapper; zlib writes mtime 0, so output
  // is byte-identical across runs.
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8,
                   Z_DEFAULT_STRATEGY) != Z_OK) {
    throw Error(ErrorKind::kInternal, "deflateInit2 failed");
  }
  std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(raw.size())));
  zs.next_in = const_cast<Bytef*>(raw.data());
  zs.avail_in = static_cast<uInt>(raw.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) {
    throw Error(ErrorKind::kInternal, "gzip compression failed");
  }
  out.resize(zs.total_out);
  return out;
}

bool is_gzip(const std::vector<std::uint8_t>& bytes) {
  return bytes.size() >= 2 && bytes[0] == 0x1F && bytes[1] == 0x8B;
}

bool has_gz_extension(const std::filesystem::path& path) {
  return path.extension() == ".gz";
}

// Endian-aware field access into the raw header.
class HeaderView {
 public:
  HeaderView(std::span<const std::uint8_t> bytes, bool swap)
      : bytes_(bytes), swap_(swap) {}

  template <typename T>
  T get(std::size_t offset) const {
    std::array<std::uint8_t, sizeof(T)> raw{};
    std::memcpy(raw.data(), bytes_.data() + offset, sizeof(T));
    if (swap_) std::reverse(raw.begin(), raw.end());
    T value;
    std::memcpy(&value, raw.data(), sizeof(T));
    return value;
  }

  bool swapped() const { return swap_; }

 private:
  std::span<const std::uint8_t> bytes_;
  bool swap_;
};

class HeaderWriter {
 public:
  HeaderWriter() : bytes_(kDataOffset, 0) {}

  template <typename T>
  void put(std::size_t offset, T value) {
    static_assert(std::endian::native == std::endian::little,
                  "writer emits little-endian headers");
    std::memcpy(bytes_.data() + offset, &value, sizeof(T));
  }
  void put_bytes(std::size_t offset, const char* text, std::size_t n) {
    std::memcpy(bytes_.data() + offset, text, n);
  }

  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

struct ParsedHeader {
  Geometry geometry;
  std::int16_t datatype = 0;
  std::size_t vox_offset = kDataOffset;
  double slope = 0.0;
  double intercept = 0.0;
  bool swapped = false;
};

ParsedHeader parse_header(std::span<const std::uint8_t> bytes,
                          const std::filesystem::path& path) {
  const std::string name = path.string();
  if (bytes.size() < kHeaderSize) {
    throw ValidationError(fmt::format("{}: file shorter than a NIfTI-1 header", name));
  }
  std::int32_t sizeof_hdr = 0;
  std::memcpy(&sizeof_hdr, bytes.data(), sizeof(sizeof_hdr));
  bool swap = false;
  if (sizeof_hdr != static_cast<std::int32_t>(kHeaderSize)) {
    if (__builtin_bswap32(static_cast<std::uint32_t>(sizeof_hdr)) == kHeaderSize) {
      swap = true;
    } else {
      throw ValidationError(fmt::format("{}: sizeof_hdr is {}, expected 348", name,
                                        sizeof_hdr));
    }
  }
  if (!(bytes[344] == 'n' && bytes[345] == '+' && bytes[346] == '1' && bytes[347] == 0)) {
    throw ValidationError(
        fmt::format("{}: bad magic, expected single-file NIfTI-1 \"n+1\"", name));
  }
  const HeaderView h(bytes, swap);
  ParsedHeader out;
  out.swapped = swap;

  const auto ndim = h.get<std::int16_t>(40);
  if (ndim < 1 || ndim > 7) {
    throw ValidationError(fmt::format("{}: dim[0] = {} is invalid", name, ndim));
  }
  std::array<std::int64_t, 8> dim{};
  for (int i = 1; i <= 7; ++i) {
    dim[i] = i <= ndim ? h.get<std::int16_t>(40 + 2 * i) : 1;
    if (dim[i] < 1) {
      throw ValidationError(fmt::format("{}: dim[{}] = {} is not positive", name, i,
                                        dim[i]));
    }
  }
  for (int i = 4; i <= 7; ++i) {
    if (dim[i] != 1) {
      throw ValidationError(fmt::format(
          "{}: only 3D images are supported, dim[{}] = {}", name, i, dim[i]));
    }
  }
  out.geometry.dims = {static_cast<std::size_t>(dim[1]), static_cast<std::size_t>(dim[2]),
                       static_cast<std::size_t>(dim[3])};

  auto pixdim = [&](int i) {
    const double v = std::abs(static_cast<double>(h.get<float>(76 + 4 * i)));
    return v > 0.0 ? v : 1.0;
  };
  out.geometry.spacing = {pixdim(1), pixdim(2), ndim >= 3 ? pixdim(3) : 1.0};

  const auto qform_code = h.get<std::int16_t>(252);
  const auto sform_code = h.get<std::int16_t>(254);
  if (qform_code > 0) {
    out.geometry.origin = {h.get<float>(268), h.get<float>(272), h.get<float>(276)};
  } else if (sform_code > 0) {
    out.geometry.origin = {h.get<float>(280 + 12), h.get<float>(296 + 12),
                           h.get<float>(312 + 12)};
  }

  out.datatype = h.get<std::int16_t>(70);
  if (datatype_size(out.datatype) == 0) {
    throw ValidationError(
        fmt::format("{}: unsupported NIfTI datatype {}", name, out.datatype));
  }
  const double vox_offset = h.get<float>(108);
  out.vox_offset = vox_offset < static_cast<double>(kHeaderSize)
                       ? kHeaderSize
                       : static_cast<std::size_t>(vox_offset);
  out.slope = h.get<float>(112);
  out.intercept = h.get<float>(116);
  if (!std::isfinite(out.slope) || !std::isfinite(out.intercept)) {
    out.slope = 0.0;
    out.intercept = 0.0;
  }
  return out;
}

struct RawImage {
  ParsedHeader header;
  std::vector<std::uint8_t> bytes;  // whole (decompressed) file
};

RawImage load(const std::filesystem::path& path) {
  RawImage raw;
  raw.bytes = read_file(path);
  if (is_gzip(raw.bytes)) raw.bytes = gunzip(raw.bytes, path);
  raw.header = parse_header(raw.bytes, path);
  const std::size_t needed =
      raw.header.vox_offset +
      raw.header.geometry.dims.count() * datatype_size(raw.header.datatype);
  if (raw.bytes.size() < needed) {
    throw ValidationError(fmt::format("{}: truncated payload, {} bytes but {} needed",
                                      path.string(), raw.bytes.size(), needed));
  }
  return raw;
}

template <typename T>
T load_element(const std::uint8_t* p, bool swap) {
  std::array<std::uint8_t, sizeof(T)> b{};
  std::memcpy(b.data(), p, sizeof(T));
  if (swap) std::reverse(b.begin(), b.end());
  T v;
  std::memcpy(&v, b.data(), sizeof(T));
  return v;
}

// Decodes every voxel to double and applies scl_slope / scl_inter, handing the
// result to `sink(index, value)`.
template <typename Sink>
void decode(const RawImage& raw, Sink&& sink) {
  const ParsedHeader& h = raw.header;
  const std::size_t n = h.geometry.dims.count();
  const std::size_t width = datatype_size(h.datatype);
  const std::uint8_t* base = raw.bytes.data() + h.vox_offset;
  const bool scale = h.slope != 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* p = base + i * width;
    double v = 0.0;
    switch (h.datatype) {
      case kUint8: v = *p; break;
      case kInt8: v = static_cast<std::int8_t>(*p); break;
      case kInt16: v = load_element<std::int16_t>(p, h.swapped); break;
      case kUint16: v = load_element<std::uint16_t>(p, h.swapped); break;
      case kInt32: v = load_element<std::int32_t>(p, h.swapped); break;
      case kUint32: v = load_element<std::uint32_t>(p, h.swapped); break;
      case kFloat32: v = load_element<float>(p, h.swapped); break;
      case kFloat64: v = load_element<double>(p, h.swapped); break;
      default: break;
    }
    if (scale) v = v * h.slope + h.intercept;
    sink(i, v);
  }
}

template <typename T>
void write_image(const Grid<T>& grid, std::int16_t datatype,
                 const std::filesystem::path& path) {
  const Geometry& g = grid.geometry();
  for (std::size_t d : {g.dims.nx, g.dims.ny, g.dims.nz}) {
    if (d > static_cast<std::size_t>(std::numeric_limits<std::int16_t>::max())) {
      throw ValidationError("dimension exceeds the NIfTI-1 limit of 32767");
    }
  }
  HeaderWriter w;
  w.put<std::int32_t>(0, static_cast<std::int32_t>(kHeaderSize));
  w.put<char>(38, 'r');
  w.put<std::int16_t>(40, 3);
  w.put<std::int16_t>(42, static_cast<std::int16_t>(g.dims.nx));
  w.put<std::int16_t>(44, static_cast<std::int16_t>(g.dims.ny));
  w.put<std::int16_t>(46, static_cast<std::int16_t>(g.dims.nz));
  for (int i = 4; i <= 7; ++i) w.put<std::int16_t>(40 + 2 * i, 1);
  w.put<std::int16_t>(70, datatype);
  w.put<std::int16_t>(72, static_cast<std::int16_t>(8 * sizeof(T)));
  w.put<float>(76, 1.0f);  // qfac
  w.put<float>(80, static_cast<float>(g.spacing.x));
  w.put<float>(84, static_cast<float>(g.spacing.y));
  w.put<float>(88, static_cast<float>(g.spacing.z));
  w.put<float>(108, static_cast<float>(kDataOffset));
  w.put<float>(112, 1.0f);
  w.put<float>(116, 0.0f);
  w.put<char>(123, 2);  // NIFTI_UNITS_MM
  w.put_bytes(148, "osteoforge", 10);
  w.put<std::int16_t>(252, 1);
  w.put<std::int16_t>(254, 1);
  w.put<float>(268, static_cast<float>(g.origin.x));
  w.put<float>(272, static_cast<float>(g.origin.y));
  w.put<float>(276, static_cast<float>(g.origin.z));
  w.put<float>(280, static_cast<float>(g.spacing.x));
  w.put<float>(292, static_cast<float>(g.origin.x));
  w.put<float>(300, static_cast<float>(g.spacing.y));
  w.put<float>(308, static_cast<float>(g.origin.y));
  w.put<float>(320, static_cast<float>(g.spacing.z));
  w.put<float>(324, static_cast<float>(g.origin.z));
  w.put_bytes(344, "n+1\0", 4);

  std::vector<std::uint8_t>& bytes = w.bytes();
  const auto values = grid.values();
  const std::size_t payload = values.size() * sizeof(T);
  bytes.resize(kDataOffset + payload);
  std::memcpy(bytes.data() + kDataOffset, values.data(), payload);
  if (has_gz_extension(path)) bytes = gzip(bytes);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
}

}  // namespace

Volume read_volume(const std::filesystem::path& path) {
  const RawImage raw = load(path);
  std::vector<std::int16_t> data(raw.header.geometry.dims.count());
  decode(raw, [&](std::size_t i, double v) {
    const double r = std::clamp(round_half_away(v), -32768.0, 32767.0);
    data[i] = static_cast<std::int16_t>(r);
  });
  return Volume(raw.header.geometry, std::move(data));
}

Grid<std::uint8_t> read_u8_volume(const std::filesystem::path& path) {
  const RawImage raw = load(path);
  std::vector<std::uint8_t> data(raw.header.geometry.dims.count());
  decode(raw, [&](std::size_t i, double v) {
    const double r = round_half_away(v);
    if (!(r >= 0.0 && r <= 255.0)) {
      throw ValidationError(fmt::format("{}: voxel {} value {:g} is not a valid mask code",
                                        path.string(), i, v));
    }
    data[i] = static_cast<std::uint8_t>(r);
  });
  return Grid<std::uint8_t>(raw.header.geometry, std::move(data));
}

LabelVolume read_label_volume(const std::filesystem::path& path) {
  LabelVolume labels = read_u8_volume(path);
  validate_label_codes(labels);
  return labels;
}

Geometry read_geometry(const std::filesystem::path& path) {
  return load(path).header.geometry;
}

void write_volume(const Volume& volume, const std::filesystem::path& path) {
  write_image(volume, kInt16, path);
}

void write_volume(const Grid<std::uint8_t>& volume, const std::filesystem::path& path) {
  write_image(volume, kUint8, path);
}

}  // namespace osteoforge
