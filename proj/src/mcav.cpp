#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>

#include "mca/data.hpp"

namespace mca {

namespace {

constexpr char kMagic[4] = {'M', 'C', 'A', 'V'};
constexpr std::size_t kHeaderBytes = 24;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint16_t get_u16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<std::uint8_t> encode_mcav(const VideoU8& video, int label) {
  require_rgb(video.shape(), "encode_mcav");
  if (label < 0 || label > 0xffff) throw InvalidArgument("label does not fit in 16 bits");
  const VideoShape& s = video.shape();
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + s.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u16(out, kMcavVersion);
  put_u32(out, static_cast<std::uint32_t>(s.frames));
  put_u32(out, static_cast<std::uint32_t>(s.channels));
  put_u32(out, static_cast<std::uint32_t>(s.height));
  put_u32(out, static_cast<std::uint32_t>(s.width));
  put_u16(out, static_cast<std::uint16_t>(label));
  out.insert(out.end(), video.data(), video.data() + s.size());
  return out;
}

LabeledVideo decode_mcav(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw FormatError(FormatError::Kind::kBadMagic, "not an MCAV file (bad magic)");
  }
  if (bytes.size() < kHeaderBytes) throw FormatError(FormatError::Kind::kTruncated, "MCAV header is truncated");
  const std::uint8_t* p = bytes.data();
  const std::uint16_t version = get_u16(p + 4);
  if (version != kMcavVersion) {
    throw FormatError(FormatError::Kind::kVersionMismatch,
                      "MCAV version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kMcavVersion) + ")");
  }
  VideoShape shape{get_u32(p + 6), get_u32(p + 10), get_u32(p + 14), get_u32(p + 18)};
  const int label = get_u16(p + 22);
  if (shape.channels != 3) {
    throw FormatError(FormatError::Kind::kMalformed, "MCAV clip has " + std::to_string(shape.channels) + " channels");
  }
  if (shape.frames < 1 || shape.height < 1 || shape.width < 1) {
    throw FormatError(FormatError::Kind::kMalformed, "MCAV clip has an empty dimension");
  }
  const std::size_t payload = bytes.size() - kHeaderBytes;
  const auto expected = static_cast<std::size_t>(shape.size());
  if (payload < expected) {
    throw FormatError(FormatError::Kind::kTruncated, "MCAV payload holds " + std::to_string(payload) +
                                                         " bytes, header promises " + std::to_string(expected));
  }
  if (payload > expected) {
    throw FormatError(FormatError::Kind::kMalformed, "MCAV file has trailing bytes after the payload");
  }
  VideoU8 video(shape);
  std::copy_n(p + kHeaderBytes, expected, video.data());
  return {std::move(video), label};
}

void write_mcav(const VideoU8& video, int label, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = encode_mcav(video, label);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

LabeledVideo read_mcav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_mcav(bytes);
}

Dataset load_mcav_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".mcav") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  Dataset data;
  for (const auto& f : files) {
    LabeledVideo lv = read_mcav(f);
    data.push_back(std::move(lv.video), lv.label);
  }
  return data;
}

void save_mcav_dir(const Dataset& data, const std::filesystem::path& dir, const std::string& prefix) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < data.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.mcav", i);
    write_mcav(data.videos[i], data.labels[i], dir / (prefix + name));
  }
}

}  // namespace mca
