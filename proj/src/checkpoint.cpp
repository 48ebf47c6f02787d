#include "mca/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace mca {

namespace {

constexpr char kMagic[4] = {'M', 'C', 'A', 'K'};
constexpr std::size_t kHeaderBytes = 4 + 2 + 6 * 4 + 8 + 8;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(const std::uint8_t* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
  return v;
}

std::array<std::uint32_t, 6> config_fields(const NetConfig& c) {
  return {static_cast<std::uint32_t>(c.classes),        static_cast<std::uint32_t>(c.frames),
          static_cast<std::uint32_t>(c.height),         static_cast<std::uint32_t>(c.width),
          static_cast<std::uint32_t>(c.conv1_channels), static_cast<std::uint32_t>(c.conv2_channels)};
}

}  // namespace

std::uint64_t config_digest(const NetConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::uint32_t field : config_fields(config)) {
    for (int i = 0; i < 4; ++i) {
      h ^= (field >> (8 * i)) & 0xff;
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

std::vector<std::uint8_t> encode_checkpoint(const SmallNet<float>& net) {
  const std::vector<float> params = net.flat_parameters();
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + 4 * params.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_le<std::uint16_t>(out, kCheckpointVersion);
  for (std::uint32_t f : config_fields(net.config())) put_le(out, f);
  put_le(out, config_digest(net.config()));
  put_le<std::uint64_t>(out, params.size());
  for (float v : params) put_le(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

SmallNet<float> decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw FormatError(FormatError::Kind::kBadMagic, "not a checkpoint (bad magic)");
  }
  if (bytes.size() < kHeaderBytes) throw FormatError(FormatError::Kind::kTruncated, "checkpoint header is truncated");
  const std::uint8_t* p = bytes.data() + 4;
  const auto version = get_le<std::uint16_t>(p);
  if (version != kCheckpointVersion) {
    throw FormatError(FormatError::Kind::kVersionMismatch, "checkpoint version " + std::to_string(version) +
                                                               " is not supported");
  }
  p += 2;
  std::array<std::uint32_t, 6> f{};
  for (auto& v : f) {
    v = get_le<std::uint32_t>(p);
    p += 4;
  }
  NetConfig config{static_cast<int>(f[0]), static_cast<int>(f[1]), static_cast<int>(f[2]),
                   static_cast<int>(f[3]), static_cast<int>(f[4]), static_cast<int>(f[5])};
  const auto digest = get_le<std::uint64_t>(p);
  p += 8;
  if (digest != config_digest(config)) {
    throw FormatError(FormatError::Kind::kDigestMismatch, "checkpoint config digest does not match its header");
  }
  const auto count = get_le<std::uint64_t>(p);
  p += 8;
  SmallNet<float> net(config);
  if (count != static_cast<std::uint64_t>(net.parameter_count())) {
    throw FormatError(FormatError::Kind::kMalformed, "checkpoint parameter count does not match its config");
  }
  if (bytes.size() - kHeaderBytes != 4 * count) {
    throw FormatError(FormatError::Kind::kTruncated, "checkpoint parameter stream has the wrong length");
  }
  std::vector<float> params(count);
  for (auto& v : params) {
    v = std::bit_cast<float>(get_le<std::uint32_t>(p));
    p += 4;
  }
  net.set_flat_parameters(params);
  return net;
}

void save_checkpoint(const SmallNet<float>& net, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

SmallNet<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace mca
