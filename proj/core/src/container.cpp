#include "qednet/container.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>

namespace qednet {
namespace {

void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) out.push_back((x >> (8 * i)) & 0xff);
}

void put_u64le(std::vector<std::uint8_t>& out, std::uint64_t x) {
  for (int i = 0; i < 8; ++i) out.push_back((x >> (8 * i)) & 0xff);
}

std::uint32_t get_u32le(const std::uint8_t* p) {
  std::uint32_t x = 0;
  for (int i = 0; i < 4; ++i) x |= std::uint32_t(p[i]) << (8 * i);
  return x;
}

std::uint64_t get_u64le(const std::uint8_t* p) {
  std::uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x |= std::uint64_t(p[i]) << (8 * i);
  return x;
}

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  std::uint64_t h = 14695981039346656037ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

ContainerPayload read_container(const std::filesystem::path& path,
                                const std::string& magic) {
  if (magic.size() != 8) throw std::logic_error("magic must be 8 bytes");

  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ContainerError(ContainerErrorKind::IoFailure,
                         "cannot open " + path.string());
  }
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                  std::istreambuf_iterator<char>()};

  if (bytes.size() < 8 ||
      std::memcmp(bytes.data(), magic.data(), 7) != 0) {
    throw ContainerError(ContainerErrorKind::BadMagic,
                         path.string() + ": bad magic");
  }
  if (bytes[7] != static_cast<std::uint8_t>(magic[7])) {
    throw ContainerError(ContainerErrorKind::VersionMismatch,
                         path.string() + ": unsupported format version");
  }
  if (bytes.size() < 12) {
    throw ContainerError(ContainerErrorKind::Truncated,
                         path.string() + ": truncated header");
  }
  const std::size_t header_len = get_u32le(bytes.data() + 8);
  const std::size_t payload_off = 12 + header_len;
  if (bytes.size() < payload_off + 8) {
    throw ContainerError(ContainerErrorKind::Truncated,
                         path.string() + ": truncated header");
  }
  const std::size_t payload_len = bytes.size() - payload_off - 8;

  ContainerPayload out;
  out.header_json.assign(bytes.begin() + 12, bytes.begin() + payload_off);
  out.payload.assign(bytes.begin() + payload_off,
                     bytes.begin() + payload_off + payload_len);

  const std::uint64_t stored = get_u64le(bytes.data() + payload_off + payload_len);
  const std::uint64_t actual = fnv1a64(out.payload.data(), out.payload.size());
  if (stored != actual) {
    throw ContainerError(ContainerErrorKind::ChecksumMismatch,
                         path.string() + ": payload checksum mismatch");
  }
  return out;
}

namespace {

void write_bytes_atomic(const std::filesystem::path& path, const void* data,
                        std::size_t n) {
  auto dir = path.parent_path();
  if (dir.empty()) dir = ".";
  const auto tmp =
      dir / (path.filename().string() + ".tmp" +
             std::to_string(std::random_device{}() & 0xffffff));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw ContainerError(ContainerErrorKind::IoFailure,
                           "cannot create " + tmp.string());
    }
    out.write(static_cast<const char*>(data),
              static_cast<std::streamsize>(n));
    if (!out) {
      throw ContainerError(ContainerErrorKind::IoFailure,
                           "short write to " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw ContainerError(ContainerErrorKind::IoFailure,
                         "cannot move " + tmp.string() + " to " +
                             path.string());
  }
}

}  // namespace

void write_container(const std::filesystem::path& path,
                     const std::string& magic, const std::string& header_json,
                     const void* payload, std::size_t payload_size) {
  if (magic.size() != 8) throw std::logic_error("magic must be 8 bytes");

  std::vector<std::uint8_t> bytes;
  bytes.reserve(20 + header_json.size() + payload_size);
  bytes.insert(bytes.end(), magic.begin(), magic.end());
  put_u32le(bytes, static_cast<std::uint32_t>(header_json.size()));
  bytes.insert(bytes.end(), header_json.begin(), header_json.end());
  const auto* p = static_cast<const std::uint8_t*>(payload);
  bytes.insert(bytes.end(), p, p + payload_size);
  put_u64le(bytes, fnv1a64(payload, payload_size));

  write_bytes_atomic(path, bytes.data(), bytes.size());
}

void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content) {
  write_bytes_atomic(path, content.data(), content.size());
}

}  // namespace qednet
