#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace qednet {

// All on-disk artifacts share one framing:
//   bytes 0..7   magic (format id + version digit)
//   u32 LE       header length
//   ...          UTF-8 JSON header
//   ...          payload bytes
//   u64 LE       FNV-1a 64 checksum of the payload
enum class ContainerErrorKind {
  BadMagic,
  VersionMismatch,
  HeaderInvalid,
  Truncated,
  ChecksumMismatch,
  IoFailure,
};

class ContainerError : public std::runtime_error {
 public:
  ContainerError(ContainerErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ContainerErrorKind kind() const { return kind_; }

 private:
  ContainerErrorKind kind_;
};

std::uint64_t fnv1a64(const void* data, std::size_t n);

struct ContainerPayload {
  std::string header_json;
  std::vector<std::uint8_t> payload;
};

// `magic` must be 8 bytes; its last byte is the format version digit, and a
// file whose first 7 bytes match but whose version differs reports
// VersionMismatch rather than BadMagic.
ContainerPayload read_container(const std::filesystem::path& path,
                                const std::string& magic);

// Writes to a temporary file in the destination directory and renames it in
// place, so a failed write never leaves a partial artifact behind.
void write_container(const std::filesystem::path& path,
                     const std::string& magic, const std::string& header_json,
                     const void* payload, std::size_t payload_size);

// Same write-to-temp-then-rename discipline for plain text artifacts (CSV).
void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content);

}  // namespace qednet
