#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "graphmpa/index.hpp"

namespace graphmpa {

inline constexpr int kIndexFormatVersion = 1;

/// Header of a stored index. The file is a magic line, this manifest as one
/// line of compact JSON, then the binary body it describes.
struct IndexManifest {
  int format_version = kIndexFormatVersion;
  BuildConfig config;
  std::size_t layer_count = 0;
  std::size_t chunk_count = 0;
  std::uint64_t body_size = 0;
  std::string checksum;  // SHA-256 of the body, lowercase hex

  friend bool operator==(const IndexManifest&, const IndexManifest&) = default;
};

/// Little-endian, length-prefixed body: config, chunks, layers (node ids,
/// embeddings as raw doubles, edge triples), communities.
std::string serialize_index(const HierarchicalIndex& index);
HierarchicalIndex deserialize_index(const std::string& body);

std::string sha256_hex(const std::string& bytes);

/// Writes to a temporary sibling and renames it into place.
IndexManifest save_index(const HierarchicalIndex& index, const std::filesystem::path& path);

/// Throws VersionMismatchError, ChecksumError or TruncatedFileError for those
/// failures and IndexFormatError for anything else malformed.
HierarchicalIndex load_index(const std::filesystem::path& path);

/// Reads and checks only the header.
IndexManifest read_manifest(const std::filesystem::path& path);

}  // namespace graphmpa
