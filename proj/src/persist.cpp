#include "graphmpa/persist.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "graphmpa/error.hpp"
#include "json.hpp"

namespace graphmpa {

namespace {

using nlohmann::json;

constexpr std::string_view kMagic = "GRAPHMPA-INDEX";

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    out_ += s;
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const auto n = u64();
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  // element count whose elements take at least `min_bytes` each
  std::size_t count(std::size_t min_bytes) {
    const auto n = u64();
    if (min_bytes > 0 && n > (in_.size() - pos_) / min_bytes)
      throw IndexFormatError("index body: element count exceeds the remaining bytes");
    return static_cast<std::size_t>(n);
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (n > in_.size() - pos_) throw IndexFormatError("index body ends inside a field");
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

void write_config(Writer& w, const BuildConfig& c) {
  w.u64(c.large);
  w.u64(c.small);
  w.u64(c.n_layers);
  w.f64(c.tau);
  w.u64(c.k_edges);
  w.u64(c.top_k_retrieval);
  w.f64(c.resolution);
  w.u64(c.seed);
}

BuildConfig read_config(Reader& r) {
  BuildConfig c;
  c.large = r.u64();
  c.small = r.u64();
  c.n_layers = r.u64();
  c.tau = r.f64();
  c.k_edges = r.u64();
  c.top_k_retrieval = r.u64();
  c.resolution = r.f64();
  c.seed = r.u64();
  return c;
}

json config_json(const BuildConfig& c) {
  return json{{"large", c.large},       {"small", c.small},
              {"n_layers", c.n_layers}, {"tau", c.tau},
              {"k_edges", c.k_edges},   {"top_k_retrieval", c.top_k_retrieval},
              {"resolution", c.resolution}, {"seed", c.seed}};
}

BuildConfig config_from_json(const json& j) {
  BuildConfig c;
  c.large = j.at("large").get<std::size_t>();
  c.small = j.at("small").get<std::size_t>();
  c.n_layers = j.at("n_layers").get<std::size_t>();
  c.tau = j.at("tau").get<double>();
  c.k_edges = j.at("k_edges").get<std::size_t>();
  c.top_k_retrieval = j.at("top_k_retrieval").get<std::size_t>();
  c.resolution = j.at("resolution").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

std::string manifest_line(const IndexManifest& m) {
  const json j{{"format_version", m.format_version}, {"config", config_json(m.config)},
               {"layer_count", m.layer_count},       {"chunk_count", m.chunk_count},
               {"body_size", m.body_size},           {"checksum", m.checksum}};
  return j.dump();
}

IndexManifest make_manifest(const HierarchicalIndex& index, const std::string& body) {
  IndexManifest m;
  m.config = index.config;
  m.layer_count = index.layers.size();
  m.chunk_count = index.chunks.size();
  m.body_size = body.size();
  m.checksum = sha256_hex(body);
  return m;
}

struct RawFile {
  IndexManifest manifest;
  std::string body;
};

RawFile read_raw(const std::filesystem::path& path, bool with_body) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IndexFormatError("cannot open index file " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};

  const auto magic_end = bytes.find('\n');
  if (magic_end == std::string::npos) {
    if (std::string_view(kMagic).starts_with(bytes)) throw TruncatedFileError("index file ends in its header");
    throw IndexFormatError("not an index file");
  }
  if (std::string_view(bytes).substr(0, magic_end) != kMagic)
    throw IndexFormatError("not an index file");

  const auto manifest_end = bytes.find('\n', magic_end + 1);
  if (manifest_end == std::string::npos) throw TruncatedFileError("index file ends in its header");
  const std::string line = bytes.substr(magic_end + 1, manifest_end - magic_end - 1);

  RawFile raw;
  json j;
  try {
    j = json::parse(line);
    if (!j.is_object()) throw IndexFormatError("index manifest is not an object");
    raw.manifest.format_version = j.at("format_version").get<int>();
  } catch (const json::exception&) {
    throw ChecksumError("index manifest is corrupted");
  }
  if (raw.manifest.format_version != kIndexFormatVersion)
    throw VersionMismatchError("index format version " +
                               std::to_string(raw.manifest.format_version) + " is not supported (expected " +
                               std::to_string(kIndexFormatVersion) + ")");
  try {
    raw.manifest.config = config_from_json(j.at("config"));
    raw.manifest.layer_count = j.at("layer_count").get<std::size_t>();
    raw.manifest.chunk_count = j.at("chunk_count").get<std::size_t>();
    raw.manifest.body_size = j.at("body_size").get<std::uint64_t>();
    raw.manifest.checksum = j.at("checksum").get<std::string>();
  } catch (const json::exception&) {
    throw ChecksumError("index manifest is corrupted");
  }
  if (manifest_line(raw.manifest) != line) throw ChecksumError("index manifest is corrupted");
  if (!with_body) return raw;

  const std::size_t body_start = manifest_end + 1;
  const std::uint64_t available = bytes.size() - body_start;
  if (available < raw.manifest.body_size)
    throw TruncatedFileError("index file is truncated: body has " + std::to_string(available) +
                             " of " + std::to_string(raw.manifest.body_size) + " bytes");
  if (available > raw.manifest.body_size)
    throw IndexFormatError("index file has trailing bytes after its body");
  raw.body = bytes.substr(body_start);
  if (sha256_hex(raw.body) != raw.manifest.checksum)
    throw ChecksumError("index checksum mismatch");
  return raw;
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    hex.push_back(kHex[digest[i] >> 4]);
    hex.push_back(kHex[digest[i] & 15]);
  }
  return hex;
}

std::string serialize_index(const HierarchicalIndex& index) {
  Writer w;
  write_config(w, index.config);

  w.u64(index.chunks.size());
  for (const auto& [id, c] : index.chunks) {
    w.u64(c.id);
    w.u8(static_cast<std::uint8_t>(c.kind));
    w.u64(c.layer_index);
    w.u64(c.token_count);
    w.str(c.text);
    w.u64(c.source_ids.size());
    for (auto s : c.source_ids) w.u64(s);
  }

  w.u64(index.layers.size());
  for (const auto& layer : index.layers) {
    w.u64(layer.layer_index);
    w.u64(layer.node_ids.size());
    for (auto id : layer.node_ids) w.u64(id);
    w.u64(layer.embeddings.size());
    for (const auto& e : layer.embeddings) {
      w.u64(e.values.size());
      for (double x : e.values) w.f64(x);
    }
    w.u64(layer.edges.size());
    for (const auto& e : layer.edges) {
      w.u32(e.u);
      w.u32(e.v);
      w.f64(e.w);
    }
  }

  w.u64(index.communities.size());
  for (const auto& records : index.communities) {
    w.u64(records.size());
    for (const auto& rec : records) {
      w.u32(rec.community_id);
      w.u64(rec.summary_id);
      w.u64(rec.members.size());
      for (auto m : rec.members) w.u32(m);
    }
  }
  return w.take();
}

HierarchicalIndex deserialize_index(const std::string& body) {
  Reader r(body);
  HierarchicalIndex index;
  index.config = read_config(r);

  const auto chunk_count = r.count(8);
  for (std::size_t i = 0; i < chunk_count; ++i) {
    DocumentChunk c;
    c.id = r.u64();
    const auto kind = r.u8();
    if (kind > 1) throw IndexFormatError("index body: unknown chunk kind");
    c.kind = static_cast<ChunkKind>(kind);
    c.layer_index = r.u64();
    c.token_count = r.u64();
    c.text = r.str();
    const auto sources = r.count(8);
    c.source_ids.reserve(sources);
    for (std::size_t s = 0; s < sources; ++s) c.source_ids.push_back(r.u64());
    const auto id = c.id;
    if (!index.chunks.emplace(id, std::move(c)).second)
      throw IndexFormatError("index body: duplicate chunk id");
  }

  const auto layer_count = r.count(8);
  index.layers.resize(layer_count);
  for (auto& layer : index.layers) {
    layer.layer_index = r.u64();
    const auto nodes = r.count(8);
    layer.node_ids.reserve(nodes);
    for (std::size_t i = 0; i < nodes; ++i) layer.node_ids.push_back(r.u64());
    const auto embeddings = r.count(8);
    layer.embeddings.resize(embeddings);
    for (auto& e : layer.embeddings) {
      const auto dim = r.count(8);
      e.values.resize(dim);
      for (double& x : e.values) x = r.f64();
    }
    const auto edges = r.count(16);
    layer.edges.resize(edges);
    for (auto& e : layer.edges) {
      e.u = r.u32();
      e.v = r.u32();
      e.w = r.f64();
    }
  }

  const auto community_layers = r.count(8);
  index.communities.resize(community_layers);
  for (auto& records : index.communities) {
    records.resize(r.count(20));
    for (auto& rec : records) {
      rec.community_id = r.u32();
      rec.summary_id = r.u64();
      const auto members = r.count(4);
      rec.members.resize(members);
      for (auto& m : rec.members) m = r.u32();
    }
  }
  if (!r.done()) throw IndexFormatError("index body has unread bytes");
  return index;
}

IndexManifest save_index(const HierarchicalIndex& index, const std::filesystem::path& path) {
  const std::string body = serialize_index(index);
  const IndexManifest manifest = make_manifest(index, body);

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << kMagic << '\n' << manifest_line(manifest) << '\n';
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out.flush()) throw std::runtime_error("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
  return manifest;
}

HierarchicalIndex load_index(const std::filesystem::path& path) {
  const RawFile raw = read_raw(path, true);
  HierarchicalIndex index = deserialize_index(raw.body);
  if (index.config != raw.manifest.config || index.layers.size() != raw.manifest.layer_count ||
      index.chunks.size() != raw.manifest.chunk_count)
    throw ChecksumError("index manifest disagrees with its body");
  return index;
}

IndexManifest read_manifest(const std::filesystem::path& path) {
  return read_raw(path, false).manifest;
}

}  // namespace graphmpa
