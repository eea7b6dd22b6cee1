#include "mmdrive/nn/serialization.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <iterator>
#include <ostream>

namespace mmdrive::nn {
namespace {

using Kind = ModelFormatError::Kind;

void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(const std::string& buf, std::size_t pos, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
  }
  return v;
}

void put_values(std::string& out, std::span<const double> values) {
  for (double d : values) put_le(out, std::bit_cast<std::uint64_t>(d), 8);
}

void take_values(const std::string& buf, std::size_t& pos, std::span<double> dst) {
  for (double& d : dst) {
    d = std::bit_cast<double>(get_le(buf, pos, 8));
    pos += 8;
  }
}

}  // namespace

void write_container(std::ostream& out, const nlohmann::json& metadata,
                     std::span<const Network* const> networks, std::span<const NamedBlob> blobs) {
  std::string payload;
  nlohmann::json nets = nlohmann::json::array();
  for (const Network* net : networks) {
    nets.push_back(net->manifest());
    for (const Parameter* p : net->parameter_list()) put_values(payload, p->value.values());
  }
  nlohmann::json blob_manifest = nlohmann::json::array();
  for (const auto& b : blobs) {
    blob_manifest.push_back({{"name", b.name}, {"count", b.values.size()}});
    put_values(payload, b.values);
  }
  nlohmann::json manifest = {{"metadata", metadata},
                             {"networks", std::move(nets)},
                             {"blobs", std::move(blob_manifest)},
                             {"payload_bytes", payload.size()}};
  const std::string text = manifest.dump();

  std::string header(kModelMagic, sizeof(kModelMagic));
  put_le(header, kModelFormatVersion, 4);
  put_le(header, text.size(), 4);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  std::string len;
  put_le(len, payload.size(), 8);
  out.write(len.data(), 8);
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw ModelFormatError(Kind::Io, "model file: write failed");
}

Container read_container(std::istream& in) {
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw ModelFormatError(Kind::Io, "model file: read failed");
  if (buf.size() < sizeof(kModelMagic)) {
    throw ModelFormatError(Kind::Truncated, "model file: shorter than the magic");
  }
  if (std::memcmp(buf.data(), kModelMagic, sizeof(kModelMagic)) != 0) {
    throw ModelFormatError(Kind::BadMagic, "model file: bad magic");
  }
  std::size_t pos = sizeof(kModelMagic);
  if (buf.size() < pos + 8) throw ModelFormatError(Kind::Truncated, "model file: truncated header");
  const auto version = static_cast<std::uint32_t>(get_le(buf, pos, 4));
  if (version != kModelFormatVersion) {
    throw ModelFormatError(Kind::VersionMismatch,
                           "model file: format version " + std::to_string(version) +
                               ", expected " + std::to_string(kModelFormatVersion));
  }
  const auto manifest_bytes = static_cast<std::size_t>(get_le(buf, pos + 4, 4));
  pos += 8;
  if (buf.size() - pos < manifest_bytes + 8) {
    throw ModelFormatError(Kind::Truncated, "model file: truncated manifest");
  }
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(buf.substr(pos, manifest_bytes));
  } catch (const nlohmann::json::exception& e) {
    throw ModelFormatError(Kind::ManifestMismatch, std::string("model file: bad manifest: ") + e.what());
  }
  pos += manifest_bytes;
  const std::uint64_t payload_bytes = get_le(buf, pos, 8);
  pos += 8;
  if (buf.size() - pos < payload_bytes) {
    throw ModelFormatError(Kind::Truncated, "model file: truncated payload");
  }
  if (buf.size() - pos > payload_bytes) {
    throw ModelFormatError(Kind::ManifestMismatch, "model file: trailing bytes after payload");
  }

  Container c;
  try {
    if (manifest.at("payload_bytes").get<std::uint64_t>() != payload_bytes) {
      throw ModelFormatError(Kind::ManifestMismatch, "model file: payload size disagrees with manifest");
    }
    std::size_t expected = 0;
    for (const auto& nm : manifest.at("networks")) {
      Network net = Network::from_manifest(nm);
      expected += net.parameter_count() * 8;
      c.networks.push_back(std::move(net));
    }
    for (const auto& bm : manifest.at("blobs")) {
      c.blobs.push_back({bm.at("name").get<std::string>(),
                         std::vector<double>(bm.at("count").get<std::size_t>())});
      expected += c.blobs.back().values.size() * 8;
    }
    if (expected != payload_bytes) {
      throw ModelFormatError(Kind::ManifestMismatch,
                             "model file: manifest describes " + std::to_string(expected) +
                                 " payload bytes, file has " + std::to_string(payload_bytes));
    }
    c.metadata = manifest.at("metadata");
  } catch (const ModelFormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw ModelFormatError(Kind::ManifestMismatch, std::string("model file: ") + e.what());
  }

  for (Network& net : c.networks) {
    for (Parameter* p : net.parameter_list()) take_values(buf, pos, p->value.values());
  }
  for (NamedBlob& b : c.blobs) take_values(buf, pos, b.values);
  return c;
}

}  // namespace mmdrive::nn
