#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmdrive/nn/network.hpp"

namespace mmdrive::nn {

// File layout (see docs/model_format.md):
//   magic "MMDRMODL" | u32 version | u32 manifest_bytes | manifest JSON
//   | u64 payload_bytes | payload (little-endian f64, manifest order)
inline constexpr char kModelMagic[8] = {'M', 'M', 'D', 'R', 'M', 'O', 'D', 'L'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

class ModelFormatError : public std::runtime_error {
 public:
  enum class Kind { Io, BadMagic, VersionMismatch, Truncated, ManifestMismatch };

  ModelFormatError(Kind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Raw f64 array stored alongside the networks (normalization statistics, ...).
struct NamedBlob {
  std::string name;
  std::vector<double> values;
};

struct Container {
  nlohmann::json metadata;
  std::vector<Network> networks;
  std::vector<NamedBlob> blobs;
};

void write_container(std::ostream& out, const nlohmann::json& metadata,
                     std::span<const Network* const> networks, std::span<const NamedBlob> blobs);

/// Reads a whole container; never returns a partially populated result.
Container read_container(std::istream& in);

}  // namespace mmdrive::nn
