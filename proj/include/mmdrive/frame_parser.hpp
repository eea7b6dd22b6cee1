#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "mmdrive/types.hpp"

namespace mmdrive {

// Packet layout (little-endian throughout):
//   magic        8 bytes   02 01 04 03 06 05 08 07
//   version      u32       kTlvVersion
//   total_length u32       bytes in the whole packet, header included
//   frame_number u32
//   num_tlvs     u32
//   TLVs         {type u32, length u32, payload[length]} * num_tlvs
// See docs/formats.md.
inline constexpr std::array<std::uint8_t, 8> kTlvMagic = {0x02, 0x01, 0x04, 0x03,
                                                          0x06, 0x05, 0x08, 0x07};
inline constexpr std::uint32_t kTlvVersion = 1;
inline constexpr std::size_t kTlvHeaderSize = 24;
inline constexpr std::size_t kTlvItemHeaderSize = 8;
inline constexpr std::size_t kTlvMaxPacket = 1 << 20;

enum class TlvType : std::uint32_t {
  RangeProfile = 2,
  NoiseProfile = 3,
  RangeDoppler = 5,
  Timestamp = 256,  // f64 seconds
};

/// dB per u16 step: 6.0206 dB (one binary octave of magnitude) / 512.
inline constexpr double kQ9Step = 6.0206 / 512.0;

std::uint16_t db_to_q9(double db);
double q9_to_db(std::uint16_t q);

std::vector<std::uint8_t> encode_frame(const RadarFrame& frame);

enum class DecodeStatus { Ok, NoMagicFound, Truncated, Corrupt };

struct DecodeResult {
  DecodeStatus status = DecodeStatus::NoMagicFound;
  RadarFrame frame;
  std::uint32_t frame_number = 0;
  /// Position of the decoded packet's magic (Ok only).
  std::size_t packet_offset = 0;
  /// Bytes the caller may drop from the front of the buffer.
  std::size_t consumed = 0;
};

/// Decodes the first packet in `buffer`. Total over arbitrary input:
///   NoMagicFound - no sync word; `consumed` keeps a possible partial magic.
///   Truncated    - need more bytes; `consumed` skips only leading garbage.
///   Corrupt      - header or TLV bounds invalid; `consumed` skips past the magic.
DecodeResult decode_frame(std::span<const std::uint8_t> buffer);

/// Incremental decoder for a byte stream of packets with arbitrary garbage
/// between them. One instance per stream.
class FrameDecoder {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  /// Next complete frame, or nullopt when more input is needed.
  std::optional<RadarFrame> next();

  std::size_t frames_decoded() const { return frames_; }
  std::size_t corrupt_packets() const { return corrupt_; }
  std::size_t bytes_skipped() const { return skipped_; }
  std::size_t buffered() const { return buffer_.size(); }

 private:
  std::vector<std::uint8_t> buffer_;
  std::size_t frames_ = 0;
  std::size_t corrupt_ = 0;
  std::size_t skipped_ = 0;
};

}  // namespace mmdrive
