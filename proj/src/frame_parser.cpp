#include "mmdrive/frame_parser.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "mmdrive/error.hpp"

namespace mmdrive {
namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_profile_tlv(std::vector<std::uint8_t>& out, TlvType type,
                     const std::vector<double>& values) {
  put_u32(out, static_cast<std::uint32_t>(type));
  put_u32(out, static_cast<std::uint32_t>(values.size() * 2));
  for (double v : values) put_u16(out, db_to_q9(v));
}

std::vector<double> read_profile(const std::uint8_t* p, std::size_t bytes) {
  std::vector<double> out(bytes / 2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = q9_to_db(get_u16(p + 2 * i));
  return out;
}

std::size_t find_magic(std::span<const std::uint8_t> buf) {
  auto it = std::search(buf.begin(), buf.end(), kTlvMagic.begin(), kTlvMagic.end());
  return static_cast<std::size_t>(it - buf.begin());
}

}  // namespace

std::uint16_t db_to_q9(double db) {
  if (std::isnan(db)) return 0;
  const double q = std::round(db / 6.0206 * 512.0);
  return static_cast<std::uint16_t>(std::clamp(q, 0.0, 65535.0));
}

double q9_to_db(std::uint16_t q) { return static_cast<double>(q) * 6.0206 / 512.0; }

std::vector<std::uint8_t> encode_frame(const RadarFrame& frame) {
  if (frame.range_profile.size() != kRangeBins || frame.noise_profile.size() != kRangeBins ||
      frame.range_doppler.size() != kRangeBins * kDopplerBins) {
    throw InvalidArgument("encode_frame: frame must be 64 / 64 / 16x64");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kTlvHeaderSize + 4 * kTlvItemHeaderSize + 2 * 64 * 2 + 2 * 1024 + 8);
  out.insert(out.end(), kTlvMagic.begin(), kTlvMagic.end());
  put_u32(out, kTlvVersion);
  put_u32(out, 0);  // total_length, patched below
  put_u32(out, static_cast<std::uint32_t>(frame.frame_index));
  put_u32(out, 4);
  put_profile_tlv(out, TlvType::RangeProfile, frame.range_profile);
  put_profile_tlv(out, TlvType::NoiseProfile, frame.noise_profile);
  put_profile_tlv(out, TlvType::RangeDoppler, frame.range_doppler);
  put_u32(out, static_cast<std::uint32_t>(TlvType::Timestamp));
  put_u32(out, 8);
  const auto bits = std::bit_cast<std::uint64_t>(frame.timestamp);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));

  const auto total = static_cast<std::uint32_t>(out.size());
  for (int i = 0; i < 4; ++i) out[12 + i] = static_cast<std::uint8_t>(total >> (8 * i));
  return out;
}

DecodeResult decode_frame(std::span<const std::uint8_t> buffer) {
  DecodeResult result;
  const std::size_t offset = find_magic(buffer);
  if (offset == buffer.size()) {
    result.status = DecodeStatus::NoMagicFound;
    // Keep a tail that could be the start of a magic split across reads.
    result.consumed = buffer.size() > kTlvMagic.size() - 1 ? buffer.size() - (kTlvMagic.size() - 1) : 0;
    return result;
  }
  auto corrupt = [&] {
    result.status = DecodeStatus::Corrupt;
    result.consumed = offset + kTlvMagic.size();
    return result;
  };
  const std::span<const std::uint8_t> packet = buffer.subspan(offset);
  if (packet.size() < kTlvHeaderSize) {
    result.status = DecodeStatus::Truncated;
    result.consumed = offset;
    return result;
  }
  const std::uint8_t* p = packet.data();
  const std::uint32_t version = get_u32(p + 8);
  const std::uint32_t total = get_u32(p + 12);
  const std::uint32_t frame_number = get_u32(p + 16);
  const std::uint32_t num_tlvs = get_u32(p + 20);
  if (version != kTlvVersion || total < kTlvHeaderSize || total > kTlvMaxPacket ||
      num_tlvs > (total - kTlvHeaderSize) / kTlvItemHeaderSize) {
    return corrupt();
  }
  if (packet.size() < total) {
    result.status = DecodeStatus::Truncated;
    result.consumed = offset;
    return result;
  }

  RadarFrame frame;
  bool have_timestamp = false;
  std::size_t pos = kTlvHeaderSize;
  for (std::uint32_t i = 0; i < num_tlvs; ++i) {
    if (total - pos < kTlvItemHeaderSize) return corrupt();
    const std::uint32_t type = get_u32(p + pos);
    const std::uint32_t length = get_u32(p + pos + 4);
    pos += kTlvItemHeaderSize;
    if (length > total - pos) return corrupt();
    const std::uint8_t* payload = p + pos;
    switch (static_cast<TlvType>(type)) {
      case TlvType::RangeProfile:
        if (length != kRangeBins * 2) return corrupt();
        frame.range_profile = read_profile(payload, length);
        break;
      case TlvType::NoiseProfile:
        if (length != kRangeBins * 2) return corrupt();
        frame.noise_profile = read_profile(payload, length);
        break;
      case TlvType::RangeDoppler:
        if (length != kRangeBins * kDopplerBins * 2) return corrupt();
        frame.range_doppler = read_profile(payload, length);
        break;
      case TlvType::Timestamp: {
        if (length != 8) return corrupt();
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(payload[b]) << (8 * b);
        frame.timestamp = std::bit_cast<double>(bits);
        if (!std::isfinite(frame.timestamp)) return corrupt();
        have_timestamp = true;
        break;
      }
      default:
        break;  // unknown TLVs are skipped
    }
    pos += length;
  }
  if (pos != total || frame.range_profile.empty() || frame.noise_profile.empty() ||
      frame.range_doppler.empty()) {
    return corrupt();
  }
  frame.frame_index = frame_number;
  if (!have_timestamp) frame.timestamp = frame_number / 5.0;

  result.status = DecodeStatus::Ok;
  result.frame = std::move(frame);
  result.frame_number = frame_number;
  result.packet_offset = offset;
  result.consumed = offset + total;
  return result;
}

void FrameDecoder::feed(std::span<const std::uint8_t> bytes) {
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<RadarFrame> FrameDecoder::next() {
  for (;;) {
    DecodeResult r = decode_frame(buffer_);
    switch (r.status) {
      case DecodeStatus::Ok: {
        skipped_ += r.packet_offset;
        buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(r.consumed));
        ++frames_;
        return std::move(r.frame);
      }
      case DecodeStatus::Truncated:
        skipped_ += r.consumed;
        buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(r.consumed));
        return std::nullopt;
      case DecodeStatus::NoMagicFound:
        skipped_ += r.consumed;
        buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(r.consumed));
        return std::nullopt;
      case DecodeStatus::Corrupt:
        ++corrupt_;
        skipped_ += r.consumed;
        buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(r.consumed));
        break;
    }
  }
}

}  // namespace mmdrive
