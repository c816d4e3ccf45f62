#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "photonsync/timetag.hpp"

namespace photonsync {

// Frame layout, all integers little-endian (see docs/wire_format.md):
//
//   offset  size  field
//        0     4  magic
//        4     1  version (= 1)
//        5     1  party (0 = Alice, 1 = Bob)
//        6     8  package index
//       14     8  window start, ps
//       22     8  window duration, ps
//       30     8  tag count
//       38     *  count unsigned LEB128 varints: first tag minus start,
//                 then successive differences
//      end     4  CRC-32 (IEEE) over every preceding byte of the frame

using Magic = std::array<char, 4>;

inline constexpr Magic kWireMagic{'P', 'S', 'W', 'F'};
inline constexpr Magic kFileMagic{'P', 'S', 'P', 'K'};
inline constexpr std::uint8_t kFrameVersion = 1;
inline constexpr std::size_t kFrameHeaderSize = 38;
inline constexpr std::size_t kFrameTrailerSize = 4;
inline constexpr std::uint64_t kMaxFrameTags = 1ULL << 30;

std::vector<std::uint8_t> encode_frame(const DataPackage& package, Party party,
                                       const Magic& magic = kWireMagic);

/// Appends to an existing buffer; returns the number of bytes written.
std::size_t append_frame(std::vector<std::uint8_t>& out, const DataPackage& package, Party party,
                         const Magic& magic = kWireMagic);

std::uint32_t crc32_ieee(std::span<const std::uint8_t> bytes);

struct DecodedFrame {
  Party party = Party::Alice;
  DataPackage package;
};

/// A structurally complete frame whose checksum did not match.
struct CorruptFrame {
  std::uint64_t claimed_index = 0;
};

using FrameEvent = std::variant<DecodedFrame, CorruptFrame>;

/// Incremental decoder for a byte stream of concatenated frames. Frames with
/// a bad checksum are reported and skipped; garbage between frames is
/// skipped by scanning for the next magic.
class FrameDecoder {
 public:
  explicit FrameDecoder(const Magic& magic = kWireMagic) : magic_(magic) {}

  void feed(std::span<const std::uint8_t> bytes);
  std::optional<FrameEvent> next();

  std::size_t buffered() const { return buf_.size() - pos_; }
  std::size_t skipped_bytes() const { return skipped_; }

 private:
  void compact();

  Magic magic_;
  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
  std::size_t skipped_ = 0;
};

/// Decodes one whole buffer of frames; throws FormatError on corruption.
std::vector<DecodedFrame> decode_frames(std::span<const std::uint8_t> bytes,
                                        const Magic& magic = kWireMagic);

/// Restores index order for frames arriving slightly out of order. Frames
/// further than `window` ahead of the next expected index force the
/// expected index forward; the skipped indices are reported as lost.
class ReorderBuffer {
 public:
  explicit ReorderBuffer(std::size_t window = 4, std::uint64_t first_index = 0)
      : window_(window), next_(first_index) {}

  /// Returns the frames that became deliverable, in index order.
  std::vector<DecodedFrame> push(DecodedFrame frame);
  /// Flushes whatever is held, marking holes as lost.
  std::vector<DecodedFrame> drain();

  std::uint64_t next_expected() const { return next_; }
  const std::vector<std::uint64_t>& lost() const { return lost_; }
  std::size_t duplicates() const { return duplicates_; }

 private:
  std::vector<DecodedFrame> release();

  std::size_t window_;
  std::uint64_t next_;
  std::deque<DecodedFrame> pending_;
  std::vector<std::uint64_t> lost_;
  std::size_t duplicates_ = 0;
};

}  // namespace photonsync
