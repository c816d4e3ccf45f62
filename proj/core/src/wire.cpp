#include "photonsync/wire.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <string>

#include "photonsync/errors.hpp"

namespace photonsync {
namespace {

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void put_varint(std::vector<std::uint8_t>& out, std::uint64_t v) {
  while (v >= 0x80) {
    out.push_back(static_cast<std::uint8_t>(v | 0x80));
    v >>= 7;
  }
  out.push_back(static_cast<std::uint8_t>(v));
}

enum class Parse { Ok, NeedMore, Malformed };

// Reads a varint starting at p; advances p on success.
Parse get_varint(const std::uint8_t*& p, const std::uint8_t* end, std::uint64_t& v) {
  v = 0;
  for (int shift = 0; shift < 64; shift += 7) {
    if (p == end) return Parse::NeedMore;
    const std::uint8_t byte = *p++;
    v |= static_cast<std::uint64_t>(byte & 0x7f) << shift;
    if (!(byte & 0x80)) return Parse::Ok;
  }
  return Parse::Malformed;
}

struct FrameParse {
  Parse status = Parse::NeedMore;
  std::size_t length = 0;
  bool crc_ok = false;
  std::optional<DecodedFrame> frame;
  std::uint64_t index = 0;
};

FrameParse parse_frame(const std::uint8_t* begin, const std::uint8_t* end, const Magic& magic) {
  FrameParse r;
  const std::size_t avail = static_cast<std::size_t>(end - begin);
  if (avail < kFrameHeaderSize) return r;
  if (std::memcmp(begin, magic.data(), magic.size()) != 0 || begin[4] != kFrameVersion ||
      begin[5] > 1) {
    r.status = Parse::Malformed;
    return r;
  }
  const auto party = static_cast<Party>(begin[5]);
  const std::uint64_t index = get_u64(begin + 6);
  const std::uint64_t start = get_u64(begin + 14);
  const std::uint64_t duration = get_u64(begin + 22);
  const std::uint64_t count = get_u64(begin + 30);
  r.index = index;
  if (count > kMaxFrameTags || duration == 0 || duration > (1ULL << 62) || start > (1ULL << 62)) {
    r.status = Parse::Malformed;
    return r;
  }
  const std::uint8_t* p = begin + kFrameHeaderSize;
  std::vector<TimeTag> tags;
  tags.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, avail)));
  std::uint64_t t = start;
  bool in_window = true;
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint64_t delta = 0;
    const Parse s = get_varint(p, end, delta);
    if (s != Parse::Ok) {
      r.status = s;
      return r;
    }
    t += delta;
    if (t >= start + duration) in_window = false;
    tags.push_back({static_cast<Ticks>(t), default_channel(party)});
  }
  if (static_cast<std::size_t>(end - p) < kFrameTrailerSize) return r;
  const std::size_t body = static_cast<std::size_t>(p - begin);
  const std::uint32_t expected = get_u32(p);
  r.length = body + kFrameTrailerSize;
  r.status = Parse::Ok;
  r.crc_ok = in_window && crc32_ieee({begin, body}) == expected;
  if (r.crc_ok) {
    r.frame = DecodedFrame{party, DataPackage(index, static_cast<Ticks>(start),
                                              static_cast<Ticks>(duration), std::move(tags))};
  }
  return r;
}

}  // namespace

std::uint32_t crc32_ieee(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; chunk to stay within range.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
    crc = ::crc32(crc, bytes.data() + off, static_cast<uInt>(n));
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

std::size_t append_frame(std::vector<std::uint8_t>& out, const DataPackage& package, Party party,
                         const Magic& magic) {
  const std::size_t begin = out.size();
  out.insert(out.end(), magic.begin(), magic.end());
  out.push_back(kFrameVersion);
  out.push_back(static_cast<std::uint8_t>(party));
  put_u64(out, package.index());
  put_u64(out, static_cast<std::uint64_t>(package.start()));
  put_u64(out, static_cast<std::uint64_t>(package.duration()));
  put_u64(out, package.size());
  Ticks prev = package.start();
  for (const auto& tag : package.tags()) {
    put_varint(out, static_cast<std::uint64_t>(tag.timestamp - prev));
    prev = tag.timestamp;
  }
  put_u32(out, crc32_ieee({out.data() + begin, out.size() - begin}));
  return out.size() - begin;
}

std::vector<std::uint8_t> encode_frame(const DataPackage& package, Party party, const Magic& magic) {
  std::vector<std::uint8_t> out;
  out.reserve(kFrameHeaderSize + kFrameTrailerSize + 3 * package.size());
  append_frame(out, package, party, magic);
  return out;
}

void FrameDecoder::feed(std::span<const std::uint8_t> bytes) {
  compact();
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

void FrameDecoder::compact() {
  if (pos_ > 0 && pos_ * 2 >= buf_.size()) {
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(pos_));
    pos_ = 0;
  }
}

std::optional<FrameEvent> FrameDecoder::next() {
  while (pos_ < buf_.size()) {
    const auto* begin = buf_.data() + pos_;
    const auto* end = buf_.data() + buf_.size();
    FrameParse r = parse_frame(begin, end, magic_);
    if (r.status == Parse::NeedMore) return std::nullopt;
    if (r.status == Parse::Malformed) {
      // Resynchronise on the next occurrence of the magic.
      const auto* hit = std::search(begin + 1, end, magic_.begin(), magic_.end());
      const auto skip = static_cast<std::size_t>(hit - begin);
      skipped_ += skip;
      pos_ += skip;
      continue;
    }
    pos_ += r.length;
    if (r.crc_ok) return FrameEvent{std::move(*r.frame)};
    return FrameEvent{CorruptFrame{r.index}};
  }
  return std::nullopt;
}

std::vector<DecodedFrame> decode_frames(std::span<const std::uint8_t> bytes, const Magic& magic) {
  std::vector<DecodedFrame> out;
  const auto* p = bytes.data();
  const auto* end = bytes.data() + bytes.size();
  while (p < end) {
    FrameParse r = parse_frame(p, end, magic);
    if (r.status == Parse::NeedMore) throw FormatError("truncated frame");
    if (r.status == Parse::Malformed) throw FormatError("malformed frame header");
    if (!r.crc_ok) throw FormatError("checksum mismatch in frame " + std::to_string(r.index));
    out.push_back(std::move(*r.frame));
    p += r.length;
  }
  return out;
}

std::vector<DecodedFrame> ReorderBuffer::push(DecodedFrame frame) {
  const std::uint64_t idx = frame.package.index();
  if (idx < next_) {
    ++duplicates_;
    return {};
  }
  auto pos = std::lower_bound(pending_.begin(), pending_.end(), idx,
                              [](const DecodedFrame& f, std::uint64_t v) { return f.package.index() < v; });
  if (pos != pending_.end() && pos->package.index() == idx) {
    ++duplicates_;
    return {};
  }
  pending_.insert(pos, std::move(frame));
  std::vector<DecodedFrame> out = release();
  // A frame too far ahead means the holes before it will not be filled.
  while (!pending_.empty() && pending_.back().package.index() >= next_ + window_) {
    lost_.push_back(next_++);
    for (auto& f : release()) out.push_back(std::move(f));
  }
  return out;
}

std::vector<DecodedFrame> ReorderBuffer::release() {
  std::vector<DecodedFrame> out;
  while (!pending_.empty() && pending_.front().package.index() == next_) {
    out.push_back(std::move(pending_.front()));
    pending_.pop_front();
    ++next_;
  }
  return out;
}

std::vector<DecodedFrame> ReorderBuffer::drain() {
  std::vector<DecodedFrame> out;
  while (!pending_.empty()) {
    while (pending_.front().package.index() > next_) lost_.push_back(next_++);
    auto more = release();
    for (auto& f : more) out.push_back(std::move(f));
  }
  return out;
}

}  // namespace photonsync
