#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace photonsync {

/// Picosecond ticks since the session origin.
using Ticks = std::int64_t;

inline constexpr double kTicksPerSecond = 1e12;

constexpr double to_seconds(Ticks t) { return static_cast<double>(t) / kTicksPerSecond; }
constexpr double ticks_from_seconds(double s) { return s * kTicksPerSecond; }

enum class Party : std::uint8_t { Alice = 0, Bob = 1 };

std::string_view to_string(Party p);

struct TimeTag {
  Ticks timestamp = 0;
  std::uint8_t channel = 0;

  friend bool operator==(const TimeTag&, const TimeTag&) = default;
};

/// Default detector channel carried by each party's single timing channel.
constexpr std::uint8_t default_channel(Party p) { return static_cast<std::uint8_t>(p); }

/// One acquisition window of tags. Tags are sorted and lie in
/// [start, start + duration).
class DataPackage {
 public:
  DataPackage() = default;

  /// Validates the window and sorts out-of-order tags. The number of tags
  /// that had to be moved is available from reordered_on_ingest().
  DataPackage(std::uint64_t index, Ticks start, Ticks duration, std::vector<TimeTag> tags);

  std::uint64_t index() const { return index_; }
  /// Index of the last acquisition window covered; differs from index()
  /// only for merged packages. Kept in memory, not serialized.
  std::uint64_t last_index() const { return last_index_; }
  Ticks start() const { return start_; }
  Ticks duration() const { return duration_; }
  Ticks end() const { return start_ + duration_; }
  std::span<const TimeTag> tags() const { return tags_; }
  std::size_t size() const { return tags_.size(); }
  bool empty() const { return tags_.empty(); }
  std::size_t reordered_on_ingest() const { return reordered_; }

  /// Timestamps only, in order.
  std::vector<Ticks> timestamps() const;

  friend DataPackage merge_packages(std::span<const DataPackage> packages);
  friend bool operator==(const DataPackage& a, const DataPackage& b) {
    return a.index_ == b.index_ && a.start_ == b.start_ && a.duration_ == b.duration_ &&
           a.tags_ == b.tags_;
  }

 private:
  std::uint64_t index_ = 0;
  std::uint64_t last_index_ = 0;
  Ticks start_ = 0;
  Ticks duration_ = 0;
  std::vector<TimeTag> tags_;
  std::size_t reordered_ = 0;
};

struct PackageStream {
  Party party = Party::Alice;
  std::vector<DataPackage> packages;

  /// Throws ContiguityError unless windows are contiguous and indices
  /// increase by one.
  void validate() const;
};

/// Concatenates a contiguous run of packages into one spanning the union
/// window. The result carries the first package's index and remembers the
/// last one, so merged runs merge again.
DataPackage merge_packages(std::span<const DataPackage> packages);

/// Tags with lo <= t < hi, in order.
std::vector<TimeTag> slice_window(const DataPackage& package, Ticks lo, Ticks hi);

/// Extracts timestamps from a tag list.
std::vector<Ticks> timestamps_of(std::span<const TimeTag> tags);

}  // namespace photonsync
