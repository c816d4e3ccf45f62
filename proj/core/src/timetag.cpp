#include "photonsync/timetag.hpp"

#include <algorithm>
#include <string>

#include "photonsync/errors.hpp"

namespace photonsync {

std::string_view to_string(Party p) { return p == Party::Alice ? "alice" : "bob"; }

DataPackage::DataPackage(std::uint64_t index, Ticks start, Ticks duration,
                         std::vector<TimeTag> tags)
    : index_(index), last_index_(index), start_(start), duration_(duration), tags_(std::move(tags)) {
  if (duration_ <= 0) throw WindowError("package duration must be positive");
  if (!std::is_sorted(tags_.begin(), tags_.end(),
                      [](const TimeTag& a, const TimeTag& b) { return a.timestamp < b.timestamp; })) {
    for (std::size_t i = 1; i < tags_.size(); ++i) {
      if (tags_[i].timestamp < tags_[i - 1].timestamp) ++reordered_;
    }
    std::stable_sort(tags_.begin(), tags_.end(), [](const TimeTag& a, const TimeTag& b) {
      return a.timestamp < b.timestamp;
    });
  }
  if (!tags_.empty() && (tags_.front().timestamp < start_ || tags_.back().timestamp >= end())) {
    throw WindowError("tag outside package window [" + std::to_string(start_) + ", " +
                      std::to_string(end()) + ")");
  }
}

std::vector<Ticks> DataPackage::timestamps() const { return timestamps_of(tags_); }

void PackageStream::validate() const {
  for (std::size_t i = 1; i < packages.size(); ++i) {
    const auto& prev = packages[i - 1];
    const auto& cur = packages[i];
    if (cur.index() != prev.index() + 1) {
      throw ContiguityError("package index jumps from " + std::to_string(prev.index()) + " to " +
                            std::to_string(cur.index()));
    }
    if (cur.start() != prev.end()) {
      throw ContiguityError("package " + std::to_string(cur.index()) +
                            " does not start where its predecessor ends");
    }
  }
}

DataPackage merge_packages(std::span<const DataPackage> packages) {
  if (packages.empty()) throw ContiguityError("nothing to merge");
  std::size_t total = 0;
  for (std::size_t i = 0; i < packages.size(); ++i) {
    total += packages[i].size();
    if (i == 0) continue;
    if (packages[i].index() != packages[i - 1].last_index() + 1 ||
        packages[i].start() != packages[i - 1].end()) {
      throw ContiguityError("packages " + std::to_string(packages[i - 1].index()) + " and " +
                            std::to_string(packages[i].index()) + " are not contiguous");
    }
  }
  std::vector<TimeTag> tags;
  tags.reserve(total);
  // Windows are disjoint and ordered, so concatenation is already sorted.
  for (const auto& p : packages) tags.insert(tags.end(), p.tags().begin(), p.tags().end());
  const Ticks start = packages.front().start();
  DataPackage merged(packages.front().index(), start, packages.back().end() - start, std::move(tags));
  merged.last_index_ = packages.back().last_index();
  return merged;
}

std::vector<TimeTag> slice_window(const DataPackage& package, Ticks lo, Ticks hi) {
  if (lo >= hi) throw WindowError("slice requires lo < hi");
  const auto tags = package.tags();
  auto cmp = [](const TimeTag& t, Ticks v) { return t.timestamp < v; };
  auto first = std::lower_bound(tags.begin(), tags.end(), lo, cmp);
  auto last = std::lower_bound(first, tags.end(), hi, cmp);
  return {first, last};
}

std::vector<Ticks> timestamps_of(std::span<const TimeTag> tags) {
  std::vector<Ticks> out;
  out.reserve(tags.size());
  for (const auto& t : tags) out.push_back(t.timestamp);
  return out;
}

}  // namespace photonsync
