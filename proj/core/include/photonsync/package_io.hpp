#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "photonsync/timetag.hpp"

namespace photonsync {

enum class PackageFormat { Binary, Csv };

/// Binary container: concatenated frames (wire.hpp layout) with the file
/// magic `PSPK`. CSV: a `timestamp_ps,channel` table where each package is
/// introduced by a `# package index=.. start_ps=.. duration_ps=..` line.
void write_stream(std::ostream& out, const PackageStream& stream, PackageFormat format);

/// Writes one package at a time, for streams too large to hold in memory.
class StreamWriter {
 public:
  StreamWriter(std::ostream& out, Party party, PackageFormat format);
  void write(const DataPackage& package);

 private:
  std::ostream* out_;
  Party party_;
  PackageFormat format_;
  std::vector<std::uint8_t> buf_;
};

struct ReadResult {
  PackageStream stream;
  /// Tags that arrived out of order and were sorted on ingestion.
  std::size_t reordered_tags = 0;
};

/// Detects the format from the first bytes. Throws FormatError.
ReadResult read_stream(std::istream& in);

/// Format chosen from the extension: `.csv` is CSV, anything else binary.
void save_stream(const std::filesystem::path& path, const PackageStream& stream);
ReadResult load_stream(const std::filesystem::path& path);

}  // namespace photonsync
