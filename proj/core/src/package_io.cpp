#include "photonsync/package_io.hpp"

#include <charconv>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>

#include "photonsync/errors.hpp"
#include "photonsync/wire.hpp"

namespace photonsync {
namespace {

constexpr std::string_view kCsvBanner = "# photonsync-packages v1";

template <typename T>
T parse_number(std::string_view text, std::string_view what) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw FormatError("bad " + std::string(what) + ": '" + std::string(text) + "'");
  }
  return value;
}

// Finds `key=value` in a directive line.
std::string_view field(std::string_view line, std::string_view key) {
  const std::string needle = std::string(key) + "=";
  const auto pos = line.find(needle);
  if (pos == std::string_view::npos) throw FormatError("missing " + std::string(key));
  auto rest = line.substr(pos + needle.size());
  return rest.substr(0, rest.find(' '));
}

void write_csv_banner(std::ostream& out, Party party) {
  out << kCsvBanner << " party=" << to_string(party) << '\n';
  out << "timestamp_ps,channel\n";
}

void write_csv_package(std::ostream& out, const DataPackage& p) {
  out << "# package index=" << p.index() << " start_ps=" << p.start()
      << " duration_ps=" << p.duration() << '\n';
  for (const auto& t : p.tags()) out << t.timestamp << ',' << static_cast<int>(t.channel) << '\n';
}

ReadResult read_csv(std::istream& in) {
  ReadResult result;
  std::string line;
  std::getline(in, line);
  if (line.rfind(kCsvBanner, 0) != 0) throw FormatError("missing CSV banner");
  const auto party = field(line, "party");
  if (party == "alice") result.stream.party = Party::Alice;
  else if (party == "bob") result.stream.party = Party::Bob;
  else throw FormatError("unknown party '" + std::string(party) + "'");

  struct Pending {
    std::uint64_t index;
    Ticks start, duration;
    std::vector<TimeTag> tags;
  };
  std::optional<Pending> cur;
  auto flush = [&] {
    if (!cur) return;
    DataPackage pkg(cur->index, cur->start, cur->duration, std::move(cur->tags));
    result.reordered_tags += pkg.reordered_on_ingest();
    result.stream.packages.push_back(std::move(pkg));
    cur.reset();
  };
  while (std::getline(in, line)) {
    if (line.empty() || line == "timestamp_ps,channel") continue;
    if (line[0] == '#') {
      if (line.rfind("# package", 0) != 0) continue;
      flush();
      cur = Pending{parse_number<std::uint64_t>(field(line, "index"), "index"),
                    parse_number<Ticks>(field(line, "start_ps"), "start_ps"),
                    parse_number<Ticks>(field(line, "duration_ps"), "duration_ps"),
                    {}};
      continue;
    }
    if (!cur) throw FormatError("tag row before first package directive");
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError("expected timestamp_ps,channel");
    std::string_view view(line);
    cur->tags.push_back({parse_number<Ticks>(view.substr(0, comma), "timestamp_ps"),
                         parse_number<std::uint8_t>(view.substr(comma + 1), "channel")});
  }
  flush();
  return result;
}

}  // namespace

StreamWriter::StreamWriter(std::ostream& out, Party party, PackageFormat format)
    : out_(&out), party_(party), format_(format) {
  if (format_ == PackageFormat::Csv) write_csv_banner(*out_, party_);
}

void StreamWriter::write(const DataPackage& package) {
  if (format_ == PackageFormat::Csv) {
    write_csv_package(*out_, package);
    return;
  }
  buf_.clear();
  append_frame(buf_, package, party_, kFileMagic);
  out_->write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
}

void write_stream(std::ostream& out, const PackageStream& stream, PackageFormat format) {
  StreamWriter writer(out, stream.party, format);
  for (const auto& p : stream.packages) writer.write(p);
}

ReadResult read_stream(std::istream& in) {
  const int first = in.peek();
  if (first == '#') return read_csv(in);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ReadResult result;
  auto frames = decode_frames(bytes, kFileMagic);
  if (!frames.empty()) result.stream.party = frames.front().party;
  for (auto& f : frames) {
    if (f.party != result.stream.party) throw FormatError("mixed parties in one package file");
    result.stream.packages.push_back(std::move(f.package));
  }
  return result;
}

void save_stream(const std::filesystem::path& path, const PackageStream& stream) {
  const bool csv = path.extension() == ".csv";
  std::ofstream out(path, csv ? std::ios::out : std::ios::out | std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot open " + path.string() + " for writing");
  write_stream(out, stream, csv ? PackageFormat::Csv : PackageFormat::Binary);
  if (!out) throw std::ios_base::failure("write failed: " + path.string());
}

ReadResult load_stream(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open " + path.string());
  return read_stream(in);
}

}  // namespace photonsync
