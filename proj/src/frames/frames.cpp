// Copyright (c) 2026 The nightnoise Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "nightnoise/frames.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

namespace nightnoise {

namespace fs = std::filesystem;

std::string_view channel_name(Channel c) {
  switch (c) {
    case Channel::R: return "R";
    case Channel::G: return "G";
    case Channel::B: return "B";
    case Channel::NIR: return "NIR";
  }
  return "?";
}

std::optional<Channel> parse_channel(std::string_view name) {
  for (Channel c : kAllChannels) {
    if (channel_name(c) == name) return c;
  }
  return std::nullopt;
}

// --- CfaLayout ----------------------------------------------------------------

namespace {

// All 24 permutations in lexicographic order of the enum values.
const std::vector<std::array<Channel, 4>>& all_layouts() {
  static const std::vector<std::array<Channel, 4>> table = [] {
    std::vector<std::array<Channel, 4>> out;
    std::array<Channel, 4> p = kAllChannels;
    do {
      out.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
    return out;
  }();
  return table;
}

constexpr std::array<Channel, 4> kDefaultPattern = {Channel::R, Channel::G, Channel::NIR,
                                                    Channel::B};

std::size_t lex_index(const std::array<Channel, 4>& p) {
  const auto& t = all_layouts();
  return static_cast<std::size_t>(std::find(t.begin(), t.end(), p) - t.begin());
}

}  // namespace

CfaLayout::CfaLayout() : pattern_(kDefaultPattern) {}

CfaLayout::CfaLayout(std::array<Channel, 4> pattern) : pattern_(pattern) {
  auto sorted = pattern;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::invalid_argument("CFA layout tags must be distinct");
  }
}

std::pair<int, int> CfaLayout::site(Channel c) const {
  for (int i = 0; i < 4; ++i) {
    if (pattern_[static_cast<std::size_t>(i)] == c) return {i >> 1, i & 1};
  }
  throw std::invalid_argument("channel " + std::string(channel_name(c)) + " absent from CFA layout");
}

std::uint8_t CfaLayout::id() const {
  const std::size_t n = all_layouts().size();
  return static_cast<std::uint8_t>((lex_index(pattern_) + n - lex_index(kDefaultPattern)) % n);
}

CfaLayout CfaLayout::from_id(std::uint8_t id) {
  const std::size_t n = all_layouts().size();
  if (id >= n) {
    throw FrameError(FrameErrc::malformed_header, "cfa_id", "unknown cfa_id " + std::to_string(id));
  }
  return CfaLayout(all_layouts()[(id + lex_index(kDefaultPattern)) % n]);
}

// --- FrameBuffer / Clip / PairedBurst ----------------------------------------

FrameBuffer::FrameBuffer(int width, int height, std::vector<float> data, Domain domain,
                         CfaLayout layout)
    : width_(width), height_(height), data_(std::move(data)), domain_(domain), layout_(layout) {
  if (width <= 0 || width % 2 != 0) {
    throw FrameError(FrameErrc::odd_dimensions, "width", "odd width " + std::to_string(width));
  }
  if (height <= 0 || height % 2 != 0) {
    throw FrameError(FrameErrc::odd_dimensions, "height", "odd height " + std::to_string(height));
  }
  if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw FrameError(FrameErrc::truncated_payload, "data",
                     "data length " + std::to_string(data_.size()) + " != width*height");
  }
  if (domain == Domain::clipped) {
    for (float v : data_) {
      if (!(v >= 0.0f && v <= 1.0f)) {
        throw FrameError(FrameErrc::domain_violation, "data",
                         "clipped-domain frame holds value outside [0, 1]");
      }
    }
  }
}

FrameBuffer FrameBuffer::filled(int width, int height, float value, Domain domain, CfaLayout layout) {
  return FrameBuffer(width, height,
                     std::vector<float>(static_cast<std::size_t>(std::max(width, 0)) *
                                            static_cast<std::size_t>(std::max(height, 0)),
                                        value),
                     domain, layout);
}

Clip::Clip(std::vector<FrameBuffer> f, double rate) : frames(std::move(f)), frame_rate(rate) {
  if (frames.empty()) throw std::invalid_argument("clip must hold at least one frame");
  for (const auto& fr : frames) {
    if (!fr.same_geometry(frames.front()) || fr.domain() != frames.front().domain()) {
      throw FrameError(FrameErrc::geometry_mismatch, "frames",
                       "clip frames must share width, height and domain");
    }
  }
}

PairedBurst::PairedBurst(FrameBuffer clean, std::vector<FrameBuffer> noisy,
                         std::vector<std::size_t> clip_sizes)
    : clean_(std::move(clean)), noisy_(std::move(noisy)), clip_sizes_(std::move(clip_sizes)) {
  if (noisy_.empty()) throw std::invalid_argument("paired burst needs at least one noisy frame");
  for (const auto& f : noisy_) {
    if (!f.same_geometry(clean_)) {
      throw FrameError(FrameErrc::geometry_mismatch, "noisy",
                       "noisy frame geometry differs from the clean frame");
    }
  }
  std::size_t total = 0;
  for (std::size_t s : clip_sizes_) {
    if (s == 0) throw std::invalid_argument("empty clip in burst partition");
    total += s;
  }
  if (total != noisy_.size()) {
    throw std::invalid_argument("clip boundaries must cover the noisy frames exactly once");
  }
}

PairedBurst::PairedBurst(FrameBuffer clean, std::vector<FrameBuffer> noisy)
    : PairedBurst(std::move(clean), noisy, std::vector<std::size_t>{noisy.size()}) {}

std::pair<std::size_t, std::size_t> PairedBurst::clip_range(std::size_t clip) const {
  std::size_t begin = 0;
  for (std::size_t k = 0; k < clip; ++k) begin += clip_sizes_.at(k);
  return {begin, begin + clip_sizes_.at(clip)};
}

// --- RFR / PGM codecs -------------------------------------------------------

namespace {

constexpr std::size_t kRfrHeaderSize = 16;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t off) {
  return static_cast<std::uint32_t>(b[off]) | (static_cast<std::uint32_t>(b[off + 1]) << 8) |
         (static_cast<std::uint32_t>(b[off + 2]) << 16) |
         (static_cast<std::uint32_t>(b[off + 3]) << 24);
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FrameError(FrameErrc::io_failure, path.string(), "cannot open " + path.string());
  }
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw FrameError(FrameErrc::io_failure, path.string(), "cannot write " + path.string());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw FrameError(FrameErrc::io_failure, path.string(), "write failed for " + path.string());
  }
}

void check_even(std::uint64_t w, std::uint64_t h) {
  if (w == 0 || w % 2 != 0) {
    throw FrameError(FrameErrc::odd_dimensions, "width", "odd width " + std::to_string(w));
  }
  if (h == 0 || h % 2 != 0) {
    throw FrameError(FrameErrc::odd_dimensions, "height", "odd height " + std::to_string(h));
  }
}

}  // namespace

std::vector<std::uint8_t> encode_rfr(const FrameBuffer& frame) {
  std::vector<std::uint8_t> out;
  out.reserve(kRfrHeaderSize + 4 * frame.size());
  for (char ch : {'R', 'F', 'R', '1'}) out.push_back(static_cast<std::uint8_t>(ch));
  put_u32(out, static_cast<std::uint32_t>(frame.width()));
  put_u32(out, static_cast<std::uint32_t>(frame.height()));
  out.push_back(static_cast<std::uint8_t>(frame.domain()));
  out.push_back(frame.cfa().id());
  out.push_back(0);
  out.push_back(0);
  for (float v : frame.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

FrameBuffer decode_rfr(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kRfrHeaderSize) {
    throw FrameError(FrameErrc::malformed_header, "header", "RFR header truncated");
  }
  if (std::memcmp(bytes.data(), "RFR1", 4) != 0) {
    throw FrameError(FrameErrc::malformed_header, "magic", "bad RFR magic");
  }
  const std::uint32_t w = get_u32(bytes, 4);
  const std::uint32_t h = get_u32(bytes, 8);
  const std::uint8_t domain = bytes[12];
  const std::uint8_t cfa = bytes[13];
  if (domain > 1) {
    throw FrameError(FrameErrc::malformed_header, "domain_tag",
                     "unknown domain tag " + std::to_string(domain));
  }
  check_even(w, h);
  const std::uint64_t n = static_cast<std::uint64_t>(w) * h;
  if (bytes.size() - kRfrHeaderSize < n * 4) {
    throw FrameError(FrameErrc::truncated_payload, "payload",
                     "RFR payload holds " + std::to_string((bytes.size() - kRfrHeaderSize) / 4) +
                         " of " + std::to_string(n) + " values");
  }
  std::vector<float> data(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    data[i] = std::bit_cast<float>(get_u32(bytes, kRfrHeaderSize + 4 * i));
  }
  return FrameBuffer(static_cast<int>(w), static_cast<int>(h), std::move(data),
                     static_cast<Domain>(domain), CfaLayout::from_id(cfa));
}

std::vector<std::uint8_t> encode_pgm16(const FrameBuffer& frame) {
  if (frame.domain() != Domain::clipped) {
    throw FrameError(FrameErrc::domain_violation, "domain_tag",
                     "PGM export requires a clipped-domain frame");
  }
  const std::string header =
      "P5\n" + std::to_string(frame.width()) + " " + std::to_string(frame.height()) + "\n65535\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + 2 * frame.size());
  for (float v : frame.data()) {
    const auto q = static_cast<std::uint16_t>(std::lround(static_cast<double>(v) * 65535.0));
    out.push_back(static_cast<std::uint8_t>(q >> 8));
    out.push_back(static_cast<std::uint8_t>(q & 0xff));
  }
  return out;
}

FrameBuffer decode_pgm16(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&](const char* field) -> std::uint64_t {
    skip_space();
    std::uint64_t v = 0;
    std::size_t digits = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos] - '0');
      ++pos;
      ++digits;
      if (v > (1u << 30)) break;
    }
    if (digits == 0) {
      throw FrameError(FrameErrc::malformed_header, field, std::string("PGM header missing ") + field);
    }
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw FrameError(FrameErrc::malformed_header, "magic", "not a binary PGM");
  }
  pos = 2;
  const std::uint64_t w = read_int("width");
  const std::uint64_t h = read_int("height");
  const std::uint64_t maxval = read_int("maxval");
  if (maxval != 65535) {
    throw FrameError(FrameErrc::malformed_header, "maxval", "only 16-bit PGM (maxval 65535) is supported");
  }
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw FrameError(FrameErrc::malformed_header, "maxval", "PGM header not terminated");
  }
  ++pos;
  check_even(w, h);
  const std::uint64_t n = w * h;
  if (bytes.size() - pos < 2 * n) {
    throw FrameError(FrameErrc::truncated_payload, "payload", "PGM payload truncated");
  }
  std::vector<float> data(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const unsigned v = (static_cast<unsigned>(bytes[pos + 2 * i]) << 8) | bytes[pos + 2 * i + 1];
    data[i] = static_cast<float>(v / 65535.0);
  }
  return FrameBuffer(static_cast<int>(w), static_cast<int>(h), std::move(data), Domain::clipped);
}

FrameBuffer read_frame(const fs::path& path) {
  const auto bytes = read_bytes(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return decode_pgm16(bytes);
  return decode_rfr(bytes);
}

void write_frame(const FrameBuffer& frame, const fs::path& path) {
  if (path.extension() == ".pgm") {
    write_bytes(path, encode_pgm16(frame));
  } else {
    write_bytes(path, encode_rfr(frame));
  }
}

std::string frame_file_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06zu.rfr", index);
  return buf;
}

// --- clip / burst directories ------------------------------------------------

namespace {

std::map<std::string, std::string> read_key_values(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FrameError(FrameErrc::io_failure, path.string(), "cannot open " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FrameError(FrameErrc::malformed_header, path.string(), "malformed line: " + line);
    }
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

std::vector<fs::path> sorted_frame_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && name.starts_with("frame_") && e.path().extension() == ".rfr") {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw FrameError(FrameErrc::io_failure, dir.string(), "cannot create directory " + dir.string());
  }
}

}  // namespace

Clip read_clip(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw FrameError(FrameErrc::io_failure, dir.string(), "clip directory " + dir.string() + " not found");
  }
  double rate = 10.0;
  std::optional<std::size_t> count;
  if (fs::exists(dir / "clip.meta")) {
    const auto kv = read_key_values(dir / "clip.meta");
    if (auto it = kv.find("frame_rate"); it != kv.end()) rate = std::stod(it->second);
    if (auto it = kv.find("count"); it != kv.end()) count = std::stoul(it->second);
  }
  const auto files = sorted_frame_files(dir);
  if (files.empty()) {
    throw FrameError(FrameErrc::io_failure, dir.string(), "no frames in " + dir.string());
  }
  if (count && *count != files.size()) {
    throw FrameError(FrameErrc::truncated_payload, "count",
                     "clip.meta count " + std::to_string(*count) + " but " +
                         std::to_string(files.size()) + " frames on disk");
  }
  std::vector<FrameBuffer> frames;
  frames.reserve(files.size());
  for (const auto& f : files) frames.push_back(read_frame(f));
  return Clip(std::move(frames), rate);
}

void write_clip(const Clip& clip, const fs::path& dir) {
  ensure_dir(dir);
  for (std::size_t i = 0; i < clip.size(); ++i) write_frame(clip[i], dir / frame_file_name(i));
  std::ofstream meta(dir / "clip.meta", std::ios::trunc);
  if (!meta) throw FrameError(FrameErrc::io_failure, dir.string(), "cannot write clip.meta");
  std::ostringstream rate;
  rate.precision(17);
  rate << clip.frame_rate;
  meta << "frame_rate=" << rate.str() << "\ncount=" << clip.size() << "\n";
}

PairedBurst read_burst(const fs::path& dir) {
  const FrameBuffer clean = read_frame(dir / "clean.rfr");
  const fs::path clips_dir = dir / "clips";
  if (!fs::is_directory(clips_dir)) {
    throw FrameError(FrameErrc::io_failure, clips_dir.string(), "missing clips/ in " + dir.string());
  }
  std::vector<fs::path> clip_dirs;
  for (const auto& e : fs::directory_iterator(clips_dir)) {
    if (e.is_directory() && e.path().filename().string().starts_with("clip_")) {
      clip_dirs.push_back(e.path());
    }
  }
  std::sort(clip_dirs.begin(), clip_dirs.end());
  if (clip_dirs.empty()) {
    throw FrameError(FrameErrc::io_failure, clips_dir.string(), "no clip directories in " + clips_dir.string());
  }
  std::vector<FrameBuffer> noisy;
  std::vector<std::size_t> sizes;
  for (const auto& cd : clip_dirs) {
    Clip c = read_clip(cd);
    sizes.push_back(c.size());
    for (auto& f : c.frames) noisy.push_back(std::move(f));
  }
  return PairedBurst(clean, std::move(noisy), std::move(sizes));
}

void write_burst(const PairedBurst& burst, const fs::path& dir) {
  ensure_dir(dir);
  write_frame(burst.clean(), dir / "clean.rfr");
  for (std::size_t k = 0; k < burst.clip_count(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "clip_%03zu", k);
    const auto [b, e] = burst.clip_range(k);
    Clip clip(std::vector<FrameBuffer>(burst.noisy().begin() + static_cast<std::ptrdiff_t>(b),
                                       burst.noisy().begin() + static_cast<std::ptrdiff_t>(e)));
    write_clip(clip, dir / "clips" / name);
  }
}

std::vector<PairedBurst> read_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw FrameError(FrameErrc::io_failure, dir.string(), "dataset directory " + dir.string() + " not found");
  }
  if (fs::exists(dir / "clean.rfr")) return {read_burst(dir)};
  std::vector<fs::path> bursts;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory() && fs::exists(e.path() / "clean.rfr")) bursts.push_back(e.path());
  }
  std::sort(bursts.begin(), bursts.end());
  if (bursts.empty()) {
    throw FrameError(FrameErrc::io_failure, dir.string(), "no bursts found in " + dir.string());
  }
  std::vector<PairedBurst> out;
  out.reserve(bursts.size());
  for (const auto& b : bursts) out.push_back(read_burst(b));
  return out;
}

// --- CFA planes -------------------------------------------------------------

Raster channel_plane(const FrameBuffer& frame, const CfaLayout& layout, Channel tag) {
  const auto [sr, sc] = layout.site(tag);
  Raster plane(frame.width() / 2, frame.height() / 2);
  for (int r = 0; r < plane.height; ++r) {
    for (int c = 0; c < plane.width; ++c) plane.at(r, c) = frame.at(2 * r + sr, 2 * c + sc);
  }
  return plane;
}

FrameBuffer assemble_planes(const std::array<Raster, 4>& planes, const CfaLayout& layout,
                            Domain domain) {
  const int pw = planes[0].width;
  const int ph = planes[0].height;
  for (const auto& p : planes) {
    if (p.width != pw || p.height != ph) {
      throw FrameError(FrameErrc::geometry_mismatch, "planes", "channel planes differ in size");
    }
  }
  std::vector<float> data(static_cast<std::size_t>(4) * pw * ph);
  const int w = 2 * pw;
  for (Channel ch : kAllChannels) {
    const auto [sr, sc] = layout.site(ch);
    const Raster& p = planes[static_cast<std::size_t>(ch)];
    for (int r = 0; r < ph; ++r) {
      for (int c = 0; c < pw; ++c) {
        data[static_cast<std::size_t>(2 * r + sr) * w + 2 * c + sc] = p.at(r, c);
      }
    }
  }
  return FrameBuffer(w, 2 * ph, std::move(data), domain, layout);
}

}  // namespace nightnoise
