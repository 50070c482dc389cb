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

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace nightnoise {

enum class Channel : std::uint8_t { R = 0, G = 1, B = 2, NIR = 3 };

inline constexpr std::array<Channel, 4> kAllChannels = {Channel::R, Channel::G, Channel::B,
                                                        Channel::NIR};

std::string_view channel_name(Channel c);
std::optional<Channel> parse_channel(std::string_view name);

// 2x2 colour filter tile, row-major: pattern[0] = (0,0), pattern[1] = (0,1),
// pattern[2] = (1,0), pattern[3] = (1,1).
class CfaLayout {
 public:
  // [[R, G], [NIR, B]]
  CfaLayout();
  explicit CfaLayout(std::array<Channel, 4> pattern);

  Channel at(int row, int col) const { return pattern_[static_cast<std::size_t>(((row & 1) << 1) | (col & 1))]; }
  // (row, col) of the channel's site inside the tile.
  std::pair<int, int> site(Channel c) const;
  const std::array<Channel, 4>& pattern() const { return pattern_; }

  // Stable 0..23 identifier used by the RFR header; 0 is the default layout.
  std::uint8_t id() const;
  static CfaLayout from_id(std::uint8_t id);

  bool operator==(const CfaLayout&) const = default;

 private:
  std::array<Channel, 4> pattern_;
};

enum class Domain : std::uint8_t { clipped = 0, residual = 1 };

enum class FrameErrc {
  malformed_header,
  truncated_payload,
  odd_dimensions,
  domain_violation,
  geometry_mismatch,
  io_failure,
};

class FrameError : public std::runtime_error {
 public:
  FrameError(FrameErrc code, std::string field, const std::string& what)
      : std::runtime_error(what), code_(code), field_(std::move(field)) {}

  FrameErrc code() const { return code_; }
  // Name of the offending header field, path, or invariant.
  const std::string& field() const { return field_; }

 private:
  FrameErrc code_;
  std::string field_;
};

// Plain row-major float raster without CFA semantics (channel planes,
// demosaiced planes, display images).
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  Raster() = default;
  Raster(int w, int h, float fill = 0.0f)
      : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  float& at(int r, int c) { return data[static_cast<std::size_t>(r) * width + c]; }
  float at(int r, int c) const { return data[static_cast<std::size_t>(r) * width + c]; }
};

// One RAW frame. Immutable after construction.
class FrameBuffer {
 public:
  FrameBuffer() = default;
  // Throws FrameError on odd dimensions, size mismatch, or out-of-range
  // values in the clipped domain.
  FrameBuffer(int width, int height, std::vector<float> data, Domain domain,
              CfaLayout layout = CfaLayout());

  static FrameBuffer filled(int width, int height, float value, Domain domain,
                            CfaLayout layout = CfaLayout());

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  Domain domain() const { return domain_; }
  const CfaLayout& cfa() const { return layout_; }
  std::span<const float> data() const { return data_; }
  std::span<const float> row(int r) const {
    return std::span<const float>(data_).subspan(static_cast<std::size_t>(r) * width_, width_);
  }
  float at(int r, int c) const { return data_[static_cast<std::size_t>(r) * width_ + c]; }
  bool same_geometry(const FrameBuffer& o) const {
    return width_ == o.width_ && height_ == o.height_;
  }

  bool operator==(const FrameBuffer&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
  Domain domain_ = Domain::clipped;
  CfaLayout layout_;
};

struct Clip {
  std::vector<FrameBuffer> frames;
  double frame_rate = 10.0;

  Clip() = default;
  Clip(std::vector<FrameBuffer> f, double rate = 10.0);

  std::size_t size() const { return frames.size(); }
  const FrameBuffer& operator[](std::size_t i) const { return frames[i]; }
  int width() const { return frames.front().width(); }
  int height() const { return frames.front().height(); }
};

// One clean frame plus N noisy frames of the same static scene, partitioned
// into contiguous clips.
class PairedBurst {
 public:
  PairedBurst(FrameBuffer clean, std::vector<FrameBuffer> noisy, std::vector<std::size_t> clip_sizes);
  // Single clip spanning every noisy frame.
  PairedBurst(FrameBuffer clean, std::vector<FrameBuffer> noisy);

  const FrameBuffer& clean() const { return clean_; }
  const std::vector<FrameBuffer>& noisy() const { return noisy_; }
  const std::vector<std::size_t>& clip_sizes() const { return clip_sizes_; }
  std::size_t clip_count() const { return clip_sizes_.size(); }
  // [begin, end) into noisy().
  std::pair<std::size_t, std::size_t> clip_range(std::size_t clip) const;

 private:
  FrameBuffer clean_;
  std::vector<FrameBuffer> noisy_;
  std::vector<std::size_t> clip_sizes_;
};

// --- file I/O -------------------------------------------------------------

// Reads an RFR container or a binary 16-bit PGM (detected by magic).
FrameBuffer read_frame(const std::filesystem::path& path);
// Writes PGM when the extension is .pgm (clipped frames only), RFR otherwise.
void write_frame(const FrameBuffer& frame, const std::filesystem::path& path);

std::vector<std::uint8_t> encode_rfr(const FrameBuffer& frame);
FrameBuffer decode_rfr(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pgm16(const FrameBuffer& frame);
FrameBuffer decode_pgm16(std::span<const std::uint8_t> bytes);

// Clip directory: frame_%06d.rfr plus clip.meta (frame_rate, count).
Clip read_clip(const std::filesystem::path& dir);
void write_clip(const Clip& clip, const std::filesystem::path& dir);

// Burst directory: clean.rfr plus clips/clip_%03d/frame_%06d.rfr.
PairedBurst read_burst(const std::filesystem::path& dir);
void write_burst(const PairedBurst& burst, const std::filesystem::path& dir);
// Every subdirectory holding a clean.rfr, in name order; the directory
// itself when it is a burst.
std::vector<PairedBurst> read_dataset(const std::filesystem::path& dir);

std::string frame_file_name(std::size_t index);

// --- CFA geometry -----------------------------------------------------------

// (H/2)x(W/2) plane of the pixels whose CFA site carries `tag`.
Raster channel_plane(const FrameBuffer& frame, const CfaLayout& layout, Channel tag);
// Inverse of channel_plane over all four tags.
FrameBuffer assemble_planes(const std::array<Raster, 4>& planes, const CfaLayout& layout,
                            Domain domain);

}  // namespace nightnoise
