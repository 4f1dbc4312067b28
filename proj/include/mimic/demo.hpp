#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mimic/env.hpp"
#include "mimic/tensor.hpp"

namespace mimic {

struct Frame {
  int res = 0;
  std::vector<uint8_t> px;  // res*res grayscale bytes
  bool operator==(const Frame&) const = default;
};

Frame render_to_frame(const HopperParams& p, const HopperState& s, int res);

// k most recent frames of `history` (oldest first); missing history at episode
// start is filled by repeating the first frame. Throws on k < 1 or empty
// history.
std::vector<Frame> stack_frames(const std::vector<Frame>& history, int k);

// Rolling window used during rollouts; reset() fills the window with k copies
// of the initial frame.
class FrameStack {
 public:
  explicit FrameStack(int k);
  void reset(Frame f);
  void push(Frame f);
  const std::vector<Frame>& frames() const { return buf_; }  // oldest first
  int k() const { return k_; }

 private:
  int k_;
  std::vector<Frame> buf_;
};

// Oldest-first frames to a [1, k, res, res] tensor of raw byte values
// (0..255); networks standardize internally.
Tensor frames_to_tensor(const std::vector<Frame>& stack);
// Same layout written into a caller-provided slice of k*res*res doubles.
void copy_stack_into(const std::vector<Frame>& stack, double* dst);

// State-only demonstrations: raw frame sequences, no actions, no rewards.
struct DemoSet {
  int resolution = 0;
  double frame_hz = 0.0;    // frames per second, 1/dt of the recording env
  std::string env_id = "hopper2d";
  double mean_score = 0.0;  // average forward progress of the recorded episodes
  std::vector<std::vector<Frame>> episodes;
};

DemoSet record_demos(const HopperParams& p, int n, uint64_t seed, int res);

// File layout: magic "RMDEMO01", then little-endian u32 episode count, u32
// resolution, per episode u32 frame count followed by count*res*res bytes,
// and a trailing CRC-32 (IEEE) of everything between magic and checksum.
void save_demos(const DemoSet& d, const std::string& path);
// expect_res = 0 accepts any resolution; otherwise a mismatch throws with the
// expected and found values.
DemoSet load_demos(const std::string& path, int expect_res = 0);

uint32_t crc32_ieee(const uint8_t* data, size_t n);

}  // namespace mimic
