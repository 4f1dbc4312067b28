#include "mimic/demo.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

namespace mimic {

Frame render_to_frame(const HopperParams& p, const HopperState& s, int res) {
  Frame f;
  f.res = res;
  f.px.resize(static_cast<size_t>(res) * res);
  render_frame(p, s, res, f.px.data());
  return f;
}

std::vector<Frame> stack_frames(const std::vector<Frame>& history, int k) {
  if (k < 1) throw std::invalid_argument("stack_frames: k must be >= 1");
  if (history.empty()) throw std::invalid_argument("stack_frames: empty history");
  std::vector<Frame> out;
  out.reserve(static_cast<size_t>(k));
  for (int i = k - 1; i >= 0; --i) {
    const int64_t idx = static_cast<int64_t>(history.size()) - 1 - i;
    out.push_back(history[static_cast<size_t>(std::max<int64_t>(0, idx))]);
  }
  return out;
}

FrameStack::FrameStack(int k) : k_(k) {
  if (k < 1) throw std::invalid_argument("FrameStack: k must be >= 1");
}

void FrameStack::reset(Frame f) {
  buf_.assign(static_cast<size_t>(k_), f);
}

void FrameStack::push(Frame f) {
  if (buf_.empty()) throw std::logic_error("FrameStack: push before reset");
  buf_.erase(buf_.begin());
  buf_.push_back(std::move(f));
}

void copy_stack_into(const std::vector<Frame>& stack, double* dst) {
  for (const Frame& f : stack) {
    for (uint8_t b : f.px) *dst++ = static_cast<double>(b);
  }
}

Tensor frames_to_tensor(const std::vector<Frame>& stack) {
  if (stack.empty()) throw std::invalid_argument("frames_to_tensor: empty stack");
  const int k = static_cast<int>(stack.size());
  const int res = stack[0].res;
  std::vector<double> data(static_cast<size_t>(k) * res * res);
  copy_stack_into(stack, data.data());
  return Tensor::from_data({1, k, res, res}, std::move(data));
}

DemoSet record_demos(const HopperParams& p, int n, uint64_t seed, int res) {
  if (n < 1) throw std::invalid_argument("record_demos: n must be >= 1");
  DemoSet d;
  d.resolution = res;
  d.frame_hz = 1.0 / p.dt;
  double score_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    HopperState s = env_reset(p, seed + static_cast<uint64_t>(i));
    const HopperState first = s;
    std::vector<Frame> ep;
    ep.push_back(render_to_frame(p, s, res));
    for (;;) {
      const auto a = scripted_expert_action(p, s);
      StepResult r = env_step(p, s, a[0], a[1]);
      s = r.state;
      ep.push_back(render_to_frame(p, s, res));
      if (r.done) break;
    }
    score_sum += progress_score(first, s);
    d.episodes.push_back(std::move(ep));
  }
  d.mean_score = score_sum / n;
  return d;
}

// ---------------------------------------------------------------------------
// File I/O

namespace {

constexpr char kMagic[8] = {'R', 'M', 'D', 'E', 'M', 'O', '0', '1'};

void put_u32(std::vector<uint8_t>& buf, uint32_t v) {
  buf.push_back(static_cast<uint8_t>(v & 0xff));
  buf.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
  buf.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
  buf.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
}

uint32_t get_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

uint32_t crc32_ieee(const uint8_t* data, size_t n) {
  static uint32_t table[256];
  static bool init = false;
  if (!init) {
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int j = 0; j < 8; ++j) c = (c & 1) ? (0xedb88320u ^ (c >> 1)) : (c >> 1);
      table[i] = c;
    }
    init = true;
  }
  uint32_t crc = 0xffffffffu;
  for (size_t i = 0; i < n; ++i) crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
  return crc ^ 0xffffffffu;
}

void save_demos(const DemoSet& d, const std::string& path) {
  std::vector<uint8_t> payload;
  put_u32(payload, static_cast<uint32_t>(d.episodes.size()));
  put_u32(payload, static_cast<uint32_t>(d.resolution));
  const size_t frame_bytes = static_cast<size_t>(d.resolution) * d.resolution;
  for (const auto& ep : d.episodes) {
    put_u32(payload, static_cast<uint32_t>(ep.size()));
    for (const Frame& f : ep) {
      if (f.px.size() != frame_bytes)
        throw std::invalid_argument("save_demos: frame size does not match set resolution");
      payload.insert(payload.end(), f.px.begin(), f.px.end());
    }
  }
  const uint32_t crc = crc32_ieee(payload.data(), payload.size());

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_demos: cannot open " + path);
  out.write(kMagic, sizeof(kMagic));
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
  std::vector<uint8_t> tail;
  put_u32(tail, crc);
  out.write(reinterpret_cast<const char*>(tail.data()), 4);
  if (!out) throw std::runtime_error("save_demos: short write to " + path);
}

DemoSet load_demos(const std::string& path, int expect_res) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_demos: cannot open " + path);
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
  if (buf.size() < sizeof(kMagic) + 12)
    throw std::runtime_error("load_demos: file too short (" + std::to_string(buf.size()) +
                             " bytes) in " + path);
  if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("load_demos: bad magic in " + path +
                             " (expected RMDEMO01)");

  const uint8_t* payload = buf.data() + sizeof(kMagic);
  const size_t payload_len = buf.size() - sizeof(kMagic) - 4;
  const uint32_t stored_crc = get_u32(buf.data() + buf.size() - 4);
  const uint32_t crc = crc32_ieee(payload, payload_len);
  if (crc != stored_crc) {
    char msg[96];
    std::snprintf(msg, sizeof(msg), "load_demos: CRC mismatch, stored %08x computed %08x",
                  stored_crc, crc);
    throw std::runtime_error(std::string(msg) + " in " + path);
  }

  size_t off = 0;
  auto need = [&](size_t n) {
    if (off + n > payload_len)
      throw std::runtime_error("load_demos: truncated payload in " + path);
  };
  need(8);
  const uint32_t count = get_u32(payload + off); off += 4;
  const uint32_t res = get_u32(payload + off); off += 4;
  if (res == 0 || res > 4096)
    throw std::runtime_error("load_demos: implausible resolution " + std::to_string(res));
  if (expect_res > 0 && static_cast<int>(res) != expect_res)
    throw std::runtime_error("load_demos: resolution mismatch, expected " +
                             std::to_string(expect_res) + " found " + std::to_string(res));

  DemoSet d;
  d.resolution = static_cast<int>(res);
  const size_t frame_bytes = static_cast<size_t>(res) * res;
  for (uint32_t e = 0; e < count; ++e) {
    need(4);
    const uint32_t len = get_u32(payload + off); off += 4;
    need(frame_bytes * len);
    std::vector<Frame> ep(len);
    for (uint32_t i = 0; i < len; ++i) {
      ep[i].res = static_cast<int>(res);
      ep[i].px.assign(payload + off, payload + off + frame_bytes);
      off += frame_bytes;
    }
    d.episodes.push_back(std::move(ep));
  }
  if (off != payload_len)
    throw std::runtime_error("load_demos: trailing bytes after episodes in " + path);
  return d;
}

}  // namespace mimic
