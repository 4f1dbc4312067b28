#include "mimic/net.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

#include "mimic/ops.hpp"

namespace mimic {

namespace {

constexpr double kPi = 3.14159265358979323846;

int conv_extent(int n, int k, int s, int p) {
  const int span = n + 2 * p - k;
  return span < 0 ? 0 : span / s + 1;
}

[[noreturn]] void reject_row(int row, const std::string& why) {
  throw std::invalid_argument("network build failed at row " + std::to_string(row) + ": " + why);
}

ResidualBlock make_residual(int c, std::mt19937_64& rng) {
  const int inner = c / 2;
  ResidualBlock r;
  r.reduce = {conv_init(inner, c, 1, 1, rng), zeros_init({inner}), 1, 0};
  r.conv = {conv_init(inner, inner, 3, 3, rng), zeros_init({inner}), 1, 1};
  r.expand = {conv_init(c, inner, 1, 1, rng), zeros_init({c}), 1, 0};
  return r;
}

RelationalParams make_relational(int c, std::mt19937_64& rng) {
  RelationalParams p;
  p.wq = conv_init(c / 2, c, 1, 1, rng);
  p.wk = conv_init(c / 2, c, 1, 1, rng);
  p.wv = conv_init(c / 2, c, 1, 1, rng);
  p.we = zeros_init({c, c / 2, 1, 1});
  return p;
}

void push_conv(ParamList& out, const std::string& name, const Conv2dLayer& l) {
  out.push_back({name + ".w", l.w});
  out.push_back({name + ".b", l.b});
}

void push_residual(ParamList& out, const std::string& name, const ResidualBlock& r) {
  push_conv(out, name + ".reduce", r.reduce);
  push_conv(out, name + ".conv", r.conv);
  push_conv(out, name + ".expand", r.expand);
}

void push_relational(ParamList& out, const std::string& name, const RelationalParams& p) {
  out.push_back({name + ".wq", p.wq});
  out.push_back({name + ".wk", p.wk});
  out.push_back({name + ".wv", p.wv});
  out.push_back({name + ".we", p.we});
}

int64_t residual_flops(int c, int hw) {
  const int64_t inner = c / 2;
  return 2 * (inner * c + inner * inner * 9 + c * inner) * hw;
}

int64_t relational_flops(int c, int hw) {
  const int64_t half = c / 2, p = hw;
  int64_t embed = 3 * (half * c * p) + c * half * p;  // q, k, v, e
  int64_t attn = p * p * half + p * p * half;         // logits + aggregation
  return 2 * (embed + attn);
}

}  // namespace

// ---------------------------------------------------------------------------
// Initializers

Tensor conv_init(int out_c, int in_c, int kh, int kw, std::mt19937_64& rng) {
  const int64_t fan_in = static_cast<int64_t>(in_c) * kh * kw;
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> d(static_cast<size_t>(out_c) * in_c * kh * kw);
  for (auto& x : d) x = dist(rng);
  return Tensor::from_data({out_c, in_c, kh, kw}, std::move(d), true);
}

Tensor orthogonal_init(int out, int in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  // Orthonormalize along the shorter side with modified Gram-Schmidt.
  const int rows = std::min(out, in), cols = std::max(out, in);
  std::vector<std::vector<double>> m(rows, std::vector<double>(cols));
  for (auto& r : m)
    for (auto& x : r) x = dist(rng);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < i; ++j) {
      double dot = 0.0;
      for (int t = 0; t < cols; ++t) dot += m[i][t] * m[j][t];
      for (int t = 0; t < cols; ++t) m[i][t] -= dot * m[j][t];
    }
    double norm = 0.0;
    for (int t = 0; t < cols; ++t) norm += m[i][t] * m[i][t];
    norm = std::sqrt(norm);
    if (norm < 1e-12) {  // practically unreachable with continuous draws
      for (int t = 0; t < cols; ++t) m[i][t] = (t == i) ? 1.0 : 0.0;
    } else {
      for (int t = 0; t < cols; ++t) m[i][t] /= norm;
    }
  }
  std::vector<double> d(static_cast<size_t>(out) * in);
  for (int r = 0; r < out; ++r)
    for (int c = 0; c < in; ++c)
      d[static_cast<size_t>(r) * in + c] = (out <= in) ? m[r][c] : m[c][r];
  return Tensor::from_data({out, in}, std::move(d), true);
}

Tensor zeros_init(const Shape& shape) {
  auto t = Tensor::from_data(shape, std::vector<double>(shape_numel(shape), 0.0));
  t.set_requires_grad(true);
  return t;
}

// ---------------------------------------------------------------------------
// Layers

Tensor Conv2dLayer::forward(const Tensor& x) const { return forward_with(w, x); }

Tensor Conv2dLayer::forward_with(const Tensor& w_used, const Tensor& x) const {
  Tensor y = conv2d(x, w_used, stride, stride, pad, pad);
  return add(y, broadcast_chan(b, y.dim(0), y.dim(2), y.dim(3)));
}

Tensor DenseLayer::forward(const Tensor& x) const { return forward_with(w, x); }

Tensor DenseLayer::forward_with(const Tensor& w_used, const Tensor& x) const {
  return dense(x, w_used, b);
}

Tensor LayerNormLayer::forward(const Tensor& x) const {
  return layer_norm(x, gain, bias, 1e-5);
}

Tensor ResidualBlock::forward(const Tensor& x) const {
  Tensor h = reduce.forward(relu(x));
  h = conv.forward(relu(h));
  h = expand.forward(relu(h));
  return add(x, h);
}

// ---------------------------------------------------------------------------
// Agent

AgentNet build_agent(const AgentConfig& cfg, uint64_t seed) {
  if (cfg.k < 1) throw std::invalid_argument("stack depth must be >= 1");
  if (cfg.colors != 1) throw std::invalid_argument("only grayscale input is supported");
  if (cfg.action_dim < 1) throw std::invalid_argument("action_dim must be >= 1");
  if (cfg.base_channels < 4) throw std::invalid_argument("base_channels must be >= 4");

  const int s1 = conv_extent(cfg.resolution, 7, 2, 3);
  if (s1 < 1) reject_row(2, "conv output collapsed at resolution " + std::to_string(cfg.resolution));
  const int c2 = conv_extent(cfg.base_channels, 3, 2, 1);
  const int s2 = conv_extent(s1, 3, 2, 1);
  if (s2 < 1 || c2 < 2) reject_row(3, "pooled feature map too small");
  if (cfg.non_local && c2 % 2 != 0)
    reject_row(5, "attention needs an even channel count, got " + std::to_string(c2));
  const int c3 = conv_extent(c2, 3, 2, 1);
  if (c3 < 2) reject_row(7, "channel pooling left fewer than 2 channels");

  std::mt19937_64 rng(seed);
  AgentNet n;
  n.cfg = cfg;
  n.conv1 = {conv_init(cfg.base_channels, cfg.k * cfg.colors, 7, 7, rng),
             zeros_init({cfg.base_channels}), 2, 3};
  n.res1 = make_residual(c2, rng);
  n.res2 = make_residual(c2, rng);
  n.res3 = make_residual(c3, rng);
  n.res4 = make_residual(c3, rng);
  n.flat_dim = c3 * s2 * s2;
  n.fc = {orthogonal_init(256, n.flat_dim, rng), zeros_init({256})};
  n.ln.gain = Tensor::from_data({256}, std::vector<double>(256, 1.0));
  n.ln.gain.set_requires_grad(true);
  n.ln.bias = zeros_init({256});
  // Drawn last so local and non-local builds with the same seed agree on
  // every shared parameter.
  if (cfg.non_local) n.rel = make_relational(c2, rng);
  return n;
}

Tensor AgentNet::forward(const Tensor& x) const {
  if (x.ndim() != 4 || x.dim(1) != cfg.k * cfg.colors || x.dim(2) != cfg.resolution ||
      x.dim(3) != cfg.resolution) {
    throw std::invalid_argument("agent input must be [N, k, res, res]");
  }
  Tensor h = scale(x, 1.0 / 255.0);
  h = relu(conv1.forward(h));
  h = max_pool3d(h, 3, 3, 3, 2, 2, 2, 1, 1, 1);
  h = res1.forward(h);
  if (cfg.non_local) h = relational_forward(h, rel);
  h = relu(res2.forward(h));
  h = max_pool3d(h, 3, 1, 1, 2, 1, 1, 1, 0, 0);
  h = res3.forward(h);
  h = relu(res4.forward(h));
  h = reshape(h, {x.dim(0), flat_dim});
  return ln.forward(fc.forward(h));
}

ParamList AgentNet::parameters(const std::string& prefix) const {
  ParamList out;
  push_conv(out, prefix + "conv1", conv1);
  push_residual(out, prefix + "res1", res1);
  push_residual(out, prefix + "res2", res2);
  push_residual(out, prefix + "res3", res3);
  push_residual(out, prefix + "res4", res4);
  if (cfg.non_local) push_relational(out, prefix + "rel", rel);
  out.push_back({prefix + "fc.w", fc.w});
  out.push_back({prefix + "fc.b", fc.b});
  out.push_back({prefix + "ln.gain", ln.gain});
  out.push_back({prefix + "ln.bias", ln.bias});
  return out;
}

PolicyNet build_policy(const AgentConfig& cfg, uint64_t seed) {
  PolicyNet p;
  p.trunk = build_agent(cfg, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  // Small head init keeps early action means near zero.
  Tensor mu_w = orthogonal_init(cfg.action_dim, 256, rng);
  for (auto& x : mu_w.mutable_data()) x *= 0.01;
  p.mu = {mu_w, zeros_init({cfg.action_dim})};
  p.log_std_raw =
      Tensor::from_data({cfg.action_dim}, std::vector<double>(cfg.action_dim, -0.5));
  p.log_std_raw.set_requires_grad(true);
  return p;
}

PolicyOutput PolicyNet::forward(const Tensor& x) const {
  return {mu.forward(trunk.forward(x)), clampv(log_std_raw, -5.0, 2.0)};
}

ParamList PolicyNet::parameters() const {
  ParamList out = trunk.parameters("pi.");
  out.push_back({"pi.mu.w", mu.w});
  out.push_back({"pi.mu.b", mu.b});
  out.push_back({"pi.log_std", log_std_raw});
  return out;
}

ValueNet build_value(const AgentConfig& cfg, uint64_t seed) {
  ValueNet v;
  v.trunk = build_agent(cfg, seed);
  std::mt19937_64 rng(seed ^ 0xda3e39cb94b95bdbull);
  v.v = {orthogonal_init(1, 256, rng), zeros_init({1})};
  return v;
}

Tensor ValueNet::forward(const Tensor& x) const {
  return reshape(v.forward(trunk.forward(x)), {x.dim(0)});
}

ParamList ValueNet::parameters() const {
  ParamList out = trunk.parameters("vf.");
  out.push_back({"vf.v.w", v.w});
  out.push_back({"vf.v.b", v.b});
  return out;
}

Tensor gaussian_log_prob(const Tensor& mean, const Tensor& log_std, const Tensor& actions) {
  const int n = mean.dim(0), a = mean.dim(1);
  Tensor z = mul(sub(actions, mean), exp(neg(broadcast_row(log_std, n))));
  Tensor quad = scale(row_sum(mul(z, z)), -0.5);  // [N]
  Tensor constant = add_scalar(sum(log_std), 0.5 * a * std::log(2.0 * kPi));
  return sub(quad, broadcast_scalar(constant, {n}));
}

Tensor gaussian_entropy(const Tensor& log_std) {
  const int a = log_std.dim(0);
  return add_scalar(sum(log_std), 0.5 * a * (1.0 + std::log(2.0 * kPi)));
}

// ---------------------------------------------------------------------------
// Spectral normalization

Tensor spectral_normalize(const Tensor& w, std::vector<double>& u, bool update_u) {
  const int out = w.dim(0);
  const int rest = static_cast<int>(w.size() / out);
  const auto& wd = w.data();
  if (static_cast<int64_t>(u.size()) != out)
    u.assign(static_cast<size_t>(out), 1.0 / std::sqrt(static_cast<double>(out)));

  // One power-iteration step on the raw values (graph-free).
  std::vector<double> v(static_cast<size_t>(rest), 0.0);
  for (int64_t i = 0; i < out; ++i)
    for (int64_t j = 0; j < rest; ++j) v[static_cast<size_t>(j)] += wd[i * rest + j] * u[i];
  double vn = 0.0;
  for (double x : v) vn += x * x;
  vn = std::sqrt(vn);
  if (vn < 1e-12) return w;  // zero (or u-orthogonal) matrix: leave unchanged
  for (double& x : v) x /= vn;

  std::vector<double> un(static_cast<size_t>(out), 0.0);
  for (int64_t i = 0; i < out; ++i)
    for (int64_t j = 0; j < rest; ++j) un[static_cast<size_t>(i)] += wd[i * rest + j] * v[static_cast<size_t>(j)];
  double unorm = 0.0;
  for (double x : un) unorm += x * x;
  unorm = std::sqrt(unorm);
  if (unorm < 1e-12) return w;
  for (double& x : un) x /= unorm;
  if (update_u) u = un;

  // sigma = u^T W v built from graph ops so gradients flow through W.
  Tensor w2 = reshape(w, {out, rest});
  Tensor ut = Tensor::from_data({1, out}, un);
  Tensor vt = Tensor::from_data({rest, 1}, v);
  Tensor sigma = reshape(matmul(matmul(ut, w2), vt), Shape{1});
  if (sigma.at(0) < 1e-12) return w;
  return reshape(div(w2, broadcast_scalar(sigma, {out, rest})), w.shape());
}

// ---------------------------------------------------------------------------
// Discriminator

DiscNet build_discriminator(const DiscConfig& cfg, uint64_t seed) {
  if (cfg.k < 1) throw std::invalid_argument("stack depth must be >= 1");
  if (cfg.colors != 1) throw std::invalid_argument("only grayscale input is supported");
  if (cfg.widths.size() != 5) throw std::invalid_argument("discriminator needs 5 conv widths");

  int s = cfg.resolution;
  static constexpr int conv_rows[5] = {2, 3, 4, 6, 8};
  for (int i = 0; i < 5; ++i) {
    s = conv_extent(s, 4, 2, 1);
    if (s < 1) reject_row(conv_rows[i], "conv output collapsed; resolution too small");
  }
  if (cfg.non_local) {
    if (cfg.widths[2] % 2 != 0) reject_row(5, "attention needs an even channel count");
    if (cfg.widths[3] % 2 != 0) reject_row(7, "attention needs an even channel count");
  }

  std::mt19937_64 rng(seed);
  DiscNet d;
  d.cfg = cfg;
  int in_c = cfg.k * cfg.colors;
  for (int i = 0; i < 5; ++i) {
    d.conv[i] = {conv_init(cfg.widths[static_cast<size_t>(i)], in_c, 4, 4, rng),
                 zeros_init({cfg.widths[static_cast<size_t>(i)]}), 2, 1};
    in_c = cfg.widths[static_cast<size_t>(i)];
  }
  d.flat_dim = cfg.widths[4] * s * s;
  d.fc = {orthogonal_init(256, d.flat_dim, rng), zeros_init({256})};
  d.ln.gain = Tensor::from_data({256}, std::vector<double>(256, 1.0));
  d.ln.gain.set_requires_grad(true);
  d.ln.bias = zeros_init({256});
  d.out = {orthogonal_init(1, 256, rng), zeros_init({1})};
  // Attention parameters come last so the local and non-local variants share
  // every other weight when built from the same seed.
  if (cfg.non_local) {
    d.rel1 = make_relational(cfg.widths[2], rng);
    d.rel2 = make_relational(cfg.widths[3], rng);
  }
  for (auto& st : d.sn) st.u.clear();
  return d;
}

Tensor DiscNet::logit(const Tensor& x, bool training) const {
  if (x.ndim() != 4 || x.dim(1) != cfg.k * cfg.colors || x.dim(2) != cfg.resolution ||
      x.dim(3) != cfg.resolution) {
    throw std::invalid_argument("discriminator input must be [N, k, res, res]");
  }
  auto norm = [&](const Tensor& w, int slot) {
    return spectral_normalize(w, sn[slot].u, training);
  };
  auto rel_apply = [&](const Tensor& h, const RelationalParams& r, int base) {
    RelationalParams rn;
    rn.wq = norm(r.wq, base);
    rn.wk = norm(r.wk, base + 1);
    rn.wv = norm(r.wv, base + 2);
    rn.we = norm(r.we, base + 3);
    return relational_forward(h, rn);
  };
  Tensor h = scale(x, 1.0 / 255.0);
  for (int i = 0; i < 5; ++i) {
    h = lrelu(conv[i].forward_with(norm(conv[i].w, i), h), 0.1);
    if (cfg.non_local && i == 2) h = rel_apply(h, rel1, 5);
    if (cfg.non_local && i == 3) h = rel_apply(h, rel2, 9);
  }
  h = reshape(h, {x.dim(0), flat_dim});
  h = ln.forward(fc.forward_with(norm(fc.w, 13), h));
  return reshape(out.forward_with(norm(out.w, 14), h), {x.dim(0)});
}

Tensor DiscNet::prob(const Tensor& x, bool training) const {
  return sigmoid(logit(x, training));
}

ParamList DiscNet::parameters() const {
  ParamList p;
  for (int i = 0; i < 5; ++i) push_conv(p, "disc.conv" + std::to_string(i + 1), conv[i]);
  if (cfg.non_local) {
    push_relational(p, "disc.rel1", rel1);
    push_relational(p, "disc.rel2", rel2);
  }
  p.push_back({"disc.fc.w", fc.w});
  p.push_back({"disc.fc.b", fc.b});
  p.push_back({"disc.ln.gain", ln.gain});
  p.push_back({"disc.ln.bias", ln.bias});
  p.push_back({"disc.out.w", out.w});
  p.push_back({"disc.out.b", out.b});
  return p;
}

// ---------------------------------------------------------------------------
// Accounting

namespace {

int64_t param_count(const ParamList& ps) {
  int64_t n = 0;
  for (const auto& p : ps) n += p.t.size();
  return n;
}

}  // namespace

NetStats agent_stats(const AgentNet& net) {
  NetStats st;
  st.params = param_count(net.parameters(""));
  st.conv_depth = net.cfg.non_local ? 15 : 13;
  const int s1 = conv_extent(net.cfg.resolution, 7, 2, 3);
  const int c1 = net.cfg.base_channels;
  const int c2 = conv_extent(c1, 3, 2, 1);
  const int s2 = conv_extent(s1, 3, 2, 1);
  const int c3 = conv_extent(c2, 3, 2, 1);
  st.flops = 2LL * c1 * net.cfg.k * net.cfg.colors * 49 * s1 * s1;
  st.flops += 2 * residual_flops(c2, s2 * s2);
  if (net.cfg.non_local) st.flops += relational_flops(c2, s2 * s2);
  st.flops += 2 * residual_flops(c3, s2 * s2);
  st.flops += 2LL * 256 * net.flat_dim;
  return st;
}

NetStats disc_stats(const DiscNet& net) {
  NetStats st;
  st.params = param_count(net.parameters());
  // Five serial convs, plus two attention blocks of depth 2 when present.
  st.conv_depth = net.cfg.non_local ? 9 : 5;
  int s = net.cfg.resolution;
  int in_c = net.cfg.k * net.cfg.colors;
  for (int i = 0; i < 5; ++i) {
    const int w = net.cfg.widths[static_cast<size_t>(i)];
    s = conv_extent(s, 4, 2, 1);
    st.flops += 2LL * w * in_c * 16 * s * s;
    if (net.cfg.non_local && i == 2) st.flops += relational_flops(w, s * s);
    if (net.cfg.non_local && i == 3) st.flops += relational_flops(w, s * s);
    in_c = w;
  }
  st.flops += 2LL * 256 * net.flat_dim;
  st.flops += 2LL * 256;
  return st;
}

// ---------------------------------------------------------------------------
// Checkpoints

uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

constexpr char kCkptMagic[8] = {'R', 'M', 'C', 'K', 'P', 'T', '0', '1'};
constexpr uint32_t kCkptVersion = 1;

void put_u32(std::string& b, uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& b, uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& b, double d) {
  uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64(b, bits);
}

uint32_t get_u32(const std::string& b, size_t& off) {
  if (off + 4 > b.size()) throw std::runtime_error("checkpoint truncated");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(b[off + i])) << (8 * i);
  off += 4;
  return v;
}

uint64_t get_u64(const std::string& b, size_t& off) {
  if (off + 8 > b.size()) throw std::runtime_error("checkpoint truncated");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(b[off + i])) << (8 * i);
  off += 8;
  return v;
}

double get_f64(const std::string& b, size_t& off) {
  uint64_t bits = get_u64(b, off);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

}  // namespace

void save_checkpoint(const std::string& path, uint64_t config_hash, const ParamList& params) {
  std::string buf;
  buf.append(kCkptMagic, 8);
  put_u32(buf, kCkptVersion);
  put_u64(buf, config_hash);
  put_u32(buf, static_cast<uint32_t>(params.size()));
  for (const auto& p : params) {
    put_u32(buf, static_cast<uint32_t>(p.name.size()));
    buf.append(p.name);
    put_u32(buf, static_cast<uint32_t>(p.t.ndim()));
    for (int i = 0; i < p.t.ndim(); ++i) put_u32(buf, static_cast<uint32_t>(p.t.dim(i)));
    for (int64_t i = 0; i < p.t.size(); ++i) put_f64(buf, p.t.at(i));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

void load_checkpoint(const std::string& path, uint64_t expected_hash, const ParamList& params) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (buf.size() < 8 || std::memcmp(buf.data(), kCkptMagic, 8) != 0)
    throw std::runtime_error("bad checkpoint magic, expected RMCKPT01");
  size_t off = 8;
  const uint32_t version = get_u32(buf, off);
  if (version != kCkptVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  const uint64_t hash = get_u64(buf, off);
  if (hash != expected_hash)
    throw std::runtime_error("checkpoint config hash mismatch: file was written by a different configuration");
  const uint32_t count = get_u32(buf, off);

  std::map<std::string, std::pair<Shape, std::vector<double>>> records;
  for (uint32_t r = 0; r < count; ++r) {
    const uint32_t name_len = get_u32(buf, off);
    if (off + name_len > buf.size()) throw std::runtime_error("checkpoint truncated");
    std::string name = buf.substr(off, name_len);
    off += name_len;
    const uint32_t nd = get_u32(buf, off);
    Shape shape(nd);
    for (uint32_t i = 0; i < nd; ++i) shape[i] = static_cast<int>(get_u32(buf, off));
    std::vector<double> data(static_cast<size_t>(shape_numel(shape)));
    for (auto& x : data) x = get_f64(buf, off);
    records.emplace(std::move(name), std::make_pair(std::move(shape), std::move(data)));
  }
  if (off != buf.size()) throw std::runtime_error("checkpoint has trailing bytes");

  for (const auto& p : params) {
    auto it = records.find(p.name);
    if (it == records.end())
      throw std::runtime_error("checkpoint is missing parameter " + p.name);
    if (it->second.first != p.t.shape())
      throw std::runtime_error("checkpoint shape mismatch for " + p.name);
    Tensor dst = p.t;  // handle copy; shares storage
    dst.mutable_data() = it->second.second;
    records.erase(it);
  }
  if (!records.empty())
    throw std::runtime_error("checkpoint contains unknown parameter " + records.begin()->first);
}

}  // namespace mimic
