#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mimic/relational.hpp"
#include "mimic/tensor.hpp"

namespace mimic {

struct NamedTensor {
  std::string name;
  Tensor t;
};
using ParamList = std::vector<NamedTensor>;

// ---------------------------------------------------------------------------
// Initializers (deterministic given the rng state).
Tensor conv_init(int out_c, int in_c, int kh, int kw, std::mt19937_64& rng);
Tensor orthogonal_init(int out, int in, std::mt19937_64& rng);
Tensor zeros_init(const Shape& shape);

// ---------------------------------------------------------------------------
// Layers. Each is a plain parameter holder with a pure forward.
struct Conv2dLayer {
  Tensor w;  // [F, C, kh, kw]
  Tensor b;  // [F]
  int stride = 1;
  int pad = 0;
  Tensor forward(const Tensor& x) const;
  // Forward with an externally transformed weight (spectral normalization).
  Tensor forward_with(const Tensor& w_used, const Tensor& x) const;
};

struct DenseLayer {
  Tensor w;  // [out, in]
  Tensor b;  // [out]
  Tensor forward(const Tensor& x) const;
  Tensor forward_with(const Tensor& w_used, const Tensor& x) const;
};

struct LayerNormLayer {
  Tensor gain;  // [n]
  Tensor bias;  // [n]
  Tensor forward(const Tensor& x) const;
};

// Bottleneck with ReLU pre-activations on every conv and an identity skip:
// x + c1x1(relu(c3x3(relu(c1x1(relu(x)))))). Inner width is half the channel
// count; the 3x3 uses padding 1 so the skip shapes match.
struct ResidualBlock {
  Conv2dLayer reduce;  // 1x1, C -> C/2
  Conv2dLayer conv;    // 3x3 pad 1, C/2 -> C/2
  Conv2dLayer expand;  // 1x1, C/2 -> C
  Tensor forward(const Tensor& x) const;
};

// ---------------------------------------------------------------------------
// Agent trunk: pixels in, 256-feature embedding out.
struct AgentConfig {
  int k = 4;           // stacked frames
  int colors = 1;      // grayscale
  int resolution = 84;
  bool non_local = false;  // insert the self-attention block
  int base_channels = 16;  // first conv width; feature pooling halves it twice
  int action_dim = 2;
};

struct AgentNet {
  AgentConfig cfg;
  Conv2dLayer conv1;  // 7x7 stride 2 pad 3
  ResidualBlock res1, res2, res3, res4;
  RelationalParams rel;  // used only when cfg.non_local
  DenseLayer fc;         // flatten -> 256
  LayerNormLayer ln;
  int flat_dim = 0;

  // x: [N, k*colors, res, res], raw pixel values 0..255.
  Tensor forward(const Tensor& x) const;
  ParamList parameters(const std::string& prefix) const;
};

AgentNet build_agent(const AgentConfig& cfg, uint64_t seed);

// Diagonal-Gaussian policy: trunk + mean head + state-independent log-std.
struct PolicyOutput {
  Tensor mean;     // [N, action_dim]
  Tensor log_std;  // [action_dim], clamped to [-5, 2]
};

struct PolicyNet {
  AgentNet trunk;
  DenseLayer mu;       // 256 -> action_dim
  Tensor log_std_raw;  // [action_dim]
  PolicyOutput forward(const Tensor& x) const;
  ParamList parameters() const;
};

struct ValueNet {
  AgentNet trunk;
  DenseLayer v;  // 256 -> 1
  Tensor forward(const Tensor& x) const;  // [N]
  ParamList parameters() const;
};

PolicyNet build_policy(const AgentConfig& cfg, uint64_t seed);
ValueNet build_value(const AgentConfig& cfg, uint64_t seed);

// Log density of a diagonal Gaussian, one value per batch row.
Tensor gaussian_log_prob(const Tensor& mean, const Tensor& log_std, const Tensor& actions);
// Differential entropy (scalar; independent of the state for this policy).
Tensor gaussian_entropy(const Tensor& log_std);

// ---------------------------------------------------------------------------
// Spectral normalization. `u` is the persistent power-iteration state, one
// entry per output row of the weight viewed as [out, rest]. When `update_u`
// is set, one power-iteration step advances u in place. The estimated top
// singular value stays inside the autodiff graph, so gradients see it.
Tensor spectral_normalize(const Tensor& w, std::vector<double>& u, bool update_u);

// Discriminator: stacked frames in, realness score in (0,1) out. All conv and
// dense weights (including the attention embeddings) are spectrally
// normalized on every forward pass.
struct DiscConfig {
  int k = 4;
  int colors = 1;
  int resolution = 84;
  std::vector<int> widths = {16, 32, 32, 32, 32};  // five 4x4/s2/p1 convs
  bool non_local = true;  // attention blocks after the third and fourth convs
};

struct SpectralState {
  mutable std::vector<double> u;
};

struct DiscNet {
  DiscConfig cfg;
  Conv2dLayer conv[5];
  RelationalParams rel1, rel2;  // after conv 3 and conv 4
  DenseLayer fc;                // flatten -> 256
  LayerNormLayer ln;
  DenseLayer out;               // 256 -> 1 logit
  int flat_dim = 0;
  // Power-iteration state per normalized weight, in parameter order.
  SpectralState sn[15];

  // Pre-sigmoid score; the gradient penalty differentiates this path.
  Tensor logit(const Tensor& x, bool training) const;
  Tensor prob(const Tensor& x, bool training) const;  // sigmoid(logit)
  ParamList parameters() const;
};

DiscNet build_discriminator(const DiscConfig& cfg, uint64_t seed);

// ---------------------------------------------------------------------------
// Size/cost accounting.
struct NetStats {
  int64_t params = 0;
  int64_t flops = 0;  // one forward pass at batch 1, 2 x multiply-accumulates
  int conv_depth = 0;  // longest serial chain of conv layers
};

NetStats agent_stats(const AgentNet& net);
NetStats disc_stats(const DiscNet& net);

// ---------------------------------------------------------------------------
// Checkpoints: magic, format version, config hash, then named tensor records
// (name, shape, little-endian f64 payload).
uint64_t fnv1a64(const std::string& s);
void save_checkpoint(const std::string& path, uint64_t config_hash, const ParamList& params);
// Loads values into the given (already built) tensors; throws on magic,
// version, hash, missing name, or shape mismatch.
void load_checkpoint(const std::string& path, uint64_t expected_hash, const ParamList& params);

}  // namespace mimic
