#include "mimic/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace mimic {

namespace {

// splitmix64: cheap, well-distributed seed expansion for reset jitter.
uint64_t splitmix64(uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double unit_jitter(uint64_t& state) {  // uniform in [-1, 1]
  return static_cast<double>(splitmix64(state) >> 11) * (2.0 / 9007199254740992.0) - 1.0;
}

}  // namespace

HopperState env_reset(const HopperParams& p, uint64_t seed) {
  uint64_t rs = seed * 0x9e3779b97f4a7c15ULL + 0x123456789abcdefULL;
  HopperState s;
  s.x = 0.0;
  s.y = p.init_y + p.jitter * unit_jitter(rs);
  s.q1 = p.init_q1 + p.jitter * unit_jitter(rs);
  s.q2 = p.init_q2 + p.jitter * unit_jitter(rs);
  s.vx = s.vy = s.w1 = s.w2 = 0.0;
  s.t = 0;
  return s;
}

std::array<double, 2> foot_position(const HopperParams& p, const HopperState& s) {
  const double s1 = std::sin(s.q1), c1 = std::cos(s.q1);
  const double s12 = std::sin(s.q1 + s.q2), c12 = std::cos(s.q1 + s.q2);
  return {s.x + p.l1 * s1 + p.l2 * s12, s.y - p.l1 * c1 - p.l2 * c12};
}

StepResult env_step(const HopperParams& p, const HopperState& s, double a1, double a2) {
  a1 = std::clamp(a1, -1.0, 1.0);
  a2 = std::clamp(a2, -1.0, 1.0);

  const double s1 = std::sin(s.q1), c1 = std::cos(s.q1);
  const double s12 = std::sin(s.q1 + s.q2), c12 = std::cos(s.q1 + s.q2);
  const double foot_y = s.y - p.l1 * c1 - p.l2 * c12;

  // Leg Jacobian (foot position w.r.t. joint angles).
  const double j11 = p.l1 * c1 + p.l2 * c12, j12 = p.l2 * c12;
  const double j21 = p.l1 * s1 + p.l2 * s12, j22 = p.l2 * s12;
  const double fvx = s.vx + j11 * s.w1 + j12 * s.w2;
  const double fvy = s.vy + j21 * s.w1 + j22 * s.w2;

  // Ground contact: one-sided spring-damper normal force, capped viscous
  // friction opposing foot slip.
  double fn = 0.0, ft = 0.0;
  const double pen = -foot_y;
  if (pen > 0.0) {
    fn = std::max(0.0, p.ground_spring * pen - p.ground_damper * fvy);
    ft = std::clamp(-p.friction_coef * fvx, -p.friction_cap * fn, p.friction_cap * fn);
  }

  const double ax = ft / p.body_mass;
  const double ay = fn / p.body_mass - p.gravity;
  const double tau1 = p.torque_max * a1 + j11 * ft + j21 * fn - p.joint_damping * s.w1;
  const double tau2 = p.torque_max * a2 + j12 * ft + j22 * fn - p.joint_damping * s.w2;

  HopperState n = s;
  n.vx = std::clamp(s.vx + p.dt * ax, -p.vel_max, p.vel_max);
  n.vy = std::clamp(s.vy + p.dt * ay, -p.vel_max, p.vel_max);
  n.w1 = std::clamp(s.w1 + p.dt * tau1 / p.joint_inertia, -p.omega_max, p.omega_max);
  n.w2 = std::clamp(s.w2 + p.dt * tau2 / p.joint_inertia, -p.omega_max, p.omega_max);
  n.x = s.x + p.dt * n.vx;
  n.y = s.y + p.dt * n.vy;
  n.q1 = s.q1 + p.dt * n.w1;
  n.q2 = s.q2 + p.dt * n.w2;

  // Hard joint limits; kill outward velocity on contact with the stop.
  if (n.q1 < p.q1_min) { n.q1 = p.q1_min; n.w1 = std::max(0.0, n.w1); }
  if (n.q1 > p.q1_max) { n.q1 = p.q1_max; n.w1 = std::min(0.0, n.w1); }
  if (n.q2 < p.q2_min) { n.q2 = p.q2_min; n.w2 = std::max(0.0, n.w2); }
  if (n.q2 > p.q2_max) { n.q2 = p.q2_max; n.w2 = std::min(0.0, n.w2); }
  n.t = s.t + 1;

  StepResult r;
  r.state = n;
  r.done = (n.y < p.fall_height) || (n.t >= p.horizon);
  return r;
}

std::array<double, 2> scripted_expert_action(const HopperParams& p, const HopperState& s) {
  // Gait cycle of 16 control steps. Stance (80% duty) sweeps the hip backward
  // so ground friction drags the body forward, with a knee correction holding
  // body height near y_ref; swing flexes the knee to clear the ground and
  // snaps the hip forward again. Constants found by grid search for survival
  // and steady progress across seeds.
  const int period = 16;
  const double stance_frac = 0.8;
  const double q1_fwd = 0.6, q1_back = -0.3;
  const double q2_stance = -0.3, q2_swing = -0.9;
  const double y_ref = 0.5, height_gain = 9.0;
  const double kp = 6.0, kd = 0.8;

  const double ph = static_cast<double>(s.t % period) / period;
  double q1_t, q2_t;
  if (ph < stance_frac) {
    const double u = ph / stance_frac;
    q1_t = q1_fwd + (q1_back - q1_fwd) * u;
    q2_t = q2_stance + height_gain * (y_ref - s.y);
  } else {
    const double u = (ph - stance_frac) / (1.0 - stance_frac);
    q1_t = q1_back + (q1_fwd - q1_back) * u;
    q2_t = q2_swing;
  }
  q2_t = std::clamp(q2_t, p.q2_min + 0.2, 0.05);

  std::array<double, 2> a;
  a[0] = std::clamp(kp * (q1_t - s.q1) - kd * s.w1, -1.0, 1.0);
  a[1] = std::clamp(kp * (q2_t - s.q2) - kd * s.w2, -1.0, 1.0);
  return a;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

struct Raster {
  uint8_t* px;
  int res;
  void set(int ix, int iy, uint8_t v) {
    if (ix >= 0 && ix < res && iy >= 0 && iy < res)
      px[static_cast<size_t>(iy) * res + ix] = v;
  }
  // Integer line, no anti-aliasing.
  void line(int x0, int y0, int x1, int y1, uint8_t v) {
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
      set(x0, y0, v);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) { err += dy; x0 += sx; }
      if (e2 <= dx) { err += dx; y0 += sy; }
    }
  }
};

}  // namespace

void render_frame(const HopperParams& p, const HopperState& s, int res, uint8_t* out,
                  const RenderSpec& spec) {
  const double cam_l = s.x - spec.window_w / 2.0;
  const double sx = res / spec.window_w;
  const double sy = res / spec.window_h;
  auto to_ix = [&](double wx) { return static_cast<int>(std::floor((wx - cam_l) * sx)); };
  auto to_iy = [&](double wy) {
    return res - 1 - static_cast<int>(std::floor((wy - spec.window_y_lo) * sy));
  };

  Raster r{out, res};
  std::fill(out, out + static_cast<size_t>(res) * res, spec.bg);

  // Ground line and scrolling ticks at fixed world positions.
  const int gy = to_iy(0.0);
  for (int ix = 0; ix < res; ++ix) r.set(ix, gy, spec.ground);
  const double first_tick = std::ceil(cam_l / spec.tick_spacing) * spec.tick_spacing;
  for (double tx = first_tick; tx < cam_l + spec.window_w + spec.tick_spacing;
       tx += spec.tick_spacing) {
    const int ix = to_ix(tx);
    for (int d = 1; d <= 2; ++d) r.set(ix, gy - d, spec.tick);
  }

  // Leg segments hip->knee->foot.
  const double knee_x = s.x + p.l1 * std::sin(s.q1);
  const double knee_y = s.y - p.l1 * std::cos(s.q1);
  const auto foot = foot_position(p, s);
  const int hx = to_ix(s.x), hy = to_iy(s.y);
  const int kx = to_ix(knee_x), ky = to_iy(knee_y);
  const int fx = to_ix(foot[0]), fy = to_iy(foot[1]);
  r.line(hx, hy, kx, ky, spec.leg);
  r.line(kx, ky, fx, fy, spec.leg);

  // Body marker: filled square around the hip.
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) r.set(hx + dx, hy + dy, spec.body);
}

}  // namespace mimic
