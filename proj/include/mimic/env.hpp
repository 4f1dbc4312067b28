#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace mimic {

// Planar one-legged hopper: a point-mass body at (x, y) with a two-joint
// massless leg (hip angle q1, knee angle q2). The foot interacts with the
// ground at y = 0 through a spring-damper normal force plus capped friction;
// the contact force acts on the body and, via the leg Jacobian transpose, on
// the joints. Integration is semi-implicit Euler with hard clamps so every
// trajectory stays bounded.
struct HopperParams {
  double dt = 0.02;
  double gravity = 9.81;
  double body_mass = 1.0;
  double l1 = 0.25;  // hip-to-knee length (m)
  double l2 = 0.25;  // knee-to-foot length (m)
  double joint_inertia = 0.08;
  double joint_damping = 0.5;
  double torque_max = 5.0;

  double ground_spring = 150.0;
  double ground_damper = 25.0;
  double friction_coef = 60.0;   // viscous foot-slip coefficient
  double friction_cap = 1.2;     // |Ft| <= cap * Fn

  double q1_min = -1.3, q1_max = 1.3;
  double q2_min = -2.2, q2_max = 0.1;
  double vel_max = 12.0;    // |vx|, |vy| clamp
  double omega_max = 25.0;  // joint angular velocity clamp

  double fall_height = 0.25;
  int horizon = 500;

  // Reset pose (jittered per seed).
  double init_y = 0.52;
  double init_q1 = 0.15;
  double init_q2 = -0.3;
  double jitter = 0.03;
};

struct HopperState {
  double x = 0.0, y = 0.0;
  double vx = 0.0, vy = 0.0;
  double q1 = 0.0, q2 = 0.0;
  double w1 = 0.0, w2 = 0.0;
  int t = 0;
};

struct StepResult {
  HopperState state;
  bool done = false;
};

HopperState env_reset(const HopperParams& p, uint64_t seed);
// Actions are clipped to [-1, 1] and scaled by torque_max internally.
StepResult env_step(const HopperParams& p, const HopperState& s, double a1, double a2);

// Foot position, exposed for tests and the expert controller.
std::array<double, 2> foot_position(const HopperParams& p, const HopperState& s);

// Forward displacement of the body over an episode; the environment's true
// score, used for evaluation only.
inline double progress_score(const HopperState& first, const HopperState& last) {
  return last.x - first.x;
}

// Deterministic phase-based PD controller producing a steady shuffling gait:
// sweep the planted foot backward, then lift and return it. Returns torques in
// action units, already within [-1, 1].
std::array<double, 2> scripted_expert_action(const HopperParams& p, const HopperState& s);

// ---------------------------------------------------------------------------
// Rendering: side view, grayscale, camera horizontally centered on the body.
// Ground line with ticks every 0.5 m scroll as the body moves. No
// anti-aliasing; output is a pure function of the state.

struct RenderSpec {
  double window_w = 2.0;   // world metres spanned horizontally
  double window_y_lo = -0.25;
  double window_h = 2.0;
  double tick_spacing = 0.5;
  // Pixel intensities.
  uint8_t bg = 0, ground = 100, tick = 170, leg = 255, body = 220;
};

void render_frame(const HopperParams& p, const HopperState& s, int res, uint8_t* out,
                  const RenderSpec& spec = {});

}  // namespace mimic
