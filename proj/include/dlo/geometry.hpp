#pragma once

#include <array>
#include <cmath>
#include <vector>

namespace dlo {

using Vec3 = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
inline Vec3 operator-(const Vec3& a, const Vec3& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline Vec3& operator+=(Vec3& a, const Vec3& b) {
  a[0] += b[0];
  a[1] += b[1];
  a[2] += b[2];
  return a;
}
inline Vec3& operator-=(Vec3& a, const Vec3& b) {
  a[0] -= b[0];
  a[1] -= b[1];
  a[2] -= b[2];
  return a;
}
inline double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }

// Wrap an angle into (-pi, pi]. Values already in range pass through exactly.
inline double wrap_angle(double a) {
  constexpr double pi = 3.14159265358979323846;
  if (a > -pi && a <= pi) return a;
  double r = std::fmod(a + pi, 2.0 * pi);
  if (r <= 0.0) r += 2.0 * pi;
  return r - pi;
}

inline Vec3 wrap_euler(const Vec3& e) {
  return {wrap_angle(e[0]), wrap_angle(e[1]), wrap_angle(e[2])};
}

// Gripper pose: world position and roll/pitch/yaw Euler angles in (-pi, pi].
struct GripperPose {
  Vec3 position{0.0, 0.0, 0.0};
  Vec3 euler{0.0, 0.0, 0.0};
};

// Direction of the gripper-held tip segment: R = Rz(yaw) Ry(pitch) Rx(roll)
// applied to the rest axis +z.
inline Vec3 tip_axis(const Vec3& euler) {
  const double cr = std::cos(euler[0]), sr = std::sin(euler[0]);
  const double cp = std::cos(euler[1]), sp = std::sin(euler[1]);
  const double cy = std::cos(euler[2]), sy = std::sin(euler[2]);
  // third column of Rz(yaw)*Ry(pitch)*Rx(roll)
  return {cy * sp * cr + sy * sr, sy * sp * cr - cy * sr, cp * cr};
}

struct Box3 {
  Vec3 lo{0.0, 0.0, 0.0};
  Vec3 hi{0.0, 0.0, 0.0};

  bool contains(const Vec3& p, double tol = 0.0) const {
    for (int i = 0; i < 3; ++i)
      if (p[i] < lo[i] - tol || p[i] > hi[i] + tol) return false;
    return true;
  }
  Vec3 clamp(const Vec3& p) const {
    Vec3 q = p;
    for (int i = 0; i < 3; ++i) q[i] = std::min(std::max(q[i], lo[i]), hi[i]);
    return q;
  }
};

}  // namespace dlo
