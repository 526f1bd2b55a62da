#pragma once

// Independent reference computations for tests. Nothing here calls into the
// enumeration engine under test.

#include <array>
#include <cstddef>
#include <vector>

namespace tlab::testing {

// Brute-force P(X, Y) of a binary bow SCM: fx indexed (u_xy, u_x), fy
// indexed (x, u_xy).
inline std::array<std::array<double, 2>, 2> bow_joint(double p_uxy1, double p_ux1, const std::array<int, 4>& fx,
                                                      const std::array<int, 4>& fy) {
  std::array<std::array<double, 2>, 2> joint{};
  for (int u = 0; u < 2; ++u) {
    for (int v = 0; v < 2; ++v) {
      const double p = (u ? p_uxy1 : 1 - p_uxy1) * (v ? p_ux1 : 1 - p_ux1);
      const int x = fx[static_cast<std::size_t>(u * 2 + v)];
      const int y = fy[static_cast<std::size_t>(x * 2 + u)];
      joint[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)] += p;
    }
  }
  return joint;
}

// Brute-force P(Y = 1 | do(X = x)) of the same SCM: X is forced, U_XY keeps
// its prior.
inline double bow_do_y1(double p_uxy1, const std::array<int, 4>& fy, int x) {
  double p = 0.0;
  for (int u = 0; u < 2; ++u)
    if (fy[static_cast<std::size_t>(x * 2 + u)] == 1) p += u ? p_uxy1 : 1 - p_uxy1;
  return p;
}

}  // namespace tlab::testing
