#pragma once

// The two reference problems: a modified mass-spring damper (pH-ODE) and a
// robot end-effector in vertical translation (pH-DAE, pencil index 2 with an
// input that does not excite the nilpotent part).

#include <utility>
#include <vector>

#include "phtp/model.hpp"

namespace phtp::examples {

inline PhOdeSystem msd_system() {
  PhOdeSystem s;
  s.J.resize(3, 3);
  s.J << 0, 0, 1,
         0, 0, -1,
        -1, 1, 0;
  s.R.resize(3, 3);
  s.R << 1, 1, 0,
         1, 1, 0,
         0, 0, 0;
  s.Q = Matrix::Identity(3, 3);
  s.B = Matrix::Zero(3, 1);
  s.B(0, 0) = 1.0;
  s.P = Matrix::Zero(3, 1);
  s.D = Matrix::Zero(1, 1);
  return s;
}

inline OcpSpec msd_spec(double T = 20.0, int N = 200) {
  OcpSpec spec;
  spec.system = msd_system();
  spec.T = T;
  spec.N = N;
  spec.initial = Vector::Ones(3);
  Vector xT(3);
  xT << -1.2, -0.7, -1.0;
  spec.target = TargetSet::at(xT);
  spec.control = ControlSet::default_box(1);
  return spec;
}

inline std::vector<std::pair<double, int>> msd_horizons() {
  return {{10.0, 100}, {15.0, 150}, {20.0, 200}};
}

struct RobotParams {
  double mA = 1.1, mB = 0.1;
  double k1 = 0.0, k2 = 5.0, inv_k3 = 0.0;  // k3 = ∞
  double c1 = 10.0, c2 = 10.0, c3 = 17.0;
};

inline PhDaeSystem robot_system(const RobotParams& p = {}) {
  PhDaeSystem s;
  s.E = Vector((Vector(5) << 1.0, 1.0, p.inv_k3, p.mA, p.mB).finished())
            .asDiagonal();
  s.Q = Vector((Vector(5) << p.k1, p.k2, 1.0, 1.0, 1.0).finished())
            .asDiagonal();
  Matrix G(3, 2);
  G << 1, 0,
      -1, 1,
       0, -1;
  s.J = Matrix::Zero(5, 5);
  s.J.topRightCorner(3, 2) = G;
  s.J.bottomLeftCorner(2, 3) = -G.transpose();
  s.R = Matrix::Zero(5, 5);
  s.R.bottomRightCorner(2, 2) << p.c1 + p.c2, -p.c2,
                                 -p.c2, p.c2 + p.c3;
  s.B = Matrix::Zero(5, 1);
  s.B(3, 0) = 1.0;
  return s;
}

inline ControlSet robot_control_set() {
  return ControlSet::box(Vector::Constant(1, -100.0), Vector::Constant(1, 100.0));
}

inline OcpSpec robot_spec(double T = 15.0, int N = 3000) {
  OcpSpec spec;
  spec.system = robot_system();
  spec.T = T;
  spec.N = N;
  spec.initial = (Vector(5) << 1, 1, 0, 1, 0).finished();
  spec.target = TargetSet::at((Vector(5) << 1, 1, 0, 2, 0).finished());
  // Reaching momentum 2 while the spring-2 elongation returns to 1 needs
  // |u| > 31 at the end, so the [-10, 10] default box is infeasible here.
  spec.control = robot_control_set();
  return spec;
}

inline std::vector<std::pair<double, int>> robot_horizons() {
  return {{5.0, 1000}, {10.0, 2000}, {15.0, 3000}};
}

}  // namespace phtp::examples
