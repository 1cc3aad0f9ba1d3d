#pragma once

#include "robs/coprime.hpp"

namespace robs
{

// Plant driven as  x+ = A x + B (u + w) + delta,  y = C x + D (u + w) + nu.
// w is an input disturbance and therefore also passes the feedthrough.

// Controller realized in factor form, u = X_Q (r - y) + (I - Y_Q) u.
// Inputs of the returned system: [z; u] with z = r - y.
System factor_controller(const YoulaRealization & yr);

// Closed loop of plant and a controller with inputs [z; u].
// Inputs  [r; w; nu; delta]  (p, m, p, n)
// Outputs [x; u; y]          (n, m, p)
struct ClosedLoop
{
  System sys;
  Index n = 0, m = 0, p = 0;

  Index input_r() const {return 0;}
  Index input_w() const {return p;}
  Index input_nu() const {return p + m;}
  Index input_delta() const {return 2 * p + m;}
  Index output_x() const {return 0;}
  Index output_u() const {return n;}
  Index output_y() const {return n + m;}
};

ClosedLoop closed_loop(const System & plant, const System & controller);

// Columns are time samples. Throws std::overflow_error when the state norm
// exceeds `guard`.
Matrix simulate(const System & sys, const Matrix & inputs, double guard = 1e12);

struct ObserverTrace
{
  Matrix x, xhat, u, y;
};

// Plant with u = F x^ and x^ = Psi_u * u + Psi_y * y computed by direct
// convolution with the observer taps; steps must not exceed the tap count.
ObserverTrace simulate_observer_loop(
  const System & plant, const Matrix & F, const ObserverPair & obs,
  const Matrix & w, const Matrix & nu, const Matrix & delta);

}  // namespace robs
