#pragma once

#include "polyxport/vec.hpp"

namespace polyxport {

/// Rotation K(v) with v K = e1. Continuous away from v = -e1, where the fixed
/// rotation diag(-1, -1, 1) (d = 3) is used.
Mat frame(const Vec& v);

/// Specular reflection of velocity v off a sphere at unit impact point w.
/// Requires v . w < 0.
Vec reflect(const Vec& v, const Vec& w);

/// Unit impact point w with reflect(v, w) = v_plus.
Vec impact_point(const Vec& v, const Vec& v_plus);

/// Impact parameter (w K(v))_perp of the collision turning v into v_plus.
Vec impact_param(const Vec& v, const Vec& v_plus);

/// Exit parameter (w' K(v))_perp, where w' is the point at which the previous
/// collision (turning v_prev into v) left its scatterer.
Vec exit_param(const Vec& v, const Vec& v_prev);

/// Impact point on the unit sphere for impact parameter b relative to v.
Vec impact_point_from_param(const Vec& v, const Vec& b);

/// Outgoing velocity for impact parameter b (|b| < 1).
Vec outgoing_velocity(const Vec& v, const Vec& b);

/// Hard-sphere differential cross section 2^(1-d) (|v - v_plus| / 2)^(3-d).
double cross_section(const Vec& v, const Vec& v_plus);

}  // namespace polyxport
