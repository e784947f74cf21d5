#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>

#include "polysls/poly.hpp"

namespace polysls {

/// A black-box smooth discrete-time drift f with a known equilibrium
/// f(x_star) = x_star in original coordinates. All fitting happens in shifted
/// coordinates e = x - x_star, where shifted(e) = f(x_star + e) - x_star and
/// shifted(0) = 0.
struct SmoothDynamics {
    int n = 0;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> eval;
    Eigen::VectorXd x_star;

    Eigen::VectorXd shifted(const Eigen::VectorXd& e) const { return eval(x_star + e) - x_star; }
};

/// Inputs of the Lagrange remainder bound M * radius^(k+1) / (k+1)!.
/// `radius` is an effective 1-norm domain radius.
struct RemainderModel {
    double M = 0.0;
    int k = 0;
    double radius = 0.0;
};

struct TaylorOptions {
    double base_step = 1e-2;  // central-difference step, scaled per order
};

/// Fit a degree-k PolyDynamics around x_star by central finite differences
/// with one level of Richardson extrapolation. Exact polynomials of degree
/// <= k are recovered. k must be in [1, 6]. The returned M field is 0; the
/// fitting pipeline fills it from estimate_deriv_bound.
PolyDynamics taylor_expand(const SmoothDynamics& f, int k, const TaylorOptions& opts = {});

/// Estimate the Assumption-style derivative bound: the maximum magnitude of
/// any order-(k+1) mixed partial derivative of (shifted) f over sampled points
/// of the 1-norm ball of `radius`, times a 1.5 safety factor. `samples` >= 100.
double estimate_deriv_bound(const SmoothDynamics& f, double radius, int k, int samples,
                            std::uint64_t seed = 20240901ull, const TaylorOptions& opts = {});

/// M * radius^(k+1) / (k+1)!.
double lagrange_remainder(const RemainderModel& rm);

/// Central finite-difference weights for the given derivative order on the
/// symmetric integer grid -ceil(p/2)..ceil(p/2) (Fornberg's recursion).
std::vector<double> central_diff_weights(int deriv_order);

}  // namespace polysls
