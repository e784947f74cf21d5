#include "polysls/taylor.hpp"

#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

namespace polysls {

namespace {

double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

// Fornberg's recursion for finite-difference weights of derivative order
// `order` at z = 0 on the given grid.
std::vector<double> fd_weights(int order, const std::vector<double>& grid) {
    const int n = static_cast<int>(grid.size()) - 1;
    std::vector<std::vector<double>> c(n + 1, std::vector<double>(order + 1, 0.0));
    double c1 = 1.0;
    double c4 = grid[0];
    c[0][0] = 1.0;
    for (int i = 1; i <= n; ++i) {
        const int mn = std::min(i, order);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = grid[i];
        for (int j = 0; j <= i - 1; ++j) {
            const double c3 = grid[i] - grid[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int kk = mn; kk >= 1; --kk)
                    c[i][kk] = c1 * (kk * c[i - 1][kk - 1] - c5 * c[i - 1][kk]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int kk = mn; kk >= 1; --kk) c[j][kk] = (c4 * c[j][kk] - kk * c[j][kk - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(n + 1);
    for (int i = 0; i <= n; ++i) w[i] = c[i][order];
    return w;
}

struct Stencil {
    int half = 0;
    std::vector<double> weights;  // indices -half..half
};

Stencil central_stencil(int order) {
    const int half = (order + 1) / 2;
    std::vector<double> grid;
    for (int g = -half; g <= half; ++g) grid.push_back(static_cast<double>(g));
    return Stencil{half, fd_weights(order, grid)};
}

using EvalFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Tensor-product central-difference estimate of the mixed partial D^beta f at
// `center`, with per-variable step h. Skips zero stencil weights.
Eigen::VectorXd mixed_partial_raw(const EvalFn& f, int n, const Eigen::VectorXd& center,
                                  const std::vector<int>& beta, double h) {
    std::vector<int> active;
    std::vector<Stencil> stencils;
    int total_order = 0;
    for (int v = 0; v < n; ++v) {
        if (beta[v] > 0) {
            active.push_back(v);
            stencils.push_back(central_stencil(beta[v]));
            total_order += beta[v];
        }
    }
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
    std::vector<int> offs(active.size(), 0);
    std::function<void(std::size_t, double, Eigen::VectorXd&)> walk =
        [&](std::size_t idx, double wprod, Eigen::VectorXd& point) {
            if (idx == active.size()) {
                const Eigen::VectorXd val = f(point);
                if (!val.allFinite())
                    throw std::runtime_error("finite differences: dynamics returned a non-finite sample");
                acc += wprod * val;
                return;
            }
            const Stencil& st = stencils[idx];
            for (int g = -st.half; g <= st.half; ++g) {
                const double w = st.weights[g + st.half];
                if (w == 0.0) continue;
                const double saved = point(active[idx]);
                point(active[idx]) = saved + g * h;
                walk(idx + 1, wprod * w, point);
                point(active[idx]) = saved;
            }
        };
    Eigen::VectorXd point = center;
    walk(0, 1.0, point);
    return acc / std::pow(h, total_order);
}

// One Richardson level: the raw estimates have even-order error, so
// (4 D(h/2) - D(h)) / 3 removes the leading h^2 term.
Eigen::VectorXd mixed_partial(const EvalFn& f, int n, const Eigen::VectorXd& center,
                              const std::vector<int>& beta, double h) {
    const Eigen::VectorXd coarse = mixed_partial_raw(f, n, center, beta, h);
    const Eigen::VectorXd fine = mixed_partial_raw(f, n, center, beta, h / 2.0);
    return (4.0 * fine - coarse) / 3.0;
}

void enumerate_multi_indices(int n, int degree, std::vector<int>& beta, int var, int left,
                             const std::function<void(const std::vector<int>&)>& emit) {
    if (var == n - 1) {
        beta[var] = left;
        emit(beta);
        return;
    }
    for (int take = 0; take <= left; ++take) {
        beta[var] = take;
        enumerate_multi_indices(n, degree, beta, var + 1, left - take, emit);
    }
}

double step_for_order(double base, int order) {
    // larger stencil orders need a larger step to stay above round-off
    return base * std::sqrt(static_cast<double>(order));
}

}  // namespace

std::vector<double> central_diff_weights(int deriv_order) {
    if (deriv_order < 1) throw std::invalid_argument("central_diff_weights: order must be >= 1");
    return central_stencil(deriv_order).weights;
}

PolyDynamics taylor_expand(const SmoothDynamics& f, int k, const TaylorOptions& opts) {
    if (k < 1) throw std::invalid_argument("taylor_expand: order must be >= 1");
    if (k > 6) throw std::invalid_argument("taylor_expand: order above 6 rejected (stencil conditioning)");
    if (f.n < 1 || !f.eval) throw std::invalid_argument("taylor_expand: invalid dynamics");

    const EvalFn shifted = [&f](const Eigen::VectorXd& e) { return f.shifted(e); };
    const Eigen::VectorXd at_zero = shifted(Eigen::VectorXd::Zero(f.n));
    if (at_zero.lpNorm<Eigen::Infinity>() > 1e-8)
        throw std::invalid_argument("taylor_expand: x_star is not an equilibrium of the dynamics");

    PolyDynamics dyn;
    dyn.n = f.n;
    dyn.k = k;
    dyn.x_star = f.x_star.size() ? f.x_star : Eigen::VectorXd::Zero(f.n);

    const Eigen::VectorXd origin = Eigen::VectorXd::Zero(f.n);
    long long cols = 1;
    for (int j = 1; j <= k; ++j) {
        cols *= f.n;
        // derivative estimates per multi-index of degree j
        std::map<std::vector<int>, Eigen::VectorXd> derivs;
        std::vector<int> beta(f.n, 0);
        const double h = step_for_order(opts.base_step, j);
        enumerate_multi_indices(f.n, j, beta, 0, j, [&](const std::vector<int>& b) {
            derivs[b] = mixed_partial(shifted, f.n, origin, b, h);
        });

        // fill every column (i_1..i_j); permutations of a multi-index share
        // the symmetric value D^beta / j!
        Eigen::MatrixXd Hj = Eigen::MatrixXd::Zero(f.n, cols);
        const double jfact = factorial(j);
        std::vector<int> tuple(j, 0);
        for (long long col = 0; col < cols; ++col) {
            long long rem = col;
            std::vector<int> b(f.n, 0);
            for (int slot = j - 1; slot >= 0; --slot) {
                const int idx = static_cast<int>(rem % f.n);
                rem /= f.n;
                ++b[idx];
            }
            Hj.col(col) = derivs.at(b) / jfact;
        }
        dyn.H.push_back(std::move(Hj));
    }
    dyn.validate();
    return dyn;
}

double estimate_deriv_bound(const SmoothDynamics& f, double radius, int k, int samples,
                            std::uint64_t seed, const TaylorOptions& opts) {
    if (radius <= 0.0) throw std::invalid_argument("estimate_deriv_bound: radius must be positive");
    if (samples < 100) throw std::invalid_argument("estimate_deriv_bound: need at least 100 samples");
    if (k < 0 || k + 1 > 7)
        throw std::invalid_argument("estimate_deriv_bound: derivative order out of range");

    const EvalFn shifted = [&f](const Eigen::VectorXd& e) { return f.shifted(e); };
    std::mt19937_64 eng(seed);
    const auto uniform = [&eng]() { return static_cast<double>(eng() >> 11) * 0x1.0p-53; };

    // sample points: origin, axis extremes, then uniform draws from the 1-norm ball
    std::vector<Eigen::VectorXd> points;
    points.push_back(Eigen::VectorXd::Zero(f.n));
    for (int i = 0; i < f.n; ++i) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(f.n);
        e(i) = radius;
        points.push_back(e);
        points.push_back(-e);
    }
    for (int s = 0; s < samples; ++s) {
        Eigen::VectorXd x(f.n);
        double sum = 0.0;
        for (int i = 0; i < f.n; ++i) {
            const double e = -std::log(std::max(uniform(), 1e-300));
            x(i) = (uniform() < 0.5 ? -e : e);
            sum += e;
        }
        const double scale = radius * std::pow(uniform(), 1.0 / f.n) / std::max(sum, 1e-300);
        points.push_back(scale * x);
    }

    const int order = k + 1;
    const double h = step_for_order(opts.base_step, order);
    double worst = 0.0;
    std::vector<int> beta(f.n, 0);
    std::vector<std::vector<int>> indices;
    enumerate_multi_indices(f.n, order, beta, 0, order,
                            [&](const std::vector<int>& b) { indices.push_back(b); });
    for (const auto& p : points) {
        for (const auto& b : indices) {
            const Eigen::VectorXd d = mixed_partial(shifted, f.n, p, b, h);
            if (!d.allFinite())
                throw std::runtime_error("estimate_deriv_bound: non-finite derivative estimate");
            worst = std::max(worst, d.lpNorm<Eigen::Infinity>());
        }
    }
    const double safety = 1.5;  // sampling cannot prove a supremum
    return safety * worst;
}

double lagrange_remainder(const RemainderModel& rm) {
    if (rm.M <= 0.0 || rm.k < 1 || rm.radius <= 0.0)
        throw std::invalid_argument("lagrange_remainder: fields must be positive");
    return rm.M * std::pow(rm.radius, rm.k + 1) / factorial(rm.k + 1);
}

}  // namespace polysls
