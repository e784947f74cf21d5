#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "polysls/poly.hpp"
#include "polysls/taylor.hpp"

using namespace polysls;

namespace {

SmoothDynamics scalar_fn(double (*f)(double)) {
    SmoothDynamics d;
    d.n = 1;
    d.x_star = Eigen::VectorXd::Zero(1);
    d.eval = [f](const Eigen::VectorXd& x) {
        Eigen::VectorXd y(1);
        y(0) = f(x(0));
        return y;
    };
    return d;
}

double rnd(std::mt19937_64& eng, double lo = -1.0, double hi = 1.0) {
    return lo + (hi - lo) * (static_cast<double>(eng() >> 11) * 0x1.0p-53);
}

// Average permutation-equivalent columns so coefficients are comparable with
// the symmetric output of taylor_expand.
void symmetrize(PolyDynamics& dyn) {
    for (int j = 2; j <= dyn.k; ++j) {
        auto& H = dyn.H[j - 1];
        std::map<std::vector<int>, std::vector<long long>> buckets;
        for (long long col = 0; col < H.cols(); ++col) {
            long long rem = col;
            std::vector<int> key;
            for (int s = 0; s < j; ++s) {
                key.push_back(static_cast<int>(rem % dyn.n));
                rem /= dyn.n;
            }
            std::sort(key.begin(), key.end());
            buckets[key].push_back(col);
        }
        for (const auto& [key, cols] : buckets) {
            Eigen::VectorXd mean = Eigen::VectorXd::Zero(dyn.n);
            for (long long c : cols) mean += H.col(c);
            mean /= static_cast<double>(cols.size());
            for (long long c : cols) H.col(c) = mean;
        }
    }
}

}  // namespace

TEST_CASE("polynomial recovers itself") {
    const auto f = scalar_fn(+[](double x) { return x + x * x; });
    const PolyDynamics dyn = taylor_expand(f, 2);
    CHECK(dyn.H[0](0, 0) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(dyn.H[1](0, 0) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("sine series coefficients") {
    const auto f = scalar_fn(+[](double x) { return std::sin(x); });
    const PolyDynamics dyn = taylor_expand(f, 3);
    CHECK(std::abs(dyn.H[0](0, 0) - 1.0) < 1e-6);
    CHECK(std::abs(dyn.H[1](0, 0)) < 1e-6);  // odd function: even orders vanish
    CHECK(std::abs(dyn.H[2](0, 0) + 1.0 / 6.0) < 1e-6);
}

TEST_CASE("exponential series coefficients") {
    const auto f = scalar_fn(+[](double x) { return std::exp(x) - 1.0; });
    const PolyDynamics dyn = taylor_expand(f, 3);
    CHECK(std::abs(dyn.H[0](0, 0) - 1.0) < 1e-6);
    CHECK(std::abs(dyn.H[1](0, 0) - 0.5) < 1e-6);
    CHECK(std::abs(dyn.H[2](0, 0) - 1.0 / 6.0) < 1e-6);
}

TEST_CASE("taylor_expand rejects bad orders and non-equilibria") {
    const auto f = scalar_fn(+[](double x) { return std::sin(x); });
    CHECK_THROWS_AS(taylor_expand(f, 0), std::invalid_argument);
    CHECK_THROWS_AS(taylor_expand(f, 7), std::invalid_argument);

    auto off = scalar_fn(+[](double x) { return x + 0.5; });
    CHECK_THROWS_AS(taylor_expand(off, 2), std::invalid_argument);

    auto nan_fn = scalar_fn(+[](double x) { return std::sqrt(x); });  // NaN left of 0
    CHECK_THROWS_AS(taylor_expand(nan_fn, 2), std::runtime_error);
}

TEST_CASE("exact recovery of random polynomial dynamics") {
    std::mt19937_64 eng(23);
    for (int trial = 0; trial < 12; ++trial) {
        const int n = 1 + static_cast<int>(eng() % 3);
        const int k = 1 + static_cast<int>(eng() % 3);
        PolyDynamics truth;
        truth.n = n;
        truth.k = k;
        long long cols = 1;
        for (int j = 1; j <= k; ++j) {
            cols *= n;
            Eigen::MatrixXd H(n, cols);
            for (long r = 0; r < n; ++r)
                for (long long c = 0; c < cols; ++c) H(r, c) = rnd(eng);
            truth.H.push_back(std::move(H));
        }
        symmetrize(truth);

        SmoothDynamics f;
        f.n = n;
        f.x_star = Eigen::VectorXd::Zero(n);
        f.eval = [&truth](const Eigen::VectorXd& x) { return poly_eval(truth, x); };

        const PolyDynamics fit = taylor_expand(f, k);
        for (int j = 1; j <= k; ++j) {
            const double err = (fit.H[j - 1] - truth.H[j - 1]).lpNorm<Eigen::Infinity>();
            CHECK(err < 1e-6);
        }
    }
}

TEST_CASE("derivative bound estimates") {
    const auto sine = scalar_fn(+[](double x) { return std::sin(x); });
    const double m_sine = estimate_deriv_bound(sine, 1.0, 3, 200);
    CHECK(m_sine <= 1.5 * 1.0 + 1e-3);  // every sine derivative is bounded by 1
    CHECK(m_sine > 0.5);

    const auto lin = scalar_fn(+[](double x) { return 0.7 * x; });
    CHECK(estimate_deriv_bound(lin, 1.0, 1, 100) < 1e-6);

    const auto cubic = scalar_fn(+[](double x) { return x * x * x; });
    const double m_cubic = estimate_deriv_bound(cubic, 1.0, 1, 500);
    CHECK(m_cubic / 1.5 == doctest::Approx(6.0).epsilon(0.05));

    CHECK_THROWS_AS(estimate_deriv_bound(sine, 0.0, 3, 200), std::invalid_argument);
    CHECK_THROWS_AS(estimate_deriv_bound(sine, 1.0, 3, 50), std::invalid_argument);
}

TEST_CASE("lagrange remainder fixtures") {
    CHECK(lagrange_remainder({1.0, 3, 1.0}) == doctest::Approx(1.0 / 24.0));
    CHECK(lagrange_remainder({2.0, 2, 0.5}) == doctest::Approx(1.0 / 24.0));
    double prev = lagrange_remainder({1.0, 1, 0.8});
    for (int k = 2; k <= 8; ++k) {
        const double cur = lagrange_remainder({1.0, k, 0.8});
        CHECK(cur < prev);
        prev = cur;
    }
    CHECK_THROWS_AS(lagrange_remainder({-1.0, 3, 1.0}), std::invalid_argument);
}

TEST_CASE("remainder dominates observed approximation error") {
    std::mt19937_64 eng(29);
    for (auto* fn : {+[](double x) { return std::sin(x); },
                     +[](double x) { return std::exp(x) - 1.0; }}) {
        const auto f = scalar_fn(fn);
        const int k = 3;
        const double radius = 0.5;
        const PolyDynamics fit = taylor_expand(f, k);
        const double M = estimate_deriv_bound(f, radius, k, 300);
        const double bound = lagrange_remainder({M, k, radius});
        double worst = 0.0;
        for (int s = 0; s < 1000; ++s) {
            Eigen::VectorXd x(1);
            x << rnd(eng, -radius, radius);
            worst = std::max(worst, std::abs(f.eval(x)(0) - poly_eval(fit, x)(0)));
        }
        CHECK(worst <= bound);
    }
}

TEST_CASE("central difference weights sanity") {
    const auto w1 = central_diff_weights(1);
    REQUIRE(w1.size() == 3);
    CHECK(w1[0] == doctest::Approx(-0.5));
    CHECK(w1[1] == doctest::Approx(0.0));
    CHECK(w1[2] == doctest::Approx(0.5));
    const auto w2 = central_diff_weights(2);
    CHECK(w2[0] == doctest::Approx(1.0));
    CHECK(w2[1] == doctest::Approx(-2.0));
    CHECK(w2[2] == doctest::Approx(1.0));
}
