#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace polysls {

/// Identifies one scalar disturbance entry: `age` is the time lag of the
/// disturbance vector (0 = newest), `comp` the vector component.
struct VarId {
    int age = 0;
    int comp = 0;
    friend auto operator<=>(const VarId&, const VarId&) = default;
};

enum class AlphaKind { Alpha, OneMinusAlpha };

/// One symbolic gating factor carried inside a monomial coefficient:
/// either alpha(id) or (1 - alpha(id)) for a controller term id.
struct AlphaFactor {
    int id = 0;
    AlphaKind kind = AlphaKind::OneMinusAlpha;
    friend auto operator<=>(const AlphaFactor&, const AlphaFactor&) = default;
};

/// A monomial in time-tagged disturbance variables. `coeff` is the numeric
/// part; `exps` maps variables to positive powers (kept sorted by VarId);
/// `alphas` is a sorted multiset of symbolic gating factors.
/// Invariant: total degree >= 1 (no constant terms anywhere in this toolkit).
struct Monomial {
    double coeff = 0.0;
    std::vector<std::pair<VarId, int>> exps;
    std::vector<AlphaFactor> alphas;

    int degree() const;
    int max_age() const;
    void normalize();  // sort exps/alphas, fuse duplicate variables

    friend bool operator==(const Monomial&, const Monomial&) = default;

    /// Structural key comparison (exponents then alpha factors), coeff ignored.
    static bool key_equal(const Monomial& a, const Monomial& b);
    static bool key_less(const Monomial& a, const Monomial& b);  // graded lex
};

double eval_monomial(const Monomial& m,
                     const std::function<double(VarId)>& var_value,
                     const std::function<double(int)>& alpha_value);

/// Multivariate polynomial with a canonical term order (graded lexicographic
/// by total degree, then variable (age, comp) sequence, then alpha factors).
/// Terms with merged |coeff| below merge_epsilon() are removed. Immutable in
/// spirit: every operation returns a new canonical polynomial.
class Polynomial {
  public:
    Polynomial() = default;
    explicit Polynomial(std::vector<Monomial> terms, double drop_tol = merge_epsilon());

    static Polynomial variable(VarId v, double coeff = 1.0);
    static constexpr double merge_epsilon() { return 1e-14; }

    const std::vector<Monomial>& terms() const { return terms_; }
    bool empty() const { return terms_.empty(); }
    std::size_t size() const { return terms_.size(); }
    int max_age() const;

    Polynomial operator+(const Polynomial& other) const;
    Polynomial operator-(const Polynomial& other) const;
    Polynomial scaled(double factor) const;
    Polynomial shifted_age(int delta) const;

    /// Multiply a symbolic alpha factor into every term.
    Polynomial times_alpha(AlphaFactor f) const;

    double eval(const std::function<double(VarId)>& var_value,
                const std::function<double(int)>& alpha_value) const;

    friend bool operator==(const Polynomial&, const Polynomial&) = default;

  private:
    std::vector<Monomial> terms_;
};

/// Product with an optional drop tolerance applied while merging. A nonzero
/// tolerance makes the product approximate; the default keeps it exact up to
/// the standard merge epsilon.
Polynomial mul(const Polynomial& a, const Polynomial& b,
               double drop_tol = Polynomial::merge_epsilon());

/// Substitute every variable of `p` by a polynomial. Throws if a variable of
/// `p` has no assignment. Alpha factors of `p` multiply through the expansion.
Polynomial poly_substitute(const Polynomial& p,
                           const std::map<VarId, Polynomial>& assignment);

/// Split `p` into terms whose maximum variable age is <= max_age and the rest.
/// kept + dropped == p exactly.
std::pair<Polynomial, Polynomial> truncate_by_age(const Polynomial& p, int max_age);

/// Degree-k polynomial dynamics x+ = sum_j H[j-1] * kron_power(x, j) in
/// coordinates shifted so the equilibrium is the origin (no constant term).
/// H[j-1] has shape n x n^j. `M` is the derivative bound of the smooth map the
/// model approximates; it is filled by the fitting pipeline (0 until then).
struct PolyDynamics {
    int n = 0;
    int k = 0;
    std::vector<Eigen::MatrixXd> H;
    Eigen::VectorXd x_star;
    double M = 0.0;

    void validate() const;  // throws std::invalid_argument on shape mismatch
};

/// j-fold column-wise Kronecker power of x (j >= 1; j = 1 returns x).
Eigen::VectorXd kron_power(const Eigen::VectorXd& x, int j);

/// Evaluate the polynomial dynamics at a (shifted-coordinate) state.
Eigen::VectorXd poly_eval(const PolyDynamics& dyn, const Eigen::VectorXd& x);

// JSON serialization. Polynomials serialize to a top-level array of terms
// {coeff, exponents: [[age, comp, power]...], alpha_factors: [{id, kind}...]};
// doubles round-trip exactly through the emitted decimal form.
nlohmann::json to_json(const Polynomial& p);
Polynomial polynomial_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Monomial& m);
Monomial monomial_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PolyDynamics& dyn);
PolyDynamics poly_dynamics_from_json(const nlohmann::json& j);

}  // namespace polysls
