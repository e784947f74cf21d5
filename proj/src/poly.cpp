#include "polysls/poly.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace polysls {

int Monomial::degree() const {
    int d = 0;
    for (const auto& [v, p] : exps) d += p;
    return d;
}

int Monomial::max_age() const {
    int a = 0;
    for (const auto& [v, p] : exps) a = std::max(a, v.age);
    return a;
}

void Monomial::normalize() {
    std::sort(exps.begin(), exps.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    // fuse repeated variables
    std::vector<std::pair<VarId, int>> fused;
    for (const auto& e : exps) {
        if (!fused.empty() && fused.back().first == e.first) {
            fused.back().second += e.second;
        } else {
            fused.push_back(e);
        }
    }
    exps = std::move(fused);
    for (const auto& [v, p] : exps) {
        if (p <= 0) throw std::invalid_argument("monomial powers must be positive");
    }
    std::sort(alphas.begin(), alphas.end());
}

bool Monomial::key_equal(const Monomial& a, const Monomial& b) {
    return a.exps == b.exps && a.alphas == b.alphas;
}

bool Monomial::key_less(const Monomial& a, const Monomial& b) {
    const int da = a.degree(), db = b.degree();
    if (da != db) return da < db;
    if (a.exps != b.exps) return a.exps < b.exps;
    return a.alphas < b.alphas;
}

double eval_monomial(const Monomial& m,
                     const std::function<double(VarId)>& var_value,
                     const std::function<double(int)>& alpha_value) {
    double v = m.coeff;
    for (const auto& [var, pow] : m.exps) v *= std::pow(var_value(var), pow);
    for (const auto& f : m.alphas) {
        const double a = alpha_value(f.id);
        v *= (f.kind == AlphaKind::Alpha) ? a : (1.0 - a);
    }
    return v;
}

namespace {

std::vector<Monomial> merged(std::vector<Monomial> terms, double drop_tol) {
    for (auto& t : terms) t.normalize();
    std::sort(terms.begin(), terms.end(), Monomial::key_less);
    std::vector<Monomial> out;
    for (auto& t : terms) {
        if (t.degree() < 1) throw std::invalid_argument("constant monomials are not representable");
        if (!out.empty() && Monomial::key_equal(out.back(), t)) {
            out.back().coeff += t.coeff;
        } else {
            out.push_back(std::move(t));
        }
    }
    std::erase_if(out, [drop_tol](const Monomial& m) { return std::abs(m.coeff) < drop_tol; });
    return out;
}

}  // namespace

Polynomial::Polynomial(std::vector<Monomial> terms, double drop_tol)
    : terms_(merged(std::move(terms), drop_tol)) {}

Polynomial Polynomial::variable(VarId v, double coeff) {
    Monomial m;
    m.coeff = coeff;
    m.exps = {{v, 1}};
    return Polynomial({m});
}

int Polynomial::max_age() const {
    int a = 0;
    for (const auto& t : terms_) a = std::max(a, t.max_age());
    return a;
}

Polynomial Polynomial::operator+(const Polynomial& other) const {
    std::vector<Monomial> all = terms_;
    all.insert(all.end(), other.terms_.begin(), other.terms_.end());
    return Polynomial(std::move(all));
}

Polynomial Polynomial::operator-(const Polynomial& other) const {
    return *this + other.scaled(-1.0);
}

Polynomial Polynomial::scaled(double factor) const {
    std::vector<Monomial> out = terms_;
    for (auto& t : out) t.coeff *= factor;
    return Polynomial(std::move(out));
}

Polynomial Polynomial::shifted_age(int delta) const {
    std::vector<Monomial> out = terms_;
    for (auto& t : out) {
        for (auto& [v, p] : t.exps) {
            v.age += delta;
            if (v.age < 0) throw std::invalid_argument("age shift below zero");
        }
    }
    return Polynomial(std::move(out));
}

Polynomial Polynomial::times_alpha(AlphaFactor f) const {
    std::vector<Monomial> out = terms_;
    for (auto& t : out) t.alphas.push_back(f);
    return Polynomial(std::move(out));
}

double Polynomial::eval(const std::function<double(VarId)>& var_value,
                        const std::function<double(int)>& alpha_value) const {
    double s = 0.0;
    for (const auto& t : terms_) s += eval_monomial(t, var_value, alpha_value);
    return s;
}

Polynomial mul(const Polynomial& a, const Polynomial& b, double drop_tol) {
    std::vector<Monomial> out;
    out.reserve(a.size() * b.size());
    for (const auto& ta : a.terms()) {
        for (const auto& tb : b.terms()) {
            const double c = ta.coeff * tb.coeff;
            if (std::abs(c) < drop_tol) continue;
            Monomial m;
            m.coeff = c;
            m.exps = ta.exps;
            m.exps.insert(m.exps.end(), tb.exps.begin(), tb.exps.end());
            m.alphas = ta.alphas;
            m.alphas.insert(m.alphas.end(), tb.alphas.begin(), tb.alphas.end());
            out.push_back(std::move(m));
        }
    }
    return Polynomial(std::move(out), drop_tol);
}

Polynomial poly_substitute(const Polynomial& p,
                           const std::map<VarId, Polynomial>& assignment) {
    Polynomial result;
    for (const auto& t : p.terms()) {
        // start from the scalar part of the term, carried by a degree capture:
        // build the product of assignment(v)^pow, then apply coeff and alphas.
        Polynomial prod;
        bool first = true;
        for (const auto& [v, pow] : t.exps) {
            auto it = assignment.find(v);
            if (it == assignment.end())
                throw std::invalid_argument("poly_substitute: missing assignment for variable");
            for (int i = 0; i < pow; ++i) {
                prod = first ? it->second : mul(prod, it->second);
                first = false;
            }
        }
        Polynomial term = prod.scaled(t.coeff);
        for (const auto& f : t.alphas) term = term.times_alpha(f);
        result = result + term;
    }
    return result;
}

std::pair<Polynomial, Polynomial> truncate_by_age(const Polynomial& p, int max_age) {
    if (max_age < 0) throw std::invalid_argument("truncate_by_age: max_age must be >= 0");
    std::vector<Monomial> kept, dropped;
    for (const auto& t : p.terms()) {
        (t.max_age() <= max_age ? kept : dropped).push_back(t);
    }
    return {Polynomial(std::move(kept)), Polynomial(std::move(dropped))};
}

void PolyDynamics::validate() const {
    if (n < 1 || k < 1) throw std::invalid_argument("PolyDynamics: n and k must be >= 1");
    if (static_cast<int>(H.size()) != k)
        throw std::invalid_argument("PolyDynamics: expected k coefficient matrices");
    long long cols = 1;
    for (int j = 1; j <= k; ++j) {
        cols *= n;
        if (H[j - 1].rows() != n || H[j - 1].cols() != cols)
            throw std::invalid_argument("PolyDynamics: H_" + std::to_string(j) +
                                        " has inconsistent shape");
    }
    if (x_star.size() != 0 && x_star.size() != n)
        throw std::invalid_argument("PolyDynamics: x_star dimension mismatch");
}

Eigen::VectorXd kron_power(const Eigen::VectorXd& x, int j) {
    if (j < 1) throw std::invalid_argument("kron_power: order must be >= 1 (no constant term)");
    if (x.size() < 1) throw std::invalid_argument("kron_power: empty vector");
    Eigen::VectorXd out = x;
    const long n = x.size();
    for (int rep = 2; rep <= j; ++rep) {
        Eigen::VectorXd next(out.size() * n);
        for (long a = 0; a < out.size(); ++a)
            for (long b = 0; b < n; ++b) next(a * n + b) = out(a) * x(b);
        out.swap(next);
    }
    return out;
}

Eigen::VectorXd poly_eval(const PolyDynamics& dyn, const Eigen::VectorXd& x) {
    dyn.validate();
    if (x.size() != dyn.n) throw std::invalid_argument("poly_eval: state dimension mismatch");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dyn.n);
    Eigen::VectorXd power = x;
    for (int j = 1; j <= dyn.k; ++j) {
        if (j > 1) {
            Eigen::VectorXd next(power.size() * x.size());
            for (long a = 0; a < power.size(); ++a)
                for (long b = 0; b < x.size(); ++b) next(a * x.size() + b) = power(a) * x(b);
            power.swap(next);
        }
        out += dyn.H[j - 1] * power;
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON

using nlohmann::json;

json to_json(const Monomial& m) {
    json exps = json::array();
    for (const auto& [v, p] : m.exps) exps.push_back({v.age, v.comp, p});
    json alphas = json::array();
    for (const auto& f : m.alphas)
        alphas.push_back({{"id", f.id},
                          {"kind", f.kind == AlphaKind::Alpha ? "alpha" : "one_minus_alpha"}});
    return json{{"coeff", m.coeff}, {"exponents", exps}, {"alpha_factors", alphas}};
}

Monomial monomial_from_json(const json& j) {
    Monomial m;
    m.coeff = j.at("coeff").get<double>();
    for (const auto& e : j.at("exponents"))
        m.exps.push_back({VarId{e.at(0).get<int>(), e.at(1).get<int>()}, e.at(2).get<int>()});
    for (const auto& a : j.at("alpha_factors")) {
        const std::string kind = a.at("kind").get<std::string>();
        if (kind != "alpha" && kind != "one_minus_alpha")
            throw std::invalid_argument("monomial_from_json: unknown alpha kind " + kind);
        m.alphas.push_back(AlphaFactor{
            a.at("id").get<int>(),
            kind == "alpha" ? AlphaKind::Alpha : AlphaKind::OneMinusAlpha});
    }
    m.normalize();
    return m;
}

json to_json(const Polynomial& p) {
    json terms = json::array();
    for (const auto& t : p.terms()) terms.push_back(to_json(t));
    return terms;
}

Polynomial polynomial_from_json(const json& j) {
    std::vector<Monomial> terms;
    for (const auto& t : j) terms.push_back(monomial_from_json(t));
    return Polynomial(std::move(terms));
}

json to_json(const PolyDynamics& dyn) {
    json hs = json::array();
    for (const auto& h : dyn.H) {
        json rows = json::array();
        for (long r = 0; r < h.rows(); ++r) {
            json row = json::array();
            for (long c = 0; c < h.cols(); ++c) row.push_back(h(r, c));
            rows.push_back(row);
        }
        hs.push_back(rows);
    }
    json xs = json::array();
    for (long i = 0; i < dyn.x_star.size(); ++i) xs.push_back(dyn.x_star(i));
    return json{{"n", dyn.n}, {"k", dyn.k}, {"H", hs}, {"x_star", xs}, {"M", dyn.M}};
}

PolyDynamics poly_dynamics_from_json(const json& j) {
    PolyDynamics dyn;
    dyn.n = j.at("n").get<int>();
    dyn.k = j.at("k").get<int>();
    for (const auto& hj : j.at("H")) {
        const long rows = static_cast<long>(hj.size());
        const long cols = rows ? static_cast<long>(hj.at(0).size()) : 0;
        Eigen::MatrixXd h(rows, cols);
        for (long r = 0; r < rows; ++r)
            for (long c = 0; c < cols; ++c) h(r, c) = hj.at(r).at(c).get<double>();
        dyn.H.push_back(std::move(h));
    }
    const auto& xs = j.at("x_star");
    dyn.x_star.resize(static_cast<long>(xs.size()));
    for (long i = 0; i < dyn.x_star.size(); ++i) dyn.x_star(i) = xs.at(i).get<double>();
    dyn.M = j.value("M", 0.0);
    dyn.validate();
    return dyn;
}

}  // namespace polysls
