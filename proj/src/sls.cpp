#include "polysls/sls.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>

#include <nlohmann/json.hpp>

namespace polysls {

namespace {

double factorial(int v) {
    double f = 1.0;
    for (int i = 2; i <= v; ++i) f *= i;
    return f;
}

// Apply the dynamics polynomial symbolically to a vector of polynomials:
// F[i] = sum_j row_i(H_j) * (R tensor^j), merging with the given drop
// tolerance. A tolerance above the merge epsilon makes the result approximate.
std::vector<Polynomial> sym_apply(const PolyDynamics& dyn, const std::vector<Polynomial>& R,
                                  double prune) {
    const int n = dyn.n;
    std::vector<std::vector<Monomial>> acc(n);
    std::vector<Polynomial> power = R;
    long long cols = 1;
    for (int j = 1; j <= dyn.k; ++j) {
        cols *= n;
        if (j > 1) {
            std::vector<Polynomial> next(static_cast<std::size_t>(cols));
            for (std::size_t a = 0; a < power.size(); ++a)
                for (int b = 0; b < n; ++b) next[a * n + b] = mul(power[a], R[b], prune);
            power = std::move(next);
        }
        const auto& Hj = dyn.H[j - 1];
        for (int i = 0; i < n; ++i) {
            for (long long col = 0; col < cols; ++col) {
                const double hij = Hj(i, col);
                if (hij == 0.0) continue;
                for (const auto& t : power[col].terms()) {
                    Monomial m = t;
                    m.coeff *= hij;
                    if (std::abs(m.coeff) < prune) continue;
                    acc[i].push_back(std::move(m));
                }
            }
        }
    }
    std::vector<Polynomial> F(n);
    for (int i = 0; i < n; ++i) F[i] = Polynomial(std::move(acc[i]), prune);
    return F;
}

struct FactorGroup {
    int id = 0;
    AlphaKind kind = AlphaKind::OneMinusAlpha;
    int mult = 0;
};

// m.alphas is sorted; collapse runs into (id, kind, multiplicity).
void collect_groups(const Monomial& m, std::vector<FactorGroup>& out) {
    out.clear();
    for (const auto& f : m.alphas) {
        if (!out.empty() && out.back().id == f.id && out.back().kind == f.kind) {
            ++out.back().mult;
        } else {
            out.push_back({f.id, f.kind, 1});
        }
    }
}

double factor_value(const FactorGroup& g, std::span<const double> alphas) {
    const double a = alphas[static_cast<std::size_t>(g.id)];
    return (g.kind == AlphaKind::Alpha) ? a : (1.0 - a);
}

struct HistoryAccess {
    std::span<const Eigen::VectorXd> hist;
    double operator()(int age, int comp) const {
        if (age < static_cast<int>(hist.size())) return hist[static_cast<std::size_t>(age)](comp);
        return 0.0;  // cold start padding, validated at entry
    }
};

void validate_alphas(const SlsController& ctl, std::span<const double> alphas) {
    if (static_cast<int>(alphas.size()) != ctl.gated_count)
        throw std::invalid_argument("missing alpha value: expected " +
                                    std::to_string(ctl.gated_count) + " gated alphas, got " +
                                    std::to_string(alphas.size()));
    for (double a : alphas)
        if (!(a > 0.0 && a <= 1.0))
            throw std::invalid_argument("alpha values must lie in (0, 1]");
}

void validate_history(const SlsController& ctl, std::span<const Eigen::VectorXd> hist,
                      std::size_t required, bool cold_start) {
    if (hist.size() < required && !cold_start)
        throw std::invalid_argument("disturbance history shorter than required (need " +
                                    std::to_string(required) + ", got " +
                                    std::to_string(hist.size()) + "); enable cold_start to pad");
    for (const auto& w : hist)
        if (w.size() != ctl.n)
            throw std::invalid_argument("disturbance vector dimension mismatch");
}

// base = coeff * prod w^p for the term under the given history alignment
double term_base(const Monomial& m, const HistoryAccess& w) {
    double v = m.coeff;
    for (const auto& [var, pow] : m.exps) v *= std::pow(w(var.age, var.comp), pow);
    return v;
}

double groups_product(const std::vector<FactorGroup>& groups, std::span<const double> alphas) {
    double p = 1.0;
    for (const auto& g : groups) p *= std::pow(factor_value(g, alphas), g.mult);
    return p;
}

// Accumulate weight * d(base*fprod)/d(w entries) and weight * d(..)/d(alphas)
// for one term. `weight` already contains the adjoint, sign, and gate.
void term_vjp(const Monomial& m, const std::vector<FactorGroup>& groups,
              const HistoryAccess& w, std::span<const double> alphas, double weight,
              double base, double fprod, std::vector<Eigen::VectorXd>& dw,
              std::vector<double>& dalphas) {
    // d / d w(var): remove-one-factor product, safe at w = 0
    for (std::size_t ti = 0; ti < m.exps.size(); ++ti) {
        double d = m.coeff;
        for (std::size_t j = 0; j < m.exps.size(); ++j) {
            const auto& [var, pow] = m.exps[j];
            const double wv = w(var.age, var.comp);
            if (j == ti) {
                d *= pow * std::pow(wv, pow - 1);
            } else {
                d *= std::pow(wv, pow);
            }
        }
        const auto& [var, pow] = m.exps[ti];
        if (var.age < static_cast<int>(dw.size()))
            dw[static_cast<std::size_t>(var.age)](var.comp) += weight * fprod * d;
    }
    // d / d alpha(id) through inherited factors
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const auto& g = groups[gi];
        double rest = 1.0;
        for (std::size_t j = 0; j < groups.size(); ++j) {
            if (j == gi) continue;
            rest *= std::pow(factor_value(groups[j], alphas), groups[j].mult);
        }
        const double fv = factor_value(g, alphas);
        const double sign = (g.kind == AlphaKind::Alpha) ? 1.0 : -1.0;
        const double dfprod = sign * g.mult * std::pow(fv, g.mult - 1) * rest;
        dalphas[static_cast<std::size_t>(g.id)] += weight * base * dfprod;
    }
}

}  // namespace

void SlsController::finalize() {
    if (n < 1 || T < 1) throw std::invalid_argument("SlsController: n and T must be >= 1");
    std::sort(terms.begin(), terms.end(), [](const GTerm& a, const GTerm& b) {
        if (a.level != b.level) return a.level < b.level;
        if (a.comp != b.comp) return a.comp < b.comp;
        return Monomial::key_less(a.monomial, b.monomial);
    });

    level_counts.assign(T + 1, 0);
    gated_count = 0;
    std::map<int, int> id_level;
    for (auto& g : terms) {
        if (g.level < 0 || g.level > T)
            throw std::invalid_argument("SlsController: term level out of range");
        if (g.monomial.max_age() != g.level)
            throw std::invalid_argument("SlsController: monomial age does not match its level");
        if (g.comp < 0 || g.comp >= n)
            throw std::invalid_argument("SlsController: term component out of range");
        if (g.alpha_id.has_value() != (g.level < T))
            throw std::invalid_argument("SlsController: alpha_id must be present iff level < T");
        g.index = level_counts[g.level]++;
        if (g.alpha_id) {
            if (!id_level.emplace(*g.alpha_id, g.level).second)
                throw std::invalid_argument("SlsController: duplicate alpha_id");
            ++gated_count;
        }
    }
    for (const auto& g : terms) {
        for (const auto& f : g.monomial.alphas) {
            auto it = id_level.find(f.id);
            if (it == id_level.end())
                throw std::invalid_argument("SlsController: monomial references unknown alpha_id");
            if (it->second >= g.level)
                throw std::invalid_argument(
                    "SlsController: alpha factor must come from a strictly smaller level");
        }
    }
    // ids must be dense 0..gated_count-1 (alpha vectors index by id)
    for (const auto& [id, lvl] : id_level)
        if (id < 0 || id >= gated_count)
            throw std::invalid_argument("SlsController: alpha ids must be dense from 0");

    max_level_count = 0;
    for (int m = 0; m <= T; ++m) max_level_count = std::max(max_level_count, level_counts[m]);

    gated_ids_by_level.assign(T, {});
    for (const auto& g : terms)
        if (g.alpha_id) gated_ids_by_level[g.level].push_back(*g.alpha_id);
}

SlsController synthesize(const PolyDynamics& dyn, int T, const SynthOptions& opts) {
    dyn.validate();
    if (T < 1) throw std::invalid_argument("synthesize: horizon T must be >= 1");
    const int n = dyn.n;
    const bool exact = opts.prune_tol <= Polynomial::merge_epsilon();

    std::vector<Polynomial> response(n);
    for (int i = 0; i < n; ++i) response[i] = Polynomial::variable(VarId{0, i});

    std::vector<GTerm> terms;
    using Key = std::tuple<int, std::vector<std::pair<VarId, int>>, std::vector<AlphaFactor>>;
    std::map<Key, std::size_t> known;
    int next_alpha = 0;

    const auto throw_cap = [&terms, T, &opts]() {
        std::vector<int> counts(T + 1, 0);
        for (const auto& g : terms) ++counts[g.level];
        std::string msg = "synthesize: term cap exceeded (" + std::to_string(terms.size()) +
                          " > " + std::to_string(opts.term_cap) + "); per-level counts:";
        for (int m = 0; m <= T; ++m)
            msg += " c_" + std::to_string(m) + "=" + std::to_string(counts[m]);
        throw std::runtime_error(msg);
    };

    while (true) {
        const std::vector<Polynomial> F = sym_apply(dyn, response, opts.prune_tol);
        std::size_t fresh = 0;
        for (int i = 0; i < n; ++i) {
            for (const auto& mono : F[i].terms()) {
                Key key{i, mono.exps, mono.alphas};
                auto it = known.find(key);
                if (it != known.end()) {
                    if (exact) {
                        const double old = terms[it->second].monomial.coeff;
                        if (std::abs(mono.coeff - old) > 1e-9 * std::max(1.0, std::abs(old)))
                            throw std::logic_error("synthesize: generated coefficient changed "
                                                   "between fixed-point passes");
                    }
                    continue;
                }
                const int level = mono.max_age();
                if (level > T) throw std::logic_error("synthesize: term above level T");
                GTerm g;
                g.level = level;
                g.comp = i;
                g.monomial = mono;
                if (level < T) g.alpha_id = next_alpha;
                known.emplace(std::move(key), terms.size());
                terms.push_back(g);
                ++fresh;
                if (terms.size() > opts.term_cap) throw_cap();
                if (level < T) {
                    const Polynomial residual =
                        Polynomial({mono})
                            .shifted_age(1)
                            .times_alpha(AlphaFactor{next_alpha, AlphaKind::OneMinusAlpha});
                    response[i] = response[i] + residual;
                    ++next_alpha;
                }
            }
        }
        if (fresh == 0) break;
    }

    SlsController ctl;
    ctl.n = n;
    ctl.k = dyn.k;
    ctl.T = T;
    ctl.terms = std::move(terms);
    ctl.finalize();
    return ctl;
}

Eigen::VectorXd control_input(const SlsController& ctl, std::span<const Eigen::VectorXd> w_hist,
                              std::span<const double> alphas, bool cold_start) {
    validate_alphas(ctl, alphas);
    validate_history(ctl, w_hist, static_cast<std::size_t>(ctl.T) + 1, cold_start);
    const HistoryAccess w{w_hist};
    Eigen::VectorXd u = Eigen::VectorXd::Zero(ctl.n);
    std::vector<FactorGroup> groups;
    for (const auto& g : ctl.terms) {
        const double base = term_base(g.monomial, w);
        if (base == 0.0) continue;
        collect_groups(g.monomial, groups);
        const double fprod = groups_product(groups, alphas);
        const double gate = g.alpha_id ? alphas[static_cast<std::size_t>(*g.alpha_id)] : 1.0;
        u(g.comp) -= gate * base * fprod;
    }
    return u;
}

namespace {

// Shared body of predict_state / reconstruct_disturbance: the gated residual
// response evaluated on history older than the current step.
Eigen::VectorXd gated_response(const SlsController& ctl, std::span<const Eigen::VectorXd> w_older,
                               std::span<const double> alphas) {
    const HistoryAccess w{w_older};
    Eigen::VectorXd x = Eigen::VectorXd::Zero(ctl.n);
    std::vector<FactorGroup> groups;
    for (const auto& g : ctl.terms) {
        if (!g.alpha_id) continue;  // level-T terms are fully canceled
        const double base = term_base(g.monomial, w);
        if (base == 0.0) continue;
        collect_groups(g.monomial, groups);
        const double fprod = groups_product(groups, alphas);
        const double gate = 1.0 - alphas[static_cast<std::size_t>(*g.alpha_id)];
        x(g.comp) += gate * base * fprod;
    }
    return x;
}

}  // namespace

Eigen::VectorXd predict_state(const SlsController& ctl, std::span<const Eigen::VectorXd> w_hist,
                              std::span<const double> alphas, bool cold_start) {
    validate_alphas(ctl, alphas);
    validate_history(ctl, w_hist, static_cast<std::size_t>(ctl.T) + 1, cold_start);
    if (w_hist.empty()) return Eigen::VectorXd::Zero(ctl.n);
    const auto older = w_hist.subspan(1);
    return w_hist[0] + gated_response(ctl, older, alphas);
}

Eigen::VectorXd reconstruct_disturbance(const SlsController& ctl, const Eigen::VectorXd& x_observed,
                                        std::span<const Eigen::VectorXd> w_older,
                                        std::span<const double> alphas, bool cold_start) {
    validate_alphas(ctl, alphas);
    validate_history(ctl, w_older, static_cast<std::size_t>(ctl.T), cold_start);
    if (x_observed.size() != ctl.n)
        throw std::invalid_argument("reconstruct_disturbance: state dimension mismatch");
    return x_observed - gated_response(ctl, w_older, alphas);
}

void control_input_vjp(const SlsController& ctl, std::span<const Eigen::VectorXd> w_hist,
                       std::span<const double> alphas, const Eigen::VectorXd& lambda,
                       std::vector<Eigen::VectorXd>& dw_hist, std::vector<double>& dalphas) {
    const HistoryAccess w{w_hist};
    std::vector<FactorGroup> groups;
    for (const auto& g : ctl.terms) {
        const double li = lambda(g.comp);
        if (li == 0.0) continue;
        const double base = term_base(g.monomial, w);
        collect_groups(g.monomial, groups);
        const double fprod = groups_product(groups, alphas);
        const double gate = g.alpha_id ? alphas[static_cast<std::size_t>(*g.alpha_id)] : 1.0;
        // u(comp) -= gate * base * fprod
        term_vjp(g.monomial, groups, w, alphas, -li * gate, base, fprod, dw_hist, dalphas);
        if (g.alpha_id) dalphas[static_cast<std::size_t>(*g.alpha_id)] -= li * base * fprod;
    }
}

void state_response_vjp(const SlsController& ctl, std::span<const Eigen::VectorXd> w_older,
                        std::span<const double> alphas, const Eigen::VectorXd& lambda,
                        std::vector<Eigen::VectorXd>& dw_older, std::vector<double>& dalphas) {
    const HistoryAccess w{w_older};
    std::vector<FactorGroup> groups;
    for (const auto& g : ctl.terms) {
        if (!g.alpha_id) continue;
        const double li = lambda(g.comp);
        if (li == 0.0) continue;
        const double base = term_base(g.monomial, w);
        collect_groups(g.monomial, groups);
        const double fprod = groups_product(groups, alphas);
        const double gate = 1.0 - alphas[static_cast<std::size_t>(*g.alpha_id)];
        // x(comp) += gate * base * fprod
        term_vjp(g.monomial, groups, w, alphas, li * gate, base, fprod, dw_older, dalphas);
        dalphas[static_cast<std::size_t>(*g.alpha_id)] -= li * base * fprod;
    }
}

LcBound compute_l_c(const SlsController& ctl, double W) {
    if (W <= 0.0) throw std::invalid_argument("compute_l_c: W must be positive");
    LcBound out;
    out.c = ctl.max_level_count;
    for (const auto& g : ctl.terms) {
        if (!g.alpha_id) continue;  // alpha factors and gates bounded by 1
        const double bound = std::abs(g.monomial.coeff) * std::pow(W, g.monomial.degree() - 1);
        out.l = std::max(out.l, bound);
    }
    return out;
}

StabilityCert check_iss(double M, double W, int k, double l, int c, double alpha_min) {
    if (M < 0 || W <= 0 || k < 1 || l < 0 || c < 0)
        throw std::invalid_argument("check_iss: invalid inputs");
    if (!(alpha_min > 0.0 && alpha_min <= 1.0))
        throw std::invalid_argument("check_iss: alpha_min must lie in (0, 1]");
    StabilityCert cert;
    cert.M = M;
    cert.W = W;
    cert.k = k;
    cert.l = l;
    cert.c = c;
    cert.alpha_min = alpha_min;
    cert.b = M * std::pow(W, k) / factorial(k + 1) + l * c * (1.0 - alpha_min);
    cert.satisfied = cert.b < 1.0;
    cert.state_bound =
        cert.satisfied ? W / (1.0 - cert.b) : std::numeric_limits<double>::infinity();
    return cert;
}

CostBound cost_bound_u1(double M, double W, int k, int n, double h) {
    if (M < 0 || W <= 0 || k < 1 || n < 1 || h <= 0)
        throw std::invalid_argument("cost_bound_u1: invalid inputs");
    if (h < W) throw std::invalid_argument("cost_bound_u1: requires h >= W");
    CostBound cb;
    cb.M = M;
    cb.W = W;
    cb.k = k;
    cb.n = n;
    cb.h = h;
    cb.e_x = M * std::pow(n * h, k + 1) / factorial(k + 1);
    cb.d = cb.e_x / W + 1.0;
    cb.d_display = M * std::pow(n * h, k) / (W * factorial(k + 1)) + 1.0;
    double u1 = 0.0;
    for (int j = 1; j <= k; ++j) u1 += M * std::pow(W, j) * (std::pow(cb.d, j) - 1.0);
    cb.U1 = u1;
    const double wd = W * cb.d;
    if (std::abs(wd - 1.0) < 1e-12 || std::abs(W - 1.0) < 1e-12) {
        cb.U1_closed_form = std::numeric_limits<double>::quiet_NaN();
    } else {
        cb.U1_closed_form = M * (wd * (std::pow(wd, k) - 1.0) / (wd - 1.0) +
                                 W * (1.0 - std::pow(W, k)) / (W - 1.0));
    }
    return cb;
}

CostBound with_corollary(CostBound cb, double r, int T_steps) {
    if (r <= 0 || T_steps < 0) throw std::invalid_argument("with_corollary: invalid inputs");
    cb.r = r;
    cb.T_steps = T_steps;
    cb.total = r * T_steps * cb.U1;
    return cb;
}

// ---------------------------------------------------------------------------
// JSON

using nlohmann::json;

json to_json(const SlsController& ctl) {
    json terms = json::array();
    for (const auto& g : ctl.terms) {
        json t{{"m", g.level}, {"j", g.index}, {"comp", g.comp}, {"monomial", to_json(g.monomial)}};
        if (g.alpha_id) t["alpha_id"] = *g.alpha_id;
        terms.push_back(std::move(t));
    }
    return json{{"n", ctl.n},         {"k", ctl.k}, {"T", ctl.T}, {"terms", terms},
                {"c_m", ctl.level_counts}, {"c", ctl.max_level_count}};
}

SlsController controller_from_json(const json& j) {
    SlsController ctl;
    ctl.n = j.at("n").get<int>();
    ctl.k = j.at("k").get<int>();
    ctl.T = j.at("T").get<int>();
    for (const auto& t : j.at("terms")) {
        GTerm g;
        g.level = t.at("m").get<int>();
        g.index = t.at("j").get<int>();
        g.comp = t.at("comp").get<int>();
        g.monomial = monomial_from_json(t.at("monomial"));
        if (t.contains("alpha_id")) g.alpha_id = t.at("alpha_id").get<int>();
        ctl.terms.push_back(std::move(g));
    }
    ctl.finalize();
    return ctl;
}

json to_json(const StabilityCert& cert) {
    json out{{"M", cert.M},     {"W", cert.W},
             {"k", cert.k},     {"l", cert.l},
             {"c", cert.c},     {"alpha_min", cert.alpha_min},
             {"b", cert.b},     {"satisfied", cert.satisfied}};
    if (std::isfinite(cert.state_bound))
        out["state_bound"] = cert.state_bound;
    else
        out["state_bound"] = nullptr;
    return out;
}

json to_json(const CostBound& cb) {
    json out{{"M", cb.M},         {"W", cb.W},   {"k", cb.k},
             {"n", cb.n},         {"h", cb.h},   {"e_x", cb.e_x},
             {"d", cb.d},         {"d_display", cb.d_display},
             {"U1", cb.U1},       {"r", cb.r},   {"T_steps", cb.T_steps},
             {"total", cb.total}};
    if (std::isfinite(cb.U1_closed_form))
        out["U1_closed_form"] = cb.U1_closed_form;
    else
        out["U1_closed_form"] = nullptr;
    return out;
}

}  // namespace polysls
