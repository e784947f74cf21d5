#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "polysls/poly.hpp"

namespace polysls {

/// One controller term: a scalar disturbance monomial feeding component
/// `comp` of the input/state response. Terms at level < T carry a gating
/// alpha_id; level-T terms are canceled outright. The monomial's own alpha
/// factors are inherited from earlier gating and reference strictly smaller
/// levels.
struct GTerm {
    int level = 0;                  // m: maximum variable age in the monomial
    int index = 0;                  // j: position within the level
    int comp = 0;                   // component of u / x this term feeds
    Monomial monomial;
    std::optional<int> alpha_id;    // present iff level < T
};

/// Disturbance-feedback controller table produced by symbolic unrolling of
/// polynomial dynamics over a finite-impulse-response horizon T.
struct SlsController {
    int n = 0;
    int k = 0;
    int T = 0;
    std::vector<GTerm> terms;                 // sorted by (level, comp, monomial)
    std::vector<int> level_counts;            // c_m, size T+1
    int max_level_count = 0;                  // c = max over all levels
    int gated_count = 0;                      // number of alpha ids

    // alpha ids of gated terms grouped by level (for per-level masking)
    std::vector<std::vector<int>> gated_ids_by_level;

    /// Recompute counts/indices after construction or deserialization;
    /// verifies structural invariants and throws on violation.
    void finalize();
};

struct SynthOptions {
    std::size_t term_cap = 100000;   // explosion guard on stored terms
    double prune_tol = Polynomial::merge_epsilon();  // coefficient drop threshold
};

/// Build the controller by fixed-point unrolling of the closed loop: the state
/// response starts as the newest disturbance; dynamics monomials generated at
/// level m < T are gated with a fresh alpha and their (1 - alpha) residual,
/// age-shifted, re-enters the state response; monomials reaching level T are
/// canceled outright. Throws (with per-level diagnostics) if the table
/// exceeds opts.term_cap.
SlsController synthesize(const PolyDynamics& dyn, int T, const SynthOptions& opts = {});

/// u_t from the last T+1 disturbances (w_hist[0] = w_t, w_hist[a] = w_{t-a})
/// and one alpha value per gated term, each in (0, 1]. If the history is
/// shorter than T+1, missing entries read as zero only when cold_start is set.
Eigen::VectorXd control_input(const SlsController& ctl,
                              std::span<const Eigen::VectorXd> w_hist,
                              std::span<const double> alphas, bool cold_start = false);

/// State response x_t (level-m terms read disturbances w_{t-1}..w_{t-1-m},
/// i.e. w_hist[1 + age]); the newest disturbance w_hist[0] enters directly.
Eigen::VectorXd predict_state(const SlsController& ctl,
                              std::span<const Eigen::VectorXd> w_hist,
                              std::span<const double> alphas, bool cold_start = false);

/// Newest disturbance implied by an observed state: x_observed minus the
/// gated residual response evaluated on older history (w_older[0] = w_{t-1}).
/// On exact polynomial dynamics this inverts injection; on true nonlinear
/// dynamics it returns w + e(x_prev), absorbing the approximation error.
Eigen::VectorXd reconstruct_disturbance(const SlsController& ctl,
                                        const Eigen::VectorXd& x_observed,
                                        std::span<const Eigen::VectorXd> w_older,
                                        std::span<const double> alphas,
                                        bool cold_start = false);

// Reverse-mode helpers: accumulate lambda^T * d(output)/d(inputs) into the
// provided buffers. dw buffers align with the corresponding history spans;
// dalphas has one slot per gated term. Used by the training loop.
void control_input_vjp(const SlsController& ctl, std::span<const Eigen::VectorXd> w_hist,
                       std::span<const double> alphas, const Eigen::VectorXd& lambda,
                       std::vector<Eigen::VectorXd>& dw_hist, std::vector<double>& dalphas);
void state_response_vjp(const SlsController& ctl, std::span<const Eigen::VectorXd> w_older,
                        std::span<const double> alphas, const Eigen::VectorXd& lambda,
                        std::vector<Eigen::VectorXd>& dw_older, std::vector<double>& dalphas);

/// Linear-bound data for the stability certificate: l bounds every gated term
/// by l * ||w||_inf over histories bounded by W (alpha factors bounded by 1);
/// c is the stored per-level maximum term count.
struct LcBound {
    double l = 0.0;
    int c = 0;
};
LcBound compute_l_c(const SlsController& ctl, double W);

/// Input-to-state stability certificate of the closed loop:
/// b = M W^k / (k+1)! + l c (1 - alpha_min); satisfied iff b < 1, in which
/// case the geometric recursion bounds the state by W / (1 - b).
struct StabilityCert {
    double M = 0, W = 0;
    int k = 0;
    double l = 0;
    int c = 0;
    double alpha_min = 0;
    double b = 0;
    bool satisfied = false;
    double state_bound = 0;  // infinity when not satisfied
};
StabilityCert check_iss(double M, double W, int k, double l, int c, double alpha_min);

/// Bound on the all-alpha-one controller and its quadratic cost. U1 is
/// evaluated through the singularity-free series sum_{j=1..k} M W^j (d^j - 1)
/// with d = e_x / W + 1 and e_x = M (n h)^(k+1) / (k+1)!; the closed form is
/// kept for display only (it has poles at W d = 1 and W = 1).
struct CostBound {
    double M = 0, W = 0;
    int k = 0, n = 0;
    double h = 0;
    double e_x = 0;
    double d = 0;
    double d_display = 0;     // variant with (n h)^k in the error exponent
    double U1 = 0;
    double U1_closed_form = 0;  // may be non-finite at the poles
    double r = 0;
    int T_steps = 0;
    double total = 0;
};
CostBound cost_bound_u1(double M, double W, int k, int n, double h);
CostBound with_corollary(CostBound cb, double r, int T_steps);

nlohmann::json to_json(const SlsController& ctl);
SlsController controller_from_json(const nlohmann::json& j);
nlohmann::json to_json(const StabilityCert& cert);
nlohmann::json to_json(const CostBound& cb);

}  // namespace polysls
