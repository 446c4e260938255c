#include "mfuse/zsolve.hpp"

#include <cmath>

#include <fmt/format.h>

#include "mfuse/errors.hpp"
#include "mfuse/numerics.hpp"

namespace mfuse {

namespace {

constexpr int kMaxHalvings = 30;

struct Point {
    VectorXd params;
    EquationEval eval;
    VectorXd mean_score;
    double norm;
};

Point evaluate(const EquationFamily& fam, const Dataset& data, VectorXd params) {
    EquationEval e = eval_equation(fam, data, params);
    VectorXd m = weighted_mean_score(e.scores, data.obs_weights());
    const double norm = m.lpNorm<Eigen::Infinity>();
    return {std::move(params), std::move(e), std::move(m), norm};
}

}  // namespace

SolveReport solve(const EquationFamily& fam, const Dataset& data, const SolveOptions& opts) {
    if (!(opts.tol > 0)) throw NumericError("solve: tol must be positive");
    if (opts.max_iter < 1) throw NumericError("solve: max_iter must be at least 1");
    fam.validate(data);

    SolveReport report;
    const auto p = fam.param_dim();
    VectorXd start = VectorXd::Zero(p);
    if (opts.init) {
        if (opts.init->size() != p || !opts.init->allFinite())
            throw NumericError(fmt::format("solve: init must be {} finite values", p));
        start = *opts.init;
    } else if (fam.linear_in_params()) {
        // One Newton step from zero is the weighted least-squares solution.
        const Point zero = evaluate(fam, data, start);
        const MatrixXd q = zero.eval.jacobian.weighted_mean(data.obs_weights());
        const RegSolve step = general_solve(q, -zero.mean_score);
        report.ridge_used = step.ridge_fallback;
        start = step.x;
    }

    Point cur = evaluate(fam, data, start);
    VectorXd best_params = cur.params;
    double best_norm = cur.norm;
    for (int it = 0; it < opts.max_iter; ++it) {
        if (cur.norm <= opts.tol) break;
        const MatrixXd q = cur.eval.jacobian.weighted_mean(data.obs_weights());
        const RegSolve newton = general_solve(q, -cur.mean_score);
        report.ridge_used = report.ridge_used || newton.ridge_fallback;

        double scale = 1.0;
        Point next = evaluate(fam, data, cur.params + newton.x);
        int halvings = 0;
        while (!(next.norm < cur.norm) && halvings < kMaxHalvings) {
            scale *= 0.5;
            ++halvings;
            next = evaluate(fam, data, cur.params + scale * newton.x);
        }
        ++report.iterations;
        if (!(next.norm < cur.norm)) {
            throw NonConvergenceError(
                fmt::format("{}: step halving stalled at score norm {:.3g}", to_string(fam.id),
                            best_norm),
                best_params, best_norm);
        }
        cur = std::move(next);
        if (cur.norm < best_norm) {
            best_params = cur.params;
            best_norm = cur.norm;
        }
    }

    if (!(cur.norm <= opts.tol)) {
        throw NonConvergenceError(
            fmt::format("{}: no convergence in {} iterations (score norm {:.3g})", to_string(fam.id),
                        opts.max_iter, best_norm),
            best_params, best_norm);
    }
    if (!cur.eval.clamped_rows.empty()) {
        throw NonConvergenceError(
            fmt::format("{}: linear predictor diverged on {} rows (separated data)",
                        to_string(fam.id), cur.eval.clamped_rows.size()),
            cur.params, cur.norm);
    }
    report.params = std::move(cur.params);
    report.final_norm = cur.norm;
    report.converged = true;
    return report;
}

}  // namespace mfuse
