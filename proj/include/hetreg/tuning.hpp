#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "hetreg/errors.hpp"
#include "hetreg/parallel.hpp"
#include "hetreg/rng.hpp"
#include "hetreg/soglasso.hpp"
#include "hetreg/types.hpp"

namespace hetreg {

struct TuningGrid {
    std::vector<double> gammas{0.1, 0.3, 0.5, 0.7};
    int n_lambdas = 20;
    double lambda_min_ratio = 1e-3;
    int folds = 5;

    void validate() const {
        if (n_lambdas < 2) {
            throw invalid_parameter_error("TuningGrid: n_lambdas must be >= 2");
        }
        if (!(lambda_min_ratio > 0.0 && lambda_min_ratio < 1.0)) {
            throw invalid_parameter_error(
                "TuningGrid: lambda_min_ratio must be in (0,1)");
        }
        if (folds < 2) {
            throw invalid_parameter_error("TuningGrid: folds must be >= 2");
        }
        if (gammas.empty()) {
            throw invalid_parameter_error("TuningGrid: gammas must be nonempty");
        }
        for (double g : gammas) {
            if (g < 0.0 || g > 1.0) {
                throw invalid_parameter_error(
                    "TuningGrid: gamma outside [0,1]");
            }
        }
    }
};

struct CvCell {
    double gamma = 0.0;
    double lambda = 0.0;
    double heldout_loss = 0.0;  // mean over folds of mean held-out huber loss
};

struct CvSelection {
    double lambda = 0.0;
    double gamma = 0.0;
    std::vector<CvCell> table;
    bool degenerate = false;
};

namespace detail {

/// Deal shuffled indices round-robin into `folds` groups; sizes differ by
/// at most one.
inline std::vector<int> fold_assignment(Eigen::Index n, int folds, Rng& rng) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::vector<int> fold(static_cast<std::size_t>(n));
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        fold[static_cast<std::size_t>(order[pos])] =
            static_cast<int>(pos % static_cast<std::size_t>(folds));
    }
    return fold;
}

struct PathPoint {
    double lambda = 0.0;
    double heldout = 0.0;
};

/// Warm-started descent path over `lambdas` on the training rows, scoring
/// mean held-out Huber loss on the complementary rows at the training delta.
inline std::vector<double> cv_path(const Matrix& Xtrain, const Vector& ytrain,
                                   const Matrix& Xtest, const Vector& ytest,
                                   const std::vector<double>& lambdas,
                                   double gamma, double delta,
                                   const ClusterStructure& cs,
                                   const SolverOptions& base) {
    SolverOptions opts = base;
    std::vector<double> held;
    held.reserve(lambdas.size());
    bool have_step = false;
    double best = std::numeric_limits<double>::infinity();
    for (double lam : lambdas) {
        // Points deep past the held-out minimum only need a rough solve;
        // they stay in the table but cannot win the selection.
        opts.max_iter = (!held.empty() && held.back() > 1.3 * best)
                            ? std::max(30, base.max_iter / 4)
                            : base.max_iter;
        auto sol = fit_penalized(Xtrain, ytrain, lam, gamma, delta, cs, opts);
        opts.warm_v = sol.expanded_v;
        opts.warm_intercept = sol.intercept;
        // Carry the accepted step once the line search has actually run.
        if (sol.iterations > 1 || have_step) {
            opts.initial_step = sol.final_step;
            have_step = true;
        }
        Vector r = ytest - Xtest * sol.expanded_v;
        if (sol.intercept) r.array() -= *sol.intercept;
        held.push_back(huber_loss_sum(r, delta) /
                       static_cast<double>(ytest.size()));
        best = std::min(best, held.back());
    }
    return held;
}

}  // namespace detail

/// Log-spaced descent grid from lambda_max down to ratio*lambda_max.
inline std::vector<double> lambda_grid(double lam_max, int n_lambdas,
                                       double min_ratio) {
    std::vector<double> grid(static_cast<std::size_t>(n_lambdas));
    for (int t = 0; t < n_lambdas; ++t) {
        grid[static_cast<std::size_t>(t)] =
            lam_max * std::pow(min_ratio,
                               static_cast<double>(t) / (n_lambdas - 1));
    }
    return grid;
}

/// Five-fold (by default) cross-validation over the (gamma, lambda) grid on
/// an already-expanded subsample. Folds are drawn from rng; each gamma gets
/// its own lambda path computed from the subsample's certified lambda_max.
/// Ties are broken toward the larger lambda, then the larger gamma.
///
/// check_cold_refit re-solves a few grid points without warm starts and
/// reports the largest relative held-out-loss discrepancy via *cold_gap
/// (test instrumentation).
inline CvSelection cv_select_expanded(const Matrix& Xtil, const Vector& y,
                                      const ClusterStructure& cs, double delta,
                                      const TuningGrid& grid, Rng& rng,
                                      const SolverOptions& base_opts,
                                      int threads = 1,
                                      double* cold_gap = nullptr,
                                      const std::vector<int>* fixed_folds =
                                          nullptr) {
    grid.validate();
    const Eigen::Index n = y.size();
    if (n < grid.folds) {
        throw invalid_input_error("cv_select: subsample smaller than folds");
    }

    CvSelection out;

    // Degenerate subsample: constant response and constant columns.
    const bool y_const = (y.array() == y[0]).all();
    bool x_const = true;
    for (Eigen::Index j = 0; x_const && j < Xtil.cols(); ++j) {
        x_const = (Xtil.col(j).array() == Xtil(0, j)).all();
    }
    if (y_const && x_const) {
        out.degenerate = true;
        out.gamma = grid.gammas.front();
        out.lambda =
            lambda_max(Xtil, y, out.gamma, delta, cs, base_opts.intercept);
        return out;
    }

    const std::vector<int> fold =
        fixed_folds ? *fixed_folds
                    : detail::fold_assignment(n, grid.folds, rng);
    if (fold.size() != static_cast<std::size_t>(n)) {
        throw invalid_input_error("cv_select: fold vector length mismatch");
    }

    // Materialize fold views once; they are reused across the whole grid.
    std::vector<Matrix> Xtrain(static_cast<std::size_t>(grid.folds)),
        Xtest(static_cast<std::size_t>(grid.folds));
    std::vector<Vector> ytrain(static_cast<std::size_t>(grid.folds)),
        ytest(static_cast<std::size_t>(grid.folds));
    for (int f = 0; f < grid.folds; ++f) {
        std::vector<Eigen::Index> tr, te;
        for (Eigen::Index i = 0; i < n; ++i) {
            (fold[static_cast<std::size_t>(i)] == f ? te : tr).push_back(i);
        }
        auto gather = [&](const std::vector<Eigen::Index>& rows, Matrix& Xo,
                          Vector& yo) {
            Xo.resize(static_cast<Eigen::Index>(rows.size()), Xtil.cols());
            yo.resize(static_cast<Eigen::Index>(rows.size()));
            for (std::size_t i = 0; i < rows.size(); ++i) {
                Xo.row(static_cast<Eigen::Index>(i)) = Xtil.row(rows[i]);
                yo[static_cast<Eigen::Index>(i)] = y[rows[i]];
            }
        };
        const std::size_t sf = static_cast<std::size_t>(f);
        gather(tr, Xtrain[sf], ytrain[sf]);
        gather(te, Xtest[sf], ytest[sf]);
    }

    const std::size_t G = grid.gammas.size();
    std::vector<std::vector<double>> grids(G);
    for (std::size_t gi = 0; gi < G; ++gi) {
        const double lm = lambda_max(Xtil, y, grid.gammas[gi], delta, cs,
                                     base_opts.intercept);
        grids[gi] = lambda_grid(std::max(lm, 1e-12), grid.n_lambdas,
                                grid.lambda_min_ratio);
    }

    // One task per (gamma, fold) pair; each runs a warm-started path.
    std::vector<std::vector<double>> held(
        G * static_cast<std::size_t>(grid.folds));
    parallel_for(held.size(), threads, [&](std::size_t task) {
        const std::size_t gi = task / static_cast<std::size_t>(grid.folds);
        const std::size_t f = task % static_cast<std::size_t>(grid.folds);
        held[task] = detail::cv_path(Xtrain[f], ytrain[f], Xtest[f], ytest[f],
                                     grids[gi], grid.gammas[gi], delta, cs,
                                     base_opts);
    });

    out.table.reserve(G * static_cast<std::size_t>(grid.n_lambdas));
    for (std::size_t gi = 0; gi < G; ++gi) {
        for (int t = 0; t < grid.n_lambdas; ++t) {
            double mean = 0.0;
            for (int f = 0; f < grid.folds; ++f) {
                mean += held[gi * static_cast<std::size_t>(grid.folds) +
                             static_cast<std::size_t>(f)]
                            [static_cast<std::size_t>(t)];
            }
            mean /= grid.folds;
            out.table.push_back(
                CvCell{grid.gammas[gi],
                       grids[gi][static_cast<std::size_t>(t)], mean});
        }
    }
    // Pick the minimizer; ties -> larger lambda, then larger gamma.
    const CvCell* best = nullptr;
    for (const auto& cell : out.table) {
        if (!best || cell.heldout_loss < best->heldout_loss ||
            (cell.heldout_loss == best->heldout_loss &&
             (cell.lambda > best->lambda ||
              (cell.lambda == best->lambda && cell.gamma > best->gamma)))) {
            best = &cell;
        }
    }
    out.lambda = best->lambda;
    out.gamma = best->gamma;

    if (cold_gap) {
        // Re-solve a few grid points cold and compare held-out losses.
        *cold_gap = 0.0;
        Rng pick(derive_seed(0x9d5c, 17));
        for (int probe = 0; probe < 5; ++probe) {
            const std::size_t gi = pick.uniform_index(G);
            const std::size_t t =
                pick.uniform_index(static_cast<std::size_t>(grid.n_lambdas));
            const std::size_t f =
                pick.uniform_index(static_cast<std::size_t>(grid.folds));
            auto sol = fit_penalized(Xtrain[f], ytrain[f],
                                     grids[gi][t], grid.gammas[gi], delta, cs,
                                     base_opts);
            Vector r = ytest[f] - Xtest[f] * sol.expanded_v;
            if (sol.intercept) r.array() -= *sol.intercept;
            const double cold = huber_loss_sum(r, delta) /
                                static_cast<double>(ytest[f].size());
            const double warm =
                held[gi * static_cast<std::size_t>(grid.folds) + f][t];
            *cold_gap = std::max(
                *cold_gap, std::abs(cold - warm) / std::max(1e-12, warm));
        }
    }
    return out;
}

/// Convenience wrapper taking an original-space subsample.
inline CvSelection cv_select(const Dataset& subsample,
                             const ClusterStructure& cs, double delta,
                             const TuningGrid& grid, Rng& rng,
                             bool intercept = true, int threads = 1) {
    SolverOptions base;
    base.tol = 1e-5;
    base.max_iter = 2000;
    base.intercept = intercept;
    return cv_select_expanded(duplicate_design(subsample.X(), cs),
                              subsample.y(), cs, delta, grid, rng, base,
                              threads);
}

}  // namespace hetreg
