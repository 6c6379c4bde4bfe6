#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "hetreg/errors.hpp"
#include "hetreg/huber.hpp"
#include "hetreg/types.hpp"

namespace hetreg {

struct SolverOptions {
    double tol = 1e-6;       // KKT residual target
    int max_iter = 5000;
    double step_shrink = 0.8;
    double initial_step = 1.0;
    bool intercept = false;
    // Warm start (empty -> start from zero).
    Vector warm_v;
    std::optional<double> warm_intercept;
    // When set, the penalized objective after every iteration is appended.
    std::vector<double>* objective_trace = nullptr;

    SolverOptions& with_tol(double t) { tol = t; return *this; }
    SolverOptions& with_max_iter(int m) { max_iter = m; return *this; }
    SolverOptions& with_intercept(bool b) { intercept = b; return *this; }
};

struct SolverSolution {
    Vector beta;        // length p, beta = recombine(expanded_v)
    Vector expanded_v;  // length P
    std::optional<double> intercept;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
    double kkt_residual = 0.0;
    // Last accepted line-search step; feeding it back as initial_step of a
    // warm-started solve skips the initial backtracking descent.
    double final_step = 1.0;
};

/// Expanded design: column k of the result is column original_column(k)
/// of X, so that X beta = Xtil v for every v recombining to beta.
inline Matrix duplicate_design(const Matrix& X, const ClusterStructure& cs) {
    if (X.cols() != cs.p()) {
        throw invalid_structure_error(
            "duplicate_design: structure does not match column count");
    }
    Matrix Xt(X.rows(), cs.expanded_dim());
    for (Eigen::Index k = 0; k < cs.expanded_dim(); ++k) {
        Xt.col(k) = X.col(cs.original_column(k));
    }
    return Xt;
}

/// Collapse the latent decomposition: beta_j = sum of duplicates of j.
inline Vector recombine(const Vector& v, const ClusterStructure& cs) {
    if (v.size() != cs.expanded_dim()) {
        throw invalid_input_error("recombine: length != expanded dimension");
    }
    Vector beta = Vector::Zero(cs.p());
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        beta[cs.original_column(k)] += v[k];
    }
    return beta;
}

namespace detail {

/// Contiguous penalty block in some coefficient vector.
struct Block {
    Eigen::Index begin = 0;
    Eigen::Index size = 0;
    double weight = 1.0;  // omega_l
};

inline std::vector<Block> layout_of(const ClusterStructure& cs) {
    std::vector<Block> blocks(static_cast<std::size_t>(cs.num_clusters()));
    for (Eigen::Index l = 0; l < cs.num_clusters(); ++l) {
        blocks[static_cast<std::size_t>(l)] = {cs.block_begin(l), cs.size(l),
                                               cs.weight(l)};
    }
    return blocks;
}

/// In-place proximal map of step * lambda * [gamma ||.||_1
/// + (1-gamma) sum_l omega_l ||.^(l)||_2]: coordinatewise soft threshold
/// followed by blockwise shrinkage. Exact for this block-separable penalty.
inline void prox_blocks_inplace(Vector& u, double step, double lambda,
                                double gamma, const std::vector<Block>& blocks) {
    const double t1 = step * lambda * gamma;
    for (const auto& blk : blocks) {
        auto seg = u.segment(blk.begin, blk.size);
        if (t1 > 0.0) {
            for (Eigen::Index j = 0; j < seg.size(); ++j) {
                const double a = std::abs(seg[j]) - t1;
                seg[j] = (a > 0.0) ? (seg[j] > 0.0 ? a : -a) : 0.0;
            }
        }
        const double t2 = step * lambda * (1.0 - gamma) * blk.weight;
        if (t2 > 0.0) {
            const double nrm = seg.norm();
            if (nrm <= t2) {
                seg.setZero();
            } else {
                seg *= 1.0 - t2 / nrm;
            }
        }
    }
}

/// Penalty value lambda * [gamma ||v||_1 + (1-gamma) sum_l omega_l ||v^(l)||].
inline double penalty_blocks(const Vector& v, double lambda, double gamma,
                             const std::vector<Block>& blocks) {
    if (lambda == 0.0) return 0.0;
    double l1 = 0.0, l2 = 0.0;
    for (const auto& blk : blocks) {
        auto seg = v.segment(blk.begin, blk.size);
        l1 += seg.template lpNorm<1>();
        l2 += blk.weight * seg.norm();
    }
    return lambda * (gamma * l1 + (1.0 - gamma) * l2);
}

/// Minimal-norm-subgradient residual of one block given the smooth gradient
/// segment g: for a zero block max(0, ||soft(g, lam*gamma)|| - lam*(1-gamma)*omega),
/// inside an active block the largest coordinatewise stationarity defect.
template <typename VSeg, typename GSeg>
double kkt_block(const VSeg& vseg, const GSeg& gseg, double lambda,
                 double gamma, double weight) {
    const double t1 = lambda * gamma;
    const double t2 = lambda * (1.0 - gamma) * weight;
    const double vnorm = vseg.norm();
    double worst = 0.0;
    if (vnorm == 0.0) {
        double z2 = 0.0;
        for (Eigen::Index j = 0; j < gseg.size(); ++j) {
            const double z = std::max(0.0, std::abs(gseg[j]) - t1);
            z2 += z * z;
        }
        return std::max(0.0, std::sqrt(z2) - t2);
    }
    for (Eigen::Index j = 0; j < gseg.size(); ++j) {
        double s;
        if (vseg[j] != 0.0) {
            s = std::abs(gseg[j] + t1 * (vseg[j] > 0.0 ? 1.0 : -1.0) +
                         t2 * vseg[j] / vnorm);
        } else {
            s = std::max(0.0, std::abs(gseg[j]) - t1);
        }
        worst = std::max(worst, s);
    }
    return worst;
}

inline double kkt_blocks(const Vector& v, const Vector& g, double lambda,
                         double gamma, const std::vector<Block>& blocks) {
    double worst = 0.0;
    for (const auto& blk : blocks) {
        worst = std::max(
            worst, kkt_block(v.segment(blk.begin, blk.size),
                             g.segment(blk.begin, blk.size), lambda, gamma,
                             blk.weight));
    }
    return worst;
}

// Compatibility wrappers over the full layout of a structure.
inline void prox_sparse_group_inplace(Vector& u, double step, double lambda,
                                      double gamma,
                                      const ClusterStructure& cs) {
    prox_blocks_inplace(u, step, lambda, gamma, layout_of(cs));
}

inline double penalty_value(const Vector& v, double lambda, double gamma,
                            const ClusterStructure& cs) {
    return penalty_blocks(v, lambda, gamma, layout_of(cs));
}

inline double kkt_residual(const Vector& v, const Vector& g, double lambda,
                           double gamma, const ClusterStructure& cs) {
    return kkt_blocks(v, g, lambda, gamma, layout_of(cs));
}

struct CoreState {
    Vector v;      // coefficients over the core's columns
    double b = 0.0;
    double f = 0.0;
    double step = 1.0;
    int iterations = 0;
    bool converged = false;
    double kkt = 0.0;
};

/// Monotone accelerated proximal gradient on one column set. Backtracking
/// line search (shrink factor from opts, step carried across iterations);
/// extrapolated candidates are kept only when they decrease the penalized
/// objective, otherwise the momentum resets and a plain descent step runs,
/// so the objective never increases. The unpenalized intercept, when
/// enabled, is re-optimized exactly after each accepted step.
inline CoreState core_fit(const Matrix& X, const Vector& y, double lambda,
                          double gamma, double delta,
                          const std::vector<Block>& blocks,
                          const SolverOptions& opts, Vector v0, double b0,
                          double step0, int max_iter) {
    const Eigen::Index n = X.rows();
    CoreState st;
    st.v = std::move(v0);
    st.b = b0;
    st.step = step0;

    Vector r = y - X * st.v;
    if (opts.intercept) r.array() -= st.b;
    st.f = huber_loss_sum(r, delta);
    if (!std::isfinite(st.f)) {
        throw numerical_error("fit_penalized: non-finite objective", 0);
    }
    double F = st.f + penalty_blocks(st.v, lambda, gamma, blocks);
    double theta = 1.0;
    Vector v_prev = st.v, r_prev = r;
    Vector psi(n), g(st.v.size()), w(st.v.size()), rw(n), z(st.v.size()),
        rz(n);

    int it = 0;
    const int kkt_every = 2;
    for (; it < max_iter; ++it) {
        if (it % kkt_every == 0) {
            huber_grad_vec(r, delta, psi);
            g.noalias() = -(X.transpose() * psi);
            double kkt = kkt_blocks(st.v, g, lambda, gamma, blocks);
            if (opts.intercept) kkt = std::max(kkt, std::abs(psi.sum()));
            st.kkt = kkt;
            if (kkt <= opts.tol) {
                st.converged = true;
                break;
            }
        }
        if (it > 0 && it % 50 == 0) {
            st.step /= opts.step_shrink;  // occasional growth probe
        }

        bool accepted = false;
        bool fixed_point = false;
        for (int pass = 0; pass < 2 && !accepted; ++pass) {
            // pass 0: extrapolated step; pass 1: fallback plain step.
            const double m =
                (pass == 0 && theta > 1.0)
                    ? (theta - 1.0) /
                          (0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta)))
                    : 0.0;
            if (m > 0.0) {
                w = st.v + m * (st.v - v_prev);
                rw = r + m * (r - r_prev);  // residual is affine in v
            } else {
                w = st.v;
                rw = r;
            }
            const double fw = (m > 0.0) ? huber_loss_sum(rw, delta) : st.f;
            huber_grad_vec(rw, delta, psi);
            g.noalias() = -(X.transpose() * psi);

            double fz = 0.0;
            while (true) {
                z = w - st.step * g;
                prox_blocks_inplace(z, st.step, lambda, gamma, blocks);
                rz.noalias() = y - X * z;
                if (opts.intercept) rz.array() -= st.b;
                fz = huber_loss_sum(rz, delta);
                const double dz2 = (z - w).squaredNorm();
                if (dz2 == 0.0) {
                    fixed_point = (m == 0.0);
                    break;
                }
                const double model = fw + g.dot(z - w) + 0.5 / st.step * dz2;
                if (fz <= model + 1e-12 * std::abs(model)) break;
                st.step *= opts.step_shrink;
                if (st.step < 1e-18) {
                    fixed_point = true;
                    z = st.v;
                    rz = r;
                    fz = st.f;
                    break;
                }
            }

            const double Fz = fz + penalty_blocks(z, lambda, gamma, blocks);
            if (Fz <= F + 1e-12 * std::abs(F)) {
                v_prev.swap(st.v);
                r_prev.swap(r);
                st.v = z;
                r = rz;
                st.f = fz;
                F = Fz;
                theta = (pass == 0)
                            ? 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta))
                            : 1.0;
                accepted = true;
            } else {
                theta = 1.0;  // reset momentum; retry as plain descent step
                fixed_point = false;
            }
        }
        if (!accepted) {
            // Even the plain descent step failed the monotone test.
            fixed_point = true;
        }

        bool intercept_moved = false;
        if (opts.intercept && accepted) {
            Vector r0 = r;
            r0.array() += st.b;
            const double bnew = huber_location(r0, delta);
            if (bnew != st.b) {
                const double db = bnew - st.b;
                r.array() -= db;
                r_prev.array() -= db;
                st.b = bnew;
                st.f = huber_loss_sum(r, delta);
                F = st.f + penalty_blocks(st.v, lambda, gamma, blocks);
                intercept_moved = true;
            }
        }

        if (!std::isfinite(F)) {
            throw numerical_error("fit_penalized: non-finite objective", it);
        }
        if (opts.objective_trace) {
            opts.objective_trace->push_back(F);
        }
        if (fixed_point && !intercept_moved) {
            ++it;
            break;  // prox fixed point at the current column set
        }
    }
    st.iterations = it;
    return st;
}

}  // namespace detail

/// Exact proximal operator of the sparse non-overlapping group penalty in
/// the expanded space.
inline Vector prox_sparse_group(const Vector& u, double step, double lambda,
                                double gamma, const ClusterStructure& cs) {
    if (!(step > 0.0)) {
        throw invalid_parameter_error("prox_sparse_group: step must be > 0");
    }
    if (lambda < 0.0 || gamma < 0.0 || gamma > 1.0) {
        throw invalid_parameter_error(
            "prox_sparse_group: need lambda >= 0 and gamma in [0,1]");
    }
    if (u.size() != cs.expanded_dim()) {
        throw invalid_input_error("prox_sparse_group: length mismatch");
    }
    Vector out = u;
    detail::prox_sparse_group_inplace(out, step, lambda, gamma, cs);
    return out;
}

/// Huber + sparse group lasso on the expanded design, solved by monotone
/// accelerated proximal gradient with backtracking over an exactly verified
/// working set: blocks currently active are optimized to tolerance, then a
/// full-gradient pass either certifies global optimality (the reported
/// kkt_residual) or admits the violating blocks and repeats. Coefficients
/// outside the working set stay exactly zero, so the restricted objective
/// equals the full one at every iterate.
inline SolverSolution fit_penalized(const Matrix& Xtil, const Vector& y,
                                    double lambda, double gamma, double delta,
                                    const ClusterStructure& cs,
                                    const SolverOptions& opts) {
    const Eigen::Index n = Xtil.rows();
    const Eigen::Index P = Xtil.cols();
    if (P != cs.expanded_dim() || y.size() != n) {
        throw invalid_input_error("fit_penalized: dimension mismatch");
    }
    if (lambda < 0.0) {
        throw invalid_parameter_error("fit_penalized: lambda must be >= 0");
    }
    if (gamma < 0.0 || gamma > 1.0) {
        throw invalid_parameter_error("fit_penalized: gamma must be in [0,1]");
    }
    if (!(delta > 0.0)) {
        throw invalid_parameter_error("fit_penalized: delta must be > 0");
    }

    const auto full_layout = detail::layout_of(cs);
    const Eigen::Index L = cs.num_clusters();

    Vector v = (opts.warm_v.size() == P) ? opts.warm_v : Vector::Zero(P);
    double b = 0.0;
    {
        Vector r0 = y - Xtil * v;
        if (opts.intercept) {
            b = opts.warm_intercept.value_or(huber_location(r0, delta));
        }
    }

    SolverSolution sol;
    sol.final_step = opts.initial_step;

    // Nothing is ever shrunk to zero at lambda = 0: solve everything at once.
    std::vector<char> in_set(static_cast<std::size_t>(L), lambda == 0.0);
    if (lambda > 0.0) {
        for (Eigen::Index l = 0; l < L; ++l) {
            if (v.segment(cs.block_begin(l), cs.size(l)).norm() > 0.0) {
                in_set[static_cast<std::size_t>(l)] = 1;
            }
        }
    }

    Vector psi(n), g(P);
    int used_iter = 0;
    double step = opts.initial_step;
    const int max_rounds = static_cast<int>(L) + 2;
    for (int round = 0; round < max_rounds; ++round) {
        // Optimize over the current working set.
        std::vector<Eigen::Index> active;
        for (Eigen::Index l = 0; l < L; ++l) {
            if (in_set[static_cast<std::size_t>(l)]) active.push_back(l);
        }
        if (!active.empty() && used_iter < opts.max_iter) {
            Eigen::Index width = 0;
            for (Eigen::Index l : active) width += cs.size(l);
            Matrix Xw(n, width);
            Vector vw(width);
            std::vector<detail::Block> blocks;
            blocks.reserve(active.size());
            Eigen::Index at = 0;
            for (Eigen::Index l : active) {
                Xw.middleCols(at, cs.size(l)) =
                    Xtil.middleCols(cs.block_begin(l), cs.size(l));
                vw.segment(at, cs.size(l)) =
                    v.segment(cs.block_begin(l), cs.size(l));
                blocks.push_back({at, cs.size(l), cs.weight(l)});
                at += cs.size(l);
            }
            auto core = detail::core_fit(Xw, y, lambda, gamma, delta, blocks,
                                         opts, std::move(vw), b, step,
                                         opts.max_iter - used_iter);
            at = 0;
            for (Eigen::Index l : active) {
                v.segment(cs.block_begin(l), cs.size(l)) =
                    core.v.segment(at, cs.size(l));
                at += cs.size(l);
            }
            b = core.b;
            step = core.step;
            used_iter += core.iterations;
        } else if (active.empty() && opts.intercept) {
            Vector r0 = y - Xtil * v;
            b = huber_location(r0, delta);
        }

        // Full verification pass.
        Vector r = y - Xtil * v;
        if (opts.intercept) r.array() -= b;
        huber_grad_vec(r, delta, psi);
        g.noalias() = -(Xtil.transpose() * psi);
        double kkt = 0.0;
        bool grew = false;
        for (Eigen::Index l = 0; l < L; ++l) {
            const double res = detail::kkt_block(
                v.segment(cs.block_begin(l), cs.size(l)),
                g.segment(cs.block_begin(l), cs.size(l)), lambda, gamma,
                cs.weight(l));
            kkt = std::max(kkt, res);
            if (res > opts.tol && !in_set[static_cast<std::size_t>(l)]) {
                in_set[static_cast<std::size_t>(l)] = 1;
                grew = true;
            }
        }
        if (opts.intercept) kkt = std::max(kkt, std::abs(psi.sum()));
        sol.kkt_residual = kkt;
        if (kkt <= opts.tol) {
            sol.converged = true;
            break;
        }
        if (!grew && used_iter >= opts.max_iter) break;
        if (!grew && used_iter == 0 && active.empty()) break;
    }

    sol.expanded_v = v;
    sol.beta = recombine(v, cs);
    if (opts.intercept) sol.intercept = b;
    Vector r = y - Xtil * v;
    if (opts.intercept) r.array() -= b;
    sol.objective = huber_loss_sum(r, delta) +
                    detail::penalty_blocks(v, lambda, gamma, full_layout);
    sol.iterations = used_iter;
    sol.final_step = step;
    return sol;
}

/// Smallest penalty level at which the fitted coefficient vector is zero.
/// Analytic starting bound from the necessary conditions followed by a
/// verification loop: the solver is run at the candidate and the candidate
/// doubled until the zero solution is actually returned.
inline double lambda_max(const Matrix& Xtil, const Vector& y, double gamma,
                         double delta, const ClusterStructure& cs,
                         bool intercept) {
    if (gamma < 0.0 || gamma > 1.0) {
        throw invalid_parameter_error("lambda_max: gamma must be in [0,1]");
    }
    Vector r0 = y;
    if (intercept) r0.array() -= huber_location(y, delta);
    Vector psi;
    huber_grad_vec(r0, delta, psi);
    Vector g = Xtil.transpose() * psi;

    // Zero optimality forces, for every block,
    //   lambda >= ||g^(l)|| / ((1-gamma) omega_l + gamma sqrt(p_l))   and
    //   lambda >= |g_j| / (gamma + (1-gamma) omega_l) for every member j.
    double lam = 0.0;
    for (Eigen::Index l = 0; l < cs.num_clusters(); ++l) {
        const auto seg = g.segment(cs.block_begin(l), cs.size(l));
        const double sqp = std::sqrt(static_cast<double>(cs.size(l)));
        const double w = cs.weight(l);
        lam = std::max(lam, seg.norm() / ((1.0 - gamma) * w + gamma * sqp));
        lam = std::max(lam,
                       seg.template lpNorm<Eigen::Infinity>() /
                           (gamma + (1.0 - gamma) * w));
    }
    if (lam == 0.0) return 0.0;

    // Certify from the zero warm start: zero is a prox fixed point exactly
    // when it is optimal, so one or two iterations settle each candidate.
    SolverOptions check;
    check.tol = 1e-9;
    check.max_iter = 2;
    check.intercept = intercept;
    check.warm_v = Vector::Zero(cs.expanded_dim());
    for (int attempt = 0; attempt < 60; ++attempt) {
        const auto sol = fit_penalized(Xtil, y, lam, gamma, delta, cs, check);
        if (sol.expanded_v.isZero(0.0)) return lam;
        lam *= 2.0;
    }
    return lam;
}

/// Original-space solve: duplicate columns, fit in the expanded space,
/// recombine. The returned beta together with expanded_v carries both views.
inline SolverSolution solve_original(const Matrix& X, const Vector& y,
                                     double lambda, double gamma, double delta,
                                     const ClusterStructure& cs,
                                     const SolverOptions& opts) {
    return fit_penalized(duplicate_design(X, cs), y, lambda, gamma, delta, cs,
                         opts);
}

}  // namespace hetreg
