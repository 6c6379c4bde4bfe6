#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <vector>

#include "hetreg/errors.hpp"

namespace hetreg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Huber threshold policy: delta is refreshed from residuals as
/// tuning_constant * (mad_factor-adjusted MAD), clamped from below so the
/// loss never degenerates when residuals collapse to a constant.
struct HuberSpec {
    double delta = 1.345;
    double delta_floor = 1e-6;
    double mad_factor = 1.4826;
    double tuning_constant = 1.345;
};

/// rho_delta(t): t^2/2 inside the threshold, linear outside.
inline double huber_value(double t, double delta) {
    if (!(delta > 0.0)) {
        throw invalid_parameter_error("huber_value: delta must be positive");
    }
    const double a = std::abs(t);
    if (a <= delta) return 0.5 * t * t;
    return delta * a - 0.5 * delta * delta;
}

/// Derivative of huber_value in t: identity inside, clipped outside.
inline double huber_grad(double t, double delta) {
    if (!(delta > 0.0)) {
        throw invalid_parameter_error("huber_grad: delta must be positive");
    }
    if (t > delta) return delta;
    if (t < -delta) return -delta;
    return t;
}

/// Sum of rho_delta over a residual vector.
inline double huber_loss_sum(const Vector& r, double delta) {
    if (!(delta > 0.0)) {
        throw invalid_parameter_error("huber_loss_sum: delta must be positive");
    }
    double s = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        const double a = std::abs(r[i]);
        s += (a <= delta) ? 0.5 * r[i] * r[i] : delta * a - 0.5 * delta * delta;
    }
    return s;
}

/// Componentwise huber_grad, written into out (resized as needed).
inline void huber_grad_vec(const Vector& r, double delta, Vector& out) {
    out.resize(r.size());
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        const double t = r[i];
        out[i] = (t > delta) ? delta : (t < -delta ? -delta : t);
    }
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) {
        throw invalid_input_error("median_of: empty input");
    }
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
    return 0.5 * (v[mid - 1] + hi);
}

inline double median_of(const Vector& v) {
    return median_of(std::vector<double>(v.data(), v.data() + v.size()));
}

/// Median absolute deviation about the median, scaled by factor
/// (1.4826 makes it consistent for Gaussian data).
inline double mad(const Vector& v, double factor = 1.4826) {
    const double med = median_of(v);
    std::vector<double> dev(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        dev[static_cast<std::size_t>(i)] = std::abs(v[i] - med);
    }
    return factor * median_of(std::move(dev));
}

/// Huber threshold from residuals:
///   max(delta_floor, tuning_constant * mad_factor * MAD(r)).
inline double compute_delta(const Vector& residuals, const HuberSpec& spec) {
    if (residuals.size() == 0) {
        throw invalid_input_error("compute_delta: empty residual vector");
    }
    if (!residuals.allFinite()) {
        throw invalid_input_error("compute_delta: non-finite residual");
    }
    const double m = spec.tuning_constant * mad(residuals, spec.mad_factor);
    return std::max(spec.delta_floor, m);
}

/// Floor used when refreshing delta: 1e-6 times the MAD scale of y
/// (falling back to 1.0 when y itself is constant).
inline double default_delta_floor(const Vector& y) {
    const double scale = mad(y);
    return 1e-6 * (scale > 0.0 ? scale : 1.0);
}

/// Exact minimizer of b -> sum_i rho_delta(r0_i - b) by ternary search.
/// The objective is convex in b; plateaus (all residuals in the linear
/// zone) are handled by shrinking both ends on ties.
inline double huber_location(const Vector& r0, double delta,
                             double tol = 1e-10) {
    if (r0.size() == 0) {
        throw invalid_input_error("huber_location: empty input");
    }
    double lo = r0.minCoeff();
    double hi = r0.maxCoeff();
    if (lo == hi) return lo;
    auto f = [&](double b) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < r0.size(); ++i) {
            const double t = r0[i] - b;
            const double a = std::abs(t);
            s += (a <= delta) ? 0.5 * t * t : delta * a - 0.5 * delta * delta;
        }
        return s;
    };
    while (hi - lo > tol) {
        const double m1 = lo + (hi - lo) / 3.0;
        const double m2 = hi - (hi - lo) / 3.0;
        const double f1 = f(m1);
        const double f2 = f(m2);
        if (f1 < f2) {
            hi = m2;
        } else if (f2 < f1) {
            lo = m1;
        } else {
            lo = m1;
            hi = m2;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace hetreg
