#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "hetreg/engine.hpp"

namespace hetreg {

/// Modified BIC:
///   log( sum_k sum_{g_i=k} rho_{delta_k}(y_i - x_i' beta_k) / n )
///   + log(log(pK)) * log(n)/n * df,
/// with df the number of nonzero coefficients across subgroups (intercepts
/// excluded). Each subgroup's loss uses its own delta. A zero loss term is
/// clamped at 1e-300 before the log.
inline double bic(const Dataset& data, const FitResult& fitted) {
    const Eigen::Index n = data.n();
    if (fitted.partition.n() != n) {
        throw invalid_input_error("bic: fit does not match the dataset");
    }
    const int K = static_cast<int>(fitted.models.size());
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& m = fitted.models[static_cast<std::size_t>(
            fitted.partition.labels[static_cast<std::size_t>(i)])];
        loss += huber_value(data.y()[i] - m.predict(data.X().row(i)), m.delta);
    }
    loss /= static_cast<double>(n);

    long df = 0;
    for (const auto& m : fitted.models) {
        df += (m.beta.array() != 0.0).count();
    }
    const double first = std::log(std::max(loss, 1e-300));
    if (df == 0) return first;
    const double C =
        std::log(std::log(static_cast<double>(data.p()) * K));
    return first + C * std::log(static_cast<double>(n)) /
                       static_cast<double>(n) * static_cast<double>(df);
}

struct KSelection {
    int best_K = 1;
    FitResult best_fit;
    std::vector<std::pair<int, double>> bic_curve;  // (K, BIC)
};

/// Fit the engine for every K in [k_min, k_max] and pick the BIC minimizer
/// (ties toward smaller K).
inline KSelection select_K(const Dataset& data, const ClusterStructure& cs,
                           const EngineConfig& cfg_template, int k_min,
                           int k_max) {
    if (k_min < 1 || k_max < k_min ||
        static_cast<Eigen::Index>(k_max) > data.n()) {
        throw invalid_config_error("select_K: invalid K range");
    }
    KSelection out;
    double best_bic = std::numeric_limits<double>::infinity();
    for (int k = k_min; k <= k_max; ++k) {
        EngineConfig cfg = cfg_template;
        cfg.K = k;
        Engine engine(data, cfg, cs);
        FitResult fit = engine.fit();
        const double score = bic(data, fit);
        out.bic_curve.emplace_back(k, score);
        if (score < best_bic) {
            best_bic = score;
            out.best_K = k;
            out.best_fit = std::move(fit);
        }
    }
    return out;
}

}  // namespace hetreg
