#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "hetreg/errors.hpp"
#include "hetreg/types.hpp"

namespace hetreg {

namespace detail_metrics {

inline void check_same_n(const Partition& a, const Partition& b) {
    if (a.n() != b.n()) {
        throw invalid_input_error("partition metrics: length mismatch");
    }
}

/// Contingency counts keyed by (label_a, label_b), plus marginals.
struct Contingency {
    std::map<std::pair<int, int>, double> cells;
    std::map<int, double> rows, cols;
    double n = 0.0;

    Contingency(const Partition& a, const Partition& b) {
        for (std::size_t i = 0; i < a.labels.size(); ++i) {
            cells[{a.labels[i], b.labels[i]}] += 1.0;
            rows[a.labels[i]] += 1.0;
            cols[b.labels[i]] += 1.0;
            n += 1.0;
        }
    }
};

inline double choose2(double m) { return 0.5 * m * (m - 1.0); }

}  // namespace detail_metrics

/// Hubert-Arabie adjusted Rand index. When the expected index equals the
/// maximum (both partitions trivial in the same way) the value is 1.
inline double ari(const Partition& a, const Partition& b) {
    detail_metrics::check_same_n(a, b);
    detail_metrics::Contingency ct(a, b);
    double sum_cells = 0.0, sum_rows = 0.0, sum_cols = 0.0;
    for (const auto& [key, m] : ct.cells) sum_cells += detail_metrics::choose2(m);
    for (const auto& [k, m] : ct.rows) sum_rows += detail_metrics::choose2(m);
    for (const auto& [k, m] : ct.cols) sum_cols += detail_metrics::choose2(m);
    const double pairs = detail_metrics::choose2(ct.n);
    const double expected = sum_rows * sum_cols / pairs;
    const double maximum = 0.5 * (sum_rows + sum_cols);
    if (maximum == expected) return 1.0;
    return (sum_cells - expected) / (maximum - expected);
}

/// Mutual information normalized by the arithmetic mean of the entropies;
/// two single-cluster partitions compare as 1 by convention.
inline double nmi(const Partition& a, const Partition& b) {
    detail_metrics::check_same_n(a, b);
    detail_metrics::Contingency ct(a, b);
    double mi = 0.0;
    for (const auto& [key, nij] : ct.cells) {
        mi += nij / ct.n *
              std::log(ct.n * nij /
                       (ct.rows[key.first] * ct.cols[key.second]));
    }
    double ha = 0.0, hb = 0.0;
    for (const auto& [k, m] : ct.rows) ha -= m / ct.n * std::log(m / ct.n);
    for (const auto& [k, m] : ct.cols) hb -= m / ct.n * std::log(m / ct.n);
    const double mean = 0.5 * (ha + hb);
    if (mean == 0.0) return 1.0;
    return std::max(0.0, mi) / mean;
}

struct IdentificationReport {
    double tpr = 0.0;
    double fpr = 0.0;
    double mcc = 0.0;
    std::vector<int> matched_perm;  // matched_perm[est_k] = true subgroup
};

namespace detail_metrics {

/// Best injective map from the smaller label set into the larger by
/// sample-level agreement, exhaustively over arrangements (fine for K <= 6).
inline std::vector<int> best_matching(const Partition& est,
                                      const Partition& truth) {
    const int Ke = est.K, Kt = truth.K;
    std::vector<std::vector<double>> agree(
        static_cast<std::size_t>(Ke),
        std::vector<double>(static_cast<std::size_t>(Kt), 0.0));
    for (std::size_t i = 0; i < est.labels.size(); ++i) {
        agree[static_cast<std::size_t>(est.labels[i])]
             [static_cast<std::size_t>(truth.labels[i])] += 1.0;
    }
    // Enumerate injections of the smaller side.
    const bool est_small = Ke <= Kt;
    const int small = est_small ? Ke : Kt;
    const int large = est_small ? Kt : Ke;
    std::vector<int> pick(static_cast<std::size_t>(large));
    std::iota(pick.begin(), pick.end(), 0);
    std::vector<int> best_map;
    double best_score = -1.0;
    std::sort(pick.begin(), pick.end());
    do {
        double score = 0.0;
        for (int s = 0; s < small; ++s) {
            const int t = pick[static_cast<std::size_t>(s)];
            score += est_small ? agree[static_cast<std::size_t>(s)]
                                      [static_cast<std::size_t>(t)]
                               : agree[static_cast<std::size_t>(t)]
                                      [static_cast<std::size_t>(s)];
        }
        if (score > best_score) {
            best_score = score;
            best_map.assign(pick.begin(), pick.begin() + small);
        }
    } while (std::next_permutation(pick.begin(), pick.end()));

    // Express as est-subgroup -> true-subgroup (-1 for unmatched).
    std::vector<int> match(static_cast<std::size_t>(Ke), -1);
    if (est_small) {
        for (int s = 0; s < small; ++s) {
            match[static_cast<std::size_t>(s)] =
                best_map[static_cast<std::size_t>(s)];
        }
    } else {
        for (int s = 0; s < small; ++s) {
            match[static_cast<std::size_t>(best_map[static_cast<std::size_t>(s)])] = s;
        }
    }
    return match;
}

}  // namespace detail_metrics

/// Support-recovery quality after matching estimated subgroups to true ones
/// by sample agreement. The K matched support vectors are concatenated and
/// scored as one binary problem; unmatched estimated subgroups contribute
/// false positives, unmatched true subgroups false negatives. MCC is 0
/// whenever a marginal vanishes.
inline IdentificationReport identification_report(const Partition& est_part,
                                                  const Matrix& est_betas,
                                                  const Partition& true_part,
                                                  const Matrix& true_betas) {
    detail_metrics::check_same_n(est_part, true_part);
    if (est_betas.cols() != true_betas.cols()) {
        throw invalid_input_error("identification_report: p mismatch");
    }
    if (est_betas.rows() != est_part.K || true_betas.rows() != true_part.K) {
        throw invalid_input_error(
            "identification_report: K does not match coefficient rows");
    }
    IdentificationReport rep;
    rep.matched_perm = detail_metrics::best_matching(est_part, true_part);

    const Eigen::Index p = est_betas.cols();
    double tp = 0, fp = 0, tn = 0, fn = 0;
    std::vector<bool> true_used(static_cast<std::size_t>(true_part.K), false);
    for (int ke = 0; ke < est_part.K; ++ke) {
        const int kt = rep.matched_perm[static_cast<std::size_t>(ke)];
        for (Eigen::Index j = 0; j < p; ++j) {
            const bool have = est_betas(ke, j) != 0.0;
            const bool want = (kt >= 0) && true_betas(kt, j) != 0.0;
            if (have && want) ++tp;
            else if (have && !want) ++fp;
            else if (!have && want) ++fn;
            else ++tn;
        }
        if (kt >= 0) true_used[static_cast<std::size_t>(kt)] = true;
    }
    for (int kt = 0; kt < true_part.K; ++kt) {
        if (true_used[static_cast<std::size_t>(kt)]) continue;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (true_betas(kt, j) != 0.0) ++fn;
            else ++tn;
        }
    }
    rep.tpr = (tp + fn > 0) ? tp / (tp + fn) : 0.0;
    rep.fpr = (fp + tn > 0) ? fp / (fp + tn) : 0.0;
    const double denom =
        (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    rep.mcc = (denom > 0.0) ? (tp * tn - fp * fn) / std::sqrt(denom) : 0.0;
    return rep;
}

/// Root mean squared coefficient error per sample: the estimated vector of
/// the sample's estimated subgroup against the true vector of its true
/// subgroup. No label matching is involved.
inline double rmse(const Partition& est_part, const Matrix& est_betas,
                   const Partition& true_part, const Matrix& true_betas) {
    detail_metrics::check_same_n(est_part, true_part);
    if (est_betas.cols() != true_betas.cols()) {
        throw invalid_input_error("rmse: p mismatch");
    }
    double total = 0.0;
    const Eigen::Index n = est_part.n();
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto e = est_betas.row(est_part.labels[static_cast<std::size_t>(i)]);
        const auto t = true_betas.row(true_part.labels[static_cast<std::size_t>(i)]);
        total += (e - t).squaredNorm();
    }
    return std::sqrt(total / static_cast<double>(n));
}

struct PmreResult {
    double value = 0.0;
    Eigen::Index excluded_zero_y = 0;
};

/// Mean absolute relative prediction error; exact-zero responses are
/// excluded and counted.
inline PmreResult pmre(const Vector& y, const Vector& yhat) {
    if (y.size() != yhat.size()) {
        throw invalid_input_error("pmre: length mismatch");
    }
    double sum = 0.0;
    Eigen::Index used = 0, skipped = 0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (y[i] == 0.0) {
            ++skipped;
            continue;
        }
        sum += std::abs((y[i] - yhat[i]) / y[i]);
        ++used;
    }
    if (used == 0) {
        throw undefined_metric_error("pmre: every response is zero");
    }
    return {sum / static_cast<double>(used), skipped};
}

/// Mean absolute difference of the two co-existence matrices over the
/// common samples. index_map[j] gives, for sample j of partition b, its
/// index in partition a.
inline double stability(const Partition& a, const Partition& b,
                        const std::vector<Eigen::Index>& index_map) {
    if (index_map.size() != b.labels.size()) {
        throw invalid_input_error("stability: index_map length mismatch");
    }
    if (index_map.empty()) {
        throw invalid_input_error("stability: empty common sample set");
    }
    for (Eigen::Index idx : index_map) {
        if (idx < 0 || idx >= a.n()) {
            throw invalid_input_error("stability: index_map out of range");
        }
    }
    const std::size_t m = index_map.size();
    double diff = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const bool ga = a.labels[static_cast<std::size_t>(index_map[i])] ==
                            a.labels[static_cast<std::size_t>(index_map[j])];
            const bool gb = b.labels[i] == b.labels[j];
            if (ga != gb) diff += 1.0;
        }
    }
    return diff / (static_cast<double>(m) * static_cast<double>(m));
}

}  // namespace hetreg
