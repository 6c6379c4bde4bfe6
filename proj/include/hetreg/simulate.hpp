#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hetreg/errors.hpp"
#include "hetreg/rng.hpp"
#include "hetreg/types.hpp"

namespace hetreg {

enum class Scenario {
    S1,
    S2,
    S3,
    S4,
    S5,
    S6,
    lowdim10,
    lowdim20,
    lowdim32,
    lowdim50,
};

enum class Balance { balanced, unbalanced_7_3, three_equal };
enum class ErrorKind { t1, mix, gauss };

struct ScenarioSpec {
    Scenario scenario = Scenario::S1;
    int n = 300;
    Balance balance = Balance::balanced;
    ErrorKind error = ErrorKind::mix;
    double noise_scale = 0.5;
    double rho = 0.5;
    std::uint64_t seed = 0;
};

struct GroundTruth {
    Partition partition;
    Matrix betas;  // K x p

    Eigen::Index K() const { return betas.rows(); }
    bool support(Eigen::Index k, Eigen::Index j) const {
        return betas(k, j) != 0.0;
    }
};

inline int scenario_dim(Scenario s) {
    switch (s) {
        case Scenario::lowdim10: return 10;
        case Scenario::lowdim20: return 20;
        case Scenario::lowdim32: return 32;
        case Scenario::lowdim50: return 50;
        default: return 200;
    }
}

inline bool is_lowdim(Scenario s) { return scenario_dim(s) != 200; }

inline Scenario scenario_from_name(const std::string& name) {
    if (name == "S1") return Scenario::S1;
    if (name == "S2") return Scenario::S2;
    if (name == "S3") return Scenario::S3;
    if (name == "S4") return Scenario::S4;
    if (name == "S5") return Scenario::S5;
    if (name == "S6") return Scenario::S6;
    if (name == "lowdim10") return Scenario::lowdim10;
    if (name == "lowdim20") return Scenario::lowdim20;
    if (name == "lowdim32") return Scenario::lowdim32;
    if (name == "lowdim50") return Scenario::lowdim50;
    throw invalid_input_error("unknown scenario: " + name);
}

inline const char* scenario_name(Scenario s) {
    switch (s) {
        case Scenario::S1: return "S1";
        case Scenario::S2: return "S2";
        case Scenario::S3: return "S3";
        case Scenario::S4: return "S4";
        case Scenario::S5: return "S5";
        case Scenario::S6: return "S6";
        case Scenario::lowdim10: return "lowdim10";
        case Scenario::lowdim20: return "lowdim20";
        case Scenario::lowdim32: return "lowdim32";
        case Scenario::lowdim50: return "lowdim50";
    }
    return "?";
}

namespace detail_sim {

/// 1-based inclusive range {a, ..., b} as 0-based indices.
inline std::vector<int> range_cluster(int a, int b, int p) {
    std::vector<int> c;
    for (int j = a; j <= std::min(b, p); ++j) c.push_back(j - 1);
    return c;
}

/// Chain of `count` clusters of size `size`, consecutive pairs overlapping
/// in `overlap` features, starting at 1-based `start`.
inline void chain(std::vector<std::vector<int>>& out, int& start, int count,
                  int size, int overlap, int p) {
    for (int i = 0; i < count; ++i) {
        out.push_back(range_cluster(start, start + size - 1, p));
        start += size - overlap;
    }
}

}  // namespace detail_sim

/// The benchmark cluster layouts. Gene indices in the sources are 1-based;
/// everything returned here is 0-based. Features left uncovered by a layout
/// (e.g. genes 195-200 in the mild-overlap chain) become singleton clusters
/// through the ClusterStructure constructor.
inline ClusterStructure gen_clusters(Scenario s) {
    using detail_sim::chain;
    using detail_sim::range_cluster;
    const int p = scenario_dim(s);
    std::vector<std::vector<int>> cl;
    int at = 1;
    switch (s) {
        case Scenario::S1:
            chain(cl, at, 24, 10, 2, p);
            break;
        case Scenario::S2:
            chain(cl, at, 39, 10, 5, p);
            break;
        case Scenario::S3:
            chain(cl, at, 13, 10, 2, p);  // {1..10} ... {97..106}
            at = 102;
            chain(cl, at, 5, 10, 5, p);   // {102..111} ... {122..131}
            at = 132;
            chain(cl, at, 7, 10, 0, p);   // {132..141} ... {192..(201->200)}
            break;
        case Scenario::S4:
            chain(cl, at, 2, 5, 2, p);    // {1..5}, {4..8}
            at = 7;
            chain(cl, at, 2, 10, 2, p);   // {7..16}, {15..24}
            at = 23;
            chain(cl, at, 2, 3, 2, p);    // {23..25}, {24..26}
            at = 25;
            chain(cl, at, 2, 15, 2, p);   // {25..39}, {38..52}
            at = 51;
            chain(cl, at, 1, 20, 2, p);   // {51..70}
            at = 69;
            chain(cl, at, 5, 3, 2, p);    // {69..71} ... {73..75}
            at = 74;
            chain(cl, at, 5, 5, 2, p);    // {74..78} ... {86..90}
            at = 89;
            chain(cl, at, 5, 10, 2, p);   // {89..98} ... {121..130}
            at = 129;
            chain(cl, at, 2, 15, 2, p);   // {129..143}, {142..156}
            at = 155;
            chain(cl, at, 2, 20, 2, p);   // {155..174}, {173..192}
            for (int g = 193; g <= 200; ++g) cl.push_back(range_cluster(g, g, p));
            break;
        case Scenario::S5:
            chain(cl, at, 2, 6, 5, p);    // {1..6}, {2..7}
            at = 3;
            chain(cl, at, 2, 8, 5, p);    // {3..10}, {6..13}
            at = 9;
            chain(cl, at, 2, 10, 5, p);   // {9..18}, {14..23}
            at = 19;
            chain(cl, at, 2, 15, 5, p);   // {19..33}, {29..43}
            at = 39;
            chain(cl, at, 2, 20, 5, p);   // {39..58}, {54..73}
            at = 69;
            chain(cl, at, 3, 6, 5, p);    // {69..74}, {70..75}, {71..76}
            at = 72;
            chain(cl, at, 3, 8, 5, p);    // {72..79}, {75..82}, {78..85}
            at = 81;
            chain(cl, at, 5, 10, 5, p);   // {81..90} ... {101..110}
            at = 106;
            chain(cl, at, 5, 15, 5, p);   // {106..120} ... {146..160}
            at = 156;
            chain(cl, at, 2, 20, 5, p);   // {156..175}, {171..190}
            for (int g = 191; g <= 200; ++g) cl.push_back(range_cluster(g, g, p));
            break;
        case Scenario::S6:
            chain(cl, at, 2, 3, 2, p);    // {1..3}, {2..4}
            at = 3;
            chain(cl, at, 2, 5, 2, p);    // {3..7}, {6..10}
            at = 9;
            chain(cl, at, 2, 10, 2, p);   // {9..18}, {17..26}
            at = 25;
            chain(cl, at, 2, 15, 2, p);   // {25..39}, {38..52}
            at = 51;
            chain(cl, at, 2, 20, 2, p);   // {51..70}, {69..88}
            at = 87;
            chain(cl, at, 3, 5, 2, p);    // {87..91}, {90..94}, {93..97}
            at = 96;
            chain(cl, at, 3, 6, 2, p);    // {96..101}, {100..105}, {104..109}
            at = 108;
            chain(cl, at, 3, 8, 2, p);    // {108..115}, {114..121}, {120..127}
            at = 126;
            chain(cl, at, 2, 10, 5, p);   // {126..135}, {131..140}
            at = 136;
            chain(cl, at, 2, 15, 5, p);   // {136..150}, {146..160}
            at = 156;
            chain(cl, at, 2, 20, 5, p);   // {156..175}, {171..190}
            for (int g = 191; g <= 200; ++g) cl.push_back(range_cluster(g, g, p));
            break;
        case Scenario::lowdim10:
            chain(cl, at, 2, 6, 2, p);
            break;
        case Scenario::lowdim20:
            chain(cl, at, 3, 8, 2, p);
            break;
        case Scenario::lowdim32:
            chain(cl, at, 5, 8, 2, p);
            break;
        case Scenario::lowdim50:
            chain(cl, at, 6, 10, 2, p);
            break;
    }
    return ClusterStructure(p, std::move(cl));
}

namespace detail_sim {

struct SupportSpec {
    std::vector<int> genes;  // 1-based
    std::vector<double> coefs;
};

inline Vector build_beta(int p, const SupportSpec& spec) {
    Vector beta = Vector::Zero(p);
    for (std::size_t i = 0; i < spec.genes.size(); ++i) {
        beta[spec.genes[i] - 1] = spec.coefs[i];
    }
    return beta;
}

inline SupportSpec k2_first() {
    return {{1, 3, 6, 9, 10, 11, 13, 16, 20, 21, 25, 27, 29, 31, 33},
            {2, 1, 0.5, -1, 1.5, 0.5, -1, 2, -1, 0.5, -1, 0.5, 1.5, 0.5, 1}};
}

inline SupportSpec k2_second() {
    return {{2, 3, 5, 9, 10, 12, 14, 17, 18, 19, 22, 23, 26, 31, 33},
            {-2, 1, -2, -1, 0.5, 1.5, 1, -1, -0.5, 2, -0.5, 1, -2, -0.5, -1}};
}

// The source prints this support starting at 0; gene 0 is read as gene 1 to
// preserve the 15-gene count under the 1-based convention used elsewhere.
inline SupportSpec k3_third() {
    return {{1, 3, 4, 6, 7, 10, 11, 12, 15, 17, 24, 25, 31, 32, 34},
            {-1, 1, -2, -0.5, 1, 2, -1, 2, 0.5, -1, 1, 1.5, 0.5, 1, -1.5}};
}

}  // namespace detail_sim

/// Subgroup coefficient templates (K x p). The low-dimensional 32/50 layout
/// lists six coefficients against five genes in the first subgroup; the
/// trailing coefficient has no gene to attach to and is dropped.
inline Matrix gen_truth_betas(Scenario s, Balance balance) {
    using detail_sim::build_beta;
    using detail_sim::SupportSpec;
    const int p = scenario_dim(s);
    const int K = (balance == Balance::three_equal) ? 3 : 2;
    if (K == 3 && is_lowdim(s)) {
        throw invalid_input_error(
            "gen_truth: three-subgroup design is defined only for the "
            "200-gene scenarios");
    }
    std::vector<SupportSpec> specs;
    if (!is_lowdim(s)) {
        specs.push_back(detail_sim::k2_first());
        specs.push_back(detail_sim::k2_second());
        if (K == 3) specs.push_back(detail_sim::k3_third());
    } else if (s == Scenario::lowdim10) {
        specs.push_back({{1, 2, 4}, {2, 1, 0.5}});
        specs.push_back({{3, 4, 6}, {-2, 1, -0.5}});
    } else if (s == Scenario::lowdim20) {
        specs.push_back({{1, 2, 6, 8, 10, 11}, {2, 1, 0.5, -1, 1.5, -2}});
        specs.push_back({{1, 3, 4, 7, 10, 14}, {-2, 1, 0.5, -1, 1.5, 2}});
    } else {  // lowdim32 / lowdim50
        specs.push_back({{1, 8, 10, 13, 16}, {2, 1, 0.5, -1, 1.5}});
        specs.push_back({{1, 4, 7, 10, 14, 19}, {-2, 1, 0.5, -1, 1.5, 2}});
    }
    Matrix betas(K, p);
    for (int k = 0; k < K; ++k) {
        betas.row(k) = build_beta(p, specs[static_cast<std::size_t>(k)]);
    }
    return betas;
}

/// One error draw; normal_branch reports which mixture component fired
/// (always true for gauss, false for t1).
inline double draw_error(ErrorKind kind, Rng& rng,
                         bool* normal_branch = nullptr) {
    switch (kind) {
        case ErrorKind::gauss:
            if (normal_branch) *normal_branch = true;
            return rng.normal();
        case ErrorKind::t1:
            if (normal_branch) *normal_branch = false;
            return rng.cauchy();
        case ErrorKind::mix: {
            const bool normal = rng.uniform() < 0.7;
            if (normal_branch) *normal_branch = normal;
            return normal ? rng.normal() : rng.cauchy();
        }
    }
    return 0.0;
}

namespace detail_sim {

/// Subgroup sizes under a balance rule, largest-remainder allocation.
inline std::vector<int> subgroup_sizes(int n, Balance balance) {
    switch (balance) {
        case Balance::balanced: {
            const int base = n / 2;
            return {n - base, base};
        }
        case Balance::unbalanced_7_3: {
            const int first = static_cast<int>(std::floor(0.7 * n));
            return {first, n - first};
        }
        case Balance::three_equal: {
            const int base = n / 3;
            std::vector<int> sizes(3, base);
            for (int r = 0; r < n - 3 * base; ++r) ++sizes[static_cast<std::size_t>(r)];
            return sizes;
        }
    }
    return {};
}

}  // namespace detail_sim

/// Draw a full dataset: labels by the balance rule (then shuffled so row
/// position carries no information), X rows from the AR(1) recursion
/// x_j = rho x_{j-1} + sqrt(1-rho^2) z_j (marginal N(0,1), corr rho^|j-k|),
/// and y = x' beta_g + noise_scale * error.
inline std::pair<Dataset, GroundTruth> gen_dataset(const ScenarioSpec& spec) {
    const int p = scenario_dim(spec.scenario);
    const Matrix betas = gen_truth_betas(spec.scenario, spec.balance);
    const int K = static_cast<int>(betas.rows());
    if (spec.n < K) {
        throw invalid_input_error("gen_dataset: n smaller than K");
    }
    Rng rng(spec.seed);

    const auto sizes = detail_sim::subgroup_sizes(spec.n, spec.balance);
    std::vector<int> labels;
    labels.reserve(static_cast<std::size_t>(spec.n));
    for (int k = 0; k < K; ++k) {
        labels.insert(labels.end(), static_cast<std::size_t>(sizes[static_cast<std::size_t>(k)]),
                      k);
    }
    rng.shuffle(labels);

    Matrix X(spec.n, p);
    Vector y(spec.n);
    const double carry = spec.rho;
    const double fresh = std::sqrt(1.0 - spec.rho * spec.rho);
    for (int i = 0; i < spec.n; ++i) {
        double prev = 0.0;
        for (int j = 0; j < p; ++j) {
            const double z = rng.normal();
            prev = (j == 0) ? z : carry * prev + fresh * z;
            X(i, j) = prev;
        }
        const double eps = draw_error(spec.error, rng);
        y[i] = X.row(i).dot(betas.row(labels[static_cast<std::size_t>(i)])) +
               spec.noise_scale * eps;
    }
    GroundTruth truth;
    truth.partition = Partition(std::move(labels), K);
    truth.betas = betas;
    return {Dataset(std::move(y), std::move(X)), std::move(truth)};
}

}  // namespace hetreg
