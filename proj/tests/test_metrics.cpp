#include <catch2/catch_amalgamated.hpp>

#include <numeric>

#include "hetreg/metrics.hpp"
#include "hetreg/rng.hpp"
#include "oracles.hpp"

using namespace hetreg;

namespace {

Partition P(std::vector<int> labels) {
    int K = 1;
    for (int g : labels) K = std::max(K, g + 1);
    return Partition(std::move(labels), K);
}

}  // namespace

TEST_CASE("ari hand values") {
    CHECK(ari(P({0, 0, 1, 1}), P({0, 0, 1, 1})) == Catch::Approx(1.0));
    CHECK(ari(P({0, 0, 1, 1}), P({0, 1, 0, 1})) == Catch::Approx(-0.5));
    CHECK(ari(P({0, 0, 0, 0}), P({0, 0, 1, 1})) == Catch::Approx(0.0));
    CHECK_THROWS_AS(ari(P({0, 1}), P({0, 1, 1})), invalid_input_error);
}

TEST_CASE("nmi hand values") {
    CHECK(nmi(P({0, 0, 1, 1}), P({0, 0, 1, 1})) == Catch::Approx(1.0));
    CHECK(nmi(P({0, 0, 1, 1}), P({0, 1, 0, 1})) ==
          Catch::Approx(0.0).margin(1e-12));
    CHECK(nmi(P({0, 0, 0}), P({0, 0, 0})) == Catch::Approx(1.0));
    // One trivial side, one informative side: zero information shared.
    CHECK(nmi(P({0, 0, 0, 0}), P({0, 1, 0, 1})) ==
          Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("ari and nmi against brute force on every small partition pair") {
    const auto parts = oracle::all_partitions(7, 3);
    for (const auto& a : parts) {
        for (const auto& b : parts) {
            const double got = ari(P(a), P(b));
            const double want = oracle::ari_paircount(a, b);
            REQUIRE(std::abs(got - want) <= 1e-12);
            const double gotn = nmi(P(a), P(b));
            const double wantn = oracle::nmi_direct(a, b);
            REQUIRE(std::abs(gotn - wantn) <= 1e-12);
        }
    }
}

TEST_CASE("partition metrics are symmetric and relabeling-invariant") {
    Rng rng(14);
    for (int rep = 0; rep < 100; ++rep) {
        const int n = 4 + static_cast<int>(rng.uniform_index(8));
        std::vector<int> a(static_cast<std::size_t>(n)),
            b(static_cast<std::size_t>(n));
        for (auto& g : a) g = static_cast<int>(rng.uniform_index(3));
        for (auto& g : b) g = static_cast<int>(rng.uniform_index(3));
        CHECK(ari(P(a), P(b)) == Catch::Approx(ari(P(b), P(a))).margin(1e-13));
        CHECK(nmi(P(a), P(b)) == Catch::Approx(nmi(P(b), P(a))).margin(1e-13));

        std::vector<int> relabeled = a;
        for (auto& g : relabeled) g = (g + 1) % 3;
        // Relabeling may touch K, so rebuild with the same K = 3.
        Partition pa(a, 3), pr(relabeled, 3), pb(b, 3);
        CHECK(ari(pa, pb) == Catch::Approx(ari(pr, pb)).margin(1e-13));
        CHECK(nmi(pa, pb) == Catch::Approx(nmi(pr, pb)).margin(1e-13));
    }
}

TEST_CASE("identification report on exact and empty supports") {
    Matrix truth(2, 6);
    truth << 1, 0, 2, 0, 0, 0,
             0, -1, 0, 0, 0.5, 0;
    Partition tp = P({0, 0, 1, 1});

    // Perfect supports under the swapped labeling.
    Matrix est(2, 6);
    est << 0, -2, 0, 0, 1, 0,
           2, 0, 1, 0, 0, 0;
    Partition ep = P({1, 1, 0, 0});
    auto rep = identification_report(ep, est, tp, truth);
    CHECK(rep.tpr == Catch::Approx(1.0));
    CHECK(rep.fpr == Catch::Approx(0.0));
    CHECK(rep.mcc == Catch::Approx(1.0));
    CHECK(rep.matched_perm == std::vector<int>{1, 0});

    // All-zero estimate: 0/0 conventions give (0, 0, 0).
    Matrix zero = Matrix::Zero(2, 6);
    auto rep0 = identification_report(P({0, 0, 1, 1}), zero, tp, truth);
    CHECK(rep0.tpr == 0.0);
    CHECK(rep0.fpr == 0.0);
    CHECK(rep0.mcc == 0.0);
}

TEST_CASE("identification report matches exhaustive confusion counting") {
    Rng rng(15);
    for (int rep = 0; rep < 50; ++rep) {
        const int n = 8, p = 6;
        std::vector<int> tl(n), el(n);
        for (auto& g : tl) g = static_cast<int>(rng.uniform_index(2));
        for (auto& g : el) g = static_cast<int>(rng.uniform_index(2));
        Matrix tb(2, p), eb(2, p);
        for (int k = 0; k < 2; ++k) {
            for (int j = 0; j < p; ++j) {
                tb(k, j) = rng.uniform() < 0.4 ? rng.normal() : 0.0;
                eb(k, j) = rng.uniform() < 0.4 ? rng.normal() : 0.0;
            }
        }
        Partition tp(tl, 2), ep(el, 2);
        auto got = identification_report(ep, eb, tp, tb);

        // Brute force over both label matchings.
        double best_agree = -1;
        int best_m = 0;
        for (int m = 0; m < 2; ++m) {
            double agree = 0;
            for (int i = 0; i < n; ++i) {
                if ((m == 0 ? el[static_cast<std::size_t>(i)]
                            : 1 - el[static_cast<std::size_t>(i)]) ==
                    tl[static_cast<std::size_t>(i)]) {
                    ++agree;
                }
            }
            if (agree > best_agree) {
                best_agree = agree;
                best_m = m;
            }
        }
        double tp_ = 0, fp_ = 0, tn_ = 0, fn_ = 0;
        for (int ke = 0; ke < 2; ++ke) {
            const int kt = best_m == 0 ? ke : 1 - ke;
            for (int j = 0; j < p; ++j) {
                const bool have = eb(ke, j) != 0.0;
                const bool want = tb(kt, j) != 0.0;
                if (have && want) ++tp_;
                if (have && !want) ++fp_;
                if (!have && want) ++fn_;
                if (!have && !want) ++tn_;
            }
        }
        const double tpr = tp_ + fn_ > 0 ? tp_ / (tp_ + fn_) : 0.0;
        const double fpr = fp_ + tn_ > 0 ? fp_ / (fp_ + tn_) : 0.0;
        const double den = (tp_ + fp_) * (tp_ + fn_) * (tn_ + fp_) * (tn_ + fn_);
        const double mcc =
            den > 0 ? (tp_ * tn_ - fp_ * fn_) / std::sqrt(den) : 0.0;
        CHECK(got.tpr == Catch::Approx(tpr).margin(1e-12));
        CHECK(got.fpr == Catch::Approx(fpr).margin(1e-12));
        CHECK(got.mcc == Catch::Approx(mcc).margin(1e-12));
    }
}

TEST_CASE("identification report is invariant to permuting estimated labels") {
    Rng rng(16);
    const int n = 10, p = 5;
    std::vector<int> tl(n), el(n);
    for (auto& g : tl) g = static_cast<int>(rng.uniform_index(2));
    for (auto& g : el) g = static_cast<int>(rng.uniform_index(2));
    Matrix tb = Matrix::Random(2, p), eb = Matrix::Random(2, p);
    for (int k = 0; k < 2; ++k) {
        for (int j = 0; j < p; ++j) {
            if (std::abs(tb(k, j)) < 0.5) tb(k, j) = 0;
            if (std::abs(eb(k, j)) < 0.5) eb(k, j) = 0;
        }
    }
    auto a = identification_report(Partition(el, 2), eb, Partition(tl, 2), tb);
    std::vector<int> el2 = el;
    for (auto& g : el2) g = 1 - g;
    Matrix eb2(2, p);
    eb2.row(0) = eb.row(1);
    eb2.row(1) = eb.row(0);
    auto b = identification_report(Partition(el2, 2), eb2, Partition(tl, 2), tb);
    CHECK(a.tpr == b.tpr);
    CHECK(a.fpr == b.fpr);
    CHECK(a.mcc == b.mcc);
}

TEST_CASE("rmse closed forms and independent loop") {
    Matrix truth(2, 3);
    truth << 1, 0, -1,
             0, 2, 0;
    Partition tp = P({0, 1, 0, 1});

    // Perfect estimate.
    CHECK(rmse(tp, truth, tp, truth) == 0.0);

    // Zero estimate: sqrt(mean ||beta_{g_i}||^2).
    Matrix zero = Matrix::Zero(2, 3);
    const double expect = std::sqrt((2.0 + 4.0 + 2.0 + 4.0) / 4.0);
    CHECK(rmse(tp, zero, tp, truth) == Catch::Approx(expect));

    Rng rng(17);
    for (int rep = 0; rep < 50; ++rep) {
        const int n = 12, p = 4;
        std::vector<int> tl(n), el(n);
        for (auto& g : tl) g = static_cast<int>(rng.uniform_index(3));
        for (auto& g : el) g = static_cast<int>(rng.uniform_index(2));
        Matrix tb = Matrix::Random(3, p), eb = Matrix::Random(2, p);
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            total += (eb.row(el[static_cast<std::size_t>(i)]) -
                      tb.row(tl[static_cast<std::size_t>(i)]))
                         .squaredNorm();
        }
        CHECK(rmse(Partition(el, 2), eb, Partition(tl, 3), tb) ==
              Catch::Approx(std::sqrt(total / n)).margin(1e-12));
    }
}

TEST_CASE("rmse is invariant to jointly permuting labels and rows") {
    Rng rng(18);
    const int n = 15, p = 4;
    std::vector<int> tl(n), el(n);
    for (auto& g : tl) g = static_cast<int>(rng.uniform_index(2));
    for (auto& g : el) g = static_cast<int>(rng.uniform_index(2));
    Matrix tb = Matrix::Random(2, p), eb = Matrix::Random(2, p);
    const double base = rmse(Partition(el, 2), eb, Partition(tl, 2), tb);
    std::vector<int> el2 = el;
    for (auto& g : el2) g = 1 - g;
    Matrix eb2(2, p);
    eb2.row(0) = eb.row(1);
    eb2.row(1) = eb.row(0);
    CHECK(rmse(Partition(el2, 2), eb2, Partition(tl, 2), tb) ==
          Catch::Approx(base).margin(1e-14));
}

TEST_CASE("pmre values and exclusions") {
    Vector y(1), yh(1);
    y << 2.0;
    yh << 1.0;
    CHECK(pmre(y, yh).value == Catch::Approx(0.5));

    Vector y2(3), yh2(3);
    y2 << 1, 0, 2;
    yh2 << 1, 5, 1;
    auto r = pmre(y2, yh2);
    CHECK(r.value == Catch::Approx(0.25));
    CHECK(r.excluded_zero_y == 1);

    Vector z = Vector::Zero(3);
    CHECK_THROWS_AS(pmre(z, yh2), undefined_metric_error);

    Vector same(4);
    same << 1, -2, 3, 0.5;
    CHECK(pmre(same, same).value == 0.0);
}

TEST_CASE("stability hand values and oracle") {
    std::vector<Eigen::Index> idmap{0, 1, 2, 3};
    CHECK(stability(P({0, 0, 1, 1}), P({0, 0, 1, 1}), idmap) == 0.0);
    CHECK(stability(P({0, 0, 1, 1}), P({0, 1, 0, 1}), idmap) ==
          Catch::Approx(0.5));

    // Swapping two samples between two size-2 groups flips 8 entries.
    const double got =
        stability(P({0, 0, 1, 1}), P({1, 0, 0, 1}), idmap);
    CHECK(got == Catch::Approx(8.0 / 16.0));

    // Exhaustive agreement with the direct co-existence construction.
    const auto parts = oracle::all_partitions(6, 3);
    for (std::size_t i = 0; i < parts.size(); i += 7) {
        for (std::size_t j = 0; j < parts.size(); j += 11) {
            std::vector<Eigen::Index> map(6);
            std::iota(map.begin(), map.end(), 0);
            CHECK(stability(P(parts[i]), P(parts[j]), map) ==
                  Catch::Approx(oracle::stability_direct(parts[i], parts[j]))
                      .margin(1e-12));
        }
    }

    // Subsample comparison through an index map.
    Partition full = P({0, 0, 1, 1, 1});
    Partition sub = P({0, 1, 1});
    std::vector<Eigen::Index> map{0, 2, 3};  // samples 0, 2, 3 of `full`
    CHECK(stability(full, sub, map) == 0.0);

    CHECK_THROWS_AS(stability(full, sub, std::vector<Eigen::Index>{}),
                    invalid_input_error);
}
