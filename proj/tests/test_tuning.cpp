#include <catch2/catch_amalgamated.hpp>

#include <numeric>

#include "hetreg/rng.hpp"
#include "hetreg/selection.hpp"
#include "hetreg/tuning.hpp"

using namespace hetreg;

namespace {

Matrix random_matrix(Eigen::Index n, Eigen::Index p, Rng& rng) {
    Matrix X(n, p);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
    return X;
}

}  // namespace

TEST_CASE("fold assignment is a balanced partition") {
    Rng rng(2718);
    for (int rep = 0; rep < 20; ++rep) {
        const Eigen::Index n =
            5 + static_cast<Eigen::Index>(rng.uniform_index(40));
        const int folds = 2 + static_cast<int>(rng.uniform_index(5));
        auto fold = detail::fold_assignment(n, folds, rng);
        std::vector<int> count(static_cast<std::size_t>(folds), 0);
        for (int f : fold) {
            REQUIRE(f >= 0);
            REQUIRE(f < folds);
            ++count[static_cast<std::size_t>(f)];
        }
        const int lo = *std::min_element(count.begin(), count.end());
        const int hi = *std::max_element(count.begin(), count.end());
        CHECK(hi - lo <= 1);
        CHECK(std::accumulate(count.begin(), count.end(), 0) ==
              static_cast<int>(n));
    }
}

TEST_CASE("lambda grid endpoints and size") {
    auto grid = lambda_grid(2.0, 20, 1e-3);
    REQUIRE(grid.size() == 20);
    CHECK(grid.front() == Catch::Approx(2.0));
    CHECK(grid.back() == Catch::Approx(2e-3));
    for (std::size_t i = 1; i < grid.size(); ++i) CHECK(grid[i] < grid[i - 1]);
}

TEST_CASE("default grid enumerates 80 candidate pairs") {
    Rng rng(11);
    ClusterStructure cs = ClusterStructure::singletons(4);
    Matrix X = random_matrix(40, 4, rng);
    Vector y = X.col(0) - X.col(2);
    for (int i = 0; i < 40; ++i) y[i] += 0.1 * rng.normal();
    TuningGrid grid;
    SolverOptions base;
    base.tol = 1e-4;
    Rng cvrng(5);
    auto sel = cv_select_expanded(X, y, cs, 1.0, grid, cvrng, base);
    CHECK(sel.table.size() == 80);
}

TEST_CASE("noiseless model: CV recovers the exact support") {
    Rng rng(31);
    ClusterStructure cs = ClusterStructure::singletons(5);
    Matrix X = random_matrix(100, 5, rng);
    Vector beta(5);
    beta << 1.5, 0.0, -2.0, 0.0, 0.75;
    Vector y = X * beta;  // no noise

    TuningGrid grid;
    SolverOptions base;
    base.tol = 1e-6;
    base.max_iter = 5000;
    Rng cvrng(7);
    auto sel = cv_select_expanded(X, y, cs, 1.0, grid, cvrng, base);

    auto fit = fit_penalized(X, y, sel.lambda, sel.gamma, 1.0, cs,
                             SolverOptions{}.with_tol(1e-8));
    for (int j = 0; j < 5; ++j) {
        if (beta[j] != 0.0) {
            CHECK(fit.beta[j] != 0.0);
        } else {
            CHECK(fit.beta[j] == 0.0);
        }
    }
}

TEST_CASE("minimal legality: two folds on four samples") {
    ClusterStructure cs = ClusterStructure::singletons(2);
    Matrix X(4, 2);
    X << 1, 0, 0, 1, -1, 0.5, 0.5, -1;
    Vector y(4);
    y << 1, -1, 0.5, 0.2;
    TuningGrid grid;
    grid.folds = 2;
    grid.n_lambdas = 5;
    SolverOptions base;
    Rng cvrng(3);
    auto sel = cv_select_expanded(X, y, cs, 1.0, grid, cvrng, base);
    CHECK(sel.lambda > 0.0);
    CHECK((sel.gamma >= 0.0 && sel.gamma <= 1.0));
}

TEST_CASE("degenerate subsample returns lambda_max with a warning flag") {
    ClusterStructure cs = ClusterStructure::singletons(2);
    Matrix X = Matrix::Ones(6, 2);
    Vector y = Vector::Ones(6) * 3.0;
    TuningGrid grid;
    SolverOptions base;
    Rng cvrng(3);
    auto sel = cv_select_expanded(X, y, cs, 1.0, grid, cvrng, base);
    CHECK(sel.degenerate);
    CHECK(sel.gamma == Catch::Approx(0.1));
}

TEST_CASE("cv_select is invariant to sample order with matching folds") {
    Rng rng(77);
    ClusterStructure cs = ClusterStructure::singletons(3);
    const int n = 30;
    Matrix X = random_matrix(n, 3, rng);
    Vector y = X.col(0) * 2.0;
    for (int i = 0; i < n; ++i) y[i] += 0.3 * rng.normal();

    TuningGrid grid;
    grid.n_lambdas = 8;
    SolverOptions base;
    base.tol = 1e-6;

    Rng fold_rng(99);
    auto folds = detail::fold_assignment(n, grid.folds, fold_rng);
    Rng unused1(0), unused2(0);
    auto a = cv_select_expanded(X, y, cs, 1.0, grid, unused1, base, 1, nullptr,
                                &folds);

    // Reverse the sample order along with the fold labels.
    Matrix Xr = X.colwise().reverse();
    Vector yr = y.reverse();
    std::vector<int> folds_r(folds.rbegin(), folds.rend());
    auto b = cv_select_expanded(Xr, yr, cs, 1.0, grid, unused2, base, 1,
                                nullptr, &folds_r);

    REQUIRE(a.table.size() == b.table.size());
    double a_min = a.table.front().heldout_loss;
    double b_min = b.table.front().heldout_loss;
    for (std::size_t i = 0; i < a.table.size(); ++i) {
        CHECK(a.table[i].heldout_loss ==
              Catch::Approx(b.table[i].heldout_loss).epsilon(1e-9));
        a_min = std::min(a_min, a.table[i].heldout_loss);
        b_min = std::min(b_min, b.table[i].heldout_loss);
    }
    // Row order only perturbs floating-point summation; the selected pairs
    // must be of identical quality (they may differ between exact ties).
    auto loss_of = [](const CvSelection& sel) {
        for (const auto& cell : sel.table) {
            if (cell.lambda == sel.lambda && cell.gamma == sel.gamma) {
                return cell.heldout_loss;
            }
        }
        return std::numeric_limits<double>::quiet_NaN();
    };
    CHECK(loss_of(a) == Catch::Approx(a_min).epsilon(1e-12));
    CHECK(loss_of(b) == Catch::Approx(b_min).epsilon(1e-12));
    CHECK(a_min == Catch::Approx(b_min).epsilon(1e-9));
}

TEST_CASE("warm-started path agrees with cold refits") {
    Rng rng(123);
    ClusterStructure cs(6, {{0, 1, 2}, {2, 3, 4}, {4, 5}});
    Matrix X = random_matrix(60, 6, rng);
    Vector y = 1.2 * X.col(1) - 0.7 * X.col(4);
    for (int i = 0; i < 60; ++i) y[i] += 0.2 * rng.normal();
    Matrix Xt = duplicate_design(X, cs);

    TuningGrid grid;
    SolverOptions base;
    base.tol = 1e-6;
    base.max_iter = 20000;
    Rng cvrng(5);
    double cold_gap = 1.0;
    cv_select_expanded(Xt, y, cs, 1.0, grid, cvrng, base, 1, &cold_gap);
    CHECK(cold_gap <= 1e-4);
}

TEST_CASE("bic formula anchors") {
    Rng rng(55);
    const int n = 40;
    Matrix X = random_matrix(n, 3, rng);
    Vector y(n);
    for (int i = 0; i < n; ++i) y[i] = rng.normal() + 1.5;
    Dataset data(y, X);

    // Null model: beta = 0, intercept = median(y).
    SubgroupModel null_model;
    null_model.beta = Vector::Zero(3);
    null_model.intercept = median_of(y);
    null_model.delta = 1.0;
    FitResult fit;
    fit.partition = Partition(std::vector<int>(n, 0), 1);
    fit.models = {null_model};

    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        loss += huber_value(y[i] - median_of(y), 1.0);
    }
    CHECK(bic(data, fit) == Catch::Approx(std::log(loss / n)).epsilon(1e-12));
}

TEST_CASE("bic increases by exactly the df penalty") {
    Rng rng(56);
    const int n = 50;
    Matrix X(n, 4);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = rng.normal();
        X(i, 1) = rng.normal();
        X(i, 2) = rng.normal();
        X(i, 3) = 0.0;  // dead column: coefficients here do not change the fit
    }
    Vector y = X.col(0) * 1.1;
    for (int i = 0; i < n; ++i) y[i] += 0.3 * rng.normal();
    Dataset data(y, X);

    SubgroupModel m;
    m.beta = Vector::Zero(4);
    m.beta[0] = 1.1;
    m.delta = 1.0;
    m.intercept = 0.0;
    FitResult fit_a;
    fit_a.partition = Partition(std::vector<int>(n, 0), 1);
    fit_a.models = {m};

    SubgroupModel m2 = m;
    m2.beta[3] = 42.0;  // extra nonzero on the dead column
    FitResult fit_b = fit_a;
    fit_b.models = {m2};

    const double C = std::log(std::log(4.0 * 1.0));
    const double gap = C * std::log(static_cast<double>(n)) / n;
    CHECK(bic(data, fit_b) - bic(data, fit_a) ==
          Catch::Approx(gap).epsilon(1e-12));
}

TEST_CASE("bic matches an independent recomputation on a fixed small fit") {
    Rng rng(57);
    const int n = 50, p = 10, K = 2;
    Matrix X = random_matrix(n, p, rng);
    Vector y(n);
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) {
        labels[i] = (i % 2 == 0) ? 0 : 1;
        y[i] = (labels[i] == 0 ? 1.0 : -1.0) * X(i, 0) + 0.2 * rng.normal();
    }
    Dataset data(y, X);

    std::vector<SubgroupModel> models(2);
    models[0].beta = Vector::Zero(p);
    models[0].beta[0] = 0.9;
    models[0].beta[3] = -0.2;
    models[0].delta = 0.8;
    models[0].intercept = 0.05;
    models[1].beta = Vector::Zero(p);
    models[1].beta[0] = -1.1;
    models[1].delta = 1.3;
    models[1].intercept = -0.1;
    FitResult fit;
    fit.partition = Partition(labels, K);
    fit.models = models;

    // Spreadsheet-style recomputation.
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto& m = models[static_cast<std::size_t>(labels[i])];
        double r = y[i] - X.row(i).dot(m.beta) - *m.intercept;
        const double d = m.delta;
        loss += (std::abs(r) <= d) ? 0.5 * r * r : d * std::abs(r) - 0.5 * d * d;
    }
    loss /= n;
    const int df = 3;
    const double expected =
        std::log(loss) +
        std::log(std::log(static_cast<double>(p) * K)) * std::log(50.0) / 50.0 * df;
    CHECK(bic(data, fit) == Catch::Approx(expected).epsilon(1e-10));
}

TEST_CASE("select_K with a single-point range") {
    Rng rng(58);
    const int n = 40;
    Matrix X = random_matrix(n, 3, rng);
    Vector y(n);
    for (int i = 0; i < n; ++i) {
        y[i] = (i < n / 2 ? 1.5 : -1.5) * X(i, 0) + 0.2 * rng.normal();
    }
    Dataset data(y, X);
    ClusterStructure cs = ClusterStructure::singletons(3);

    EngineConfig cfg;
    cfg.starts = 4;
    cfg.seed = 9;
    cfg.grid.folds = 3;
    cfg.grid.n_lambdas = 6;
    cfg.threads = 1;
    auto sel = select_K(data, cs, cfg, 2, 2);
    CHECK(sel.best_K == 2);
    REQUIRE(sel.bic_curve.size() == 1);
    CHECK(sel.bic_curve[0].first == 2);
}
