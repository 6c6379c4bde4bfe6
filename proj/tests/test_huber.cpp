#include <catch2/catch_amalgamated.hpp>

#include "hetreg/huber.hpp"
#include "hetreg/rng.hpp"

using namespace hetreg;

TEST_CASE("huber_value branch values") {
    CHECK(huber_value(0.0, 1.345) == 0.0);
    CHECK(huber_value(0.5, 1.345) == Catch::Approx(0.125));
    CHECK(huber_value(3.0, 1.0) == Catch::Approx(2.5));
    CHECK(huber_value(-3.0, 1.0) == Catch::Approx(2.5));
    CHECK_THROWS_AS(huber_value(1.0, 0.0), invalid_parameter_error);
    CHECK_THROWS_AS(huber_value(1.0, -2.0), invalid_parameter_error);
}

TEST_CASE("huber_grad branch values and knee continuity") {
    CHECK(huber_grad(0.5, 1.0) == Catch::Approx(0.5));
    CHECK(huber_grad(-3.0, 1.0) == Catch::Approx(-1.0));
    CHECK_THROWS_AS(huber_grad(1.0, 0.0), invalid_parameter_error);

    // Central finite difference across the knee.
    const double t = 1.0 + 1e-9;
    const double h = 1e-6;
    const double fd = (huber_value(t + h, 1.0) - huber_value(t - h, 1.0)) /
                      (2.0 * h);
    CHECK(huber_grad(t, 1.0) == Catch::Approx(fd).epsilon(1e-4));
    CHECK(huber_grad(t, 1.0) == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("huber_grad matches finite differences at random points") {
    Rng rng(20240817);
    for (int i = 0; i < 10000; ++i) {
        const double delta = 0.1 + 3.0 * rng.uniform();
        const double t = 8.0 * (rng.uniform() - 0.5);
        const double h = 1e-6;
        const double fd =
            (huber_value(t + h, delta) - huber_value(t - h, delta)) / (2.0 * h);
        const double g = huber_grad(t, delta);
        CHECK(std::abs(g - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("huber_value convexity and quadratic majorization") {
    Rng rng(7);
    for (int i = 0; i < 2000; ++i) {
        const double delta = 0.2 + 2.0 * rng.uniform();
        const double t1 = 6.0 * (rng.uniform() - 0.5);
        const double t2 = 6.0 * (rng.uniform() - 0.5);
        const double th = rng.uniform();
        const double lhs = huber_value(th * t1 + (1.0 - th) * t2, delta);
        const double rhs = th * huber_value(t1, delta) +
                           (1.0 - th) * huber_value(t2, delta);
        CHECK(lhs <= rhs + 1e-12);

        CHECK(huber_value(t1, delta) <= 0.5 * t1 * t1 + 1e-15);
        if (std::abs(t1) <= delta) {
            CHECK(huber_value(t1, delta) == Catch::Approx(0.5 * t1 * t1));
        } else {
            CHECK(huber_value(t1, delta) < 0.5 * t1 * t1);
        }
    }
}

TEST_CASE("compute_delta MAD rule") {
    HuberSpec spec;
    spec.delta_floor = 1e-6;

    Vector constant(3);
    constant << 4.2, 4.2, 4.2;
    CHECK(compute_delta(constant, spec) == Catch::Approx(1e-6));

    Vector sym(3);
    sym << -1.0, 0.0, 1.0;
    CHECK(compute_delta(sym, spec) ==
          Catch::Approx(1.345 * 1.4826).epsilon(1e-12));
    CHECK(compute_delta(sym, spec) == Catch::Approx(1.9940970).epsilon(1e-6));

    Vector spiked(4);
    spiked << 0.0, 0.0, 0.0, 10.0;
    // median 0, deviations {0,0,0,10}, median deviation 0 -> floor.
    CHECK(compute_delta(spiked, spec) == Catch::Approx(1e-6));

    Vector empty(0);
    CHECK_THROWS_AS(compute_delta(empty, spec), invalid_input_error);
}

TEST_CASE("compute_delta invariances") {
    HuberSpec spec;
    Rng rng(99);
    for (int rep = 0; rep < 50; ++rep) {
        const int n = 3 + static_cast<int>(rng.uniform_index(20));
        Vector r(n);
        for (int i = 0; i < n; ++i) r[i] = 5.0 * rng.normal();
        const double base = compute_delta(r, spec);

        std::vector<double> perm(r.data(), r.data() + n);
        rng.shuffle(perm);
        Vector rp = Eigen::Map<Vector>(perm.data(), n);
        CHECK(compute_delta(rp, spec) == Catch::Approx(base).epsilon(1e-12));

        Vector shifted = r.array() + 17.5;
        CHECK(compute_delta(shifted, spec) ==
              Catch::Approx(base).epsilon(1e-9));
    }
}

TEST_CASE("huber_location minimizes the huber sum") {
    Rng rng(31);
    for (int rep = 0; rep < 20; ++rep) {
        const int n = 5 + static_cast<int>(rng.uniform_index(30));
        Vector r(n);
        for (int i = 0; i < n; ++i) r[i] = 3.0 * rng.normal();
        const double delta = 0.5 + rng.uniform();
        const double b = huber_location(r, delta);
        const double fb = huber_loss_sum(Vector(r.array() - b), delta);
        for (double eps : {-1e-4, 1e-4, -0.05, 0.05}) {
            const double fe =
                huber_loss_sum(Vector(r.array() - (b + eps)), delta);
            CHECK(fb <= fe + 1e-10);
        }
    }
}
