#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "taildep/models.hpp"

using namespace taildep;

namespace {

// The four-node chain/diamond example: 1 -> 2, 1 -> 3, 2 -> 4, 3 -> 4.
Dag diamond_dag() {
    Dag dag;
    dag.d = 4;
    dag.edges = {{0, 1, 0, "u12"}, {0, 2, 1, "u13"}, {1, 3, 2, "u24"}, {2, 3, 3, "u34"}};
    return dag;
}

const std::vector<double> kDiamondTheta{0.3, 0.8, 0.4, 0.55};

}  // namespace

TEST_SUITE("models") {

TEST_CASE("logistic_stdf anchors") {
    const std::vector<double> x{0.2, 1.3, 0.5};
    double sum = 0.0;
    for (double v : x) sum += v;
    CHECK(logistic_stdf(x, 1.0) == doctest::Approx(sum).epsilon(1e-15));
    CHECK(logistic_stdf(std::vector<double>{1.0, 1.0}, 0.3) ==
          doctest::Approx(std::pow(2.0, 0.3)).epsilon(1e-14));
    CHECK(logistic_stdf(std::vector<double>{2.0, 0.0, 0.0}, 0.42) ==
          doctest::Approx(2.0).epsilon(1e-15));
    CHECK_THROWS_AS(logistic_stdf(x, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(logistic_stdf(x, 1.2), std::invalid_argument);
}

TEST_CASE("logistic extremal coefficients are |J|^theta") {
    for (double theta : {0.25, 0.5, 0.8, 1.0}) {
        for (int size = 2; size <= 5; ++size) {
            std::vector<double> ej(6, 0.0);
            for (int j = 0; j < size; ++j) ej[j] = 1.0;
            CHECK(logistic_stdf(ej, theta) ==
                  doctest::Approx(std::pow(size, theta)).epsilon(1e-14));
        }
    }
}

TEST_CASE("maxlinear_stdf anchors") {
    MaxLinearCoeffs id{3, 3, Matrix::identity(3)};
    const std::vector<double> x{0.5, 1.0, 2.0};
    CHECK(maxlinear_stdf(x, id) == doctest::Approx(3.5).epsilon(1e-15));

    MaxLinearCoeffs ones{3, 1, Matrix(3, 1)};
    for (int j = 0; j < 3; ++j) ones.b(j, 0) = 1.0;
    CHECK(maxlinear_stdf(x, ones) == doctest::Approx(2.0).epsilon(1e-15));

    CHECK_THROWS_AS(maxlinear_stdf(std::vector<double>{-1.0, 0.0, 0.0}, id),
                    std::invalid_argument);
}

TEST_CASE("dag_to_coeffs instantiates the diamond example") {
    const MaxLinearCoeffs b = dag_to_coeffs(diamond_dag(), kDiamondTheta);
    const double expected[4][4] = {{1.0, 0.0, 0.0, 0.0},
                                   {0.3, 0.7, 0.0, 0.0},
                                   {0.8, 0.0, 0.2, 0.0},
                                   {0.44, 0.28, 0.11, 0.17}};
    for (int j = 0; j < 4; ++j)
        for (int t = 0; t < 4; ++t)
            CHECK(b(j, t) == doctest::Approx(expected[j][t]).epsilon(1e-14));
    b.validate();

    // The instantiated model at the all-ones point.
    CHECK(maxlinear_stdf(std::vector<double>{1.0, 1.0, 1.0, 1.0}, b) ==
          doctest::Approx(2.07).epsilon(1e-14));
}

TEST_CASE("dag_to_coeffs boundary and infeasibility") {
    Dag chain;
    chain.d = 2;
    chain.edges = {{0, 1, 0, "u12"}};
    const MaxLinearCoeffs b = dag_to_coeffs(chain, std::vector<double>{1.0});
    CHECK(b(1, 0) == 1.0);
    CHECK(b(1, 1) == 0.0);  // boundary u_2 = 0 accepted

    // Two strong parents with weak direct edges force the row sum of node 4
    // above one: max(0.57, 0.57) + 0.38 + 0.38 = 1.33.
    try {
        dag_to_coeffs(diamond_dag(), std::vector<double>{0.6, 0.6, 0.95, 0.95});
        FAIL("expected infeasible_parameter_error");
    } catch (const infeasible_parameter_error& e) {
        CHECK(e.node() == 4);
    }
    CHECK_THROWS_AS(dag_to_coeffs(diamond_dag(), std::vector<double>{0.0, 0.8, 0.4, 0.5}),
                    std::invalid_argument);
}

TEST_CASE("dag validation catches cycles and bad parameter indices") {
    Dag cyc;
    cyc.d = 2;
    cyc.edges = {{0, 1, 0, "a"}, {1, 0, 1, "b"}};
    CHECK_THROWS_AS(cyc.validate(), config_error);

    Dag gap;
    gap.d = 3;
    gap.edges = {{0, 1, 0, "a"}, {0, 2, 2, "c"}};
    CHECK_THROWS_AS(gap.validate(), config_error);
}

TEST_CASE("dag_to_coeffs output satisfies the coefficient invariants") {
    std::mt19937 rng(77);
    std::uniform_real_distribution<double> unif(0.05, 0.6);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> theta(4);
        for (double& v : theta) v = unif(rng);
        try {
            dag_to_coeffs(diamond_dag(), theta).validate();
        } catch (const infeasible_parameter_error&) {
            // infeasible draws are allowed to error, never to return junk
        }
    }
}

TEST_CASE("variogram anchors") {
    CHECK(variogram(std::vector<double>{0.0, 0.0}, 1.3, 0.7) == 0.0);
    CHECK(variogram(std::vector<double>{1.0, 0.0}, 1.0, 1.0) == doctest::Approx(1.0));
    CHECK(variogram(std::vector<double>{1.0, 1.0}, 1.5, 2.0) ==
          doctest::Approx(std::pow(std::sqrt(2.0) / 2.0, 1.5)).epsilon(1e-14));
    CHECK(std::abs(variogram(std::vector<double>{1.0, 1.0}, 1.5, 2.0) - 0.59460) < 1e-5);
    CHECK_THROWS_AS(variogram(std::vector<double>{1.0, 0.0}, 2.5, 1.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(variogram(std::vector<double>{1.0, 0.0}, 1.0, 0.0),
                    std::invalid_argument);
}

TEST_CASE("br_extremal_coeff pair anchors") {
    GridLocations locs;
    locs.s = {{0.0, 0.0}, {1.0, 0.0}};
    const std::vector<int> pair{0, 1};

    // Distance 1, alpha = rho = 1: 2 Phi(sqrt(0.5)).
    const double expected = 2.0 * oracles::normal_cdf(std::sqrt(0.5));
    CHECK(std::abs(br_extremal_coeff(pair, locs, 1.0, 1.0) - expected) < 1e-10);
    CHECK(std::abs(br_extremal_coeff(pair, locs, 1.0, 1.0) - 1.52050) < 1e-5);

    // Nearly coincident pair: complete dependence.
    GridLocations close;
    close.s = {{0.0, 0.0}, {1e-12, 0.0}};
    CHECK(br_extremal_coeff(pair, close, 1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-5));

    // rho -> 0 sends gamma -> infinity: independence.
    CHECK(br_extremal_coeff(pair, locs, 1.0, 1e-9) == doctest::Approx(2.0).epsilon(1e-12));

    GridLocations grid = GridLocations::unit_grid(2, 2);
    const std::vector<int> quad{0, 1, 2, 3};
    CHECK_THROWS_AS(br_extremal_coeff(quad, grid, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("br_pair_stdf matches the extremal coefficient and its oracle") {
    GridLocations locs;
    locs.s = {{0.0, 0.0}, {1.0, 0.0}};
    for (double rho : {0.5, 1.0, 2.0}) {
        const double gamma = std::pow(1.0 / rho, 1.2);
        const double viaJ =
            br_extremal_coeff(std::vector<int>{0, 1}, locs, 1.2, rho);
        CHECK(std::abs(br_pair_stdf(1.0, 1.0, gamma) - viaJ) < 1e-10);
    }
    CHECK(br_pair_stdf(3.2, 0.0, 1.0) == 3.2);
    CHECK(br_pair_stdf(0.0, 0.7, 1.0) == 0.7);

    // General arguments against the defining formula with the oracle Phi:
    // a = sqrt(2 gamma), l = x1 Phi(a/2 + log(x1/x2)/a) + x2 Phi(a/2 - log(x1/x2)/a).
    const double a = 2.0, lr = std::log(2.0);
    const double expected = 2.0 * oracles::normal_cdf(1.0 + lr / a) +
                            oracles::normal_cdf(1.0 - lr / a);
    CHECK(std::abs(br_pair_stdf(2.0, 1.0, 2.0) - expected) < 1e-10);
    CHECK_THROWS_AS(br_pair_stdf(1.0, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("brown-resnick triples and quadruples stay within stdf bounds") {
    const GridLocations grid = GridLocations::unit_grid(2, 3);
    const BrownResnickModel model(grid);
    const std::vector<double> theta{1.0, 1.0};

    std::vector<double> e3(6, 0.0);
    e3[0] = e3[1] = e3[4] = 1.0;
    const double l3 = model.eval(e3, theta);
    std::vector<double> e2(6, 0.0);
    e2[0] = e2[1] = 1.0;
    const double l2 = model.eval(e2, theta);
    CHECK(l3 >= l2 - 1e-12);       // monotone in the subset
    CHECK(l3 <= l2 + 1.0 + 1e-12); // subadditive against a single margin
    CHECK(l3 >= 1.0);
    CHECK(l3 <= 3.0);

    std::vector<double> e4(6, 0.0);
    e4[0] = e4[1] = e4[3] = e4[4] = 1.0;
    const double l4 = model.eval(e4, theta);
    CHECK(l4 >= l3 - 1e-12);
    CHECK(l4 <= 4.0);

    // Five positive coordinates are beyond the supported covariance expansion.
    std::vector<double> e5(6, 1.0);
    e5[5] = 0.0;
    CHECK_THROWS_AS(model.eval(e5, theta), estimation_error);
}

TEST_CASE("brown-resnick far-apart subsets decouple") {
    GridLocations locs;
    locs.s = {{0.0, 0.0}, {1.0, 0.0}, {200.0, 0.0}};
    const BrownResnickModel model(locs);
    const std::vector<double> theta{1.0, 1.0};
    std::vector<double> e3{1.0, 1.0, 1.0};
    std::vector<double> e2{1.0, 1.0, 0.0};
    // The far location contributes an almost independent unit margin.
    CHECK(model.eval(e3, theta) ==
          doctest::Approx(model.eval(e2, theta) + 1.0).epsilon(1e-9));
}

TEST_CASE("stdf_gradient_x on the logistic family") {
    const LogisticModel model(2);
    const std::vector<double> c{1.0, 1.0};

    const std::vector<double> flat = stdf_gradient_x(model, std::vector<double>{1.0}, c);
    CHECK(flat[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(flat[1] == doctest::Approx(1.0).epsilon(1e-12));

    const std::vector<double> g = stdf_gradient_x(model, std::vector<double>{0.5}, c);
    CHECK(g[0] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    CHECK(g[1] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));

    // Analytic and finite-difference paths agree.
    for (double theta : {0.3, 0.6, 0.9}) {
        const std::vector<double> c2{0.5, 1.5};
        const std::vector<double> ga =
            model.analytic_gradient_x(c2, std::vector<double>{theta});
        const std::vector<double> gf =
            finite_diff_gradient_x(model, std::vector<double>{theta}, c2);
        for (int j = 0; j < 2; ++j) CHECK(std::abs(ga[j] - gf[j]) < 1e-6);
    }
}

TEST_CASE("stdf_gradient_x on a max-linear model with unique argmaxes") {
    const MaxLinearDagModel model(diamond_dag());
    // At this point the column argmaxes are unique, so the gradient is the
    // sum of the winning loadings per coordinate.
    const std::vector<double> c{1.0, 0.9, 0.8, 0.7};
    const MaxLinearCoeffs b = dag_to_coeffs(diamond_dag(), kDiamondTheta);
    std::vector<double> expected(4, 0.0);
    for (int t = 0; t < 4; ++t) {
        int arg = 0;
        double best = -1.0;
        for (int j = 0; j < 4; ++j) {
            if (b(j, t) * c[j] > best) {
                best = b(j, t) * c[j];
                arg = j;
            }
        }
        expected[arg] += b(arg, t);
    }
    const std::vector<double> g = stdf_gradient_x(model, kDiamondTheta, c);
    for (int j = 0; j < 4; ++j) CHECK(std::abs(g[j] - expected[j]) < 1e-8);
}

TEST_CASE("family invariants: bounds, homogeneity, margins, convexity") {
    const LogisticModel logistic(3);
    const MaxLinearDagModel maxlin(diamond_dag());
    const BrownResnickModel br(GridLocations::unit_grid(2, 2));

    std::mt19937 rng(4321);
    std::uniform_real_distribution<double> unif(0.0, 2.0);
    std::uniform_real_distribution<double> unit(0.05, 0.95);

    auto check_family = [&](const TailModel& model, auto make_theta, int trials) {
        for (int trial = 0; trial < trials; ++trial) {
            const std::vector<double> theta = make_theta();
            std::vector<double> x(model.dim());
            for (double& v : x) v = unif(rng);
            const double value = model.eval(x, theta);
            double mx = 0.0, sx = 0.0;
            for (double v : x) {
                mx = std::max(mx, v);
                sx += v;
            }
            CHECK(value >= mx - 1e-10);
            CHECK(value <= sx + 1e-10);

            const double t = 0.1 + 2.0 * unit(rng);
            std::vector<double> tx(x);
            for (double& v : tx) v *= t;
            CHECK(std::abs(model.eval(tx, theta) - t * value) <= 1e-12 * (1.0 + t * value));

            // Single positive coordinate: l(c e_j) = c exactly.
            std::vector<double> ej(model.dim(), 0.0);
            ej[trial % model.dim()] = 1.7;
            CHECK(model.eval(ej, theta) == doctest::Approx(1.7).epsilon(1e-14));

            // Convexity along a random segment.
            std::vector<double> y(model.dim());
            for (double& v : y) v = unif(rng);
            const double lam = unit(rng);
            std::vector<double> mix(model.dim());
            for (int j = 0; j < model.dim(); ++j)
                mix[j] = lam * x[j] + (1.0 - lam) * y[j];
            CHECK(model.eval(mix, theta) <=
                  lam * value + (1.0 - lam) * model.eval(y, theta) + 1e-10);
        }
    };

    check_family(logistic, [&] { return std::vector<double>{unit(rng)}; }, 400);
    check_family(maxlin,
                 [&] {
                     // rejection-sample a feasible edge configuration
                     while (true) {
                         std::vector<double> theta{0.6 * unit(rng), 0.6 * unit(rng),
                                                   0.6 * unit(rng), 0.6 * unit(rng)};
                         try {
                             dag_to_coeffs(diamond_dag(), theta);
                             return theta;
                         } catch (const infeasible_parameter_error&) {
                         }
                     }
                 },
                 300);
    check_family(br,
                 [&] {
                     return std::vector<double>{2.0 * unit(rng),
                                                0.3 + 2.0 * unit(rng)};
                 },
                 100);
}

TEST_CASE("unit grids expose the expected geometry") {
    const GridLocations g = GridLocations::unit_grid(3, 4);
    CHECK(g.size() == 12);
    CHECK(g.distance(0, 1) == doctest::Approx(1.0));
    CHECK(g.distance(0, 5) == doctest::Approx(std::sqrt(2.0)));
    g.validate();
}

}  // TEST_SUITE
