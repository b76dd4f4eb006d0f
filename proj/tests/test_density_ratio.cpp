#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "perfest/density_ratio.hpp"
#include "perfest/estimators.hpp"
#include "perfest/rng.hpp"

using namespace perfest;
using Catch::Approx;

namespace {

Matrix gaussian_sample(std::size_t n, std::size_t d, double mean, std::uint64_t seed) {
    Rng rng(seed);
    Matrix x(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) x(i, j) = rng.normal(mean, 1.0);
    return x;
}

}  // namespace

TEST_CASE("indistinguishable samples give chance-level discrimination") {
    const Matrix x_ref = gaussian_sample(2000, 3, 0.0, 1);
    const Matrix x_prod = gaussian_sample(2000, 3, 0.0, 2);
    const DensityRatioModel dre = fit_dre(x_ref.view(), x_prod.view(), 7);

    const Matrix stacked = concat_rows(x_ref.view(), x_prod.view());
    std::vector<int> z(4000, 0);
    std::fill(z.begin() + 2000, z.end(), 1);
    const std::vector<double> p = dre.classifier().predict_proba(stacked.view());
    const double auroc = weighted_rank_auroc(p, z);
    CHECK(auroc == Approx(0.5).margin(0.05));
    CHECK_FALSE(dre.coverage_warning());
}

TEST_CASE("a large shift is almost perfectly separable") {
    const Matrix x_ref = gaussian_sample(500, 2, 0.0, 3);
    const Matrix x_prod = gaussian_sample(500, 2, 10.0, 4);
    const DensityRatioModel dre = fit_dre(x_ref.view(), x_prod.view(), 7);

    const Matrix stacked = concat_rows(x_ref.view(), x_prod.view());
    std::vector<int> z(1000, 0);
    std::fill(z.begin() + 500, z.end(), 1);
    const std::vector<double> p = dre.classifier().predict_proba(stacked.view());
    CHECK(weighted_rank_auroc(p, z) > 0.99);
    // almost all production mass sits where reference has none
    CHECK(dre.coverage_warning());
    CHECK(dre.uncovered_fraction() > 0.9);
}

TEST_CASE("degenerate but valid inputs fit without error") {
    Matrix a(1, 2), b(1, 2);
    a(0, 0) = 1.0;
    b(0, 0) = -1.0;
    const DensityRatioModel dre = fit_dre(a.view(), b.view(), 0);
    CHECK(dre.n_ref() == 1);
    CHECK(dre.n_prod() == 1);
    const std::vector<double> w = dre.estimate_weights(a.view());
    REQUIRE(w.size() == 1);
    CHECK(w[0] > 0.0);
    CHECK(w[0] <= dre.weight_clip());
}

TEST_CASE("fit_dre validates shapes") {
    Matrix a(2, 2), b(2, 3);
    REQUIRE_THROWS_AS(fit_dre(a.view(), b.view(), 0), ValidationError);
    Matrix empty(0, 2);
    REQUIRE_THROWS_AS(fit_dre(empty.view(), a.view(), 0), ValidationError);
}

TEST_CASE("weight formula identities") {
    SECTION("balanced probability gives weight one") {
        CHECK(density_ratio_weight(0.5, 100, 100, 50.0) == 1.0);
    }
    SECTION("hand evaluation") {
        CHECK(density_ratio_weight(0.9, 100, 100, 50.0) == Approx(9.0));
    }
    SECTION("doubling n_prod halves the weight below the cap") {
        Rng rng(17);
        for (int i = 0; i < 100; ++i) {
            const double p = rng.uniform(0.01, 0.9);
            const double w1 = density_ratio_weight(p, 1000, 500, 1e9);
            const double w2 = density_ratio_weight(p, 1000, 1000, 1e9);
            CHECK(w1 == Approx(2.0 * w2).epsilon(1e-12));
        }
    }
    SECTION("cap applies") {
        CHECK(density_ratio_weight(0.999, 100, 100, 50.0) == 50.0);
    }
}

TEST_CASE("estimated weights match recomputation from probabilities") {
    const Matrix x_ref = gaussian_sample(400, 2, 0.0, 5);
    const Matrix x_prod = gaussian_sample(300, 2, 0.8, 6);
    const DensityRatioModel dre = fit_dre(x_ref.view(), x_prod.view(), 7);

    const std::vector<double> w = dre.estimate_weights(x_ref.view());
    const std::vector<double> p = dre.classifier().predict_proba(x_ref.view());
    REQUIRE(w.size() == 400);
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double expected = std::min((400.0 / 300.0) * p[i] / (1.0 - p[i]), 50.0);
        REQUIRE(w[i] == Approx(expected).epsilon(1e-12));
        REQUIRE(w[i] > 0.0);
        REQUIRE(w[i] <= 50.0);
    }
}

TEST_CASE("no-shift weights average close to one") {
    const Matrix x_ref = gaussian_sample(3000, 2, 0.0, 8);
    const Matrix x_prod = gaussian_sample(3000, 2, 0.0, 9);
    const DensityRatioModel dre = fit_dre(x_ref.view(), x_prod.view(), 7);
    const std::vector<double> w = dre.estimate_weights(x_ref.view());
    double mean = 0.0;
    for (double wi : w) mean += wi;
    mean /= static_cast<double>(w.size());
    CHECK(mean > 0.9);
    CHECK(mean < 1.1);
    CHECK(dre.clipped_fraction(w) == 0.0);
}

TEST_CASE("clipped fraction is reported under a strong shift") {
    const Matrix x_ref = gaussian_sample(500, 1, 0.0, 10);
    const Matrix x_prod = gaussian_sample(500, 1, 4.0, 11);
    DreConfig cfg;
    cfg.weight_clip = 2.0;
    const DensityRatioModel dre = fit_dre(x_ref.view(), x_prod.view(), 7, cfg);
    const std::vector<double> w = dre.estimate_weights(x_ref.view());
    for (double wi : w) CHECK(wi <= 2.0);
    CHECK(dre.clipped_fraction(w) > 0.0);
}
