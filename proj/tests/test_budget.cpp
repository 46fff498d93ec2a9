#include <catch2/catch_amalgamated.hpp>

#include "entlink/budget.hpp"
#include "entlink/rng.hpp"

using namespace entlink::budget;

namespace {

PerformanceEstimate figure_point(double nbar) {
    OperatingPoint op{nbar, 250e-12, 2.5e-7, 2.5e-7};
    return visibility(op, LinkBudget::from_db_loss(11.0, 11.0));
}

} // namespace

TEST_CASE("visibility reproduces the bench operating points") {
    // Frozen from direct evaluation of the model.
    REQUIRE_THAT(figure_point(0.015).visibility, Catch::Matchers::WithinAbs(0.970850, 1e-5));
    REQUIRE_THAT(figure_point(0.10).visibility, Catch::Matchers::WithinAbs(0.833316, 1e-5));
    REQUIRE_THAT(figure_point(0.003).visibility, Catch::Matchers::WithinAbs(0.994011, 1e-5));
    REQUIRE(figure_point(0.10).model_strained == false);
    REQUIRE(figure_point(0.11).model_strained == true);
}

TEST_CASE("visibility at 27 dB per arm matches the long-haul expectation") {
    OperatingPoint op{0.05, 250e-12, 2.5e-7, 2.5e-7};
    auto est = visibility(op, LinkBudget::from_db_loss(27.0, 27.0));
    REQUIRE_THAT(est.visibility, Catch::Matchers::WithinAbs(0.908261, 1e-5));
}

TEST_CASE("visibility limits") {
    OperatingPoint op{1e-9, 250e-12, 0.0, 0.0};
    auto est = visibility(op, LinkBudget::from_db_loss(11.0, 11.0));
    REQUIRE_THAT(est.visibility, Catch::Matchers::WithinAbs(1.0, 1e-6));
    REQUIRE(visibility({0.0, 250e-12, 0.0, 0.0}, {1.0, 1.0}).visibility == 0.0);
}

TEST_CASE("estimate component probabilities are consistent") {
    auto est = figure_point(0.015);
    double aa = db_to_linear(11.0);
    REQUIRE_THAT(est.true_coinc_prob, Catch::Matchers::WithinRel(0.015 * aa * aa / 4.0, 1e-12));
    REQUIRE_THAT(est.singles_prob_a,
                 Catch::Matchers::WithinRel(0.015 * aa / 2.0 + 2.5e-7, 1e-12));
    REQUIRE_THAT(est.accidental_prob,
                 Catch::Matchers::WithinRel(2.0 * est.singles_prob_a * est.singles_prob_b, 1e-12));
    REQUIRE_THAT(est.qber, Catch::Matchers::WithinAbs((1.0 - est.visibility) / 2.0, 1e-15));
}

TEST_CASE("qber maps visibility to error rate") {
    REQUIRE_THAT(qber_from_visibility(0.82), Catch::Matchers::WithinAbs(0.09, 1e-12));
    REQUIRE(qber_from_visibility(1.0) == 0.0);
    REQUIRE(qber_from_visibility(0.0) == 0.5);
    REQUIRE_THROWS_AS(qber_from_visibility(1.5), std::invalid_argument);
}

TEST_CASE("qber and visibility invert each other") {
    for (double v = 0.0; v <= 1.0; v += 0.01)
        REQUIRE_THAT(1.0 - 2.0 * qber_from_visibility(v), Catch::Matchers::WithinAbs(v, 1e-12));
}

TEST_CASE("security margins use strict thresholds") {
    auto high = security_margins(0.97);
    REQUIRE(high.bell_violated);
    REQUIRE(high.qc_ok);
    auto mid = security_margins(0.75);
    REQUIRE(mid.bell_violated);
    REQUIRE_FALSE(mid.qc_ok);
    auto boundary = security_margins(0.7071);
    REQUIRE_FALSE(boundary.bell_violated);
    REQUIRE_FALSE(boundary.qc_ok);
}

TEST_CASE("max tolerable loss lands near 47 dB") {
    double loss = max_tolerable_loss_db(0.05, 2.5e-7, 2.5e-7, 0.82);
    REQUIRE(loss > 46.0);
    REQUIRE(loss < 48.0);
    // round-trip: visibility at the solved loss equals the target
    OperatingPoint op{0.05, 250e-12, 2.5e-7, 2.5e-7};
    auto est = visibility(op, LinkBudget::from_db_loss(loss, loss));
    REQUIRE_THAT(est.visibility, Catch::Matchers::WithinAbs(0.82, 1e-3));
}

TEST_CASE("tighter targets tolerate less loss") {
    double loose = max_tolerable_loss_db(0.05, 2.5e-7, 2.5e-7, 0.82);
    double tight = max_tolerable_loss_db(0.05, 2.5e-7, 2.5e-7, 0.90);
    REQUIRE(tight < loose);
}

TEST_CASE("without dark counts the loss solver reports no finite root") {
    // with d = 0 visibility is loss-independent: V = 1/(1+2 nbar)
    REQUIRE_THROWS_AS(max_tolerable_loss_db(0.05, 0.0, 0.0, 0.82), SolverError);
    // and a target above the zero-loss visibility is unreachable outright
    REQUIRE_THROWS_AS(max_tolerable_loss_db(0.5, 2.5e-7, 2.5e-7, 0.82), SolverError);
}

TEST_CASE("loss to distance with a mid-link source") {
    REQUIRE_THAT(loss_to_distance_km(47.0, 11.0, 0.2), Catch::Matchers::WithinAbs(360.0, 1e-9));
    REQUIRE(loss_to_distance_km(11.0, 11.0, 0.2) == 0.0);
    REQUIRE_THAT(loss_to_distance_km(43.0, 11.0, 0.2), Catch::Matchers::WithinAbs(320.0, 1e-9));
    REQUIRE_THROWS_AS(loss_to_distance_km(10.0, 11.0, 0.2), std::invalid_argument);
    REQUIRE_THROWS_AS(loss_to_distance_km(47.0, 11.0, 0.0), std::invalid_argument);
}

TEST_CASE("optimal nbar sits on the visibility boundary") {
    auto lb = LinkBudget::from_db_loss(11.0, 11.0);
    double n82 = optimal_nbar(lb, 2.5e-7, 2.5e-7, 0.82);
    REQUIRE_THAT(n82, Catch::Matchers::WithinAbs(0.10974, 5e-4)); // frozen by bisection
    REQUIRE(n82 > 0.10);
    double n90 = optimal_nbar(lb, 2.5e-7, 2.5e-7, 0.90);
    REQUIRE_THAT(n90, Catch::Matchers::WithinAbs(0.05554, 5e-4));
    OperatingPoint op{n90, 250e-12, 2.5e-7, 2.5e-7};
    REQUIRE_THAT(visibility(op, lb).visibility, Catch::Matchers::WithinAbs(0.90, 1e-3));
}

TEST_CASE("degenerate and unattainable brightness targets") {
    auto lb = LinkBudget::from_db_loss(11.0, 11.0);
    REQUIRE(optimal_nbar(lb, 2.5e-7, 2.5e-7, 0.0) == 10.0); // configured ceiling
    // dark-count dominated: even the visibility peak sits below the target
    REQUIRE_THROWS_AS(optimal_nbar(LinkBudget::from_db_loss(60.0, 60.0), 1e-3, 1e-3, 0.99),
                      SolverError);
}

TEST_CASE("visibility is monotone in darks and loss, and in nbar above the peak") {
    entlink::rng::Stream rand(987654);
    for (int trial = 0; trial < 400; ++trial) {
        double loss = rand.uniform() * 40.0;
        double d = std::pow(10.0, -9.0 + 5.0 * rand.uniform());
        auto lb = LinkBudget::from_db_loss(loss, loss);
        double n_peak = peak_visibility_nbar(lb, d, d);

        auto vis_at = [&](double nbar, double da, double db, double l) {
            OperatingPoint op{nbar, 250e-12, da, db};
            return visibility(op, LinkBudget::from_db_loss(l, l)).visibility;
        };

        // decreasing branch in nbar
        double n1 = n_peak * (1.0 + rand.uniform() * 50.0);
        double n2 = n1 * (1.0 + rand.uniform() * 10.0);
        REQUIRE(vis_at(n2, d, d, loss) <= vis_at(n1, d, d, loss) + 1e-12);

        // monotone in dark probability everywhere
        double n = std::pow(10.0, -3.0 + 3.0 * rand.uniform());
        REQUIRE(vis_at(n, 2.0 * d, d, loss) <= vis_at(n, d, d, loss) + 1e-12);
        REQUIRE(vis_at(n, d, 2.0 * d, loss) <= vis_at(n, d, d, loss) + 1e-12);

        // monotone in per-arm loss everywhere (d > 0)
        REQUIRE(vis_at(n, d, d, loss + 3.0) <= vis_at(n, d, d, loss) + 1e-12);
    }
}

TEST_CASE("visibility is symmetric under swapping the arms") {
    entlink::rng::Stream rand(24681357);
    for (int trial = 0; trial < 200; ++trial) {
        double la = rand.uniform() * 30.0, lb_db = rand.uniform() * 30.0;
        double da = 1e-8 + 1e-6 * rand.uniform(), db = 1e-8 + 1e-6 * rand.uniform();
        double n = 0.001 + rand.uniform();
        OperatingPoint op1{n, 250e-12, da, db};
        OperatingPoint op2{n, 250e-12, db, da};
        auto v1 = visibility(op1, LinkBudget::from_db_loss(la, lb_db)).visibility;
        auto v2 = visibility(op2, LinkBudget::from_db_loss(lb_db, la)).visibility;
        REQUIRE_THAT(v1, Catch::Matchers::WithinAbs(v2, 1e-12));
    }
}

TEST_CASE("with no dark counts visibility is loss-independent: 1/(1+2 nbar)") {
    entlink::rng::Stream rand(1122);
    for (int trial = 0; trial < 100; ++trial) {
        double n = 0.001 + rand.uniform();
        double loss = rand.uniform() * 50.0;
        OperatingPoint op{n, 250e-12, 0.0, 0.0};
        auto v = visibility(op, LinkBudget::from_db_loss(loss, loss)).visibility;
        REQUIRE_THAT(v, Catch::Matchers::WithinAbs(1.0 / (1.0 + 2.0 * n), 1e-12));
    }
}

TEST_CASE("link budget composition from parts") {
    // 5.5 dB components and a 28% detector give the 11 dB bench arm
    double alpha = LinkBudget::arm_from_parts(5.5, 0.0, 0.2, 0.28);
    REQUIRE_THAT(-10.0 * std::log10(alpha), Catch::Matchers::WithinAbs(11.03, 0.05));
    REQUIRE_THROWS_AS((LinkBudget{0.0, 0.5}.validate()), std::invalid_argument);
    REQUIRE_THROWS_AS((LinkBudget{1.5, 0.5}.validate()), std::invalid_argument);
}

TEST_CASE("csv row carries the documented columns") {
    OperatingPoint op{0.015, 250e-12, 2.5e-7, 2.5e-7};
    auto lb = LinkBudget::from_db_loss(11.0, 11.0);
    auto est = visibility(op, lb);
    REQUIRE(estimate_csv_header() == "nbar,alpha_a_db,alpha_b_db,d_a,d_b,V,QBER");
    auto row = estimate_csv_row(op, lb, est);
    REQUIRE(row.substr(0, 6) == "0.015,");
    REQUIRE(row.find("-11,") != std::string::npos);
}
