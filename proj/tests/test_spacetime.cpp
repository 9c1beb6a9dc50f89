#include <doctest.h>

#include <array>

#include "hardy/errors.hpp"
#include "hardy/spacetime.hpp"

using namespace hardy;

TEST_SUITE("spacetime") {

TEST_CASE("reference layout margins") {
    // Hand arithmetic: (93 + 90) / c = 610.42 ns, (188 - 169) / c = 63.38 ns.
    SpacetimeConfig cfg = reference_configuration();
    SeparationCheck loc = check_locality(cfg);
    CHECK(loc.margin_first == doctest::Approx(85.80).epsilon(0.01 / 85.8));
    CHECK(loc.margin_second == doctest::Approx(56.04).epsilon(0.01 / 56.0));
    CHECK(loc.pass);
    SeparationCheck mi = check_measurement_independence(cfg);
    CHECK(mi.margin_first == doctest::Approx(65.11).epsilon(0.01 / 65.1));
    CHECK(mi.margin_second == doctest::Approx(66.48).epsilon(0.01 / 66.5));
    CHECK(mi.pass);
}

TEST_CASE("slow delivery breaks locality") {
    SpacetimeConfig cfg = reference_configuration();
    cfg.t_delay1 = 400;
    SeparationCheck loc = check_locality(cfg);
    CHECK(loc.margin_first == doctest::Approx(-44.2).epsilon(0.1 / 44.2));
    CHECK_FALSE(loc.pass);
}

TEST_CASE("degenerate timings") {
    SpacetimeConfig cfg = reference_configuration();
    cfg.t_e = cfg.t_qrng1 = cfg.t_qrng2 = cfg.t_delay1 = cfg.t_delay2 = 0;
    cfg.t_pc1 = cfg.t_pc2 = cfg.t_m1 = cfg.t_m2 = 0;
    cfg.lsb = cfg.lsa;
    SeparationCheck loc = check_locality(cfg);
    CHECK(loc.margin_first == doctest::Approx((cfg.sa + cfg.sb) / cfg.c));
    CHECK(loc.margin_second == doctest::Approx((cfg.sa + cfg.sb) / cfg.c));
    CHECK(loc.pass);

    SpacetimeConfig mi = reference_configuration();
    mi.t_delay1 = mi.t_pc1 = 0;
    SeparationCheck r = check_measurement_independence(mi);
    CHECK(r.margin_first == doctest::Approx((mi.sa - mi.lsa) / mi.c));
    CHECK_FALSE(r.pass);

    // Exactly zero margin fails.
    SpacetimeConfig edge = reference_configuration();
    edge.lsa = edge.sa;
    edge.t_delay1 = edge.t_pc1 = 0;
    SeparationCheck e = check_measurement_independence(edge);
    CHECK(e.margin_first == 0.0);
    CHECK_FALSE(e.pass);
}

TEST_CASE("margins are linear in every timing field") {
    // d(margin)/d(field) for locality (first, second) and independence (A, B).
    struct Field {
        double SpacetimeConfig::*member;
        std::array<double, 4> slope;
    };
    const double ic = 1 / 0.299792458;
    const Field fields[] = {
        {&SpacetimeConfig::t_e, {-1, -1, 0, 0}},      {&SpacetimeConfig::t_qrng1, {-1, 0, 0, 0}},
        {&SpacetimeConfig::t_qrng2, {0, -1, 0, 0}},   {&SpacetimeConfig::t_delay1, {-1, 0, 1, 0}},
        {&SpacetimeConfig::t_delay2, {0, -1, 0, 1}},  {&SpacetimeConfig::t_pc1, {-1, 0, 1, 0}},
        {&SpacetimeConfig::t_pc2, {0, -1, 0, 1}},     {&SpacetimeConfig::t_m1, {0, -1, 0, 0}},
        {&SpacetimeConfig::t_m2, {-1, 0, 0, 0}},      {&SpacetimeConfig::sa, {ic, ic, ic, 0}},
        {&SpacetimeConfig::sb, {ic, ic, 0, ic}},      {&SpacetimeConfig::lsa, {ic, -ic, -ic, 0}},
        {&SpacetimeConfig::lsb, {-ic, ic, 0, -ic}},
    };
    const SpacetimeConfig base = reference_configuration();
    auto margins = [](const SpacetimeConfig& c) {
        auto l = check_locality(c);
        auto m = check_measurement_independence(c);
        return std::array<double, 4>{l.margin_first, l.margin_second, m.margin_first, m.margin_second};
    };
    auto m0 = margins(base);
    for (const Field& f : fields) {
        for (double step : {1.0, -1.0}) {
            SpacetimeConfig c = base;
            c.*f.member += step;
            auto m = margins(c);
            for (int k = 0; k < 4; ++k) CHECK(m[k] - m0[k] == doctest::Approx(step * f.slope[k]).epsilon(1e-9));
        }
    }
}

TEST_CASE("pass flips exactly where the formulas predict") {
    SpacetimeConfig cfg = reference_configuration();
    double m = check_locality(cfg).margin_second;  // 56.04 ns of slack
    cfg.t_m1 += m - 0.5;
    CHECK(check_locality(cfg).pass);
    cfg.t_m1 += 1.0;
    CHECK_FALSE(check_locality(cfg).pass);
}

TEST_CASE("validation") {
    SpacetimeConfig cfg = reference_configuration();
    cfg.t_pc1 = -1;
    CHECK_THROWS_AS(check_locality(cfg), ValidationError);
    cfg = reference_configuration();
    cfg.lsa = cfg.sa - 1;
    CHECK_THROWS_AS(check_measurement_independence(cfg), ValidationError);
    cfg = reference_configuration();
    cfg.sb = 0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

}
