#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pkgwave/constants.hpp"
#include "pkgwave/errors.hpp"
#include "pkgwave/materials.hpp"

using namespace pkgwave;

TEST_CASE("loss tangent to conductivity") {
    // Bulk silicon at 60 GHz matches its 10 Ohm*cm resistivity (= 10 S/m).
    double sigma = loss_tangent_to_conductivity(11.9, 0.2517, 60e9);
    CHECK(sigma == doctest::Approx(10.0).epsilon(0.01));
    // Exact against the defining formula.
    double expect = 2.0 * kPi * 60e9 * kVacuumPermittivity * 11.9 * 0.2517;
    CHECK(sigma == doctest::Approx(expect).epsilon(1e-14));

    CHECK(loss_tangent_to_conductivity(4.2, 0.0, 33e9) == 0.0);

    double sio2 = loss_tangent_to_conductivity(3.9, 0.03, 60e9);
    CHECK(sio2 == doctest::Approx(0.3904).epsilon(0.01));
}

TEST_CASE("conductivity scales linearly in each argument") {
    double base = loss_tangent_to_conductivity(3.0, 0.01, 10e9);
    CHECK(loss_tangent_to_conductivity(6.0, 0.01, 10e9) == doctest::Approx(2 * base));
    CHECK(loss_tangent_to_conductivity(3.0, 0.02, 10e9) == doctest::Approx(2 * base));
    CHECK(loss_tangent_to_conductivity(3.0, 0.01, 20e9) == doctest::Approx(2 * base));
}

TEST_CASE("invalid inputs rejected") {
    CHECK_THROWS_AS(loss_tangent_to_conductivity(0.5, 0.1, 1e9), ValidationError);
    CHECK_THROWS_AS(loss_tangent_to_conductivity(2.0, -0.1, 1e9), ValidationError);
    CHECK_THROWS_AS(loss_tangent_to_conductivity(2.0, 0.1, 0.0), ValidationError);
    CHECK_THROWS_AS(loss_tangent_to_conductivity(2.0, 0.1, -5e9), ValidationError);
    double nan = std::nan("");
    CHECK_THROWS_AS(loss_tangent_to_conductivity(nan, 0.1, 1e9), ValidationError);
}

TEST_CASE("builtin library carries the stack materials") {
    auto lib = MaterialLibrary::builtin();
    CHECK(lib.get("silicon").rel_permittivity == 11.9);
    CHECK(lib.get("silicon").loss_tangent == 0.2517);
    CHECK(lib.get("alumina").rel_permittivity == 9.4);
    CHECK(lib.get("alumina").loss_tangent == 4e-4);
    CHECK(lib.get("sio2").rel_permittivity == 3.9);
    CHECK(lib.get("sio2").loss_tangent == 0.03);
    CHECK(lib.get("thermal_conductor").rel_permittivity == 8.6);
    CHECK(lib.get("ain").rel_permittivity == 8.6);
    CHECK(lib.get("ain").loss_tangent == 3e-4);
    CHECK(lib.get("epoxy").rel_permittivity == 4.0);
    CHECK(lib.get("vacuum").rel_permittivity == 1.0);
    CHECK(lib.get("vacuum").loss_tangent == 0.0);
    CHECK(lib.get("aluminum").is_conductor);
    CHECK(lib.get("copper").is_conductor);
    CHECK(lib.get("lead").is_conductor);
    CHECK_THROWS_AS(lib.get("unobtainium"), ValidationError);
}

TEST_CASE("conductors report zero pinned conductivity") {
    auto lib = MaterialLibrary::builtin();
    CHECK(pinned_conductivity(lib.get("aluminum"), 60e9) == 0.0);
    CHECK(pinned_conductivity(lib.get("silicon"), 60e9) == doctest::Approx(10.0).epsilon(0.01));
}

TEST_CASE("library overrides replace entries") {
    auto lib = MaterialLibrary::builtin();
    Material m = lib.get("epoxy");
    m.loss_tangent = 0.015;
    lib.insert(m);
    CHECK(lib.get("epoxy").loss_tangent == 0.015);
    Material bad;
    bad.name = "bad";
    bad.rel_permittivity = 0.2;
    CHECK_THROWS_AS(lib.insert(bad), ValidationError);
}
