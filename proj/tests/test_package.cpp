#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "pkgwave/constants.hpp"
#include "pkgwave/errors.hpp"
#include "pkgwave/package.hpp"

using namespace pkgwave;

TEST_CASE("default package matches the stack table") {
    auto m = default_flip_chip_package();
    CHECK(m.find_layer("silicon")->thickness == doctest::Approx(0.489e-3));
    CHECK(m.find_layer("carrier")->thickness == doctest::Approx(0.5e-3));
    CHECK(m.find_layer("carrier")->material == "alumina");
    CHECK(m.find_layer("interconnect")->thickness == doctest::Approx(13e-6));
    CHECK(m.find_layer("bumps")->thickness == doctest::Approx(87.5e-6));
    CHECK(m.find_layer("solder_balls")->thickness == doctest::Approx(0.32e-3));
    CHECK(m.find_layer("heat_sink")->thickness == doctest::Approx(0.5e-3));
    CHECK(m.find_layer("spreader")->thickness == doctest::Approx(0.25e-3));
    CHECK(m.chip_lateral == doctest::Approx(22e-3));
    CHECK(m.carrier_lateral == doctest::Approx(33e-3));
    CHECK(m.stack_height() ==
          doctest::Approx(0.5e-3 + 0.25e-3 + 0.489e-3 + 13e-6 + 87.5e-6 + 0.5e-3 + 0.32e-3 + 0.5e-3));
}

TEST_CASE("thinned-silicon AIN stack override") {
    std::vector<LayerOverride> ov;
    ov.push_back({"silicon", 0.10e-3, std::nullopt});
    ov.push_back({"spreader", 0.85e-3, std::string("ain")});
    auto m = default_flip_chip_package(ov);
    CHECK(m.find_layer("silicon")->thickness == doctest::Approx(0.10e-3));
    CHECK(m.find_layer("spreader")->thickness == doctest::Approx(0.85e-3));
    CHECK(m.find_layer("spreader")->material == "ain");
}

TEST_CASE("zero thickness: structural layers rejected, spreader removed") {
    std::vector<LayerOverride> bad;
    bad.push_back({"silicon", 0.0, std::nullopt});
    CHECK_THROWS_AS(default_flip_chip_package(bad), ValidationError);

    std::vector<LayerOverride> neg;
    neg.push_back({"carrier", -1e-3, std::nullopt});
    CHECK_THROWS_AS(default_flip_chip_package(neg), ValidationError);

    std::vector<LayerOverride> none;
    none.push_back({"spreader", 0.0, std::nullopt});
    auto m = default_flip_chip_package(none);
    CHECK(m.find_layer("spreader") == nullptr);

    std::vector<LayerOverride> unknown;
    unknown.push_back({"mystery", 1e-3, std::nullopt});
    CHECK_THROWS_AS(default_flip_chip_package(unknown), ValidationError);
}

TEST_CASE("port grid placement") {
    auto m = place_port_grid(default_flip_chip_package(), 4, 4, AntennaKind::monopole);
    REQUIRE(m.ports.size() == 16);
    // pitch 5.5 mm, margin 2.75 mm on a 22 mm chip
    CHECK(m.ports[0].x == doctest::Approx(-22e-3 / 2 + 2.75e-3));
    CHECK(m.ports[1].x - m.ports[0].x == doctest::Approx(5.5e-3));
    CHECK(m.ports[0].y == doctest::Approx(-22e-3 / 2 + 2.75e-3));
    // 16 ports -> C(16,2) = 120 unordered pairs (brute count)
    int pairs = 0;
    for (std::size_t a = 0; a < m.ports.size(); ++a)
        for (std::size_t b = a + 1; b < m.ports.size(); ++b)
            ++pairs;
    CHECK(pairs == 120);

    auto two = place_port_grid(default_flip_chip_package(), 1, 2, AntennaKind::point_dipole);
    CHECK(two.ports.size() == 2);
    CHECK(two.ports[1].x - two.ports[0].x == doctest::Approx(11e-3));

    CHECK_THROWS_AS(place_port_grid(default_flip_chip_package(), 1, 1, AntennaKind::monopole),
                    ValidationError);
    // denser than the bump pitch allows
    CHECK_THROWS_AS(place_port_grid(default_flip_chip_package(), 128, 128, AntennaKind::monopole),
                    ValidationError);
}

TEST_CASE("monopole initial guess") {
    double l60 = monopole_initial_length(60e9);
    CHECK(l60 == doctest::Approx(0.362e-3).epsilon(0.002));
    CHECK(monopole_initial_length(120e9) == doctest::Approx(l60 / 2));
}

TEST_CASE("axis mesher honors breakpoints, caps and grading") {
    std::vector<double> breaks = {0.0, 0.5e-3, 0.513e-3, 1.0e-3};
    std::vector<double> hmax = {100e-6, 6.5e-6, 90e-6};
    std::vector<int> minc = {2, 2, 2};
    auto sizes = mesh_axis(breaks, hmax, minc, 1.3);
    // nodes must land exactly on every breakpoint
    double pos = 0.0;
    std::set<int> hit;
    for (double s : sizes) {
        pos += s;
        for (std::size_t b = 0; b < breaks.size(); ++b)
            if (std::abs(pos - breaks[b]) < 1e-12)
                hit.insert(static_cast<int>(b));
    }
    CHECK(hit.count(1) == 1);
    CHECK(hit.count(2) == 1);
    CHECK(pos == doctest::Approx(1.0e-3).epsilon(1e-12));
    // grading bound
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
        double r = sizes[i + 1] / sizes[i];
        CHECK(std::max(r, 1.0 / r) <= 1.3 + 1e-9);
    }
}

TEST_CASE("rasterized stack: vertical resolution, PEC flags, totals") {
    auto model = default_flip_chip_package();
    RasterOptions opt;
    opt.dim = 2;
    opt.policy.max_frequency_hz = 60e9;
    auto grid = rasterize(model, opt);

    // SiO2 layer: 2-cell rule binds -> vertical cell <= 6.5 um there.
    auto span = model.layer_span("interconnect");
    double max_dy = 0.0;
    int cells_in_layer = 0;
    for (std::size_t j = 0; j + 1 < grid.y.size(); ++j) {
        double lo = grid.y[j], hi = grid.y[j + 1];
        if (lo >= span[0] - 1e-12 && hi <= span[1] + 1e-12) {
            max_dy = std::max(max_dy, hi - lo);
            ++cells_in_layer;
        }
    }
    CHECK(cells_in_layer >= 2);
    CHECK(max_dy <= 6.5e-6 + 1e-12);

    // total stack height equals the sum of layer thicknesses within one cell
    double got = 0.0;
    for (std::size_t j = 0; j + 1 < grid.y.size(); ++j) {
        if (grid.y[j] >= -1e-12 && grid.y[j + 1] <= grid.stack_top + 1e-12)
            got += grid.y[j + 1] - grid.y[j];
    }
    CHECK(got == doctest::Approx(model.stack_height()).epsilon(1e-9));

    // heat-sink cells all PEC
    auto sink = model.layer_span("heat_sink");
    for (std::size_t j = 0; j + 1 < grid.y.size(); ++j) {
        double mid = 0.5 * (grid.y[j] + grid.y[j + 1]);
        if (mid < sink[0] || mid > sink[1])
            continue;
        for (int i = 0; i < grid.nx(); ++i) {
            double xm = 0.5 * (grid.x[i] + grid.x[i + 1]);
            if (std::abs(xm) < model.carrier_lateral / 2)
                CHECK(grid.pec[grid.cell_index(i, static_cast<int>(j))] == 1);
        }
    }

    // every-layer wavelength rule (dielectrics)
    auto lib = MaterialLibrary::builtin();
    for (const auto& l : model.layers) {
        if (l.kind != LayerKind::dielectric)
            continue;
        auto sp = model.layer_span(l.name);
        double lam = kSpeedOfLight / (60e9 * std::sqrt(lib.get(l.material).rel_permittivity));
        for (std::size_t j = 0; j + 1 < grid.y.size(); ++j) {
            double lo = grid.y[j], hi = grid.y[j + 1];
            if (lo >= sp[0] - 1e-12 && hi <= sp[1] + 1e-12)
                CHECK(hi - lo <= lam / 15 + 1e-12);
        }
    }
}

TEST_CASE("rasterization is idempotent") {
    auto model = place_port_grid(default_flip_chip_package(), 1, 4, AntennaKind::monopole);
    for (auto& p : model.ports)
        p.monopole_length = 0.25e-3;
    RasterOptions opt;
    opt.dim = 2;
    auto a = rasterize(model, opt);
    auto b = rasterize(model, opt);
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);
    CHECK(a.eps_r == b.eps_r);
    CHECK(a.sigma == b.sigma);
    CHECK(a.pec == b.pec);
    REQUIRE(a.ports.size() == 4);
    CHECK(a.wires.size() == 4);
}

TEST_CASE("explicit bump pillars: counting oracle") {
    auto model = default_flip_chip_package();
    model.chip_lateral = 2.2e-3; // small fixture
    model.carrier_lateral = 3.3e-3;
    model.bump_mode = BumpMode::explicit_array;
    RasterOptions opt;
    opt.dim = 2;
    opt.policy.max_frequency_hz = 60e9;
    auto grid = rasterize(model, opt);
    // count PEC runs along x at the bump-layer mid height
    auto span = model.layer_span("bumps");
    double mid = 0.5 * (span[0] + span[1]);
    int j = 0;
    for (std::size_t q = 0; q + 1 < grid.y.size(); ++q)
        if (grid.y[q] <= mid && mid < grid.y[q + 1])
            j = static_cast<int>(q);
    int runs = 0;
    bool inside = false;
    for (int i = 0; i < grid.nx(); ++i) {
        bool pec = grid.pec[grid.cell_index(i, j)] != 0;
        if (pec && !inside)
            ++runs;
        inside = pec;
    }
    int expected = static_cast<int>(std::floor(model.chip_lateral / 100e-6));
    CHECK(runs == expected);
}

TEST_CASE("patch rejected in 2-D, monopole must clear the lid") {
    auto model = place_port_grid(default_flip_chip_package(), 1, 2, AntennaKind::patch);
    for (auto& p : model.ports) {
        p.patch_length = 1.2e-3;
        p.patch_width = 1.2e-3;
    }
    RasterOptions opt;
    opt.dim = 2;
    CHECK_THROWS_AS(rasterize(model, opt), ValidationError);

    auto mono = place_port_grid(default_flip_chip_package(), 1, 2, AntennaKind::monopole);
    for (auto& p : mono.ports)
        p.monopole_length = 5e-3; // taller than the whole stack above the feed
    CHECK_THROWS_AS(rasterize(mono, opt), ValidationError);
}

TEST_CASE("memory budget produces a sizing error") {
    auto model = default_flip_chip_package();
    RasterOptions opt;
    opt.dim = 2;
    opt.policy.memory_budget_mb = 0.1;
    CHECK_THROWS_AS(rasterize(model, opt), SizingError);
}
