#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pkgwave/materials.hpp"

namespace pkgwave {

enum class LayerKind { dielectric, conductor, bump_array };

enum class LateralExtent { chip, carrier };

// One slab of the flip-chip stack, ordered top -> bottom.
struct Layer {
    std::string name;
    double thickness = 0.0; // meters
    std::string material;   // name in the MaterialLibrary
    LayerKind kind = LayerKind::dielectric;
    LateralExtent extent = LateralExtent::carrier;
    bool optional = false;  // thickness 0 removes the layer instead of failing
    // bump_array layers only:
    double pitch = 0.0;    // meters, center-to-center
    double diameter = 0.0; // meters, pillar width
};

enum class BumpMode { homogenized_pec, explicit_array };

enum class AntennaKind { point_dipole, monopole, patch };

struct PortPlacement {
    int index = 0;
    AntennaKind antenna = AntennaKind::monopole;
    double x = 0.0; // chip-plane position, meters, origin at chip center
    double y = 0.0;
    double monopole_length = 0.0; // meters; 0 = quarter-wave estimate at tuning
    double patch_length = 0.0;    // meters (3-D only)
    double patch_width = 0.0;
};

// Declarative flip-chip package description. Defaults reproduce the standard
// stack: Al heat sink 0.5 mm, ceramic spreader 0.25 mm, bulk silicon 0.489 mm,
// SiO2 interconnect 13 um, Cu/Sn bump layer 87.5 um, alumina carrier 0.5 mm,
// solder balls 0.32 mm, epoxy PCB 0.5 mm; chip 22 mm on a 33 mm carrier.
struct PackageModel {
    std::vector<Layer> layers; // top -> bottom
    double chip_lateral = 22e-3;
    double carrier_lateral = 33e-3;
    BumpMode bump_mode = BumpMode::homogenized_pec;
    // The interconnect copper (a PEC sheet between SiO2 and bumps, chip-wide)
    // and the carrier-top metallization (PEC sheet, carrier-wide) are part of
    // the model; both are rasterized as zero-thickness sheets.
    bool interconnect_sheet = true;
    bool carrier_metallization = true;
    std::vector<PortPlacement> ports;

    const Layer* find_layer(const std::string& name) const;
    Layer* find_layer(const std::string& name);

    // Vertical span [z_bottom, z_top) of a layer, z=0 at the PCB bottom.
    std::array<double, 2> layer_span(const std::string& name) const;
    double stack_height() const;

    void validate(const MaterialLibrary& lib) const;
};

struct LayerOverride {
    std::string layer;
    std::optional<double> thickness;    // meters
    std::optional<std::string> material;
};

// Baseline package with optional per-layer overrides. Thickness 0 removes
// optional layers (heat spreader) and is rejected for structural ones.
PackageModel default_flip_chip_package(const std::vector<LayerOverride>& overrides = {},
                                       const MaterialLibrary& lib = MaterialLibrary::builtin());

// Uniform rows x cols port grid over the chip with half-pitch edge margin.
// pitch = chip_lateral / cols (and / rows in y).
PackageModel place_port_grid(PackageModel model, int rows, int cols, AntennaKind antenna);

// Quarter-wave starting length for monopole tuning: lambda0 / (4 sqrt(eps_r))
// with the silicon permittivity.
double monopole_initial_length(double target_frequency_hz, double silicon_eps_r = 11.9);

// ---------------------------------------------------------------------------
// Rasterization

struct ResolutionPolicy {
    double max_frequency_hz = 65e9;   // wavelength rule evaluated here
    double cells_per_wavelength = 15.0;
    int min_cells_per_layer = 2;      // vertical rule for every stack layer
    double grading_ratio = 1.3;       // max adjacent cell size ratio
    double air_margin = 0.0;          // meters; 0 = lambda0/4 at max_frequency
    int pml_cells = 10;
    double memory_budget_mb = 4096.0;

    double resolved_air_margin() const;
};

// Rasterized geometry on a nonuniform rectilinear grid: cell material indices
// plus PEC masks. Cell (i,j[,k]) spans [x[i],x[i+1]] x [y[j],y[j+1]] ...; the
// vertical axis is the last one (y in 2-D, z in 3-D).
struct MaterialGrid {
    int dim = 2;
    std::vector<double> x, y, z;      // node coordinates per axis (z empty in 2-D)
    std::vector<double> eps_r;        // per cell
    std::vector<double> sigma;        // per cell, S/m (pinned)
    std::vector<uint8_t> pec;         // per cell
    // Zero-thickness PEC sheets: horizontal planes at node index `node` of the
    // vertical axis, spanning [x0,x1] (and [y0,y1] in 3-D) in meters.
    struct SheetMask {
        int node = 0;
        double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
    };
    std::vector<SheetMask> sheets;
    // Thin vertical PEC strips (2-D) / wires (3-D): clamped E edges along the
    // vertical axis at lateral node position, spanning vertical node range.
    struct WireMask {
        int node_i = 0, node_j = 0; // lateral node indices (node_j unused in 2-D)
        int v0 = 0, v1 = 0;         // vertical node range [v0, v1]
    };
    std::vector<WireMask> wires;

    double pin_frequency_hz = 60e9;
    double stack_bottom = 0.0; // z coordinate of PCB bottom
    double stack_top = 0.0;    // z coordinate of heat-sink top

    int nx() const { return static_cast<int>(x.size()) - 1; }
    int ny() const { return static_cast<int>(y.size()) - 1; }
    int nz() const { return dim == 3 ? static_cast<int>(z.size()) - 1 : 0; }
    long cell_count() const;
    std::size_t cell_index(int i, int j, int k = 0) const;

    // Port features resolved onto the grid (filled by rasterize).
    struct GridPort {
        int index = 0;
        AntennaKind antenna = AntennaKind::monopole;
        // Feed edge: vertical E edge at lateral node (i[,j]) spanning vertical
        // cells [feed_cell, feed_cell] (one-cell gap).
        int node_i = 0, node_j = 0;
        int feed_cell = 0;
        double x = 0, y = 0;
    };
    std::vector<GridPort> ports;
};

struct RasterOptions {
    int dim = 2;
    ResolutionPolicy policy;
    double pin_frequency_hz = 60e9;
    // 3-D strip mode: restrict the y extent to [y0, y1] (meters) with the
    // caller handling the lateral boundary condition (used by the bump
    // penetration experiment with mirror walls one pitch apart).
    std::optional<std::array<double, 2>> y_strip;
    bool with_pml_margin = true;
};

// Rasterize the package onto a simulation grid. Deterministic: the same model
// and options always produce the identical grid.
MaterialGrid rasterize(const PackageModel& model, const RasterOptions& options,
                       const MaterialLibrary& lib = MaterialLibrary::builtin());

// Mesh a single axis: fill [0, L] split at `breakpoints` with cell sizes that
// honor per-interval max size, a minimum cell count per interval, and the
// grading-ratio bound. Exposed for tests.
std::vector<double> mesh_axis(const std::vector<double>& breakpoints,
                              const std::vector<double>& max_cell,
                              const std::vector<int>& min_cells,
                              double grading_ratio);

// Uniform single-material grid (analytic fixtures: vacuum boxes, slabs).
MaterialGrid make_uniform_grid_2d(double size_x, double size_y, double cell, double eps_r = 1.0,
                                  double sigma = 0.0);
MaterialGrid make_uniform_grid_3d(double size_x, double size_y, double size_z, double cell,
                                  double eps_r = 1.0, double sigma = 0.0);

} // namespace pkgwave
