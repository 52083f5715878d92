#include "pkgwave/package.hpp"

#include <algorithm>
#include <cmath>

#include "pkgwave/constants.hpp"
#include "pkgwave/errors.hpp"

namespace pkgwave {

namespace {

const char* kRequiredOrder[] = {"heat_sink", "spreader", "silicon", "interconnect",
                                "bumps",     "carrier",  "solder_balls", "pcb"};

double wavelength_in(const Material& m, double f) {
    double eps = m.is_conductor ? 1.0 : m.rel_permittivity;
    return kSpeedOfLight / (f * std::sqrt(eps));
}

} // namespace

const Layer* PackageModel::find_layer(const std::string& name) const {
    for (const auto& l : layers)
        if (l.name == name)
            return &l;
    return nullptr;
}

Layer* PackageModel::find_layer(const std::string& name) {
    for (auto& l : layers)
        if (l.name == name)
            return &l;
    return nullptr;
}

std::array<double, 2> PackageModel::layer_span(const std::string& name) const {
    // z = 0 at the bottom of the lowest layer, increasing upward.
    double z = 0.0;
    for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
        if (it->name == name)
            return {z, z + it->thickness};
        z += it->thickness;
    }
    throw ValidationError("layer_span: no layer named '" + name + "'");
}

double PackageModel::stack_height() const {
    double h = 0.0;
    for (const auto& l : layers)
        h += l.thickness;
    return h;
}

void PackageModel::validate(const MaterialLibrary& lib) const {
    if (layers.empty())
        throw ValidationError("package has no layers");
    // Layer order must follow the stack order (optional layers may be absent).
    std::size_t expect = 0;
    for (const auto& l : layers) {
        while (expect < std::size(kRequiredOrder) && l.name != kRequiredOrder[expect])
            ++expect;
        if (expect == std::size(kRequiredOrder))
            throw ValidationError("unexpected or out-of-order layer '" + l.name + "'");
        ++expect;
        if (!(l.thickness > 0.0) || !std::isfinite(l.thickness))
            throw ValidationError("layer '" + l.name + "': thickness must be > 0");
        lib.get(l.material); // throws on unknown material
        if (l.kind == LayerKind::bump_array) {
            if (!(l.pitch > 0.0) || !(l.diameter > 0.0))
                throw ValidationError("bump layer '" + l.name + "': pitch and diameter must be > 0");
            if (l.diameter >= l.pitch)
                throw ValidationError("bump layer '" + l.name + "': diameter must be < pitch");
        }
    }
    if (!(chip_lateral > 0.0) || !(carrier_lateral > 0.0))
        throw ValidationError("lateral dimensions must be > 0");
    if (!(chip_lateral < carrier_lateral))
        throw ValidationError("chip_lateral must be < carrier_lateral");
    for (const auto& p : ports) {
        if (std::abs(p.x) > chip_lateral / 2 || std::abs(p.y) > chip_lateral / 2)
            throw ValidationError("port " + std::to_string(p.index) + " outside chip footprint");
    }
}

PackageModel default_flip_chip_package(const std::vector<LayerOverride>& overrides,
                                       const MaterialLibrary& lib) {
    PackageModel m;
    auto layer = [](const std::string& name, double t, const std::string& mat, LayerKind kind,
                    LateralExtent ext) {
        Layer l;
        l.name = name;
        l.thickness = t;
        l.material = mat;
        l.kind = kind;
        l.extent = ext;
        return l;
    };
    Layer sink = layer("heat_sink", 0.5e-3, "aluminum", LayerKind::conductor, LateralExtent::carrier);
    Layer spreader =
        layer("spreader", 0.25e-3, "thermal_conductor", LayerKind::dielectric, LateralExtent::carrier);
    spreader.optional = true;
    Layer silicon = layer("silicon", 0.489e-3, "silicon", LayerKind::dielectric, LateralExtent::chip);
    Layer interconnect = layer("interconnect", 13e-6, "sio2", LayerKind::dielectric, LateralExtent::chip);
    Layer bumps = layer("bumps", 87.5e-6, "copper", LayerKind::bump_array, LateralExtent::chip);
    bumps.pitch = 100e-6;
    bumps.diameter = 60e-6;
    Layer carrier = layer("carrier", 0.5e-3, "alumina", LayerKind::dielectric, LateralExtent::carrier);
    Layer balls = layer("solder_balls", 0.32e-3, "lead", LayerKind::bump_array, LateralExtent::carrier);
    balls.pitch = 1e-3;
    balls.diameter = 0.32e-3;
    Layer pcb = layer("pcb", 0.5e-3, "epoxy", LayerKind::dielectric, LateralExtent::carrier);
    m.layers = {sink, spreader, silicon, interconnect, bumps, carrier, balls, pcb};

    for (const auto& ov : overrides) {
        Layer* l = m.find_layer(ov.layer);
        if (!l)
            throw ValidationError("override references unknown layer '" + ov.layer + "'");
        if (ov.material) {
            lib.get(*ov.material);
            l->material = *ov.material;
        }
        if (ov.thickness) {
            double t = *ov.thickness;
            if (!std::isfinite(t) || t < 0.0)
                throw ValidationError("layer '" + ov.layer + "': thickness must be finite and >= 0");
            if (t == 0.0) {
                if (!l->optional)
                    throw ValidationError("layer '" + ov.layer + "' cannot have zero thickness");
                std::erase_if(m.layers, [&](const Layer& e) { return e.name == ov.layer; });
                continue;
            }
            l->thickness = t;
        }
    }
    m.validate(lib);
    return m;
}

PackageModel place_port_grid(PackageModel model, int rows, int cols, AntennaKind antenna) {
    if (rows < 1 || cols < 1 || rows * cols < 2)
        throw ValidationError("port grid needs at least 2 antennas");
    const Layer* bumps = model.find_layer("bumps");
    double pitch_x = model.chip_lateral / cols;
    double pitch_y = model.chip_lateral / rows;
    if (antenna == AntennaKind::monopole && bumps) {
        // Keep antenna spacing well above the bump pitch so each via has
        // clearance from the bump field underneath.
        double min_pitch = 2.0 * bumps->pitch;
        if (pitch_x < min_pitch || (rows > 1 && pitch_y < min_pitch))
            throw ValidationError("port grid denser than the bump pitch allows for monopole clearance");
    }
    model.ports.clear();
    int idx = 0;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            PortPlacement p;
            p.index = idx++;
            p.antenna = antenna;
            p.x = -model.chip_lateral / 2 + pitch_x * (c + 0.5);
            p.y = rows == 1 ? 0.0 : -model.chip_lateral / 2 + pitch_y * (r + 0.5);
            model.ports.push_back(p);
        }
    }
    return model;
}

double monopole_initial_length(double target_frequency_hz, double silicon_eps_r) {
    if (!(target_frequency_hz > 0.0))
        throw ValidationError("monopole_initial_length: frequency must be > 0");
    double lambda0 = kSpeedOfLight / target_frequency_hz;
    return lambda0 / (4.0 * std::sqrt(silicon_eps_r));
}

double ResolutionPolicy::resolved_air_margin() const {
    if (air_margin > 0.0)
        return air_margin;
    return kSpeedOfLight / max_frequency_hz / 4.0;
}

long MaterialGrid::cell_count() const {
    long n = static_cast<long>(nx()) * ny();
    if (dim == 3)
        n *= nz();
    return n;
}

std::size_t MaterialGrid::cell_index(int i, int j, int k) const {
    if (dim == 2)
        return static_cast<std::size_t>(j) * nx() + i;
    return (static_cast<std::size_t>(k) * ny() + j) * nx() + i;
}

// ---------------------------------------------------------------------------
// Axis meshing

namespace {

// Fill one interval with cell sizes: geometric ladders from both edge targets
// up to hmax, a uniform plateau in between, ratio-bounded everywhere.
std::vector<double> fill_interval(double len, double edge_left, double edge_right, double hmax,
                                  int min_cells, double ratio) {
    hmax = std::min(hmax, len);
    int n_uniform = std::max(min_cells, static_cast<int>(std::ceil(len / hmax - 1e-9)));
    double uniform = len / n_uniform;
    double a = std::min({edge_left * ratio, hmax});
    double b = std::min({edge_right * ratio, hmax});
    if (a >= uniform && b >= uniform) {
        // Neighbors are no finer than we need: uniform fill.
        return std::vector<double>(n_uniform, uniform);
    }
    a = std::min(a, uniform);
    b = std::min(b, uniform);

    std::vector<double> left{a}, right{b};
    double total = a + b;
    // Grow both ladders toward hmax until the interval is covered.
    while (total < len) {
        double la = left.back(), lb = right.back();
        double next;
        if (la <= lb && la < hmax) {
            next = std::min(la * ratio, hmax);
            left.push_back(next);
        } else if (lb < hmax) {
            next = std::min(lb * ratio, hmax);
            right.push_back(next);
        } else {
            next = hmax;
            left.push_back(next);
        }
        total += next;
    }
    // Trim the overshoot by shrinking the largest interior cells: pop ladder
    // tops into a redistributable plateau.
    double rem = len;
    for (double v : left)
        rem -= v;
    for (double v : right)
        rem -= v;
    // rem <= 0 here; fold ladder tops until the plateau height stays within
    // ratio bounds of the remaining ladder ends.
    int plateau_n = 0;
    double plateau_rem = rem;
    auto ladder_top = [&]() { return std::max(left.back(), right.back()); };
    while (true) {
        // Move the larger ladder top into the plateau pool.
        if (left.back() >= right.back() && left.size() > 1) {
            plateau_rem += left.back();
            left.pop_back();
        } else if (right.size() > 1) {
            plateau_rem += right.back();
            right.pop_back();
        } else if (left.size() > 1) {
            plateau_rem += left.back();
            left.pop_back();
        } else {
            break;
        }
        ++plateau_n;
        if (plateau_rem <= 0)
            continue;
        double h = plateau_rem / plateau_n;
        if (h >= ladder_top() / ratio && h <= std::min(left.back(), right.back()) * ratio)
            break;
        if (h > std::min(left.back(), right.back()) * ratio) {
            // plateau too coarse: add cells
            while (plateau_rem / plateau_n > std::min(left.back(), right.back()) * ratio)
                ++plateau_n;
            break;
        }
    }
    std::vector<double> out = left;
    if (plateau_rem > 0 && plateau_n > 0) {
        double h = plateau_rem / plateau_n;
        for (int i = 0; i < plateau_n; ++i)
            out.push_back(h);
    } else if (plateau_rem > 0) {
        out.push_back(plateau_rem);
    }
    out.insert(out.end(), right.rbegin(), right.rend());
    // Force the exact length (floating point residue goes to the largest cell).
    double sum = 0;
    for (double v : out)
        sum += v;
    double residue = len - sum;
    auto it = std::max_element(out.begin(), out.end());
    *it += residue;
    if (static_cast<int>(out.size()) < min_cells) {
        return std::vector<double>(min_cells, len / min_cells);
    }
    return out;
}

} // namespace

std::vector<double> mesh_axis(const std::vector<double>& breakpoints,
                              const std::vector<double>& max_cell, const std::vector<int>& min_cells,
                              double grading_ratio) {
    if (breakpoints.size() < 2)
        throw ValidationError("mesh_axis: need at least one interval");
    if (max_cell.size() != breakpoints.size() - 1 || min_cells.size() != max_cell.size())
        throw ValidationError("mesh_axis: per-interval arrays mismatch");
    std::size_t m = max_cell.size();
    // Uniform reference size per interval (what the interval would use alone).
    std::vector<double> uniform(m);
    for (std::size_t i = 0; i < m; ++i) {
        double len = breakpoints[i + 1] - breakpoints[i];
        if (!(len > 0))
            throw ValidationError("mesh_axis: breakpoints must be strictly increasing");
        int n = std::max(min_cells[i], static_cast<int>(std::ceil(len / max_cell[i] - 1e-9)));
        uniform[i] = len / n;
    }
    std::vector<double> sizes;
    double prev_last = 1e300;
    for (std::size_t i = 0; i < m; ++i) {
        double len = breakpoints[i + 1] - breakpoints[i];
        double edge_left = (i == 0) ? 1e300 : prev_last;
        double edge_right = (i + 1 == m) ? 1e300 : uniform[i + 1];
        auto cells = fill_interval(len, edge_left, edge_right, std::min(max_cell[i], uniform[i] * 1.0001),
                                   min_cells[i], grading_ratio);
        prev_last = cells.back();
        sizes.insert(sizes.end(), cells.begin(), cells.end());
    }
    return sizes;
}

// ---------------------------------------------------------------------------
// Rasterization

namespace {

struct AxisSpec {
    std::vector<double> breaks;
    std::vector<double> hmax;
    std::vector<int> minc;
};

std::vector<double> nodes_from_sizes(double origin, const std::vector<double>& sizes) {
    std::vector<double> nodes(sizes.size() + 1);
    nodes[0] = origin;
    for (std::size_t i = 0; i < sizes.size(); ++i)
        nodes[i + 1] = nodes[i] + sizes[i];
    return nodes;
}

int find_node(const std::vector<double>& nodes, double coord, const char* what) {
    double tol = 1e-12 + 1e-9 * std::abs(coord);
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (std::abs(nodes[i] - coord) <= tol)
            return static_cast<int>(i);
    throw ValidationError(std::string("internal: no grid node at ") + what);
}

int find_cell(const std::vector<double>& nodes, double coord) {
    auto it = std::upper_bound(nodes.begin(), nodes.end(), coord);
    int idx = static_cast<int>(it - nodes.begin()) - 1;
    return std::clamp(idx, 0, static_cast<int>(nodes.size()) - 2);
}

// Pillar center positions for a bump_array layer within an extent.
std::vector<double> pillar_centers(double extent, double pitch) {
    int n = static_cast<int>(std::floor(extent / pitch));
    std::vector<double> centers(n);
    for (int k = 0; k < n; ++k)
        centers[k] = (k - (n - 1) / 2.0) * pitch;
    return centers;
}

void add_unique(std::vector<double>& v, double x) {
    for (double e : v)
        if (std::abs(e - x) < 1e-12)
            return;
    v.push_back(x);
}

} // namespace

MaterialGrid make_uniform_grid_2d(double size_x, double size_y, double cell, double eps_r,
                                  double sigma) {
    MaterialGrid g;
    g.dim = 2;
    int nx = std::max(1, static_cast<int>(std::round(size_x / cell)));
    int ny = std::max(1, static_cast<int>(std::round(size_y / cell)));
    g.x.resize(nx + 1);
    g.y.resize(ny + 1);
    for (int i = 0; i <= nx; ++i)
        g.x[i] = i * size_x / nx;
    for (int j = 0; j <= ny; ++j)
        g.y[j] = j * size_y / ny;
    g.eps_r.assign(static_cast<std::size_t>(nx) * ny, eps_r);
    g.sigma.assign(g.eps_r.size(), sigma);
    g.pec.assign(g.eps_r.size(), 0);
    return g;
}

MaterialGrid make_uniform_grid_3d(double size_x, double size_y, double size_z, double cell,
                                  double eps_r, double sigma) {
    MaterialGrid g;
    g.dim = 3;
    int nx = std::max(1, static_cast<int>(std::round(size_x / cell)));
    int ny = std::max(1, static_cast<int>(std::round(size_y / cell)));
    int nz = std::max(1, static_cast<int>(std::round(size_z / cell)));
    g.x.resize(nx + 1);
    g.y.resize(ny + 1);
    g.z.resize(nz + 1);
    for (int i = 0; i <= nx; ++i)
        g.x[i] = i * size_x / nx;
    for (int j = 0; j <= ny; ++j)
        g.y[j] = j * size_y / ny;
    for (int k = 0; k <= nz; ++k)
        g.z[k] = k * size_z / nz;
    g.eps_r.assign(static_cast<std::size_t>(nx) * ny * nz, eps_r);
    g.sigma.assign(g.eps_r.size(), sigma);
    g.pec.assign(g.eps_r.size(), 0);
    return g;
}

MaterialGrid rasterize(const PackageModel& model, const RasterOptions& options,
                       const MaterialLibrary& lib) {
    model.validate(lib);
    const ResolutionPolicy& pol = options.policy;
    const double f = pol.max_frequency_hz;
    const double margin = options.with_pml_margin ? pol.resolved_air_margin() : 0.0;
    const double air_h = kSpeedOfLight / f / pol.cells_per_wavelength;
    const double pml_len = options.with_pml_margin ? pol.pml_cells * air_h : 0.0;

    const Layer* bumps = model.find_layer("bumps");
    const bool explicit_bumps = bumps && model.bump_mode == BumpMode::explicit_array;

    // --- vertical axis (stack) ---
    AxisSpec vert;
    double z0 = -(margin + pml_len);
    vert.breaks.push_back(z0);
    if (options.with_pml_margin) {
        vert.breaks.push_back(-margin);
        vert.hmax.push_back(air_h);
        vert.minc.push_back(pol.pml_cells);
    }
    if (margin > 0) {
        vert.breaks.push_back(0.0);
        vert.hmax.push_back(air_h);
        vert.minc.push_back(1);
    } else if (!options.with_pml_margin) {
        // closed fixture: stack starts at domain edge
    }
    double z = 0.0;
    for (auto it = model.layers.rbegin(); it != model.layers.rend(); ++it) {
        z += it->thickness;
        vert.breaks.push_back(z);
        double h;
        if (it->kind == LayerKind::conductor ||
            (it->kind == LayerKind::bump_array && !(explicit_bumps && it->name == "bumps"))) {
            h = it->thickness; // PEC slab: no wavelength rule
        } else if (it->kind == LayerKind::bump_array) {
            h = air_h; // explicit pillars stand in air
        } else {
            h = wavelength_in(lib.get(it->material), f) / pol.cells_per_wavelength;
        }
        vert.hmax.push_back(h);
        vert.minc.push_back(pol.min_cells_per_layer);
    }
    double stack_top = z;
    if (margin > 0) {
        vert.breaks.push_back(stack_top + margin);
        vert.hmax.push_back(air_h);
        vert.minc.push_back(1);
    }
    if (options.with_pml_margin) {
        vert.breaks.push_back(stack_top + margin + pml_len);
        vert.hmax.push_back(air_h);
        vert.minc.push_back(pol.pml_cells);
    }

    // --- lateral axes ---
    auto lateral_axis = [&](bool is_x, std::optional<std::array<double, 2>> strip) -> AxisSpec {
        AxisSpec ax;
        std::vector<double> marks; // interior breakpoints
        double half_carrier = model.carrier_lateral / 2;
        double half_chip = model.chip_lateral / 2;
        add_unique(marks, -half_carrier);
        add_unique(marks, half_carrier);
        add_unique(marks, -half_chip);
        add_unique(marks, half_chip);
        for (const auto& p : model.ports) {
            double c = is_x ? p.x : p.y;
            add_unique(marks, c);
            if (p.antenna == AntennaKind::patch) {
                double half = (is_x ? p.patch_length : p.patch_width) / 2;
                add_unique(marks, c - half);
                add_unique(marks, c + half);
            }
        }
        if (explicit_bumps) {
            for (double c : pillar_centers(model.chip_lateral, bumps->pitch)) {
                add_unique(marks, c - bumps->diameter / 2);
                add_unique(marks, c + bumps->diameter / 2);
            }
        }
        double lo, hi;
        if (strip) {
            lo = (*strip)[0];
            hi = (*strip)[1];
        } else {
            lo = -half_carrier - margin - pml_len;
            hi = half_carrier + margin + pml_len;
            if (options.with_pml_margin) {
                add_unique(marks, -half_carrier - margin);
                add_unique(marks, half_carrier + margin);
            }
        }
        std::erase_if(marks, [&](double v) { return v <= lo + 1e-12 || v >= hi - 1e-12; });
        marks.push_back(lo);
        marks.push_back(hi);
        std::sort(marks.begin(), marks.end());
        ax.breaks = marks;

        // Finest wavelength among dielectric layers whose extent covers a column.
        auto column_h = [&](double mid) {
            double h = air_h;
            for (const auto& l : model.layers) {
                if (l.kind == LayerKind::conductor)
                    continue;
                if (l.kind == LayerKind::bump_array && !(explicit_bumps && l.name == "bumps"))
                    continue;
                double ext = (l.extent == LateralExtent::chip ? model.chip_lateral
                                                              : model.carrier_lateral) /
                             2;
                if (std::abs(mid) > ext)
                    continue;
                if (l.kind == LayerKind::bump_array)
                    continue; // pillar gaps are air; breakpoints bound the size
                h = std::min(h, wavelength_in(lib.get(l.material), f) / pol.cells_per_wavelength);
            }
            return h;
        };
        for (std::size_t i = 0; i + 1 < ax.breaks.size(); ++i) {
            double mid = 0.5 * (ax.breaks[i] + ax.breaks[i + 1]);
            bool in_pml = !strip && options.with_pml_margin &&
                          (mid < -half_carrier - margin || mid > half_carrier + margin);
            ax.hmax.push_back(column_h(mid));
            ax.minc.push_back(in_pml ? pol.pml_cells : 1);
        }
        return ax;
    };

    AxisSpec ax_x = lateral_axis(true, std::nullopt);
    AxisSpec ax_y;
    if (options.dim == 3)
        ax_y = lateral_axis(false, options.y_strip);

    MaterialGrid grid;
    grid.dim = options.dim;
    grid.pin_frequency_hz = options.pin_frequency_hz;
    grid.stack_bottom = 0.0;
    grid.stack_top = stack_top;
    grid.x = nodes_from_sizes(ax_x.breaks.front(),
                              mesh_axis(ax_x.breaks, ax_x.hmax, ax_x.minc, pol.grading_ratio));
    if (options.dim == 3)
        grid.y = nodes_from_sizes(ax_y.breaks.front(),
                                  mesh_axis(ax_y.breaks, ax_y.hmax, ax_y.minc, pol.grading_ratio));
    std::vector<double> vertical = nodes_from_sizes(
        vert.breaks.front(), mesh_axis(vert.breaks, vert.hmax, vert.minc, pol.grading_ratio));
    if (options.dim == 2)
        grid.y = vertical;
    else
        grid.z = vertical;

    // Memory budget: fields + update coefficients + PML working arrays.
    long cells = grid.dim == 2 ? static_cast<long>(grid.nx()) * grid.ny()
                               : static_cast<long>(grid.nx()) * grid.ny() * grid.nz();
    double bytes_per_cell = options.dim == 2 ? 200.0 : 450.0;
    double need_mb = cells * bytes_per_cell / 1e6;
    if (need_mb > pol.memory_budget_mb)
        throw SizingError("grid needs " + std::to_string(cells) + " cells (~" +
                          std::to_string(static_cast<long>(need_mb)) + " MB) exceeding budget of " +
                          std::to_string(static_cast<long>(pol.memory_budget_mb)) + " MB");

    // --- cell material assignment ---
    const std::vector<double>& vnodes = vertical;
    int nvert = static_cast<int>(vnodes.size()) - 1;
    int nx = grid.nx();
    int nlat_y = options.dim == 3 ? static_cast<int>(grid.y.size()) - 1 : 1;
    grid.eps_r.assign(static_cast<std::size_t>(nx) * nlat_y * nvert, 1.0);
    grid.sigma.assign(grid.eps_r.size(), 0.0);
    grid.pec.assign(grid.eps_r.size(), 0);

    // Resolve layer spans bottom-up once.
    struct Span {
        const Layer* layer;
        double lo, hi;
    };
    std::vector<Span> spans;
    {
        double zz = 0.0;
        for (auto it = model.layers.rbegin(); it != model.layers.rend(); ++it) {
            spans.push_back({&*it, zz, zz + it->thickness});
            zz += it->thickness;
        }
    }
    std::vector<double> bump_centers =
        explicit_bumps ? pillar_centers(model.chip_lateral, bumps->pitch) : std::vector<double>{};
    auto in_pillar = [&](double c) {
        for (double p : bump_centers)
            if (std::abs(c - p) <= bumps->diameter / 2 + 1e-15)
                return true;
        return false;
    };

    for (int k = 0; k < nvert; ++k) {
        double zmid = 0.5 * (vnodes[k] + vnodes[k + 1]);
        const Span* s = nullptr;
        for (const auto& e : spans)
            if (zmid > e.lo && zmid < e.hi) {
                s = &e;
                break;
            }
        for (int j = 0; j < nlat_y; ++j) {
            double ymid = options.dim == 3 ? 0.5 * (grid.y[j] + grid.y[j + 1]) : 0.0;
            for (int i = 0; i < nx; ++i) {
                double xmid = 0.5 * (grid.x[i] + grid.x[i + 1]);
                std::size_t idx =
                    options.dim == 2 ? grid.cell_index(i, k) : grid.cell_index(i, j, k);
                if (!s)
                    continue; // air
                const Layer& l = *s->layer;
                double ext = (l.extent == LateralExtent::chip ? model.chip_lateral
                                                              : model.carrier_lateral) /
                             2;
                if (std::abs(xmid) > ext || (options.dim == 3 && std::abs(ymid) > ext))
                    continue; // outside the slab: air
                if (l.kind == LayerKind::conductor) {
                    grid.pec[idx] = 1;
                } else if (l.kind == LayerKind::bump_array) {
                    if (l.name == "bumps" && explicit_bumps) {
                        bool inside = in_pillar(xmid) && (options.dim == 2 || in_pillar(ymid));
                        if (inside)
                            grid.pec[idx] = 1;
                        // gaps stay air
                    } else {
                        grid.pec[idx] = 1; // homogenized slab
                    }
                } else {
                    const Material& mat = lib.get(l.material);
                    grid.eps_r[idx] = mat.rel_permittivity;
                    grid.sigma[idx] = pinned_conductivity(mat, options.pin_frequency_hz);
                }
            }
        }
    }

    // --- PEC sheets ---
    auto sheet_at = [&](double zc, double half_extent) {
        MaterialGrid::SheetMask sm;
        sm.node = find_node(vnodes, zc, "sheet plane");
        sm.x0 = -half_extent;
        sm.x1 = half_extent;
        sm.y0 = -half_extent;
        sm.y1 = half_extent;
        grid.sheets.push_back(sm);
    };
    if (model.interconnect_sheet && model.find_layer("interconnect")) {
        auto span = model.layer_span("interconnect");
        sheet_at(span[0], model.chip_lateral / 2); // copper over the bumps
    }
    if (model.carrier_metallization && model.find_layer("carrier")) {
        auto span = model.layer_span("carrier");
        sheet_at(span[1], model.carrier_lateral / 2); // carrier-top metallization
    }

    // --- ports ---
    const Layer* sio2 = model.find_layer("interconnect");
    if (!model.ports.empty() && !sio2)
        throw ValidationError("ports require the interconnect layer");
    for (const auto& p : model.ports) {
        if (p.antenna == AntennaKind::patch && options.dim == 2)
            throw ValidationError("patch antennas require a 3-D solve");
        auto span = model.layer_span("interconnect");
        MaterialGrid::GridPort gp;
        gp.index = p.index;
        gp.antenna = p.antenna;
        gp.x = p.x;
        gp.y = p.y;
        gp.node_i = find_node(grid.x, p.x, "port x position");
        gp.node_j = options.dim == 3 ? find_node(grid.y, p.y, "port y position") : 0;
        int ground_node = find_node(vnodes, span[0], "interconnect bottom");
        gp.feed_cell = ground_node; // vertical cell [ground_node, ground_node+1]
        grid.ports.push_back(gp);

        if (p.antenna == AntennaKind::monopole) {
            double length = p.monopole_length > 0 ? p.monopole_length
                                                  : monopole_initial_length(options.pin_frequency_hz);
            double tip = span[0] + length;
            // Tip must stay clear of the first conductor above (heat sink).
            double ceiling = stack_top;
            for (const auto& e : spans)
                if (e.layer->kind == LayerKind::conductor && e.lo > span[0]) {
                    ceiling = std::min(ceiling, e.lo);
                }
            int tip_node = find_cell(vnodes, tip);
            if (vnodes[tip_node + 1] >= ceiling - 1e-12)
                throw ValidationError("monopole of length " + std::to_string(length * 1e3) +
                                      " mm reaches the conductor above the stack");
            MaterialGrid::WireMask w;
            w.node_i = gp.node_i;
            w.node_j = gp.node_j;
            w.v0 = ground_node + 1; // feed gap occupies [ground, ground+1]
            w.v1 = tip_node + 1;
            grid.wires.push_back(w);
        } else if (p.antenna == AntennaKind::patch) {
            int plate_node = find_node(vnodes, span[1], "patch plane");
            MaterialGrid::SheetMask plate;
            plate.node = plate_node;
            plate.x0 = p.x - p.patch_length / 2;
            plate.x1 = p.x + p.patch_length / 2;
            plate.y0 = p.y - p.patch_width / 2;
            plate.y1 = p.y + p.patch_width / 2;
            grid.sheets.push_back(plate);
            // Feed wire from the gap top to the plate at the patch edge.
            MaterialGrid::WireMask w;
            w.node_i = find_node(grid.x, plate.x0, "patch feed x");
            w.node_j = gp.node_j;
            w.v0 = ground_node + 1;
            w.v1 = plate_node;
            if (w.v1 > w.v0)
                grid.wires.push_back(w);
            grid.ports.back().node_i = w.node_i;
        }
    }
    return grid;
}

} // namespace pkgwave
