#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "pkgwave/package.hpp"

namespace pkgwave {

// Gaussian-modulated sinusoid drive. tau = 1/(2 pi sigma_f) so the spectrum
// is exp(-(f-f0)^2 / (2 sigma_f^2)); the usable band (>= 10% of the spectral
// peak) is |f - f0| <= sqrt(2 ln 10) * sigma_f.
struct Waveform {
    double f0 = 60e9;
    double sigma_f = 2.5e9;
    double amplitude = 1.0;
    bool soft = true;

    double tau() const;
    double delay() const;    // envelope center t0 = 5 tau
    double duration() const; // 2 t0
    double value(double t) const;
    double spectrum_rel(double f) const; // relative to the peak at f0
    double band_lo() const;              // 10%-of-peak band edges
    double band_hi() const;
};

// Stability limit from the per-axis minimum cell sizes:
// dt = safety / (c * sqrt(sum_axes 1/dmin_axis^2)).
double max_stable_timestep(const std::vector<double>& min_axis_cells, double cfl_safety = 0.99);
double max_stable_timestep(const MaterialGrid& grid, double cfl_safety = 0.99);

enum class Polarization2D {
    te, // in-plane E: Ex, Ey, Hz  (package cross-section default)
    tm  // out-of-plane E: Ez, Hx, Hy
};

struct PmlSpec {
    int left = 10, right = 10, bottom = 10, top = 10;
    double reflection_target = 1e-5;
    double grading_order = 3.0;
    void validate() const;
};

struct PortSpec {
    int index = 0;
    // TE: feed is the vertical E edge at lateral node i, vertical cell jcell.
    // TM: feed is the out-of-plane E node (i, jcell).
    int i = 0;
    int jcell = 0;
    double resistance = 50.0;
    double depth = 5e-3; // out-of-plane slice depth for V/I normalization
    // Current measurement row offset: monopoles measure the H loop one cell
    // above the gap (around the wire base) instead of at the gap itself.
    int current_row_offset = 0;
};

struct SolverOptions2D {
    Polarization2D polarization = Polarization2D::te;
    double cfl_safety = 0.99;
    PmlSpec pml;
    long max_steps = 200000;
    double energy_decay = 1e-6;
    int check_interval = 128;
    bool allow_unstable = false; // test hook: skip the CFL validity check
};

struct PortRecord {
    std::vector<double> v; // sampled at t = (n+1) dt
    std::vector<double> i; // sampled at t = (n+1/2) dt
};

struct LineProbeSpec {
    double vertical_pos = 0.0; // y coordinate of the sampling line
    double x0 = 0.0, x1 = 0.0; // sampling range
    std::vector<double> frequencies;
};

struct LineProfile {
    double frequency = 0.0;
    std::vector<double> x;         // sample positions (cell centers)
    std::vector<double> magnitude; // |E| DFT magnitude at each sample
};

struct RunDiagnostics {
    long steps = 0;
    double peak_energy = 0.0;
    double final_energy_ratio = 0.0;
    bool decayed = false; // energy criterion reached before max_steps
};

struct RunRecord {
    double dt = 0.0;
    long steps = 0;
    int excited_port = 0;
    Waveform waveform;
    std::vector<PortRecord> ports;
    std::vector<LineProfile> lines;
    RunDiagnostics diag;
};

// Peak spurious reflection of a PML truncation, in dB, measured against an
// enlarged-domain reference run with identical source and probe. 0 cells
// means a bare PEC wall (total reflection, ~0 dB).
double measure_pml_reflection(int pml_cells);

// 2-D leapfrog Yee solver with conductive loss, CPML absorbing boundaries,
// PEC masks (cells, sheets, wires) and lumped resistive ports.
class Fdtd2D {
public:
    Fdtd2D(const MaterialGrid& grid, const SolverOptions2D& options);

    void add_port(const PortSpec& port);
    void add_line_probe(const LineProbeSpec& probe);

    // One leapfrog iteration: H half-step then E half-step. `drive` selects
    // the excited port (-1 = none).
    void step(int drive_port, const Waveform& wf);

    // Run to energy decay or max_steps, recording all port V/I histories.
    RunRecord run(int drive_port, const Waveform& wf);

    double dt() const { return dt_; }
    long step_count() const { return step_count_; }
    double time_e() const { return step_count_ * dt_; }

    // Plain field energy (0.5 eps E^2 + 0.5 mu H^2 over dual volumes),
    // PML region excluded.
    double field_energy() const;
    // Same restricted to a vertical band [y0, y1].
    double field_energy_band(double y0, double y1) const;

    // Probing for tests. (i,j) indexing follows the staggered layout.
    double ez(int i, int j) const;             // TM
    double ex(int i, int j) const;             // TE
    double ey(int i, int j) const;             // TE
    double& field_ez(int i, int j);            // mutable (mode injection in fixtures)
    double& field_ey(int i, int j);
    std::pair<double, double> ez_update_coeffs(int i, int j) const;
    double port_voltage(const PortSpec& p) const;
    double port_current(const PortSpec& p) const;
    double max_abs_e_on_pec() const;

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    const std::vector<double>& xnodes() const { return x_; }
    const std::vector<double>& ynodes() const { return y_; }

private:
    void build_coefficients(const MaterialGrid& grid);
    void build_pml();
    void setup_ports();
    void step_tm(int drive_port, const Waveform& wf);
    void step_te(int drive_port, const Waveform& wf);
    void check_health();

    Polarization2D pol_;
    SolverOptions2D opt_;
    int nx_ = 0, ny_ = 0;
    std::vector<double> x_, y_;   // node coordinates
    std::vector<double> dx_, dy_; // cell sizes
    std::vector<double> dxn_, dyn_; // dual spacings at nodes
    double dt_ = 0.0;
    long step_count_ = 0;

    // TM fields
    std::vector<double> ez_, hx_, hy_;
    std::vector<double> ca_ez_, cb_ez_;
    std::vector<uint8_t> pec_ez_;
    // TE fields
    std::vector<double> exf_, eyf_, hz_;
    std::vector<double> ca_ex_, cb_ex_, ca_ey_, cb_ey_;
    std::vector<uint8_t> pec_ex_, pec_ey_;

    // CPML psi accumulators + per-axis recursion coefficients.
    std::vector<double> psi_ez_x_, psi_ez_y_, psi_hx_y_, psi_hy_x_;
    std::vector<double> psi_ex_y_, psi_ey_x_, psi_hz_x_, psi_hz_y_;
    std::vector<double> bx_n_, cx_n_, bx_h_, cx_h_;
    std::vector<double> by_n_, cy_n_, by_h_, cy_h_;

    std::vector<double> sigma_edge_extra_; // lumped resistor conductivities (per port)
    std::vector<PortSpec> ports_;
    std::vector<LineProbeSpec> probes_;

    // Raw grid copies needed for energy sums and probe placement.
    std::vector<double> cell_eps_;
    int pml_l_ = 0, pml_r_ = 0, pml_b_ = 0, pml_t_ = 0;
};

} // namespace pkgwave
