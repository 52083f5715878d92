#pragma once

#include <map>
#include <string>
#include <vector>

namespace pkgwave {

// Electromagnetic description of one substance. Conductors are idealized as
// PEC (skin depth at mmWave is far below every metal thickness in the stack),
// so rel_permittivity/loss_tangent are ignored when is_conductor is set.
struct Material {
    std::string name;
    double rel_permittivity = 1.0; // >= 1 for dielectrics
    double loss_tangent = 0.0;     // >= 0
    bool is_conductor = false;

    void validate() const;
};

// sigma = 2*pi*f_pin * eps0 * eps_r * tan_delta. The stack tables carry a
// single loss tangent per material, so conductivity is pinned at one
// frequency per run (band center by default) and held constant; across a
// 55-65 GHz band the induced sigma error is at most +-8.3%.
double loss_tangent_to_conductivity(double rel_permittivity, double loss_tangent,
                                    double pin_frequency_hz);

// Conductivity of a material at the pin frequency (0 for PEC; the PEC mask
// handles conductors separately).
double pinned_conductivity(const Material& m, double pin_frequency_hz);

class MaterialLibrary {
public:
    // Library preloaded with the flip-chip stack materials plus vacuum and
    // aluminum nitride.
    static MaterialLibrary builtin();

    const Material& get(const std::string& name) const;
    bool contains(const std::string& name) const { return materials_.count(name) > 0; }

    // Inserting an existing name replaces it (config-file overrides).
    void insert(const Material& m);

    std::vector<std::string> names() const;

private:
    std::map<std::string, Material> materials_;
};

} // namespace pkgwave
