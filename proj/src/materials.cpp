#include "pkgwave/materials.hpp"

#include <cmath>

#include "pkgwave/constants.hpp"
#include "pkgwave/errors.hpp"

namespace pkgwave {

void Material::validate() const {
    if (name.empty())
        throw ValidationError("material has empty name");
    if (is_conductor)
        return; // PEC: permittivity/loss unused
    if (!std::isfinite(rel_permittivity) || rel_permittivity < 1.0)
        throw ValidationError("material '" + name + "': rel_permittivity must be finite and >= 1");
    if (!std::isfinite(loss_tangent) || loss_tangent < 0.0)
        throw ValidationError("material '" + name + "': loss_tangent must be finite and >= 0");
}

double loss_tangent_to_conductivity(double rel_permittivity, double loss_tangent,
                                    double pin_frequency_hz) {
    if (!std::isfinite(rel_permittivity) || rel_permittivity < 1.0)
        throw ValidationError("loss_tangent_to_conductivity: rel_permittivity must be >= 1");
    if (!std::isfinite(loss_tangent) || loss_tangent < 0.0)
        throw ValidationError("loss_tangent_to_conductivity: loss_tangent must be >= 0");
    if (!std::isfinite(pin_frequency_hz) || pin_frequency_hz <= 0.0)
        throw ValidationError("loss_tangent_to_conductivity: pin frequency must be > 0");
    return 2.0 * kPi * pin_frequency_hz * kVacuumPermittivity * rel_permittivity * loss_tangent;
}

double pinned_conductivity(const Material& m, double pin_frequency_hz) {
    if (m.is_conductor)
        return 0.0;
    return loss_tangent_to_conductivity(m.rel_permittivity, m.loss_tangent, pin_frequency_hz);
}

MaterialLibrary MaterialLibrary::builtin() {
    MaterialLibrary lib;
    auto add = [&lib](const std::string& name, double eps_r, double tand, bool pec = false) {
        Material m;
        m.name = name;
        m.rel_permittivity = eps_r;
        m.loss_tangent = tand;
        m.is_conductor = pec;
        lib.insert(m);
    };
    add("vacuum", 1.0, 0.0);
    add("aluminum", 1.0, 0.0, true);
    add("copper", 1.0, 0.0, true);
    add("lead", 1.0, 0.0, true);
    // Heat spreader ceramic; the aluminum-nitride entry reuses these constants
    // (no separate AlN data in the stack table).
    add("thermal_conductor", 8.6, 3e-4);
    add("ain", 8.6, 3e-4);
    add("silicon", 11.9, 0.2517);
    add("sio2", 3.9, 0.03);
    add("alumina", 9.4, 4e-4);
    // PCB laminate: table gives eps_r 4 and no loss tangent; 0.02 is a typical
    // epoxy value and can be overridden from the scenario config.
    add("epoxy", 4.0, 0.02);
    return lib;
}

const Material& MaterialLibrary::get(const std::string& name) const {
    auto it = materials_.find(name);
    if (it == materials_.end())
        throw ValidationError("unknown material '" + name + "'");
    return it->second;
}

void MaterialLibrary::insert(const Material& m) {
    m.validate();
    materials_[m.name] = m;
}

std::vector<std::string> MaterialLibrary::names() const {
    std::vector<std::string> out;
    out.reserve(materials_.size());
    for (const auto& [k, v] : materials_)
        out.push_back(k);
    return out;
}

} // namespace pkgwave
