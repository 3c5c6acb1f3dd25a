#pragma once

namespace rixs {

// All internal energies are Hartree. eV only appears at user-facing boundaries.
inline constexpr double kHartreeInEv = 27.211386245988;

constexpr double ev_to_hartree(double ev) { return ev / kHartreeInEv; }
constexpr double hartree_to_ev(double ha) { return ha * kHartreeInEv; }

} // namespace rixs
