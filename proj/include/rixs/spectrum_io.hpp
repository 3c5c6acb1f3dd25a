// spectrum_io.hpp - plot-ready CSV and stick/metadata JSON for spectra
#pragma once

#include <rixs/exact_spectra.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace rixs::spectra {

// Two columns: x (eV) and broadened intensity. The x header depends on the spectrum kind.
void write_spectrum_csv(std::ostream& out, const SpectrumResult& r);

// {"kind", "lineshape", widths, polarizations, "sticks": [[x_eV, weight], ...]}
void write_spectrum_json(std::ostream& out, const SpectrumResult& r);

// {"spectra": [...]} with one object per spectrum, as above.
void write_spectra_json(std::ostream& out, const std::vector<SpectrumResult>& spectra);

std::string axis_label(const SpectrumResult& r);

} // namespace rixs::spectra
