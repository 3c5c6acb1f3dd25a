#include <rixs/spectrum_io.hpp>

#include <json.hpp>

#include <ostream>

namespace rixs::spectra {

std::string axis_label(const SpectrumResult& r) { return r.meta.kind == "xas" ? "omega_in_eV" : "energy_loss_eV"; }

void write_spectrum_csv(std::ostream& out, const SpectrumResult& r) {
    const auto prec = out.precision(12);
    out << axis_label(r) << ",intensity\n";
    for (Eigen::Index i = 0; i < r.grid_ev.size(); ++i) out << r.grid_ev(i) << ',' << r.intensity(i) << '\n';
    out.precision(prec);
}

namespace {

nlohmann::ordered_json to_json(const SpectrumResult& r) {
    nlohmann::ordered_json j;
    j["kind"] = r.meta.kind;
    j["axis"] = axis_label(r);
    j["lineshape"] = r.meta.lineshape;
    j["width_eV"] = r.meta.eta_ev;
    if (r.meta.kind != "xas") j["omega_in_eV"] = r.meta.omega_in_ev;
    j["gamma_eV"] = r.meta.gamma_ev;
    j["eps_in"] = {r.meta.eps_in.x(), r.meta.eps_in.y(), r.meta.eps_in.z()};
    j["eps_out"] = {r.meta.eps_out.x(), r.meta.eps_out.y(), r.meta.eps_out.z()};
    j["total_weight"] = r.total_weight();
    auto sticks = nlohmann::ordered_json::array();
    for (const auto& s : r.sticks) sticks.push_back({s.x_ev, s.weight});
    j["sticks"] = sticks;
    return j;
}

} // namespace

void write_spectrum_json(std::ostream& out, const SpectrumResult& r) { out << to_json(r).dump(2) << '\n'; }

void write_spectra_json(std::ostream& out, const std::vector<SpectrumResult>& spectra) {
    nlohmann::ordered_json j;
    j["spectra"] = nlohmann::ordered_json::array();
    for (const auto& r : spectra) j["spectra"].push_back(to_json(r));
    out << j.dump(2) << '\n';
}

} // namespace rixs::spectra
