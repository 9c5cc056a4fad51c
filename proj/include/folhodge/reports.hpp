#pragma once

/**
 * @file reports.hpp
 * @brief Machine-readable and human-readable renderings of the result
 *        structs: JSON payloads, CSV eigenvalue tables, and text tables.
 *
 * All output is deterministic for fixed input. JSON doubles use the shortest
 * round-trip representation; CSV and text print with %.17g, which parses
 * back to the identical double. CSV is restricted to spectra by design: the
 * columns are operator, degree, index, eigenvalue, residual.
 */

#include <cstdio>
#include <sstream>
#include <string>

#include <json.hpp>

#include "folhodge/catalog.hpp"
#include "folhodge/hodge.hpp"

namespace folhodge {

namespace detail {

inline std::string fmt_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// JSON payloads

inline nlohmann::ordered_json validation_to_json(const ValidationReport& r) {
    nlohmann::ordered_json j;
    j["passed"] = r.passed;
    j["failures"] = nlohmann::ordered_json::array();
    for (const auto& f : r.failures) j["failures"].push_back(f.message);
    j["d_squared_residual"] = r.d_squared_residual;
    j["dkappa_residual"] = r.dkappa_residual;
    j["realizability_residual"] = r.realizability_residual;
    j["kappa_exactness_residual"] = r.kappa_exactness_residual;
    j["taut"] = r.taut;
    return j;
}

inline nlohmann::ordered_json identity_to_json(const IdentitySuiteReport& r, double tol) {
    nlohmann::ordered_json j;
    j["tolerance"] = tol;
    j["max_residual"] = r.max_residual;
    j["passed"] = r.pass(tol);
    j["star_involution_tested"] = r.star_involution_tested;
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& row : r.rows)
        j["rows"].push_back({{"identity", row.key},
                             {"statement", row.display},
                             {"degree", row.degree},
                             {"residual", row.residual}});
    return j;
}

inline nlohmann::ordered_json spectrum_to_json(const SpectrumResult& s) {
    nlohmann::ordered_json j;
    j["operator"] = operator_name_str(s.op);
    j["degree"] = s.degree;
    j["dimension"] = s.dimension;
    j["eigenvalues"] = s.eigenvalues;
    j["residuals"] = s.residuals;
    j["clusters"] = nlohmann::ordered_json::array();
    for (const auto& c : s.clusters)
        j["clusters"].push_back({{"value", c.value}, {"multiplicity", c.multiplicity}});
    j["scale"] = s.scale;
    j["harmonic_threshold"] = s.harmonic_threshold;
    j["hermitian_residual"] = s.hermitian_residual;
    return j;
}

inline nlohmann::ordered_json duality_to_json(const DualityReport& d) {
    nlohmann::ordered_json j;
    j["degree_low"] = d.degree_low;
    j["degree_high"] = d.degree_high;
    j["compared"] = d.compared;
    j["eigenvalue_gap"] = d.eigenvalue_gap;
    j["star_residual"] = d.star_residual;
    j["scale"] = d.scale;
    return j;
}

inline nlohmann::ordered_json cohomology_to_json(const CohomologyReport& r) {
    nlohmann::ordered_json j;
    j["q"] = r.q;
    j["betti"] = r.betti;
    j["twisted"] = r.twisted_betti;
    j["euler"] = r.euler;
    j["twisted_euler"] = r.twisted_euler;
    j["taut"] = r.taut;
    j["taut_obstruction"] = r.taut_obstruction;
    if (r.signature)
        j["signature"] = *r.signature;
    else
        j["signature"] = nullptr;
    j["duality"] = nlohmann::ordered_json::array();
    for (const auto& d : r.duality) j["duality"].push_back(duality_to_json(d));
    j["max_duality_eigenvalue_gap"] = r.max_duality_eigenvalue_gap;
    j["max_duality_star_residual"] = r.max_duality_star_residual;
    j["ordinary_via_ranks"] = r.ordinary_via_ranks;
    j["reliable"] = r.reliable;
    j["refined"] = r.refined;
    j["harmonic_threshold"] = r.harmonic_threshold;
    return j;
}

inline nlohmann::ordered_json conformal_to_json(const ConformalReport& r) {
    nlohmann::ordered_json j;
    j["h_had_mean"] = r.h_had_mean;
    j["taut_base"] = r.taut_base;
    j["taut_shifted"] = r.taut_shifted;
    j["max_eigenvalue_gap"] = r.max_eigenvalue_gap;
    j["min_alignment"] = r.min_alignment;
    j["per_degree"] = nlohmann::ordered_json::array();
    for (const auto& c : r.per_degree)
        j["per_degree"].push_back({{"degree", c.degree},
                                   {"compared", c.compared},
                                   {"simple_compared", c.simple_compared},
                                   {"eigenvalue_gap", c.eigenvalue_gap},
                                   {"min_alignment", c.min_alignment},
                                   {"scale", c.scale}});
    return j;
}

inline nlohmann::ordered_json suspension_to_json(const SuspensionReport& r) {
    nlohmann::ordered_json j;
    j["q"] = r.q;
    j["betti"] = r.betti;
    j["euler"] = r.euler;
    j["taut"] = r.taut;
    j["oriented"] = r.oriented;
    j["twisted"] = nlohmann::ordered_json::array();
    for (long v : r.twisted) {
        if (v < 0)
            j["twisted"].push_back(nullptr);
        else
            j["twisted"].push_back(v);
    }
    j["twisted_euler"] = r.twisted_euler;
    j["constraints"] = r.constraints;
    if (r.twisted_b1_floor)
        j["twisted_b1_floor"] = *r.twisted_b1_floor;
    else
        j["twisted_b1_floor"] = nullptr;
    return j;
}

// ---------------------------------------------------------------------------
// CSV (spectra only)

inline std::string spectrum_to_csv(const SpectrumResult& s) {
    std::ostringstream os;
    os << "operator,degree,index,eigenvalue,residual\n";
    for (std::size_t i = 0; i < s.eigenvalues.size(); ++i) {
        const double res = i < s.residuals.size() ? s.residuals[i] : 0.0;
        os << operator_name_str(s.op) << ',' << s.degree << ',' << i << ','
           << detail::fmt_g17(s.eigenvalues[i]) << ',' << detail::fmt_g17(res) << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Text tables

inline std::string validation_to_text(const ValidationReport& r) {
    std::ostringstream os;
    os << "validation: " << (r.passed ? "passed" : "FAILED") << "\n";
    for (const auto& f : r.failures) os << "  gate failure: " << f.message << "\n";
    os << "  d.d residual            " << detail::fmt_g17(r.d_squared_residual) << "\n";
    os << "  d(kappa) residual       " << detail::fmt_g17(r.dkappa_residual) << "\n";
    os << "  realizability residual  " << detail::fmt_g17(r.realizability_residual) << "\n";
    os << "  kappa exactness         " << detail::fmt_g17(r.kappa_exactness_residual) << "\n";
    os << "  taut                    " << (r.taut ? "true" : "false") << "\n";
    return os.str();
}

inline std::string identity_to_text(const IdentitySuiteReport& r, double tol) {
    std::ostringstream os;
    os << "identity suite: max residual " << detail::fmt_g17(r.max_residual) << " against tolerance "
       << detail::fmt_g17(tol) << " -> " << (r.pass(tol) ? "pass" : "FAIL") << "\n";
    for (const auto& row : r.rows)
        os << "  " << row.key << " [k=" << row.degree << "]  " << detail::fmt_g17(row.residual)
           << "  (" << row.display << ")\n";
    return os.str();
}

inline std::string spectrum_to_text(const SpectrumResult& s) {
    std::ostringstream os;
    os << "operator " << operator_name_str(s.op) << ", degree " << s.degree << ", dimension "
       << s.dimension << "\n";
    for (std::size_t i = 0; i < s.eigenvalues.size(); ++i) {
        os << "  " << i << "  " << detail::fmt_g17(s.eigenvalues[i]);
        if (i < s.residuals.size()) os << "  residual " << detail::fmt_g17(s.residuals[i]);
        os << "\n";
    }
    os << "clusters:";
    for (const auto& c : s.clusters)
        os << "  " << detail::fmt_g17(c.value) << " x" << c.multiplicity;
    os << "\n";
    return os.str();
}

inline std::string duality_to_text(const DualityReport& d) {
    std::ostringstream os;
    os << "duality degrees (" << d.degree_low << ", " << d.degree_high << "): compared "
       << d.compared << "\n";
    os << "  eigenvalue gap  " << detail::fmt_g17(d.eigenvalue_gap) << "\n";
    os << "  star residual   " << detail::fmt_g17(d.star_residual) << "\n";
    return os.str();
}

inline std::string cohomology_to_text(const CohomologyReport& r) {
    std::ostringstream os;
    os << "codimension " << r.q << "\n";
    os << "betti   ";
    for (int b : r.betti) os << " " << b;
    os << "\ntwisted ";
    for (int b : r.twisted_betti) os << " " << b;
    os << "\neuler " << r.euler << ", twisted euler " << r.twisted_euler << "\n";
    os << "taut " << (r.taut ? "true" : "false");
    os << ", obstruction " << detail::fmt_g17(r.taut_obstruction) << "\n";
    if (r.signature) os << "signature " << *r.signature << "\n";
    for (const auto& d : r.duality)
        os << "duality (" << d.degree_low << "," << d.degree_high << "): gap "
           << detail::fmt_g17(d.eigenvalue_gap) << ", star residual "
           << detail::fmt_g17(d.star_residual) << "\n";
    if (r.ordinary_via_ranks) os << "ordinary Betti numbers counted from ranks of d\n";
    if (!r.reliable) os << "UNRELIABLE: a harmonic threshold fell inside a cluster\n";
    if (r.refined) os << "grid was doubled once to resolve a borderline cluster\n";
    return os.str();
}

inline std::string conformal_to_text(const ConformalReport& r) {
    std::ostringstream os;
    os << "conformal comparison: max eigenvalue gap " << detail::fmt_g17(r.max_eigenvalue_gap)
       << ", min alignment " << detail::fmt_g17(r.min_alignment) << "\n";
    if (r.h_had_mean) os << "note: the shift had a nonzero mean, removed before comparison\n";
    os << "taut: base " << (r.taut_base ? "true" : "false") << ", shifted "
       << (r.taut_shifted ? "true" : "false") << "\n";
    for (const auto& c : r.per_degree)
        os << "  degree " << c.degree << ": compared " << c.compared << " (" << c.simple_compared
           << " simple), gap " << detail::fmt_g17(c.eigenvalue_gap) << ", alignment "
           << detail::fmt_g17(c.min_alignment) << "\n";
    return os.str();
}

inline std::string suspension_to_text(const SuspensionReport& r) {
    std::ostringstream os;
    os << "suspension bookkeeping, codimension " << r.q << "\n";
    os << "betti  ";
    for (long b : r.betti) os << " " << b;
    os << "\neuler " << r.euler << " (twisted euler equals it)\n";
    os << "taut " << (r.taut ? "true" : "false") << ", oriented "
       << (r.oriented ? "true" : "false") << "\n";
    os << "twisted";
    for (long v : r.twisted) {
        if (v < 0)
            os << " ?";
        else
            os << " " << v;
    }
    os << "\n";
    for (const auto& c : r.constraints) os << "constraint: " << c << "\n";
    return os.str();
}

}  // namespace folhodge
