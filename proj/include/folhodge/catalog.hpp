#pragma once

/**
 * @file catalog.hpp
 * @brief Built-in models: the log-spiral flow, flat tori with conformal
 *        weights, products with extra circles, and suspension bookkeeping.
 *
 * The numerical models are small coframe presentations whose spectra and
 * cohomology have closed forms, so every report they produce can be checked
 * by hand. The suspension reports are exact integer bookkeeping: their basic
 * complexes reduce to finite-dimensional data, and no discretization is
 * involved at all.
 */

#include <cmath>
#include <cstdlib>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "folhodge/model.hpp"

namespace folhodge {

// ---------------------------------------------------------------------------
// Numerical models

/// Larger root of x^2 - trace x + 1 = 0, the stretch factor of a hyperbolic
/// integer matrix with the given trace. Requires trace > 2.
inline double lambda_from_trace(double trace) {
    if (!(trace > 2.0))
        throw std::invalid_argument("lambda_from_trace: trace must exceed 2 (hyperbolic matrix)");
    return 0.5 * (trace + std::sqrt(trace * trace - 4.0));
}

/**
 * Codimension-two nontaut model of the log-spiral flow: coframe (e1, e2)
 * with de2 = (log lambda) e1 ^ e2, kappa = (log lambda) e1, identity metric,
 * and one active circle of period 1 at N points. kappa equals the modular
 * form and its class is nonzero, so the model is nontaut; the twisted
 * Laplacian on functions has the closed-form spectrum
 * 4 pi^2 n^2 + (log lambda)^2 / 4.
 */
inline CoframeModel make_carriere(double lambda, int N) {
    if (!(lambda > 1.0)) throw std::invalid_argument("make_carriere: lambda must exceed 1");
    if (N < 8 || N % 2 != 0) throw std::invalid_argument("make_carriere: N must be even and >= 8");
    CoframeModel m;
    m.q = 2;
    const double L = std::log(lambda);
    m.structure = {{2, 1, 2, L}};
    m.active = {{1, 1.0, N}};
    m.metric = Eigen::MatrixXd::Identity(2, 2);
    m.kappa[1] = TrigPoly::constant(1, L);
    return m;
}

/**
 * Flat torus of codimension q: abelian structure, every coordinate active at
 * N points with period 1, kappa = dh for the given potential. Taut for any
 * h, with the Betti numbers of the q-torus.
 */
inline CoframeModel make_flat_torus(int q, int N, const TrigPoly& h = {}) {
    if (q < 1) throw std::invalid_argument("make_flat_torus: q must be at least 1");
    if (N < 8 || N % 2 != 0) throw std::invalid_argument("make_flat_torus: N must be even and >= 8");
    CoframeModel m;
    m.q = q;
    for (int c = 1; c <= q; ++c) m.active.push_back({c, 1.0, N});
    m.metric = Eigen::MatrixXd::Identity(q, q);
    if (!h.empty()) m = m.with_kappa_shift(h);
    return m;
}

/**
 * Log-spiral model times m extra circles: codimension q = 2 + m with the
 * spiral structure and kappa on indices 1 and 2, and abelian circles on
 * indices 3..2+m. Odd m gives an odd-codimension nontaut model; the twisted
 * cohomology vanishes in every degree because the spiral factor's does.
 *
 * The grid budget N is divided across the 1 + m active axes as
 * max(8, N >> 2m) points per axis, so the default sizes stay at desk scale.
 */
inline CoframeModel make_carriere_product(double lambda, int extra_circles, int N) {
    if (extra_circles < 1)
        throw std::invalid_argument("make_carriere_product: need at least one extra circle");
    if (!(lambda > 1.0)) throw std::invalid_argument("make_carriere_product: lambda must exceed 1");
    if (N < 8) throw std::invalid_argument("make_carriere_product: N must be >= 8");
    const int m = extra_circles;
    const int per_axis = std::max(8, N >> (2 * m));
    CoframeModel model;
    model.q = 2 + m;
    const double L = std::log(lambda);
    model.structure = {{2, 1, 2, L}};
    model.active = {{1, 1.0, per_axis}};
    for (int c = 3; c <= 2 + m; ++c) model.active.push_back({c, 1.0, per_axis});
    model.metric = Eigen::MatrixXd::Identity(model.q, model.q);
    model.kappa[1] = TrigPoly::constant(1 + m, L);
    return model;
}

// ---------------------------------------------------------------------------
// Suspension bookkeeping

/// What the fiber foliation contributes to the basic complex of a suspension.
enum class SuspensionPattern {
    ConstantsOnly,                 ///< only constants are basic on the fiber
    ConstantsAndTransverseVolume,  ///< constants plus the transverse volume form
};

/**
 * Input data for the suspension bookkeeping: a suspension over a base with
 * the given Betti numbers whose fiber foliation admits only the listed basic
 * forms. Tautness is an assertion by the caller, because it depends on the
 * holonomy metrics and not on this combinatorial data alone.
 */
struct SuspensionInput {
    std::vector<long> base_betti;
    SuspensionPattern pattern = SuspensionPattern::ConstantsOnly;
    int fiber_codim = 0;   ///< codimension of the fiber foliation inside the fiber
    bool oriented = false; ///< transverse orientability of the total foliation
    bool taut = false;
};

/**
 * Exact integer output: the ordinary Betti table, the Euler characteristic,
 * and what is forced about the twisted Betti numbers. Unknown twisted
 * dimensions are -1; the linear constraint they satisfy is reported both as
 * structured coefficients and as display text.
 */
struct SuspensionReport {
    int q = 0;
    std::vector<long> betti;
    long euler = 0;
    bool taut = false;
    bool oriented = false;

    std::vector<long> twisted;  ///< known entries >= 0, unknown entries -1
    long twisted_euler = 0;     ///< always equals euler

    /// Alternating-sum constraint on the unknown entries, after duality
    /// folding: sum of coeff * b~degree over the map equals euler.
    std::map<int, long> alternating_coeffs;
    std::vector<std::pair<int, int>> duality_pairs;  ///< b~high = b~low
    std::optional<long> twisted_b1_floor;            ///< lower bound forced on b~1
    std::vector<std::string> constraints;            ///< display form of all of the above
};

namespace detail {

inline std::string twisted_sum_string(const std::map<int, long>& coeffs, long rhs) {
    // Descending degree, leading sign omitted when positive.
    std::string s;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) {
        const long c = it->second;
        if (c == 0) continue;
        if (!s.empty())
            s += (c > 0) ? " + " : " - ";
        else if (c < 0)
            s += "-";
        const long a = std::labs(c);
        if (a != 1) s += std::to_string(a) + " ";
        s += "b~" + std::to_string(it->first);
    }
    if (s.empty()) s = "0";
    return s + " = " + std::to_string(rhs);
}

}  // namespace detail

inline SuspensionReport suspension_report(const SuspensionInput& in) {
    if (in.base_betti.empty())
        throw std::invalid_argument("suspension: base Betti list must not be empty");
    for (long b : in.base_betti)
        if (b < 0) throw std::invalid_argument("suspension: Betti numbers must be nonnegative");
    if (in.fiber_codim < 0)
        throw std::invalid_argument("suspension: fiber codimension must be nonnegative");
    const bool volume = in.pattern == SuspensionPattern::ConstantsAndTransverseVolume;
    if (volume && !in.oriented)
        throw std::invalid_argument(
            "suspension: a transverse volume form requires an oriented transverse structure");
    if (volume && in.fiber_codim < 1)
        throw std::invalid_argument(
            "suspension: a transverse volume form requires positive fiber codimension");

    SuspensionReport rep;
    const int base_dim = static_cast<int>(in.base_betti.size()) - 1;
    rep.q = base_dim + in.fiber_codim;
    rep.taut = in.taut;
    rep.oriented = in.oriented;

    // Basic forms are base forms, optionally wedged with the fiber's
    // transverse volume (degree fiber_codim), so the table is a shifted sum.
    const auto base_at = [&](int k) -> long {
        return (k >= 0 && k <= base_dim) ? in.base_betti[k] : 0;
    };
    rep.betti.resize(rep.q + 1);
    for (int k = 0; k <= rep.q; ++k)
        rep.betti[k] = base_at(k) + (volume ? base_at(k - in.fiber_codim) : 0);
    for (int k = 0; k <= rep.q; ++k) rep.euler += (k % 2 == 0 ? 1 : -1) * rep.betti[k];
    rep.twisted_euler = rep.euler;  // index invariance of the twisted complex

    if (in.taut) {
        // Conjugation by e^{h/2} identifies the two complexes outright.
        rep.twisted = rep.betti;
        return rep;
    }

    // Nontaut: the twisted kernel and cokernel in the end degrees vanish.
    rep.twisted.assign(rep.q + 1, -1);
    rep.twisted[0] = 0;
    rep.twisted[rep.q] = 0;
    rep.constraints.push_back("b~0 = 0");
    if (rep.q > 0) rep.constraints.push_back("b~" + std::to_string(rep.q) + " = 0");

    // Duality pairs the unknowns only when the transverse structure is
    // oriented; fold them into the alternating-sum constraint.
    for (int k = 1; k < rep.q; ++k) {
        const long sign = (k % 2 == 0) ? 1 : -1;
        int target = k;
        if (in.oriented && rep.q - k < k) target = rep.q - k;
        rep.alternating_coeffs[target] += sign;
    }
    if (in.oriented) {
        for (int k = 1; 2 * k < rep.q; ++k) {
            rep.duality_pairs.emplace_back(rep.q - k, k);
            rep.constraints.push_back("b~" + std::to_string(rep.q - k) + " = b~" +
                                      std::to_string(k));
        }
    }
    for (auto it = rep.alternating_coeffs.begin(); it != rep.alternating_coeffs.end();)
        it = (it->second == 0) ? rep.alternating_coeffs.erase(it) : std::next(it);

    if (rep.alternating_coeffs.empty()) {
        // No interior unknowns survive the folding, so the twisted Euler
        // characteristic is forced to zero; a nonzero ordinary one means the
        // asserted nontautness contradicts the Betti table.
        if (rep.euler != 0)
            throw std::invalid_argument(
                "suspension: nontaut input forces twisted Euler characteristic 0, but the "
                "Betti table gives " + std::to_string(rep.euler));
    } else if (rep.alternating_coeffs.size() == 1) {
        // A single surviving unknown is pinned exactly by the Euler count.
        const auto [deg, coeff] = *rep.alternating_coeffs.begin();
        if (rep.euler % coeff != 0 || rep.euler / coeff < 0)
            throw std::invalid_argument(
                "suspension: the Euler constraint has no nonnegative integer solution");
        const long value = rep.euler / coeff;
        rep.twisted[deg] = value;
        if (rep.oriented && rep.q - deg != deg) rep.twisted[rep.q - deg] = value;
        rep.constraints.push_back("b~" + std::to_string(deg) + " = " + std::to_string(value));
        rep.alternating_coeffs.clear();
    } else {
        rep.constraints.push_back(detail::twisted_sum_string(rep.alternating_coeffs, rep.euler));
    }

    // When the constraint ties exactly b~1 and b~2 together, nonnegativity
    // of b~2 forces a floor on b~1.
    if (rep.alternating_coeffs.size() == 2 && rep.alternating_coeffs.count(1) &&
        rep.alternating_coeffs.count(2) && rep.alternating_coeffs.at(2) == 1) {
        const long c1 = -rep.alternating_coeffs.at(1);  // b~2 = euler + c1 * b~1
        if (c1 > 0) {
            const long floor = std::max<long>(0, (-rep.euler + c1 - 1) / c1);
            rep.twisted_b1_floor = floor;
            if (floor > 0) rep.constraints.push_back("b~1 >= " + std::to_string(floor));
        }
    }
    return rep;
}

/**
 * Built-in suspension examples over a genus-2 base (Betti 1, 4, 1).
 *
 * Preset "7.2": non-oriented codimension-1 fiber contributing constants
 * only; the total codimension-3 foliation is nontaut. Preset "7.3":
 * oriented codimension-2 fiber contributing constants and its transverse
 * volume; the total codimension-4 foliation is nontaut.
 */
inline SuspensionReport suspension_report(const std::string& preset) {
    SuspensionInput in;
    in.base_betti = {1, 4, 1};
    in.taut = false;
    if (preset == "7.2") {
        in.pattern = SuspensionPattern::ConstantsOnly;
        in.fiber_codim = 1;
        in.oriented = false;
    } else if (preset == "7.3") {
        in.pattern = SuspensionPattern::ConstantsAndTransverseVolume;
        in.fiber_codim = 2;
        in.oriented = true;
    } else {
        throw std::invalid_argument("unknown suspension preset \"" + preset +
                                    "\" (available: 7.2, 7.3)");
    }
    return suspension_report(in);
}

}  // namespace folhodge
