#pragma once

/**
 * @file model.hpp
 * @brief Reduced coframe models: a q-dimensional coframe with constant
 *        structure two-forms, periodic active coordinates, a constant
 *        transverse metric, and a closed one-form kappa.
 *
 * Forms are coefficient arrays over (grid points) x (Lambda^k basis); the
 * differential acts by spectral collocation along the active coordinates plus
 * the constant structure terms. Closed-form data (kappa, weight potentials)
 * travels as real trigonometric polynomials keyed by integer mode tuples, so
 * that derivatives and exactness questions are answered exactly in mode space
 * before anything touches a grid.
 */

#include <folhodge/exterior.hpp>

#include <complex>
#include <map>
#include <optional>
#include <vector>

namespace folhodge {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.141592653589793238462643383279502884;

/**
 * @brief Real trigonometric polynomial on the active torus.
 *
 * A term is keyed by one integer mode per active axis: mode 0 is the constant
 * factor, mode m > 0 is cos(2 pi m t / L), mode m < 0 is sin(2 pi |m| t / L).
 * The family is closed under partial derivatives, which keeps conformal
 * shifts kappa -> kappa + dh representable without truncation.
 */
struct TrigPoly {
    std::map<std::vector<int>, double> terms;

    static TrigPoly zero() { return {}; }

    static TrigPoly constant(int n_axes, double value) {
        TrigPoly p;
        if (value != 0.0) p.terms[std::vector<int>(n_axes, 0)] = value;
        return p;
    }

    static TrigPoly single(std::vector<int> key, double value) {
        TrigPoly p;
        if (value != 0.0) p.terms[std::move(key)] = value;
        return p;
    }

    bool empty() const { return terms.empty(); }

    int n_axes() const { return terms.empty() ? -1 : static_cast<int>(terms.begin()->first.size()); }

    void add_term(const std::vector<int>& key, double value) {
        if (value == 0.0) return;
        auto it = terms.find(key);
        if (it == terms.end()) {
            terms[key] = value;
        } else {
            it->second += value;
            if (it->second == 0.0) terms.erase(it);
        }
    }

    TrigPoly plus(const TrigPoly& other) const {
        TrigPoly out = *this;
        for (const auto& [k, v] : other.terms) out.add_term(k, v);
        return out;
    }

    TrigPoly scaled(double s) const {
        TrigPoly out;
        if (s == 0.0) return out;
        for (const auto& [k, v] : terms) out.terms[k] = s * v;
        return out;
    }

    /// Exact partial derivative along one active axis of period L.
    TrigPoly derivative(int axis, double period) const {
        TrigPoly out;
        for (const auto& [key, v] : terms) {
            const int m = key.at(axis);
            if (m == 0) continue;
            std::vector<int> k2 = key;
            k2[axis] = -m;
            const double w = 2.0 * kPi * std::abs(m) / period;
            // d/dt cos_m = -w sin_m ; d/dt sin_m = +w cos_m.
            out.add_term(k2, (m > 0) ? -w * v : +w * v);
        }
        return out;
    }

    /// L2 pairing over the unit-mass torus: <cos_m, cos_m> = 1/2 etc.
    double inner(const TrigPoly& other) const {
        double s = 0.0;
        for (const auto& [key, v] : terms) {
            auto it = other.terms.find(key);
            if (it == other.terms.end()) continue;
            double w = 1.0;
            for (int m : key)
                if (m != 0) w *= 0.5;
            s += w * v * it->second;
        }
        return s;
    }

    double norm() const { return std::sqrt(inner(*this)); }

    double mean() const {
        if (terms.empty()) return 0.0;
        auto it = terms.find(std::vector<int>(n_axes(), 0));
        return it == terms.end() ? 0.0 : it->second;
    }

    TrigPoly without_mean() const {
        TrigPoly out = *this;
        if (!out.terms.empty()) out.terms.erase(std::vector<int>(out.n_axes(), 0));
        return out;
    }
};

/// One periodic coordinate: which coframe covector it differentiates against,
/// its period, and its collocation grid size.
struct ActiveAxis {
    int coframe_index = 0;  // 1-based
    double period = 1.0;
    int grid = 8;
};

/// One constant structure term: de^k += value * e^i ^ e^j with i < j.
struct StructureTerm {
    int k = 0;
    int i = 0;
    int j = 0;
    double value = 0.0;
};

/// Collocation grid over the active coordinates; axis 0 varies slowest.
struct Grid {
    std::vector<ActiveAxis> axes;
    long points = 1;
    std::vector<long> stride;

    static Grid build(const std::vector<ActiveAxis>& axes) {
        Grid g;
        g.axes = axes;
        g.stride.assign(axes.size(), 1);
        long s = 1;
        for (int p = static_cast<int>(axes.size()) - 1; p >= 0; --p) {
            g.stride[p] = s;
            s *= axes[p].grid;
        }
        g.points = s;
        return g;
    }

    int n_axes() const { return static_cast<int>(axes.size()); }

    std::vector<int> coords(long idx) const {
        std::vector<int> c(axes.size());
        for (int p = 0; p < n_axes(); ++p) {
            c[p] = static_cast<int>((idx / stride[p]) % axes[p].grid);
        }
        return c;
    }

    double coordinate(int axis, int j) const {
        return axes[axis].period * static_cast<double>(j) / axes[axis].grid;
    }

    /// Position of the axis attached to a coframe index, or -1.
    int axis_of_coframe(int coframe_index) const {
        for (int p = 0; p < n_axes(); ++p)
            if (axes[p].coframe_index == coframe_index) return p;
        return -1;
    }
};

/// Samples of a trigonometric polynomial at the grid points.
inline Eigen::VectorXd sample(const TrigPoly& poly, const Grid& grid) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(grid.points);
    for (const auto& [key, v] : poly.terms) {
        if (static_cast<int>(key.size()) != grid.n_axes())
            throw std::invalid_argument("mode tuple length does not match the active axes");
        for (long x = 0; x < grid.points; ++x) {
            const auto c = grid.coords(x);
            double f = v;
            for (int p = 0; p < grid.n_axes(); ++p) {
                const int m = key[p];
                if (m == 0) continue;
                const double arg = 2.0 * kPi * std::abs(m) * grid.coordinate(p, c[p]) / grid.axes[p].period;
                f *= (m > 0) ? std::cos(arg) : std::sin(arg);
            }
            out(x) += f;
        }
    }
    return out;
}

/**
 * @brief Fourier differentiation matrix on N uniform points of period L.
 *
 * Exact on trigonometric polynomials below the Nyquist mode; the Nyquist
 * mode itself is differentiated to zero (the usual symmetric convention).
 */
inline Eigen::MatrixXd fourier_diff_matrix(int N, double period) {
    if (N < 2 || N % 2 != 0) throw std::invalid_argument("grid size must be even and >= 2");
    // Circulant kernel: ker(r) = (1/N) sum_m i w_m exp(2 pi i m r / N).
    std::vector<cplx> ker(N, cplx(0.0, 0.0));
    for (int m = 0; m < N; ++m) {
        int f = (m <= N / 2 - 1) ? m : (m == N / 2 ? 0 : m - N);
        const cplx iw(0.0, 2.0 * kPi * f / period);
        for (int r = 0; r < N; ++r) {
            const double ang = 2.0 * kPi * m * r / N;
            ker[r] += iw * cplx(std::cos(ang), std::sin(ang));
        }
    }
    Eigen::MatrixXd D(N, N);
    for (int j = 0; j < N; ++j)
        for (int l = 0; l < N; ++l) {
            const cplx v = ker[(j - l + N) % N] / static_cast<double>(N);
            D(j, l) = v.real();
        }
    return D;
}

/**
 * @brief Full-band Fourier differentiation matrix (complex, anti-Hermitian).
 *
 * Same collocation derivative, but the Nyquist mode is differentiated as
 * frequency +N/2 instead of being dropped. The price is an imaginary part
 * in the top mode; the gain is that the kernel is exactly the constants,
 * so rank and kernel bookkeeping of any complex assembled from this matrix
 * match the continuum. With the zeroed convention every Nyquist product
 * mode would masquerade as a harmonic representative and inflate Betti
 * numbers, which is a discretization artifact with no geometric meaning.
 */
inline Eigen::MatrixXcd fourier_diff_matrix_full_band(int N, double period) {
    if (N < 2 || N % 2 != 0) throw std::invalid_argument("grid size must be even and >= 2");
    std::vector<cplx> ker(N, cplx(0.0, 0.0));
    for (int m = 0; m < N; ++m) {
        const int f = (m <= N / 2) ? m : m - N;
        const cplx iw(0.0, 2.0 * kPi * f / period);
        for (int r = 0; r < N; ++r) {
            const double ang = 2.0 * kPi * m * r / N;
            ker[r] += iw * cplx(std::cos(ang), std::sin(ang));
        }
    }
    Eigen::MatrixXcd D(N, N);
    for (int j = 0; j < N; ++j)
        for (int l = 0; l < N; ++l) D(j, l) = ker[(j - l + N) % N] / static_cast<double>(N);
    return D;
}

/// Derivative of 1-D periodic samples (length = grid size).
inline Eigen::VectorXcd spectral_derivative(const Eigen::VectorXcd& samples, double period) {
    const int N = static_cast<int>(samples.size());
    return fourier_diff_matrix(N, period) * samples;
}

/// Derivative along one axis of a flattened multi-axis sample array.
inline Eigen::VectorXcd spectral_derivative_axis(const Grid& grid, const Eigen::VectorXcd& samples,
                                                 int axis) {
    if (axis < 0 || axis >= grid.n_axes()) throw std::invalid_argument("axis is not active");
    if (samples.size() != grid.points) throw std::invalid_argument("sample array does not match grid");
    const int N = grid.axes[axis].grid;
    const long str = grid.stride[axis];
    const Eigen::MatrixXd D = fourier_diff_matrix(N, grid.axes[axis].period);
    Eigen::VectorXcd out(grid.points);
    const long lines = grid.points / N;
    for (long line = 0; line < lines; ++line) {
        // Base flat index of this line: insert a zero coordinate at `axis`.
        const long outer = line / str;
        const long inner = line % str;
        const long base = outer * str * N + inner;
        Eigen::VectorXcd v(N);
        for (int j = 0; j < N; ++j) v(j) = samples(base + j * str);
        const Eigen::VectorXcd dv = D * v;
        for (int j = 0; j < N; ++j) out(base + j * str) = dv(j);
    }
    return out;
}

/**
 * @brief Finite presentation of a reduced basic complex.
 *
 * Validation (see operators.hpp) gates models on d^2 = 0, closedness of
 * kappa, positive-definiteness of the metric, and expressibility of
 * kappa - modular as an exact form, before any operator is assembled.
 */
struct CoframeModel {
    int q = 0;
    std::vector<StructureTerm> structure;
    std::vector<ActiveAxis> active;
    Eigen::MatrixXd metric;          // q x q, SPD
    std::map<int, TrigPoly> kappa;   // coframe index (1-based) -> coefficient
    int orientation = +1;

    Grid grid() const { return Grid::build(active); }

    long dim(int k) const {
        if (k < 0 || k > q) return 0;
        return grid().points * binomial(q, k);
    }

    CoframeModel with_doubled_grid() const {
        CoframeModel m = *this;
        for (auto& a : m.active) a.grid *= 2;
        return m;
    }

    /// Shift kappa by the exact one-form dh (computed in mode space).
    CoframeModel with_kappa_shift(const TrigPoly& h) const {
        CoframeModel m = *this;
        for (int p = 0; p < static_cast<int>(active.size()); ++p) {
            const TrigPoly dph = h.derivative(p, active[p].period);
            if (dph.empty()) continue;
            auto& comp = m.kappa[active[p].coframe_index];
            comp = comp.plus(dph);
            if (comp.empty()) m.kappa.erase(active[p].coframe_index);
        }
        return m;
    }

    /// Per-coframe-component samples of kappa, P x q (missing components zero).
    Eigen::MatrixXd kappa_samples(const Grid& g) const {
        Eigen::MatrixXd K = Eigen::MatrixXd::Zero(g.points, q);
        for (const auto& [ci, poly] : kappa) {
            if (ci < 1 || ci > q) throw std::out_of_range("kappa component index outside 1..q");
            K.col(ci - 1) = sample(poly, g);
        }
        return K;
    }
};

/// Degree-k element: coefficients over (grid point) x (Lambda^k basis),
/// flattened with the basis component varying fastest.
struct BasicForm {
    int degree = 0;
    Eigen::VectorXcd coef;

    double max_imag() const {
        double m = 0.0;
        for (long i = 0; i < coef.size(); ++i) m = std::max(m, std::abs(coef(i).imag()));
        return m;
    }
    bool real_within(double tol = 1e-12) const { return max_imag() < tol; }
};

/**
 * @brief Constant one-form tr(ad) of the structure constants.
 *
 * Component i is sum_j S^j_{ij} with S^k antisymmetrized in its subscripts;
 * this is the unique constant one-form kappa for which the star-sandwich
 * codifferential coincides with the flat-weight adjoint of d. It does not
 * depend on the metric.
 */
inline Eigen::VectorXd modular_form(const CoframeModel& model) {
    Eigen::VectorXd mod = Eigen::VectorXd::Zero(model.q);
    for (const auto& t : model.structure) {
        // S^k_{ij} = value (i < j); only the pair with j == k lands on the trace.
        if (t.k == t.j) mod(t.i - 1) += t.value;
    }
    return mod;
}

/// One-form with closed-form coefficients, component per coframe index.
using OneFormPoly = std::map<int, TrigPoly>;

/// Exact mode-space exterior derivative of a closed-form one-form:
/// two-form component tables keyed by the multi-index {i,j}, i < j.
inline std::map<std::pair<int, int>, TrigPoly> one_form_derivative(const CoframeModel& model,
                                                                   const OneFormPoly& omega) {
    std::map<std::pair<int, int>, TrigPoly> out;
    const int na = static_cast<int>(model.active.size());
    for (const auto& [b, g] : omega) {
        if (b < 1 || b > model.q) throw std::out_of_range("one-form component outside 1..q");
        // Derivative part: sum_p (d_p g) e^{c_p} ^ e^b.
        for (int p = 0; p < na; ++p) {
            const int c = model.active[p].coframe_index;
            if (c == b) continue;
            const TrigPoly dg = g.derivative(p, model.active[p].period);
            if (dg.empty()) continue;
            if (c < b)
                out[{c, b}] = out[{c, b}].plus(dg);
            else
                out[{b, c}] = out[{b, c}].plus(dg.scaled(-1.0));
        }
        // Structure part: g * de^b.
        for (const auto& t : model.structure)
            if (t.k == b) out[{t.i, t.j}] = out[{t.i, t.j}].plus(g.scaled(t.value));
    }
    return out;
}

/// Gram-weighted L2 norm of a two-form given by component tables.
inline double two_form_poly_norm(const CoframeModel& model, const MetricGram& gram,
                                 const std::map<std::pair<int, int>, TrigPoly>& comp) {
    const auto basis = all_multi_indices(model.q, 2);
    const Eigen::MatrixXd& G2 = gram.degree_gram[2];
    double s = 0.0;
    for (const auto& [ij, Ti] : comp) {
        const int ri = multi_index_rank(model.q, MultiIndex::from_indices({ij.first, ij.second}));
        for (const auto& [kl, Tj] : comp) {
            const int rj = multi_index_rank(model.q, MultiIndex::from_indices({kl.first, kl.second}));
            s += G2(ri, rj) * Ti.inner(Tj);
        }
    }
    return std::sqrt(std::max(0.0, s));
}

inline double one_form_poly_norm(const CoframeModel& model, const MetricGram& gram,
                                 const OneFormPoly& omega) {
    const Eigen::MatrixXd& G1 = gram.covector_gram;
    double s = 0.0;
    for (const auto& [a, Ta] : omega)
        for (const auto& [b, Tb] : omega) s += G1(a - 1, b - 1) * Ta.inner(Tb);
    return std::sqrt(std::max(0.0, s));
}

/// Distinct validation failure codes; one per admission gate.
enum class GateCode {
    malformed_structure,   // k = i, i >= j, or an index outside 1..q
    grid_not_even,
    grid_too_small,        // N < 8
    active_malformed,      // duplicate or out-of-range coframe index
    metric_shape,
    metric_not_spd,
    kappa_malformed,       // component index or mode tuple arity invalid
    d_squared,             // structure constants fail d(d(.)) = 0
    kappa_not_closed,
    not_realizable,        // kappa - modular admits no exact potential
};

inline const char* gate_code_name(GateCode c) {
    switch (c) {
        case GateCode::malformed_structure: return "malformed_structure";
        case GateCode::grid_not_even: return "grid_not_even";
        case GateCode::grid_too_small: return "grid_too_small";
        case GateCode::active_malformed: return "active_malformed";
        case GateCode::metric_shape: return "metric_shape";
        case GateCode::metric_not_spd: return "metric_not_spd";
        case GateCode::kappa_malformed: return "kappa_malformed";
        case GateCode::d_squared: return "d_squared";
        case GateCode::kappa_not_closed: return "kappa_not_closed";
        case GateCode::not_realizable: return "not_realizable";
    }
    return "unknown";
}

struct GateFailure {
    GateCode code;
    std::string message;
};

/**
 * @brief Outcome of the model admission gates.
 *
 * A model reaches operator assembly only if `passed`; the weight potential
 * recorded here (least-squares solution of dh = kappa - modular) defines the
 * inner-product weight mu = e^{-h} under which the star-sandwich
 * codifferential is the adjoint of d.
 */
struct ValidationReport {
    bool passed = false;
    std::vector<GateFailure> failures;

    double d_squared_residual = 0.0;      // max over degrees, relative
    double dkappa_residual = 0.0;         // exact mode-space closedness defect
    double realizability_residual = 0.0;  // |dh - (kappa - modular)|
    double kappa_exactness_residual = 0.0;
    bool taut = false;                    // kappa itself is exact

    Eigen::VectorXd modular;   // q components
    TrigPoly weight_potential; // h with dh ~ kappa - modular, mean zero
    TrigPoly kappa_potential;  // best-fit h0 with dh0 ~ kappa (taut witness)
};

struct PotentialResult {
    TrigPoly h;                    // mean-zero minimizer of |dh - omega|
    double residual = 0.0;         // attained |dh - omega| in the model L2 norm
    double omega_norm = 0.0;
    bool closed = true;            // precondition check, reported not projected
    double closedness_residual = 0.0;
    bool exact() const { return residual <= 1e-10 * std::max(omega_norm, 1e-300); }
};

/**
 * @brief Least-squares potential for a one-form with closed-form coefficients.
 *
 * Minimizes |dh - omega| over mean-zero trigonometric h, exactly, one
 * sign-flip orbit of mode tuples at a time (the derivative couples cos and
 * sin modes only within such an orbit). Components along inactive covectors
 * and the constant modes of active components cannot be matched by any dh
 * and land in the residual; that zero-mode obstruction is precisely what
 * separates taut from nontaut models.
 */
inline PotentialResult solve_exact_potential(const CoframeModel& model, const OneFormPoly& omega) {
    const MetricGram gram = MetricGram::build(model.metric);
    const int na = static_cast<int>(model.active.size());
    PotentialResult res;
    res.omega_norm = one_form_poly_norm(model, gram, omega);

    const auto domega = one_form_derivative(model, omega);
    res.closedness_residual = two_form_poly_norm(model, gram, domega);
    res.closed = res.closedness_residual <= 1e-10 * std::max(res.omega_norm, 1e-300);

    // Group every appearing mode tuple by its absolute pattern.
    std::map<std::vector<int>, bool> patterns;
    for (const auto& [ci, poly] : omega)
        for (const auto& [key, v] : poly.terms) {
            if (static_cast<int>(key.size()) != na)
                throw std::invalid_argument("mode tuple length does not match the active axes");
            std::vector<int> abs_key(key.size());
            for (std::size_t t = 0; t < key.size(); ++t) abs_key[t] = std::abs(key[t]);
            patterns[abs_key] = true;
        }

    const Eigen::MatrixXd& G1 = gram.covector_gram;
    const Eigen::MatrixXd L1 = Eigen::LLT<Eigen::MatrixXd>(G1).matrixL();
    double resid_sq = 0.0;

    for (const auto& [A, unused] : patterns) {
        (void)unused;
        // Orbit: all sign assignments on the nonzero entries of A.
        std::vector<int> nz;
        for (int t = 0; t < na; ++t)
            if (A[t] != 0) nz.push_back(t);
        std::vector<std::vector<int>> orbit;
        const int s = 1 << nz.size();
        for (int b = 0; b < s; ++b) {
            std::vector<int> m = A;
            for (std::size_t t = 0; t < nz.size(); ++t)
                if (b & (1 << t)) m[nz[t]] = -A[nz[t]];
            orbit.push_back(std::move(m));
        }
        std::map<std::vector<int>, int> orbit_rank;
        for (int t = 0; t < s; ++t) orbit_rank[orbit[t]] = t;

        double mode_weight = 1.0;
        for (std::size_t t = 0; t < nz.size(); ++t) mode_weight *= 0.5;

        // Right-hand side: omega coefficients over (component, orbit mode).
        Eigen::VectorXd b_all = Eigen::VectorXd::Zero(model.q * s);
        for (const auto& [ci, poly] : omega)
            for (int t = 0; t < s; ++t) {
                auto it = poly.terms.find(orbit[t]);
                if (it != poly.terms.end()) b_all((ci - 1) * s + t) = it->second;
            }

        if (nz.empty()) {
            // Constant mode: no derivative reaches it; pure obstruction.
            Eigen::VectorXd v(model.q);
            for (int c = 0; c < model.q; ++c) v(c) = b_all(c * s);
            resid_sq += mode_weight * v.dot(G1 * v);
            continue;
        }

        // Design matrix: column m, rows (active component, target mode).
        Eigen::MatrixXd E = Eigen::MatrixXd::Zero(model.q * s, s);
        for (int m = 0; m < s; ++m)
            for (int p = 0; p < na; ++p) {
                const int mp = orbit[m][p];
                if (mp == 0) continue;
                std::vector<int> target = orbit[m];
                target[p] = -mp;
                const int row_mode = orbit_rank.at(target);
                const int ci = model.active[p].coframe_index;
                const double w = 2.0 * kPi * std::abs(mp) / model.active[p].period;
                E((ci - 1) * s + row_mode, m) += (mp > 0) ? -w : +w;
            }

        // Whiten with G1^{1/2} on the component dimension and solve.
        Eigen::MatrixXd Ew(model.q * s, s);
        Eigen::VectorXd bw(model.q * s);
        for (int t = 0; t < s; ++t) {
            Eigen::VectorXd col_b(model.q), tmp(model.q);
            for (int c = 0; c < model.q; ++c) col_b(c) = b_all(c * s + t);
            tmp = L1.transpose() * col_b;
            for (int c = 0; c < model.q; ++c) bw(c * s + t) = tmp(c);
            for (int m = 0; m < s; ++m) {
                for (int c = 0; c < model.q; ++c) col_b(c) = E(c * s + t, m);
                tmp = L1.transpose() * col_b;
                for (int c = 0; c < model.q; ++c) Ew(c * s + t, m) = tmp(c);
            }
        }
        const Eigen::VectorXd coef = Ew.colPivHouseholderQr().solve(bw);
        resid_sq += mode_weight * (Ew * coef - bw).squaredNorm();
        for (int m = 0; m < s; ++m) res.h.add_term(orbit[m], coef(m));
    }

    res.residual = std::sqrt(std::max(0.0, resid_sq));
    return res;
}

}  // namespace folhodge
