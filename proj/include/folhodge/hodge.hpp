#pragma once

/**
 * @file hodge.hpp
 * @brief Spectra, harmonic spaces, Betti numbers, tautness, duality,
 *        conformal comparison, signature, and the Hodge decomposition.
 *
 * Everything here reduces to dense Hermitian eigenproblems. An operator A
 * that is self-adjoint in the weighted inner product <u, W v> becomes an
 * honest Hermitian matrix after conjugation by the diagonal square root of
 * the weight, H = W^{1/2} A W^{-1/2}; we diagonalize H and map eigenvectors
 * back through W^{-1/2}, so the reported vectors are W-orthonormal forms.
 * The Hermitian defect of H is measured before any eigensolve and a failure
 * of self-adjointness is reported as a ReliabilityError rather than silently
 * symmetrized away.
 */

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "folhodge/operators.hpp"

namespace folhodge {

/// Numerical-reliability failure: thresholds inside clusters, ambiguous
/// ranks, loss of self-adjointness. Distinct from validation failures.
class ReliabilityError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline double dinf() { return std::numeric_limits<double>::infinity(); }

/// Dense W^{1/2} A W^{-1/2} for a Laplacian block, with its Hermitian defect.
inline Eigen::MatrixXcd symmetrized_laplacian(const Engine& eng, OperatorName op, int k,
                                              double* defect_out = nullptr) {
    if (op != OperatorName::Delta_b && op != OperatorName::Delta_tilde)
        throw std::invalid_argument("spectral routines accept only Delta_b and Delta_tilde");
    const OperatorBlock blk = eng.assemble(op, k);
    const SparseC M = SparseC(eng.weight_half(k) * blk.mat * eng.weight_half_inv(k));
    Eigen::MatrixXcd H(M);
    const double defect = (H - Eigen::MatrixXcd(H.adjoint())).norm() / std::max(1.0, H.norm());
    if (defect_out) *defect_out = defect;
    if (defect > 1e-12)
        throw ReliabilityError(std::string(operator_name_str(op)) + " at degree " +
                               std::to_string(k) + " is not self-adjoint in the model weight " +
                               "(Hermitian defect " + std::to_string(defect) +
                               "); its spectrum is not trustworthy");
    Eigen::MatrixXcd Hs = 0.5 * (H + Eigen::MatrixXcd(H.adjoint()));
    return Hs;
}

/// Full eigendecomposition of the symmetrized Laplacian. Raw eigenvectors
/// live in the symmetrized coordinates (orthonormal columns).
struct FullEigs {
    Eigen::VectorXd values;
    Eigen::MatrixXcd raw_vectors;  // empty unless requested
    double hermitian_defect = 0.0;
};

inline FullEigs laplacian_eigs(const Engine& eng, OperatorName op, int k, bool with_vectors) {
    FullEigs out;
    Eigen::MatrixXcd H = symmetrized_laplacian(eng, op, k, &out.hermitian_defect);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es;
    es.compute(H, with_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("dense Hermitian eigendecomposition did not converge");
    out.values = es.eigenvalues();
    if (with_vectors) out.raw_vectors = es.eigenvectors();
    return out;
}

/// Lazily computed spectra shared by the pieces of a cohomology report.
class SpectraCache {
  public:
    explicit SpectraCache(const Engine& eng) : eng_(eng) {}

    const FullEigs& get(OperatorName op, int k, bool with_vectors) {
        auto key = std::make_pair(static_cast<int>(op), k);
        auto it = store_.find(key);
        if (it != store_.end() && (!with_vectors || it->second.raw_vectors.cols() > 0))
            return it->second;
        FullEigs eigs = laplacian_eigs(eng_, op, k, with_vectors);
        return store_[key] = std::move(eigs);
    }

    const Engine& engine() const { return eng_; }

  private:
    const Engine& eng_;
    std::map<std::pair<int, int>, FullEigs> store_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Spectrum

/// One group of numerically coincident eigenvalues (relative gap 1e-7).
struct EigenCluster {
    double value = 0.0;  // smallest member of the group
    int multiplicity = 0;
};

struct SpectrumResult {
    OperatorName op = OperatorName::Delta_b;
    int degree = 0;
    long dimension = 0;
    std::vector<double> eigenvalues;     ///< ascending, the requested count
    std::vector<EigenCluster> clusters;  ///< multiplicity grouping of the list above
    std::vector<double> residuals;       ///< |A v - lambda v| / |v| per pair
    Eigen::MatrixXcd vectors;            ///< columns are W-orthonormal forms
    double scale = 1.0;                  ///< max(1, top eigenvalue of the full solve)
    double harmonic_threshold = 0.0;     ///< 1e-8 * scale
    double hermitian_residual = 0.0;
    double min_eigenvalue = 0.0;

    int multiplicity_at(int index) const {
        int pos = 0;
        for (const auto& c : clusters) {
            if (index < pos + c.multiplicity) return c.multiplicity;
            pos += c.multiplicity;
        }
        throw std::out_of_range("eigenvalue index outside the computed spectrum");
    }
};

namespace detail {

inline std::vector<EigenCluster> cluster_eigenvalues(const std::vector<double>& ev) {
    std::vector<EigenCluster> out;
    for (std::size_t i = 0; i < ev.size(); ++i) {
        const double tol = 1e-7 * std::max(1.0, std::abs(ev[i]));
        if (out.empty() || ev[i] - ev[i - 1] > tol)
            out.push_back({ev[i], 1});
        else
            out.back().multiplicity += 1;
    }
    return out;
}

}  // namespace detail

/**
 * Lowest `count` eigenpairs of a Laplacian in the weighted geometry.
 *
 * The solve is always a full dense decomposition; `count` only truncates the
 * report. Eigenvalues are ascending, eigenvectors are mapped back through
 * W^{-1/2} (hence W-orthonormal) and deterministically phased so that the
 * first significant component is real and positive.
 */
inline SpectrumResult spectrum(const Engine& eng, OperatorName op, int degree, int count,
                               bool with_vectors = true) {
    if (degree < 0 || degree > eng.model().q)
        throw std::invalid_argument("spectrum: degree outside 0..q");
    const long n = eng.dim(degree);
    if (count < 1 || count > n)
        throw std::invalid_argument("spectrum: count must lie in 1.." + std::to_string(n));

    detail::FullEigs eigs = detail::laplacian_eigs(eng, op, degree, with_vectors);

    SpectrumResult out;
    out.op = op;
    out.degree = degree;
    out.dimension = n;
    out.hermitian_residual = eigs.hermitian_defect;
    out.min_eigenvalue = eigs.values(0);
    out.scale = std::max(1.0, eigs.values(n - 1));
    out.harmonic_threshold = 1e-8 * out.scale;
    if (out.min_eigenvalue < -1e-9 * out.scale)
        throw ReliabilityError("Laplacian spectrum dips below the positive-semidefinite floor: " +
                               std::to_string(out.min_eigenvalue));
    out.eigenvalues.assign(eigs.values.data(), eigs.values.data() + count);
    out.clusters = detail::cluster_eigenvalues(out.eigenvalues);

    if (with_vectors) {
        out.vectors = eng.weight_half_inv(degree) * eigs.raw_vectors.leftCols(count);
        for (int j = 0; j < count; ++j) {
            auto col = out.vectors.col(j);
            const double top = col.cwiseAbs().maxCoeff();
            for (long i = 0; i < n; ++i) {
                if (std::abs(col(i)) > 1e-8 * top) {
                    col *= std::conj(col(i)) / std::abs(col(i));
                    break;
                }
            }
        }
        const OperatorBlock blk = eng.assemble(op, degree);
        out.residuals.resize(count);
        for (int j = 0; j < count; ++j) {
            const Eigen::VectorXcd v = out.vectors.col(j);
            out.residuals[j] = (blk.mat * v - out.eigenvalues[j] * v).norm() / v.norm();
        }
    }
    return out;
}

inline SpectrumResult spectrum(const CoframeModel& model, OperatorName op, int degree, int count,
                               bool with_vectors = true) {
    Engine eng(model);
    return spectrum(eng, op, degree, count, with_vectors);
}

// ---------------------------------------------------------------------------
// Harmonic dimensions

/**
 * Kernel dimension of a Laplacian at threshold 1e-8 * scale.
 *
 * The count is trustworthy only when the spectrum leaves a clear gap around
 * the threshold: the first retained nonzero eigenvalue must exceed ten times
 * both the threshold and the largest discarded "zero". A borderline cluster
 * is flagged rather than resolved by fiat, and the two counts bracketing the
 * ambiguous band are reported.
 */
struct HarmonicCount {
    int count = 0;
    bool reliable = true;
    double gap_ratio = 0.0;
    double threshold = 0.0;
    double scale = 1.0;
    int count_low = 0;    ///< eigenvalues below threshold / 10
    int count_high = 0;   ///< eigenvalues below threshold * 10
    bool refined = false; ///< solved again on a doubled grid
};

namespace detail {

inline HarmonicCount harmonic_count_of(const Eigen::VectorXd& values) {
    HarmonicCount out;
    out.scale = std::max(1.0, values(values.size() - 1));
    out.threshold = 1e-8 * out.scale;
    double below = 0.0, above = dinf();
    for (long i = 0; i < values.size(); ++i) {
        const double v = values(i);
        if (v < out.threshold) {
            ++out.count;
            below = std::max(below, std::abs(v));
        } else {
            above = std::min(above, v);
        }
        if (v < out.threshold / 10) ++out.count_low;
        if (v < out.threshold * 10) ++out.count_high;
    }
    out.gap_ratio = above / std::max(below, out.threshold);
    out.reliable = out.gap_ratio >= 10.0;
    return out;
}

}  // namespace detail

inline HarmonicCount harmonic_count(const Engine& eng, OperatorName op, int degree) {
    detail::FullEigs eigs = detail::laplacian_eigs(eng, op, degree, false);
    return detail::harmonic_count_of(eigs.values);
}

/// Model-level count with the automatic one-shot grid refinement: a
/// borderline cluster means the discretization, not the threshold, is at
/// fault, so the grid is doubled once before the verdict stands.
inline HarmonicCount harmonic_count(const CoframeModel& model, OperatorName op, int degree,
                                    bool allow_refine = true) {
    Engine eng(model);
    HarmonicCount c = harmonic_count(eng, op, degree);
    if (!c.reliable && allow_refine) {
        Engine fine(model.with_doubled_grid());
        c = harmonic_count(fine, op, degree);
        c.refined = true;
    }
    return c;
}

inline int harmonic_dimension(const Engine& eng, OperatorName op, int degree) {
    HarmonicCount c = harmonic_count(eng, op, degree);
    if (!c.reliable)
        throw ReliabilityError("harmonic threshold falls inside an eigenvalue cluster (gap ratio " +
                               std::to_string(c.gap_ratio) + "); the kernel dimension lies between " +
                               std::to_string(c.count_low) + " and " + std::to_string(c.count_high));
    return c.count;
}

inline int harmonic_dimension(const CoframeModel& model, OperatorName op, int degree) {
    HarmonicCount c = harmonic_count(model, op, degree);
    if (!c.reliable)
        throw ReliabilityError("harmonic threshold falls inside an eigenvalue cluster (gap ratio " +
                               std::to_string(c.gap_ratio) + ") even after grid refinement; the " +
                               "kernel dimension lies between " + std::to_string(c.count_low) +
                               " and " + std::to_string(c.count_high));
    return c.count;
}

// ---------------------------------------------------------------------------
// Numerical rank

struct RankInfo {
    int rank = 0;
    double gap_ratio = 0.0;  ///< sigma_r / sigma_{r+1} at the cut
    bool reliable = true;
    double tolerance = 0.0;  ///< the cut, 1e-10 * sigma_max
};

/// Rank at relative tolerance 1e-10, with the singular-value gap at the cut.
/// When `basis` is given it receives an orthonormal basis of the column space.
inline RankInfo numerical_rank(const Eigen::MatrixXcd& A, Eigen::MatrixXcd* basis = nullptr) {
    RankInfo out;
    out.gap_ratio = detail::dinf();
    if (A.rows() == 0 || A.cols() == 0) {
        if (basis) *basis = Eigen::MatrixXcd::Zero(A.rows(), 0);
        return out;
    }
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(A, basis ? Eigen::ComputeThinU : 0);
    const Eigen::VectorXd& s = svd.singularValues();
    if (s(0) > 0.0) {
        out.tolerance = 1e-10 * s(0);
        while (out.rank < s.size() && s(out.rank) > out.tolerance) ++out.rank;
        if (out.rank < s.size() && s(out.rank) > 0.0) {
            out.gap_ratio = (out.rank > 0 ? s(out.rank - 1) : out.tolerance) / s(out.rank);
            out.reliable = out.gap_ratio >= 10.0;
        }
    }
    if (basis) *basis = svd.matrixU().leftCols(out.rank);
    return out;
}

// ---------------------------------------------------------------------------
// Poincare duality

struct DualityReport {
    int degree_low = 0;
    int degree_high = 0;
    int compared = 0;
    double eigenvalue_gap = 0.0;  ///< max gap of the sorted lists, absolute
    double star_residual = 0.0;   ///< worst |Delta (star v) - lambda (star v)| / |star v|
    double scale = 1.0;
};

namespace detail {

inline DualityReport duality_check_cached(SpectraCache& cache, int k, int count) {
    const Engine& eng = cache.engine();
    const int q = eng.model().q;
    if (k < 0 || k > q) throw std::invalid_argument("duality_check: degree outside 0..q");
    const int kk = q - k;
    DualityReport rep;
    rep.degree_low = std::min(k, kk);
    rep.degree_high = std::max(k, kk);
    const long n = std::min(eng.dim(k), eng.dim(kk));
    rep.compared = static_cast<int>(std::min<long>(count, n));
    if (rep.compared == 0) return rep;

    const detail::FullEigs& lo = cache.get(OperatorName::Delta_tilde, k, true);
    const detail::FullEigs& hi = cache.get(OperatorName::Delta_tilde, kk, true);
    rep.scale = std::max(1.0, std::max(lo.values(lo.values.size() - 1), hi.values(hi.values.size() - 1)));
    for (int i = 0; i < rep.compared; ++i)
        rep.eigenvalue_gap = std::max(rep.eigenvalue_gap, std::abs(lo.values(i) - hi.values(i)));

    // Transport eigenvectors with the plain transversal star and measure how
    // far they are from eigenvectors on the other side.
    const SparseC& star = eng.star_block(k);
    const SparseC& lap = eng.Delta_tilde_block(kk);
    const Eigen::MatrixXcd V = eng.weight_half_inv(k) * lo.raw_vectors.leftCols(rep.compared);
    for (int i = 0; i < rep.compared; ++i) {
        const Eigen::VectorXcd w = star * V.col(i);
        const double r = (lap * w - lo.values(i) * w).norm() / w.norm();
        rep.star_residual = std::max(rep.star_residual, r);
    }
    return rep;
}

}  // namespace detail

/// Spectral Poincare duality between degrees k and q-k: eigenvalue multisets
/// must agree and the star must transport eigenvectors to eigenvectors.
inline DualityReport duality_check(const Engine& eng, int k, int count) {
    detail::SpectraCache cache(eng);
    return detail::duality_check_cached(cache, k, count);
}

inline DualityReport duality_check(const CoframeModel& model, int k, int count) {
    Engine eng(model);
    return duality_check(eng, k, count);
}

// ---------------------------------------------------------------------------
// Cohomology report

struct CohomologyReport {
    int q = 0;
    std::vector<int> betti;          ///< ordinary basic Betti numbers b_0..b_q
    std::vector<int> twisted_betti;  ///< twisted Betti numbers
    int euler = 0;
    int twisted_euler = 0;
    bool taut = false;
    double taut_obstruction = 0.0;   ///< exactness residual of kappa itself
    std::optional<int> signature;    ///< even codimension only
    std::vector<DualityReport> duality;
    double max_duality_eigenvalue_gap = 0.0;
    double max_duality_star_residual = 0.0;
    bool ordinary_via_ranks = false; ///< weighted model: b_k counted from ranks of d
    bool reliable = true;
    bool refined = false;            ///< recomputed once on a doubled grid
    double harmonic_threshold = 0.0; ///< largest threshold used
};

namespace detail {

/// Betti numbers of the plain d-complex by exact rank counting,
/// b_k = dim_k - rank d_k - rank d_{k-1}. The ordinary cohomology never
/// involves kappa, so this route is manifestly conformal-invariant; it is
/// used when the model carries a nontrivial weight, where the star-sandwich
/// codifferential is not the weighted adjoint of d at collocation level and
/// ker(Delta_b) stops being a trustworthy cohomology proxy.
inline std::vector<int> betti_via_ranks(const Engine& eng) {
    const int q = eng.model().q;
    std::vector<int> rank_d(q + 1, 0);
    for (int k = 0; k < q; ++k) {
        Eigen::MatrixXcd D(eng.d_block(k));
        RankInfo info = numerical_rank(D);
        if (!info.reliable)
            throw ReliabilityError("rank of d at degree " + std::to_string(k) +
                                   " is ambiguous (singular-value gap ratio " +
                                   std::to_string(info.gap_ratio) + ")");
        rank_d[k] = info.rank;
    }
    std::vector<int> betti(q + 1, 0);
    for (int k = 0; k <= q; ++k) {
        const long n = eng.dim(k);
        betti[k] = static_cast<int>(n - rank_d[k] - (k > 0 ? rank_d[k - 1] : 0));
    }
    return betti;
}

inline CohomologyReport cohomology_report_on(const Engine& eng, int duality_count) {
    const int q = eng.model().q;
    CohomologyReport rep;
    rep.q = q;
    rep.betti.assign(q + 1, 0);
    rep.twisted_betti.assign(q + 1, 0);
    rep.taut_obstruction = eng.report().kappa_exactness_residual;

    SpectraCache cache(eng);
    const bool trivial_weight = eng.report().weight_potential.norm() == 0.0;
    rep.ordinary_via_ranks = !trivial_weight;

    std::vector<HarmonicCount> twisted(q + 1);
    for (int k = 0; k <= q; ++k) {
        twisted[k] = harmonic_count_of(cache.get(OperatorName::Delta_tilde, k, false).values);
        rep.twisted_betti[k] = twisted[k].count;
        rep.harmonic_threshold = std::max(rep.harmonic_threshold, twisted[k].threshold);
        if (!twisted[k].reliable) rep.reliable = false;
    }
    if (trivial_weight) {
        for (int k = 0; k <= q; ++k) {
            HarmonicCount c = harmonic_count_of(cache.get(OperatorName::Delta_b, k, false).values);
            rep.betti[k] = c.count;
            rep.harmonic_threshold = std::max(rep.harmonic_threshold, c.threshold);
            if (!c.reliable) rep.reliable = false;
        }
    } else {
        rep.betti = betti_via_ranks(eng);
    }

    for (int k = 0; k <= q; ++k) {
        const int sgn = (k % 2 == 0) ? 1 : -1;
        rep.euler += sgn * rep.betti[k];
        rep.twisted_euler += sgn * rep.twisted_betti[k];
    }

    // Two independent tautness detectors: the twisted kernel in degree zero,
    // and the exactness of kappa established at validation time. They prove
    // the same theorem from opposite ends; disagreement means a tolerance
    // has failed and must not be glossed over.
    rep.taut = rep.twisted_betti[0] > 0;
    if (rep.reliable && rep.taut != eng.report().taut)
        throw std::runtime_error(std::string("tautness detectors disagree: twisted kernel says ") +
                                 (rep.taut ? "taut" : "nontaut") + ", kappa exactness says " +
                                 (eng.report().taut ? "taut" : "nontaut") +
                                 " (obstruction " + std::to_string(rep.taut_obstruction) + ")");

    if (!rep.reliable) return rep;

    // Spectral duality residuals for each complementary pair of degrees.
    for (int k = 0; 2 * k <= q; ++k) {
        const long n = std::min(eng.dim(k), eng.dim(q - k));
        if (n == 0) continue;
        DualityReport d = duality_check_cached(cache, k, duality_count);
        rep.max_duality_eigenvalue_gap = std::max(rep.max_duality_eigenvalue_gap, d.eigenvalue_gap);
        rep.max_duality_star_residual = std::max(rep.max_duality_star_residual, d.star_residual);
        rep.duality.push_back(std::move(d));
    }

    // Signature: the +1/-1 eigenvalue count difference of the degree-mixing
    // involution restricted to the twisted harmonic space, computed over all
    // degrees on the complexified harmonics. Even codimension only.
    if (q % 2 == 0) {
        long total = 0;
        std::vector<long> offset(q + 2, 0);
        for (int k = 0; k <= q; ++k) {
            offset[k] = total;
            total += rep.twisted_betti[k];
        }
        offset[q + 1] = total;
        if (total == 0) {
            rep.signature = 0;
        } else {
            std::vector<Eigen::MatrixXcd> basis(q + 1);  // W-orthonormal harmonic columns
            for (int k = 0; k <= q; ++k) {
                if (rep.twisted_betti[k] == 0) continue;
                const FullEigs& eigs = cache.get(OperatorName::Delta_tilde, k, true);
                basis[k] = eng.weight_half_inv(k) * eigs.raw_vectors.leftCols(rep.twisted_betti[k]);
            }
            Eigen::MatrixXcd S = Eigen::MatrixXcd::Zero(total, total);
            for (int k = 0; k <= q; ++k) {
                if (rep.twisted_betti[k] == 0) continue;
                const Eigen::MatrixXcd mapped = eng.star_involution_block(k) * basis[k];
                if (rep.twisted_betti[q - k] != static_cast<int>(basis[q - k].cols()))
                    throw std::logic_error("harmonic basis bookkeeping out of step");
                // Expansion coefficients in the W-orthonormal harmonic basis
                // of the target degree.
                S.block(offset[q - k], offset[k], rep.twisted_betti[q - k], rep.twisted_betti[k]) =
                    basis[q - k].adjoint() * SparseC(eng.weight(q - k)) * mapped;
            }
            const double invol_defect = (S * S - Eigen::MatrixXcd::Identity(total, total)).norm();
            const cplx tr = S.trace();
            const long sig = std::llround(tr.real());
            if (invol_defect > 1e-8 || std::abs(tr.imag()) > 1e-8 ||
                std::abs(tr.real() - static_cast<double>(sig)) > 1e-6)
                throw ReliabilityError("involution on the harmonic space is not numerically clean "
                                       "(defect " + std::to_string(invol_defect) + ", trace " +
                                       std::to_string(tr.real()) + ")");
            rep.signature = static_cast<int>(sig);
        }
    }
    return rep;
}

}  // namespace detail

inline CohomologyReport cohomology_report(const Engine& eng, int duality_count = 20) {
    return detail::cohomology_report_on(eng, duality_count);
}

/// Full cohomology report with the one-shot grid refinement: if any harmonic
/// count is borderline the whole report is recomputed once at doubled
/// resolution, and the verdict of that pass stands.
inline CohomologyReport cohomology_report(const CoframeModel& model, int duality_count = 20) {
    Engine eng(model);
    CohomologyReport rep = detail::cohomology_report_on(eng, duality_count);
    if (!rep.reliable) {
        Engine fine(model.with_doubled_grid());
        rep = detail::cohomology_report_on(fine, duality_count);
        rep.refined = true;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Conformal comparison

struct ConformalDegreeCheck {
    int degree = 0;
    int compared = 0;
    int simple_compared = 0;      ///< eigenvalues simple on both sides
    double eigenvalue_gap = 0.0;  ///< max |lambda_i - lambda'_i|, absolute
    double min_alignment = 1.0;   ///< worst |<e^{h/2} v, v'>| / norms
    double scale = 1.0;
};

struct ConformalReport {
    bool h_had_mean = false;  ///< nonzero mean was removed before shifting
    bool taut_base = false;
    bool taut_shifted = false;
    std::vector<ConformalDegreeCheck> per_degree;
    double max_eigenvalue_gap = 0.0;
    double min_alignment = 1.0;
};

/**
 * Spectral comparison of a model with its conformal shift kappa -> kappa+dh.
 *
 * The twisted spectra must agree degree by degree; on simple eigenvalues the
 * shifted eigenvector must be the pointwise e^{h/2} multiple of the original
 * up to phase, which the alignment score measures. A nonzero mean of h is a
 * harmless normalization and is removed (and noted), not rejected.
 */
inline ConformalReport conformal_compare(const CoframeModel& model, TrigPoly h, int count) {
    if (count < 1) throw std::invalid_argument("conformal_compare: count must be positive");
    ConformalReport rep;
    if (h.mean() != 0.0) {
        rep.h_had_mean = true;
        h = h.without_mean();
    }
    Engine base(model);
    Engine shifted(model.with_kappa_shift(h));
    rep.taut_base = base.report().taut;
    rep.taut_shifted = shifted.report().taut;

    const Eigen::VectorXd half = h.empty()
        ? Eigen::VectorXd::Zero(base.grid().points)
        : Eigen::VectorXd(0.5 * sample(h, base.grid()));
    const Eigen::VectorXd growth = half.array().exp();

    for (int k = 0; k <= model.q; ++k) {
        ConformalDegreeCheck chk;
        chk.degree = k;
        const long n = base.dim(k);
        chk.compared = static_cast<int>(std::min<long>(count, n));
        if (chk.compared == 0) continue;
        // Request one extra eigenvalue so the cluster membership of the last
        // reported one is decided with its successor in view.
        const int probe = static_cast<int>(std::min<long>(chk.compared + 1, n));
        SpectrumResult a = spectrum(base, OperatorName::Delta_tilde, k, probe, true);
        SpectrumResult b = spectrum(shifted, OperatorName::Delta_tilde, k, probe, true);
        chk.scale = std::max(a.scale, b.scale);
        for (int i = 0; i < chk.compared; ++i)
            chk.eigenvalue_gap = std::max(chk.eigenvalue_gap,
                                          std::abs(a.eigenvalues[i] - b.eigenvalues[i]));
        const SparseC mult = base.multiplication_block(growth, k);
        for (int i = 0; i < chk.compared; ++i) {
            if (a.multiplicity_at(i) != 1 || b.multiplicity_at(i) != 1) continue;
            const Eigen::VectorXcd u = mult * a.vectors.col(i);
            const Eigen::VectorXcd v = b.vectors.col(i);
            const double align = std::abs(u.dot(v)) / (u.norm() * v.norm());
            chk.min_alignment = std::min(chk.min_alignment, align);
            ++chk.simple_compared;
        }
        rep.max_eigenvalue_gap = std::max(rep.max_eigenvalue_gap, chk.eigenvalue_gap);
        rep.min_alignment = std::min(rep.min_alignment, chk.min_alignment);
        rep.per_degree.push_back(chk);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Hodge decomposition

struct HodgeSplitReport {
    int degree = 0;
    long dimension = 0;
    RankInfo exact_rank;    ///< r1 = rank of d-tilde into this degree
    RankInfo coexact_rank;  ///< r2 = rank of delta-tilde into this degree
    int harmonic = 0;
    bool complete = false;  ///< r1 + r2 + harmonic == dimension
    double max_cross_gram = 0.0;
    double harmonic_threshold = 0.0;
    bool reliable = true;
};

/**
 * Numerical three-way splitting at one degree: exact image, coexact image,
 * and twisted harmonics. Ranks come from singular values at relative cut
 * 1e-10; orthogonality is checked between W-orthonormal bases of the three
 * subspaces, so the cross-Gram entries measure honest weighted angles.
 */
inline HodgeSplitReport hodge_split(const Engine& eng, int degree) {
    const int q = eng.model().q;
    if (degree < 0 || degree > q) throw std::invalid_argument("hodge_split: degree outside 0..q");
    HodgeSplitReport rep;
    rep.degree = degree;
    rep.dimension = eng.dim(degree);

    // Work in the symmetrized coordinates, where the weighted geometry is
    // the plain Euclidean one and image bases come straight from thin SVDs.
    Eigen::MatrixXcd A1, A2;
    if (degree > 0)
        A1 = Eigen::MatrixXcd(SparseC(eng.weight_half(degree) * eng.d_tilde_block(degree - 1) *
                                      eng.weight_half_inv(degree - 1)));
    else
        A1 = Eigen::MatrixXcd::Zero(rep.dimension, 0);
    if (degree < q)
        A2 = Eigen::MatrixXcd(SparseC(eng.weight_half(degree) * eng.delta_tilde_block(degree + 1) *
                                      eng.weight_half_inv(degree + 1)));
    else
        A2 = Eigen::MatrixXcd::Zero(rep.dimension, 0);

    Eigen::MatrixXcd U1, U2;
    rep.exact_rank = numerical_rank(A1, &U1);
    rep.coexact_rank = numerical_rank(A2, &U2);

    detail::FullEigs eigs = detail::laplacian_eigs(eng, OperatorName::Delta_tilde, degree, true);
    HarmonicCount hc = detail::harmonic_count_of(eigs.values);
    rep.harmonic = hc.count;
    rep.harmonic_threshold = hc.threshold;
    rep.reliable = rep.exact_rank.reliable && rep.coexact_rank.reliable && hc.reliable;
    rep.complete = rep.exact_rank.rank + rep.coexact_rank.rank + rep.harmonic == rep.dimension;

    const Eigen::MatrixXcd Uh = eigs.raw_vectors.leftCols(rep.harmonic);
    auto max_abs = [](const Eigen::MatrixXcd& M) {
        return M.size() == 0 ? 0.0 : M.cwiseAbs().maxCoeff();
    };
    rep.max_cross_gram = std::max({max_abs(U1.adjoint() * U2), max_abs(U1.adjoint() * Uh),
                                   max_abs(U2.adjoint() * Uh)});
    return rep;
}

inline HodgeSplitReport hodge_split(const CoframeModel& model, int degree) {
    Engine eng(model);
    return hodge_split(eng, degree);
}

// ---------------------------------------------------------------------------
// Curvature-free cross-checks

struct WeitzenbockCheck {
    double precondition_residual = 0.0;  ///< |delta_b kappa| / max(1, |kappa|)
    double residual = 0.0;               ///< relative Frobenius defect
};

/**
 * Degree-zero Bochner comparison: with a harmonic mean-curvature form the
 * twisted Laplacian on functions is the weighted rough Laplacian plus the
 * constant-free potential |kappa|^2 / 4. The harmonicity of kappa is a
 * checked precondition, not an assumption.
 */
inline WeitzenbockCheck weitzenbock_function_check(const Engine& eng) {
    const CoframeModel& m = eng.model();
    WeitzenbockCheck out;

    const Eigen::MatrixXd K = m.kappa_samples(eng.grid());
    Eigen::VectorXcd kvec(eng.dim(1));
    for (long x = 0; x < eng.grid().points; ++x)
        for (int c = 0; c < m.q; ++c) kvec(x * m.q + c) = K(x, c);
    const Eigen::VectorXcd dk = eng.delta_b_block(1) * kvec;
    out.precondition_residual = eng.norm(0, dk) / std::max(1.0, eng.norm(1, kvec));

    const OperatorBlock d0 = eng.assemble(OperatorName::d, 0);
    const SparseC rough = SparseC(eng.mu_adjoint(d0).mat * d0.mat);

    const Eigen::MatrixXd& G1 = eng.gram().degree_gram[1];
    std::vector<TripletC> trip;
    trip.reserve(eng.grid().points);
    for (long x = 0; x < eng.grid().points; ++x) {
        const double w = 0.25 * K.row(x) * G1 * K.row(x).transpose();
        if (w != 0.0) trip.emplace_back(x, x, cplx(w, 0.0));
    }
    SparseC potential(eng.grid().points, eng.grid().points);
    potential.setFromTriplets(trip.begin(), trip.end());

    out.residual = detail::rel_residual(eng.Delta_tilde_block(0), SparseC(rough + potential));
    return out;
}

/**
 * Flat comparison: on an abelian model with kappa = 0 every twisted
 * Laplacian acts componentwise as the scalar Laplacian (the curvature and
 * mean-curvature terms of the Bochner formula vanish identically).
 */
inline double weitzenbock_flat_residual(const Engine& eng, int k) {
    const CoframeModel& m = eng.model();
    for (const auto& s : m.structure)
        if (s.value != 0.0)
            throw std::invalid_argument("flat comparison requires an abelian structure");
    if (m.kappa_samples(eng.grid()).norm() != 0.0)
        throw std::invalid_argument("flat comparison requires kappa = 0");
    if (k < 0 || k > m.q) throw std::invalid_argument("degree outside 0..q");

    const OperatorBlock d0 = eng.assemble(OperatorName::d, 0);
    const SparseC scalar = SparseC(eng.mu_adjoint(d0).mat * d0.mat);
    const long C = binomial(m.q, k);
    std::vector<TripletC> trip;
    trip.reserve(static_cast<std::size_t>(scalar.nonZeros()) * C);
    for (int col = 0; col < scalar.outerSize(); ++col)
        for (SparseC::InnerIterator it(scalar, col); it; ++it)
            for (long c = 0; c < C; ++c)
                trip.emplace_back(it.row() * C + c, it.col() * C + c, it.value());
    SparseC componentwise(eng.dim(k), eng.dim(k));
    componentwise.setFromTriplets(trip.begin(), trip.end());
    return detail::rel_residual(eng.Delta_tilde_block(k), componentwise);
}

/// Rayleigh quotient of the taut kernel witness e^{h0/2}, where dh0 = kappa.
/// For a taut model this function spans the twisted harmonic functions and
/// the quotient is floating-point zero.
inline double taut_kernel_rayleigh(const Engine& eng) {
    if (!eng.report().taut)
        throw std::invalid_argument("the kernel witness e^{h/2} exists only for taut models");
    const TrigPoly& h0 = eng.report().kappa_potential;
    const Eigen::VectorXd samples = h0.empty()
        ? Eigen::VectorXd::Zero(eng.grid().points)
        : Eigen::VectorXd(sample(h0, eng.grid()));
    const Eigen::VectorXcd u = (0.5 * samples.array()).exp().matrix().cast<cplx>();
    const Eigen::VectorXcd Au = eng.Delta_tilde_block(0) * u;
    return eng.inner(0, u, Au).real() / eng.inner(0, u, u).real();
}

}  // namespace folhodge
