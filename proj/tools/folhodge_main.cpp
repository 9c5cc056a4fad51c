/**
 * Command-line front end.
 *
 * Subcommands: verify, betti, spectrum, duality, conformal, suspend. A model
 * comes either from the built-in catalog (--catalog) or from a JSON file
 * (--model); -N overrides the grid. Output goes to stdout or, with --out,
 * atomically to a file.
 *
 * Exit codes: 0 success, 2 validation failure (unreadable file, schema
 * violation, admission gates), 3 numerical reliability failure (identity
 * residuals over tolerance, flagged spectra), 4 usage error.
 */

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <folhodge/folhodge.hpp>

namespace {

constexpr int kOk = 0;
constexpr int kValidationExit = 2;
constexpr int kReliabilityExit = 3;
constexpr int kUsageExit = 4;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Output plumbing

struct OutputOptions {
    std::string format = "text";
    std::string out_path;
};

void add_output_options(CLI::App& cmd, OutputOptions& oo) {
    cmd.add_option("--format", oo.format, "Output format")
        ->check(CLI::IsMember({"json", "csv", "text"}))
        ->capture_default_str();
    cmd.add_option("--out", oo.out_path, "Write the report to this file (atomic rename)");
}

void write_output(const std::string& text, const OutputOptions& oo) {
    if (oo.out_path.empty()) {
        std::cout << text;
        return;
    }
    namespace fs = std::filesystem;
    const fs::path target(oo.out_path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw UsageError("cannot open \"" + tmp.string() + "\" for writing");
        os << text;
        os.flush();
        if (!os) throw UsageError("failed while writing \"" + tmp.string() + "\"");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        throw UsageError("cannot move output into place at \"" + target.string() +
                         "\": " + ec.message());
    }
}

nlohmann::ordered_json versioned(const char* command, const nlohmann::ordered_json& payload) {
    nlohmann::ordered_json out;
    out["schema_version"] = 1;
    out["command"] = command;
    for (const auto& [key, value] : payload.items()) out[key] = value;
    return out;
}

std::string json_text(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Model source

struct ModelOptions {
    std::string catalog;
    std::string model_path;
    double lambda = 0.0;
    double lambda_trace = 3.0;
    int extra_circles = 1;
    int torus_dim = 2;
    std::vector<std::string> potential_terms;
    int grid = 0;

    CLI::Option* lambda_opt = nullptr;
    CLI::Option* trace_opt = nullptr;
    CLI::Option* grid_opt = nullptr;
};

void add_model_options(CLI::App& cmd, ModelOptions& mo) {
    cmd.add_option("--catalog", mo.catalog,
                   "Built-in model: carriere, flat-torus, carriere-product");
    cmd.add_option("--model", mo.model_path, "Model JSON file");
    mo.lambda_opt = cmd.add_option("--lambda", mo.lambda,
                                   "Holonomy eigenvalue for carriere models (> 1)");
    mo.trace_opt = cmd.add_option("--lambda-trace", mo.lambda_trace,
                                  "Holonomy trace lambda + 1/lambda (> 2); default 3")
                       ->excludes(mo.lambda_opt);
    cmd.add_option("--extra-circles", mo.extra_circles,
                   "Extra circle factors for carriere-product")
        ->capture_default_str();
    cmd.add_option("--q", mo.torus_dim, "Codimension for flat-torus")->capture_default_str();
    cmd.add_option("--potential-term", mo.potential_terms,
                   "Weight potential term for flat-torus, repeatable, form \"modes=coeff\" "
                   "(mode m>0 cos, m<0 sin, comma-separated, one per axis)");
    mo.grid_opt = cmd.add_option("-N,--grid", mo.grid, "Collocation points per axis override");
}

double parse_double_token(const std::string& tok, const std::string& what) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (tok.empty() || pos != tok.size())
        throw UsageError(what + ": \"" + tok + "\" is not a number");
    return v;
}

folhodge::TrigPoly parse_h_terms(const std::vector<std::string>& specs, std::size_t arity,
                                 const std::string& flag) {
    folhodge::TrigPoly h;
    for (const auto& s : specs) {
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw UsageError(flag + " needs the form \"modes=coeff\", got \"" + s + "\"");
        std::vector<int> modes;
        try {
            modes = folhodge::detail::parse_mode_key(s.substr(0, eq), arity, flag);
        } catch (const folhodge::ModelSchemaError& e) {
            std::string msg = e.what();
            const std::string prefix = "model file: ";
            if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
            throw UsageError(msg);
        }
        h.add_term(modes, parse_double_token(s.substr(eq + 1), flag));
    }
    return h;
}

double resolve_lambda(const ModelOptions& mo) {
    if (mo.lambda_opt->count() > 0) return mo.lambda;
    return folhodge::lambda_from_trace(mo.lambda_trace);
}

folhodge::CoframeModel resolve_model(const ModelOptions& mo) {
    const bool have_catalog = !mo.catalog.empty();
    const bool have_file = !mo.model_path.empty();
    if (have_catalog == have_file)
        throw UsageError("give exactly one model source: --catalog or --model");

    if (have_file) {
        folhodge::CoframeModel m = folhodge::load_model(mo.model_path);
        if (mo.grid_opt->count() > 0)
            for (auto& axis : m.active) axis.grid = mo.grid;
        return m;
    }

    if (mo.catalog == "carriere") {
        const int N = mo.grid_opt->count() > 0 ? mo.grid : 64;
        return folhodge::make_carriere(resolve_lambda(mo), N);
    }
    if (mo.catalog == "flat-torus") {
        const int q = mo.torus_dim;
        if (q < 1) throw UsageError("--q must be at least 1");
        int N = q == 1 ? 64 : (q == 2 ? 32 : 8);
        if (mo.grid_opt->count() > 0) N = mo.grid;
        const folhodge::TrigPoly h =
            parse_h_terms(mo.potential_terms, static_cast<std::size_t>(q), "--potential-term");
        return folhodge::make_flat_torus(q, N, h);
    }
    if (mo.catalog == "carriere-product") {
        const int N = mo.grid_opt->count() > 0 ? mo.grid : 64;
        return folhodge::make_carriere_product(resolve_lambda(mo), mo.extra_circles, N);
    }
    if (mo.catalog == "suspension-7.2" || mo.catalog == "suspension-7.3")
        throw UsageError("catalog entry \"" + mo.catalog +
                         "\" is integer bookkeeping only; use the suspend command");
    throw UsageError("unknown catalog name \"" + mo.catalog + "\"");
}

void require_not_csv(const OutputOptions& oo) {
    if (oo.format == "csv")
        throw UsageError("--format csv is reserved for spectra; use json or text");
}

// ---------------------------------------------------------------------------
// verify

double identity_tolerance(const CLI::Option* tol_opt, double flag_value) {
    if (tol_opt->count() > 0) {
        if (flag_value <= 0.0) throw UsageError("--tol must be positive");
        return flag_value;
    }
    if (const char* env = std::getenv("FOLHODGE_TOL_OVERRIDE")) {
        const double v = parse_double_token(env, "FOLHODGE_TOL_OVERRIDE");
        if (v <= 0.0) throw UsageError("FOLHODGE_TOL_OVERRIDE must be positive");
        return v;
    }
    return 1e-10;
}

void dump_operator_blocks(const folhodge::Engine& eng, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    using folhodge::OperatorName;
    const std::vector<OperatorName> names = {
        OperatorName::d,       OperatorName::d_tilde,     OperatorName::delta_b,
        OperatorName::delta_tilde, OperatorName::Delta_b, OperatorName::Delta_tilde,
        OperatorName::star,
    };
    const int q = eng.model().q;
    for (const OperatorName name : names) {
        for (int k = 0; k <= q; ++k) {
            const folhodge::OperatorBlock blk = eng.assemble(name, k);
            const Eigen::MatrixXcd dense(blk.mat);
            const std::string base =
                (fs::path(dir) / (std::string(folhodge::operator_name_str(name)) + "_k" +
                                  std::to_string(k)))
                    .string();
            {
                std::ofstream os(base + ".bin", std::ios::binary | std::ios::trunc);
                if (!os) throw UsageError("cannot write \"" + base + ".bin\"");
                os.write(reinterpret_cast<const char*>(dense.data()),
                         static_cast<std::streamsize>(sizeof(folhodge::cplx)) * dense.size());
            }
            nlohmann::ordered_json side;
            side["name"] = folhodge::operator_name_str(name);
            side["k"] = k;
            side["rows"] = dense.rows();
            side["cols"] = dense.cols();
            side["model_hash"] = eng.fingerprint();
            std::ofstream os(base + ".json", std::ios::binary | std::ios::trunc);
            if (!os) throw UsageError("cannot write \"" + base + ".json\"");
            os << side.dump(2) << "\n";
        }
    }
}

int run_verify(const ModelOptions& mo, const OutputOptions& oo, const CLI::Option* tol_opt,
               double tol_flag, const std::string& dump_dir) {
    require_not_csv(oo);
    const double tol = identity_tolerance(tol_opt, tol_flag);
    const folhodge::CoframeModel model = resolve_model(mo);
    const folhodge::ValidationReport vr = folhodge::validate(model);

    if (!vr.passed) {
        if (oo.format == "json") {
            nlohmann::ordered_json payload;
            payload["validation"] = folhodge::validation_to_json(vr);
            write_output(json_text(versioned("verify", payload)), oo);
        } else {
            write_output(folhodge::validation_to_text(vr), oo);
        }
        for (const auto& f : vr.failures) std::cerr << "error: " << f.message << "\n";
        return kValidationExit;
    }

    const folhodge::Engine eng(model);
    const folhodge::IdentitySuiteReport rep = folhodge::identity_suite(eng);
    if (!dump_dir.empty()) dump_operator_blocks(eng, dump_dir);

    if (oo.format == "json") {
        nlohmann::ordered_json payload;
        payload["validation"] = folhodge::validation_to_json(vr);
        payload["identities"] = folhodge::identity_to_json(rep, tol);
        payload["model_hash"] = eng.fingerprint();
        write_output(json_text(versioned("verify", payload)), oo);
    } else {
        write_output(folhodge::validation_to_text(vr) + folhodge::identity_to_text(rep, tol), oo);
    }
    if (!rep.pass(tol)) {
        std::cerr << "error: identity residual " << folhodge::detail::fmt_g17(rep.max_residual)
                  << " exceeds tolerance " << folhodge::detail::fmt_g17(tol) << "\n";
        return kReliabilityExit;
    }
    return kOk;
}

// ---------------------------------------------------------------------------
// betti / spectrum / duality / conformal

int run_betti(const ModelOptions& mo, const OutputOptions& oo, int duality_count) {
    require_not_csv(oo);
    const folhodge::Engine eng(resolve_model(mo));
    const folhodge::CohomologyReport rep = folhodge::cohomology_report(eng, duality_count);
    if (oo.format == "json")
        write_output(json_text(versioned("betti", folhodge::cohomology_to_json(rep))), oo);
    else
        write_output(folhodge::cohomology_to_text(rep), oo);
    if (!rep.reliable) {
        std::cerr << "error: harmonic counts are unreliable on this grid\n";
        return kReliabilityExit;
    }
    return kOk;
}

folhodge::OperatorName parse_operator(const std::string& s) {
    if (s == "laplacian") return folhodge::OperatorName::Delta_b;
    if (s == "twisted-laplacian") return folhodge::OperatorName::Delta_tilde;
    if (const auto n = folhodge::operator_name_from(s)) return *n;
    throw UsageError("unknown operator \"" + s +
                     "\"; use laplacian, twisted-laplacian, or an assembly name such as "
                     "Delta_b or Delta_tilde");
}

int run_spectrum(const ModelOptions& mo, const OutputOptions& oo, const std::string& op_name,
                 int degree, int count) {
    const folhodge::OperatorName op = parse_operator(op_name);
    const folhodge::Engine eng(resolve_model(mo));
    const folhodge::SpectrumResult s = folhodge::spectrum(eng, op, degree, count);
    if (oo.format == "csv")
        write_output(folhodge::spectrum_to_csv(s), oo);
    else if (oo.format == "json")
        write_output(json_text(versioned("spectrum", folhodge::spectrum_to_json(s))), oo);
    else
        write_output(folhodge::spectrum_to_text(s), oo);
    return kOk;
}

int run_duality(const ModelOptions& mo, const OutputOptions& oo, int degree, int count) {
    require_not_csv(oo);
    const folhodge::Engine eng(resolve_model(mo));
    const folhodge::DualityReport rep = folhodge::duality_check(eng, degree, count);
    if (oo.format == "json")
        write_output(json_text(versioned("duality", folhodge::duality_to_json(rep))), oo);
    else
        write_output(folhodge::duality_to_text(rep), oo);
    return kOk;
}

int run_conformal(const ModelOptions& mo, const OutputOptions& oo,
                  const std::vector<std::string>& h_terms, int count) {
    require_not_csv(oo);
    const folhodge::CoframeModel model = resolve_model(mo);
    const folhodge::TrigPoly h = parse_h_terms(h_terms, model.active.size(), "--h-term");
    const folhodge::ConformalReport rep = folhodge::conformal_compare(model, h, count);
    if (oo.format == "json")
        write_output(json_text(versioned("conformal", folhodge::conformal_to_json(rep))), oo);
    else
        write_output(folhodge::conformal_to_text(rep), oo);
    return kOk;
}

// ---------------------------------------------------------------------------
// suspend

struct SuspendOptions {
    std::string preset;
    std::string catalog;
    std::vector<long> base_betti;
    std::string pattern = "constants-only";
    int fiber_codim = 1;
    bool oriented = false;
    bool taut = false;
};

int run_suspend(const SuspendOptions& so, const OutputOptions& oo) {
    require_not_csv(oo);
    std::string preset = so.preset;
    if (!so.catalog.empty()) {
        if (!preset.empty()) throw UsageError("give --preset or --catalog, not both");
        if (so.catalog == "suspension-7.2")
            preset = "7.2";
        else if (so.catalog == "suspension-7.3")
            preset = "7.3";
        else
            throw UsageError("unknown suspension catalog name \"" + so.catalog + "\"");
    }

    folhodge::SuspensionReport rep;
    if (!preset.empty()) {
        if (!so.base_betti.empty())
            throw UsageError("--base-betti cannot be combined with a preset");
        try {
            rep = folhodge::suspension_report(preset);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    } else {
        if (so.base_betti.empty())
            throw UsageError("give --preset, --catalog, or --base-betti");
        folhodge::SuspensionInput in;
        in.base_betti = so.base_betti;
        if (so.pattern == "constants-only")
            in.pattern = folhodge::SuspensionPattern::ConstantsOnly;
        else if (so.pattern == "constants-and-transverse-volume")
            in.pattern = folhodge::SuspensionPattern::ConstantsAndTransverseVolume;
        else
            throw UsageError("unknown pattern \"" + so.pattern + "\"");
        in.fiber_codim = so.fiber_codim;
        in.oriented = so.oriented;
        in.taut = so.taut;
        try {
            rep = folhodge::suspension_report(in);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }

    if (oo.format == "json")
        write_output(json_text(versioned("suspend", folhodge::suspension_to_json(rep))), oo);
    else
        write_output(folhodge::suspension_to_text(rep), oo);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Transverse Hodge theory on coframe models: operator identities, spectra, "
                 "ordinary and twisted cohomology, duality, tautness"};
    app.require_subcommand(1);

    ModelOptions mo_verify, mo_betti, mo_spectrum, mo_duality, mo_conformal;
    OutputOptions oo_verify, oo_betti, oo_spectrum, oo_duality, oo_conformal, oo_suspend;

    CLI::App* verify = app.add_subcommand(
        "verify", "Run the admission gates and the full operator identity suite");
    add_model_options(*verify, mo_verify);
    add_output_options(*verify, oo_verify);
    double tol_flag = 1e-10;
    CLI::Option* tol_opt =
        verify->add_option("--tol", tol_flag, "Identity-suite tolerance")->capture_default_str();
    std::string dump_dir;
    verify->add_option("--dump-operators", dump_dir,
                       "Write every operator block (column-major complex pairs plus a JSON "
                       "descriptor) into this directory");

    CLI::App* betti = app.add_subcommand(
        "betti", "Ordinary and twisted Betti numbers, tautness, duality, signature");
    add_model_options(*betti, mo_betti);
    add_output_options(*betti, oo_betti);
    int duality_count = 20;
    betti->add_option("--duality-count", duality_count,
                      "Eigenvalues transported per dual degree pair (0 skips eigenvectors)")
        ->capture_default_str();

    CLI::App* spectrum = app.add_subcommand("spectrum", "Low eigenvalues of a Laplacian");
    add_model_options(*spectrum, mo_spectrum);
    add_output_options(*spectrum, oo_spectrum);
    std::string op_name = "twisted-laplacian";
    int degree = 0, count = 10;
    spectrum->add_option("--op", op_name, "Operator: laplacian or twisted-laplacian")
        ->capture_default_str();
    spectrum->add_option("--degree", degree, "Form degree")->capture_default_str();
    spectrum->add_option("--count", count, "Number of eigenvalues")->capture_default_str();

    CLI::App* duality = app.add_subcommand(
        "duality", "Compare the twisted spectrum in degree k with degree q-k through the star");
    add_model_options(*duality, mo_duality);
    add_output_options(*duality, oo_duality);
    int dual_degree = 0, dual_count = 20;
    duality->add_option("--degree", dual_degree, "Lower degree of the pair")
        ->capture_default_str();
    duality->add_option("--count", dual_count, "Eigenvalues compared")->capture_default_str();

    CLI::App* conformal = app.add_subcommand(
        "conformal", "Compare a model with its conformal shift kappa -> kappa + dh");
    add_model_options(*conformal, mo_conformal);
    add_output_options(*conformal, oo_conformal);
    std::vector<std::string> h_terms;
    int conf_count = 10;
    conformal->add_option("--h-term", h_terms,
                          "Term of h, repeatable, form \"modes=coeff\" (mode m>0 cos, m<0 sin; "
                          "attach with = when the modes start with a minus sign)");
    conformal->add_option("--count", conf_count, "Eigenvalues compared per degree")
        ->capture_default_str();

    CLI::App* suspend = app.add_subcommand(
        "suspend", "Exact integer cohomology bookkeeping for suspension foliations");
    SuspendOptions so;
    suspend->add_option("--preset", so.preset, "Built-in table: 7.2 or 7.3");
    suspend->add_option("--catalog", so.catalog,
                        "Catalog spelling: suspension-7.2 or suspension-7.3");
    suspend->add_option("--base-betti", so.base_betti,
                        "Betti numbers of the base, e.g. --base-betti 1 4 1");
    suspend->add_option("--pattern", so.pattern,
                        "Fiber contribution: constants-only or constants-and-transverse-volume")
        ->capture_default_str();
    suspend->add_option("--fiber-codim", so.fiber_codim, "Codimension of the fiber foliation")
        ->capture_default_str();
    suspend->add_flag("--oriented", so.oriented, "Transversally oriented");
    suspend->add_flag("--taut", so.taut, "The foliation is taut");
    add_output_options(*suspend, oo_suspend);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsageExit;
    }

    try {
        if (verify->parsed())
            return run_verify(mo_verify, oo_verify, tol_opt, tol_flag, dump_dir);
        if (betti->parsed()) return run_betti(mo_betti, oo_betti, duality_count);
        if (spectrum->parsed())
            return run_spectrum(mo_spectrum, oo_spectrum, op_name, degree, count);
        if (duality->parsed()) return run_duality(mo_duality, oo_duality, dual_degree, dual_count);
        if (conformal->parsed()) return run_conformal(mo_conformal, oo_conformal, h_terms, conf_count);
        if (suspend->parsed()) return run_suspend(so, oo_suspend);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageExit;
    } catch (const folhodge::ModelSchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kValidationExit;
    } catch (const folhodge::ModelRejected& e) {
        std::cerr << "error: model rejected by the admission gates\n";
        for (const auto& f : e.report.failures) std::cerr << "error: " << f.message << "\n";
        return kValidationExit;
    } catch (const folhodge::ReliabilityError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kReliabilityExit;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageExit;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageExit;
    }
    return kUsageExit;
}
