#include <catch2/catch_amalgamated.hpp>

#include <folhodge/catalog.hpp>
#include <folhodge/model_io.hpp>
#include <folhodge/operators.hpp>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

using namespace folhodge;
using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

const fs::path& scratch_dir() {
    static const fs::path dir = [] {
        fs::path p =
            fs::temp_directory_path() / ("folhodge_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    REQUIRE(out.good());
    out << text;
}

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

/// Runs the CLI through the shell, capturing both streams. `env_prefix`
/// may carry VAR=value assignments for the child.
CliResult run_cli(const std::string& args, const std::string& env_prefix = "") {
    static int counter = 0;
    const fs::path out_file = scratch_dir() / ("out_" + std::to_string(counter) + ".txt");
    const fs::path err_file = scratch_dir() / ("err_" + std::to_string(counter) + ".txt");
    ++counter;
    const std::string cmd = env_prefix + (env_prefix.empty() ? "" : " ") +
                            "\"" FOLHODGE_CLI_PATH "\" " + args + " > \"" + out_file.string() +
                            "\" 2> \"" + err_file.string() + "\"";
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// Serialization round-trips

TEST_CASE("model files round-trip byte for byte", "[io]") {
    const double golden = lambda_from_trace(3.0);
    const std::vector<CoframeModel> models = {
        make_carriere(golden, 16),
        make_flat_torus(2, 8),
        make_flat_torus(1, 16, TrigPoly::single({-1}, 0.2)),
        make_carriere_product(golden, 1, 8),
    };
    for (const CoframeModel& m : models) {
        const std::string s1 = model_to_string(m);
        const CoframeModel m2 = model_from_string(s1);
        CHECK(model_to_string(m2) == s1);
        // The engine fingerprint hashes every ingredient of the model, so
        // equality here means the reparse lost nothing.
        CHECK(Engine(m).fingerprint() == Engine(m2).fingerprint());
    }
}

TEST_CASE("save and load go through files unchanged", "[io]") {
    const CoframeModel m = make_carriere(2.0, 16);
    const fs::path path = scratch_dir() / "carriere_roundtrip.json";
    save_model(path.string(), m);
    const CoframeModel m2 = load_model(path.string());
    CHECK(model_to_string(m2) == model_to_string(m));
}

TEST_CASE("schema violations name the offending field", "[io]") {
    const nlohmann::ordered_json base = model_to_json(make_carriere(2.0, 16));

    SECTION("unknown field") {
        auto j = base;
        j["bogus"] = 1;
        CHECK_THROWS_WITH(model_from_json(j), ContainsSubstring("bogus"));
    }
    SECTION("missing field") {
        auto j = base;
        j.erase("metric");
        CHECK_THROWS_WITH(model_from_json(j), ContainsSubstring("metric"));
    }
    SECTION("wrong type") {
        auto j = base;
        j["q"] = "two";
        CHECK_THROWS_WITH(model_from_json(j), ContainsSubstring("\"q\""));
    }
    SECTION("metric arity") {
        auto j = base;
        j["metric"] = {1.0, 0.0, 0.0};
        CHECK_THROWS_WITH(model_from_json(j), ContainsSubstring("metric"));
    }
    SECTION("orientation range") {
        auto j = base;
        j["orientation"] = 2;
        CHECK_THROWS_WITH(model_from_json(j), ContainsSubstring("orientation"));
    }
    SECTION("kappa component index") {
        auto j = base;
        j["kappa"]["7"] = nlohmann::ordered_json::object();
        CHECK_THROWS_WITH(model_from_json(j), ContainsSubstring("kappa"));
    }
    SECTION("kappa mode arity") {
        auto j = base;
        j["kappa"]["1"]["0,0"] = 1.0;
        CHECK_THROWS_WITH(model_from_json(j), ContainsSubstring("mode indices"));
    }
    SECTION("structure entry missing a key") {
        auto j = base;
        j["structure"] = nlohmann::ordered_json::array();
        j["structure"].push_back({{"k", 2}, {"i", 1}, {"value", 0.7}});
        CHECK_THROWS_WITH(model_from_json(j), ContainsSubstring("structure[0]"));
    }
    SECTION("not json at all") {
        CHECK_THROWS_AS(model_from_string("not json {"), ModelSchemaError);
    }
}

// ---------------------------------------------------------------------------
// CLI end to end

TEST_CASE("betti subcommand reports the reference cohomology", "[cli]") {
    const auto r = run_cli("betti --catalog carriere --lambda-trace 3 -N 16 --format json");
    REQUIRE(r.exit_code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["schema_version"] == 1);
    CHECK(j["betti"] == nlohmann::json({1, 1, 0}));
    CHECK(j["twisted"] == nlohmann::json({0, 0, 0}));
    CHECK(j["taut"] == false);
    CHECK(j["signature"] == 0);
    CHECK(j["reliable"] == true);

    SECTION("output is byte-stable across runs") {
        const auto r2 = run_cli("betti --catalog carriere --lambda-trace 3 -N 16 --format json");
        REQUIRE(r2.exit_code == 0);
        CHECK(r2.out == r.out);
    }
}

TEST_CASE("verify subcommand passes and honors the tolerance override", "[cli]") {
    const auto r = run_cli("verify --catalog carriere -N 16");
    CHECK(r.exit_code == 0);
    CHECK_THAT(r.out, ContainsSubstring("pass"));

    SECTION("an absurdly tight environment override flips the verdict") {
        const auto tight = run_cli("verify --catalog carriere -N 16",
                                   "FOLHODGE_TOL_OVERRIDE=1e-18");
        CHECK(tight.exit_code == 3);
        CHECK_THAT(tight.err, ContainsSubstring("tolerance"));
    }
    SECTION("an explicit flag beats the environment") {
        const auto loose = run_cli("verify --catalog carriere -N 16 --tol 1.0",
                                   "FOLHODGE_TOL_OVERRIDE=1e-18");
        CHECK(loose.exit_code == 0);
    }
}

TEST_CASE("spectrum csv parses back to the emitted values", "[cli]") {
    const fs::path csv_path = scratch_dir() / "spectrum.csv";
    const fs::path json_path = scratch_dir() / "spectrum.json";
    const std::string common = "spectrum --catalog carriere -N 16 --degree 0 --count 4 ";
    REQUIRE(run_cli(common + "--format csv --out \"" + csv_path.string() + "\"").exit_code == 0);
    REQUIRE(run_cli(common + "--format json --out \"" + json_path.string() + "\"").exit_code == 0);

    const auto j = nlohmann::json::parse(slurp(json_path));
    std::istringstream csv(slurp(csv_path));
    std::string line;
    REQUIRE(std::getline(csv, line));
    CHECK(line == "operator,degree,index,eigenvalue,residual");
    int i = 0;
    while (std::getline(csv, line)) {
        std::istringstream row(line);
        std::string op, degree, index, eigenvalue, residual;
        REQUIRE(std::getline(row, op, ','));
        REQUIRE(std::getline(row, degree, ','));
        REQUIRE(std::getline(row, index, ','));
        REQUIRE(std::getline(row, eigenvalue, ','));
        REQUIRE(std::getline(row, residual, ','));
        CHECK(op == "Delta_tilde");
        CHECK(degree == "0");
        CHECK(index == std::to_string(i));
        // %.17g round-trips doubles exactly, so the csv must reproduce the
        // json numbers bit for bit, well past 15 significant digits.
        CHECK(std::stod(eigenvalue) == j["eigenvalues"][i].get<double>());
        CHECK(std::stod(residual) == j["residuals"][i].get<double>());
        ++i;
    }
    CHECK(i == 4);
}

TEST_CASE("model files drive the cli", "[cli]") {
    const fs::path path = scratch_dir() / "cli_model.json";
    save_model(path.string(), make_carriere(2.0, 32));

    const auto verify = run_cli("verify --model \"" + path.string() + "\" -N 16");
    CHECK(verify.exit_code == 0);

    // -N overrides the stored grid; the reported block dimension proves it.
    const auto spectrum_run =
        run_cli("spectrum --model \"" + path.string() + "\" -N 16 --count 2 --format json");
    REQUIRE(spectrum_run.exit_code == 0);
    CHECK(nlohmann::json::parse(spectrum_run.out)["dimension"] == 16);
}

TEST_CASE("gate failures exit with the validation code", "[cli]") {
    SECTION("metric that is not positive definite") {
        auto j = model_to_json(make_carriere(2.0, 16));
        j["metric"] = {-1.0, 0.0, 0.0, 1.0};
        const fs::path path = scratch_dir() / "bad_metric.json";
        spit(path, j.dump(2) + "\n");
        const auto r = run_cli("betti --model \"" + path.string() + "\"");
        CHECK(r.exit_code == 2);
        CHECK_THAT(r.err, ContainsSubstring("metric"));
    }
    SECTION("mean curvature form that is not closed") {
        auto j = model_to_json(make_flat_torus(2, 8));
        j["kappa"]["1"]["0,1"] = 1.0;
        const fs::path path = scratch_dir() / "bad_kappa.json";
        spit(path, j.dump(2) + "\n");
        const auto r = run_cli("betti --model \"" + path.string() + "\"");
        CHECK(r.exit_code == 2);
        CHECK_THAT(r.err, ContainsSubstring("residual"));
    }
    SECTION("unreadable file") {
        const auto r = run_cli("betti --model \"" + (scratch_dir() / "missing.json").string() + "\"");
        CHECK(r.exit_code == 2);
        CHECK_THAT(r.err, ContainsSubstring("cannot read"));
    }
    SECTION("schema violation") {
        const fs::path path = scratch_dir() / "bad_schema.json";
        spit(path, "{\"q\": 2, \"surprise\": true}\n");
        const auto r = run_cli("betti --model \"" + path.string() + "\"");
        CHECK(r.exit_code == 2);
        CHECK_THAT(r.err, ContainsSubstring("surprise"));
    }
}

TEST_CASE("usage errors exit with code 4", "[cli]") {
    CHECK(run_cli("betti --catalog unheard-of").exit_code == 4);
    CHECK(run_cli("betti --catalog carriere --format csv").exit_code == 4);
    CHECK(run_cli("spectrum --catalog carriere --op bogus").exit_code == 4);
    CHECK(run_cli("spectrum --catalog carriere -N 16 --degree 9").exit_code == 4);
    CHECK(run_cli("betti").exit_code == 4);
    CHECK(run_cli("betti --catalog carriere --model also.json").exit_code == 4);
    CHECK(run_cli("betti --catalog suspension-7.2").exit_code == 4);
    CHECK(run_cli("wrong-command").exit_code == 4);
}

TEST_CASE("suspend presets emit the exact integer tables", "[cli]") {
    const auto r72 = run_cli("suspend --preset 7.2 --format json");
    REQUIRE(r72.exit_code == 0);
    const auto j72 = nlohmann::json::parse(r72.out);
    CHECK(j72["q"] == 3);
    CHECK(j72["betti"] == nlohmann::json({1, 4, 1, 0}));
    CHECK(j72["euler"] == -2);
    CHECK(j72["taut"] == false);
    CHECK(j72["twisted"] == nlohmann::json({0, nullptr, nullptr, 0}));
    CHECK(j72["twisted_b1_floor"] == 2);
    bool found_floor = false;
    for (const auto& c : j72["constraints"])
        if (c.get<std::string>() == "b~1 >= 2") found_floor = true;
    CHECK(found_floor);

    const auto r73 = run_cli("suspend --catalog suspension-7.3 --format json");
    REQUIRE(r73.exit_code == 0);
    const auto j73 = nlohmann::json::parse(r73.out);
    CHECK(j73["q"] == 4);
    CHECK(j73["betti"] == nlohmann::json({1, 4, 2, 4, 1}));
    CHECK(j73["euler"] == -4);

    SECTION("custom taut input copies the betti table") {
        const auto r = run_cli(
            "suspend --base-betti 1 1 --fiber-codim 1 --oriented --taut --format json");
        REQUIRE(r.exit_code == 0);
        const auto j = nlohmann::json::parse(r.out);
        CHECK(j["q"] == 2);
        CHECK(j["betti"] == nlohmann::json({1, 1, 0}));
        CHECK(j["twisted"] == nlohmann::json({1, 1, 0}));
    }
    SECTION("inconsistent input is a usage error") {
        CHECK(run_cli("suspend --base-betti 1 --fiber-codim 0").exit_code == 4);
        CHECK(run_cli("suspend --preset 9.9").exit_code == 4);
    }
}

TEST_CASE("operator dumps match their descriptors", "[cli]") {
    const fs::path dir = scratch_dir() / "dump";
    const auto r =
        run_cli("verify --catalog carriere -N 8 --dump-operators \"" + dir.string() + "\"");
    REQUIRE(r.exit_code == 0);

    const auto side = nlohmann::json::parse(slurp(dir / "d_k0.json"));
    CHECK(side["name"] == "d");
    CHECK(side["k"] == 0);
    CHECK(side["rows"] == 16);  // 1-forms over 8 points, two coframe components
    CHECK(side["cols"] == 8);
    CHECK(side["model_hash"].get<std::string>() ==
          nlohmann::json::parse(slurp(dir / "Delta_tilde_k1.json"))["model_hash"].get<std::string>());
    CHECK(fs::file_size(dir / "d_k0.bin") ==
          side["rows"].get<std::size_t>() * side["cols"].get<std::size_t>() * 16);
    CHECK(fs::exists(dir / "star_k2.bin"));
}
