#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "mcmccert/errors.hpp"
#include "mcmccert/json_io.hpp"
#include "test_helpers.hpp"

using namespace mcmccert;
namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path dir;
  Scratch() {
    dir = fs::temp_directory_path() / ("mcmccert_test_" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string file(const std::string& name, const std::string& content) {
    fs::path p = dir / name;
    std::ofstream(p) << content;
    return p.string();
  }
  std::string path(const std::string& name) { return (dir / name).string(); }
};

int run_cli(const std::string& args, const std::string& log) {
  std::string cmd = std::string(MCMC_CERT_BIN) + " " + args + " > " + log + " 2>&1";
  int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) { return read_file(path); }

const char* kCubeSpec = R"({"schema":"v1","family":"hypercube","params":{"N":4}})";
const char* kBinomialSpec = R"({"schema":"v1","family":"binomial","params":{"d":8,"lambda":2.0}})";
const char* kFractionZero = R"({"schema":"v1","name":"fraction_zero"})";

}  // namespace

TEST_CASE("chain specs parse and reject with pointer paths") {
  ParsedChain cube = parse_chain_spec(Json::parse(kCubeSpec));
  CHECK(cube.family == "hypercube");
  CHECK(cube.finite()->kernel.space().size() == 16);

  try {
    parse_chain_spec(Json::parse(R"({"schema":"v1","family":"hypercube","params":{"N":40}})"));
    FAIL("expected SchemaViolation");
  } catch (const Error& err) {
    CHECK(err.code() == "SchemaViolation");
    CHECK(std::string(err.what()).find("/params/N") != std::string::npos);
  }
  CHECK_THROWS_WITH_AS(
      parse_chain_spec(Json::parse(R"({"schema":"v1","family":"nope","params":{}})")),
      doctest::Contains("/family"), Error);
  CHECK_THROWS_WITH_AS(
      parse_chain_spec(Json::parse(R"({"schema":"v2","family":"hypercube","params":{"N":2}})")),
      doctest::Contains("/schema"), Error);
  CHECK_THROWS_WITH_AS(
      parse_chain_spec(Json::parse(
          R"({"schema":"v1","family":"ising","params":{"beta":0.1,"edges":[[0,0]]}})")),
      doctest::Contains("/params/edges/0"), Error);
}

TEST_CASE("builtin observables carry verified Lipschitz norms") {
  ParsedChain cube = parse_chain_spec(Json::parse(kCubeSpec));
  Observable f0 = builtin_observable(Json::parse(kFractionZero), cube);
  CHECK(f0.lip_norm == doctest::Approx(0.25));
  verify_lipschitz(f0, cube.finite()->kernel.space());

  ParsedChain ising = parse_chain_spec(Json::parse(
      R"({"schema":"v1","family":"ising","params":{"beta":0.2,"h":0.0,"edges":[[0,1],[1,2],[2,3],[3,0]]}})"));
  Observable mag = builtin_observable(Json::parse(R"({"schema":"v1","name":"magnetization"})"),
                                      ising);
  CHECK(mag.lip_norm == doctest::Approx(0.5));
  verify_lipschitz(mag, ising.finite()->kernel.space());

  ParsedChain bino = parse_chain_spec(Json::parse(kBinomialSpec));
  Observable id = builtin_observable(Json::parse(R"({"schema":"v1","name":"identity"})"), bino);
  verify_lipschitz(id, bino.finite()->kernel.space());
  CHECK_THROWS_WITH_AS(
      builtin_observable(Json::parse(R"({"schema":"v1","name":"identity"})"), cube),
      doctest::Contains("SchemaViolation"), Error);
}

TEST_CASE("diagnostics bundles round-trip through JSON exactly") {
  ParsedChain chain = parse_chain_spec(Json::parse(kBinomialSpec));
  DiagnosticsBundle diag = diagnostics_with_analytic(*chain.finite());
  Json encoded = to_json(diag);
  DiagnosticsBundle back = diagnostics_from_json(Json::parse(encoded.dump()));
  CHECK(back.kappa == diag.kappa);
  CHECK(back.witness_pair == diag.witness_pair);
  CHECK((back.ecc - diag.ecc).norm() == 0.0);
  CHECK((back.sigma2 - diag.sigma2).norm() == 0.0);
  CHECK((back.n_lower - diag.n_lower).norm() == 0.0);
  CHECK(back.sigma_inf == diag.sigma_inf);
  CHECK(*back.sup_ratio == *diag.sup_ratio);
  REQUIRE(back.s_spec.has_value());
  CHECK((back.s_spec->S.values - diag.s_spec->S.values).norm() == 0.0);
  CHECK(back.s_spec->mean_value == diag.s_spec->mean_value);
  REQUIRE(back.stationary.has_value());
  CHECK(total_variation(*back.stationary, *diag.stationary) == 0.0);
}

TEST_CASE("certificates round-trip through JSON exactly") {
  RunPlan plan;
  plan.T = 250;
  plan.T0 = 3;
  plan.lip_norm = 0.3;
  plan.start = 4;
  BoundCertificate cert = concentration_uniform(plan, 0.2, 1.7, 0.9, 0.24);
  Json encoded = to_json(cert);
  BoundCertificate back = certificate_from_json(Json::parse(encoded.dump()));
  CHECK(back.kind == cert.kind);
  CHECK(back.formula_id == cert.formula_id);
  CHECK(back.value == cert.value);
  CHECK(back.raw_value == cert.raw_value);
  CHECK(back.log_value == cert.log_value);
  CHECK(back.regime == cert.regime);
  CHECK(back.r_max == cert.r_max);
  CHECK(back.T == cert.T);
  CHECK(back.kappa == cert.kappa);
  REQUIRE(back.inputs.size() == cert.inputs.size());
  for (std::size_t i = 0; i < cert.inputs.size(); ++i) {
    CHECK(back.inputs[i].first == cert.inputs[i].first);
    CHECK(back.inputs[i].second == cert.inputs[i].second);
  }

  // Infinite window edge survives the trip (encoded as a marker).
  BoundCertificate bias = bias_bound(plan, 0.2, 1.5);
  BoundCertificate bias_back = certificate_from_json(Json::parse(to_json(bias).dump()));
  CHECK(std::isinf(bias_back.r_max));
  CHECK(std::isnan(bias_back.log_value) == std::isnan(bias.log_value));
}

TEST_CASE("atomic writes leave no temp file behind") {
  Scratch scratch;
  std::string target = scratch.path("out.json");
  write_file_atomic(target, "{\"a\":1}\n");
  CHECK(slurp(target) == "{\"a\":1}\n");
  CHECK(!fs::exists(target + ".tmp"));
}

TEST_CASE("cli diagnose reports the hypercube curvature") {
  Scratch scratch;
  std::string spec = scratch.file("cube.json", kCubeSpec);
  std::string report = scratch.path("report.json");
  int code = run_cli("diagnose --chain " + spec + " --out " + report,
                     scratch.path("log.txt"));
  CHECK(code == 0);
  Json parsed = Json::parse(slurp(report));
  CHECK(parsed.at("kappa").get<double>() == doctest::Approx(0.25).epsilon(1e-12));
  DiagnosticsBundle diag = diagnostics_from_json(parsed);
  CHECK(diag.kappa == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("cli diagnose honors the neighbor-pairs flag") {
  Scratch scratch;
  std::string spec = scratch.file("cube.json", kCubeSpec);
  std::string report = scratch.path("report.json");
  int code = run_cli("diagnose --chain " + spec + " --pairs neighbors --out " + report,
                     scratch.path("log.txt"));
  CHECK(code == 0);
  Json parsed = Json::parse(slurp(report));
  CHECK(parsed.at("pair_mode") == "neighbors");
  CHECK(parsed.at("kappa").get<double>() == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("cli exits with 2 on non-positive curvature") {
  Scratch scratch;
  std::string spec = scratch.file("k5.json",
      R"({"schema":"v1","family":"ising","params":{"beta":1.0,"h":0.0,)"
      R"("edges":[[0,1],[0,2],[0,3],[0,4],[1,2],[1,3],[1,4],[2,3],[2,4],[3,4]]}})");
  int code = run_cli("diagnose --chain " + spec + " --out " + scratch.path("r.json"),
                     scratch.path("log.txt"));
  CHECK(code == 2);
  CHECK(slurp(scratch.path("log.txt")).find("NonPositiveCurvature") != std::string::npos);
}

TEST_CASE("cli exits with 1 on schema violations, mentioning the pointer") {
  Scratch scratch;
  std::string spec = scratch.file("bad.json",
                                  R"({"schema":"v1","family":"hypercube","params":{}})");
  int code = run_cli("diagnose --chain " + spec + " --out " + scratch.path("r.json"),
                     scratch.path("log.txt"));
  CHECK(code == 1);
  CHECK(slurp(scratch.path("log.txt")).find("/params/N") != std::string::npos);
}

TEST_CASE("cli bound inverts the frozen confidence radius") {
  Scratch scratch;
  std::string spec = scratch.file("cube.json", kCubeSpec);
  std::string certs = scratch.path("certs.json");
  int code = run_cli("bound --chain " + spec +
                         " --T 1000 --T0 0 --lip 1 --alpha 0.05 --which uniform --out " + certs,
                     scratch.path("log.txt"));
  CHECK(code == 0);
  Json parsed = Json::parse(slurp(certs));
  bool found = false;
  for (const auto& item : parsed) {
    if (item.at("formula_id") == "confidence_radius_uniform") {
      found = true;
      CHECK(item.at("value").get<double>() == doctest::Approx(0.687).epsilon(2e-3));
    }
  }
  CHECK(found);
}

TEST_CASE("cli runs are byte-identical for a fixed seed, env fallback included") {
  Scratch scratch;
  std::string spec = scratch.file("bino.json", kBinomialSpec);
  std::string obs = scratch.file("obs.json", R"({"schema":"v1","name":"identity"})");
  std::string out1 = scratch.path("r1.json");
  std::string out2 = scratch.path("r2.json");
  std::string args = "simulate --chain " + spec + " --obs " + obs +
                     " --T 40 --T0 5 --replicas 500 --radii 0.5,1.0 ";
  CHECK(run_cli("--seed 321 " + args + "--out " + out1, scratch.path("l1.txt")) == 0);
  CHECK(run_cli("--seed 321 " + args + "--out " + out2, scratch.path("l2.txt")) == 0);
  CHECK(slurp(out1) == slurp(out2));

  std::string out3 = scratch.path("r3.json");
  std::string cmd = "MCMC_CERT_SEED=321 " + std::string(MCMC_CERT_BIN) + " " + args + "--out " +
                    out3 + " > " + scratch.path("l3.txt") + " 2>&1";
  REQUIRE(std::system(cmd.c_str()) == 0);
  CHECK(slurp(out3) == slurp(out1));
}

TEST_CASE("cli validate writes a report and returns 0 when sound") {
  Scratch scratch;
  std::string spec = scratch.file("bino.json", kBinomialSpec);
  std::string obs = scratch.file("obs.json", R"({"schema":"v1","name":"identity"})");
  std::string report = scratch.path("report.json");
  std::string csv = scratch.path("curves.csv");
  int code = run_cli("--seed 11 validate --chain " + spec + " --obs " + obs +
                         " --T 50 --T0 2 --replicas 2000 --r 2.0,4.0 --alpha 0.2 --out " +
                         report + " --csv " + csv,
                     scratch.path("log.txt"));
  CHECK(code == 0);
  Json parsed = Json::parse(slurp(report));
  CHECK(parsed.at("any_violated") == false);
  CHECK(parsed.at("checks").size() >= 5);
  bool radius_checked = false;
  for (const auto& check : parsed.at("checks"))
    if (check.at("kind") == "confidence_radius") {
      radius_checked = true;
      CHECK(check.at("verdict") != "VIOLATED");
    }
  CHECK(radius_checked);
  std::string curves = slurp(csv);
  CHECK(curves.find("formula_id,radius,observed_freq,bound") != std::string::npos);
  CHECK(curves.find("concentration_uniform") != std::string::npos);
}

TEST_CASE("cli w1 matches the library on point clouds and handles identity") {
  Scratch scratch;
  std::string mu = scratch.file("mu.json",
      R"({"schema":"v1","points":[[0,0],[1,0],[0,1]],"weights":[0.5,0.25,0.25]})");
  std::string nu = scratch.file("nu.json",
      R"({"schema":"v1","points":[[0,0],[1,1]],"weights":[0.5,0.5]})");
  std::string log = scratch.path("w1.txt");
  CHECK(run_cli("w1 --mu " + mu + " --nu " + nu, log) == 0);
  double value = std::stod(slurp(log));
  CHECK(value > 0.0);
  CHECK(value < 2.0);

  CHECK(run_cli("w1 --mu " + mu + " --nu " + mu, scratch.path("w0.txt")) == 0);
  CHECK(std::stod(slurp(scratch.path("w0.txt"))) == 0.0);
}

TEST_CASE("cli simulate works on the sampler-mode diffusion chain") {
  Scratch scratch;
  std::string spec = scratch.file("ou.json",
      R"({"schema":"v1","family":"euler_sde","params":{"model":"ou","dim":1,"dt":0.05}})");
  std::string obs = scratch.file("obs.json", R"({"schema":"v1","name":"identity"})");
  std::string out = scratch.path("res.json");
  int code = run_cli("--seed 5 simulate --chain " + spec + " --obs " + obs +
                         " --T 100 --T0 10 --replicas 200 --out " + out,
                     scratch.path("log.txt"));
  CHECK(code == 0);
  Json parsed = Json::parse(slurp(out));
  CHECK(parsed.at("replicas") == 200);
  // The OU time average sits near zero.
  CHECK(std::abs(parsed.at("empirical_mean_of_means").get<double>()) < 0.5);
}
