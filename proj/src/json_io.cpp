#include "mcmccert/json_io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "mcmccert/errors.hpp"

namespace mcmccert {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void schema_error(const std::string& pointer, const std::string& message) {
  throw Error("SchemaViolation", pointer + ": " + message);
}

const Json& require(const Json& j, const char* key, const std::string& pointer) {
  if (!j.is_object() || !j.contains(key)) schema_error(pointer + "/" + key, "missing field");
  return j.at(key);
}

long require_int(const Json& j, const char* key, const std::string& pointer, long lo, long hi) {
  const Json& v = require(j, key, pointer);
  if (!v.is_number_integer())
    schema_error(pointer + "/" + key, "expected an integer");
  long x = v.get<long>();
  if (x < lo || x > hi)
    schema_error(pointer + "/" + key, "expected an integer in [" + std::to_string(lo) + ", " +
                                          std::to_string(hi) + "]");
  return x;
}

double require_num(const Json& j, const char* key, const std::string& pointer) {
  const Json& v = require(j, key, pointer);
  if (!v.is_number()) schema_error(pointer + "/" + key, "expected a number");
  return v.get<double>();
}

double num_or(const Json& j, const char* key, double fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return j.at(key).get<double>();
}

void check_schema(const Json& doc, const std::string& pointer) {
  if (!doc.is_object()) schema_error(pointer.empty() ? "/" : pointer, "expected an object");
  if (doc.contains("schema") && doc.at("schema") != "v1")
    schema_error(pointer + "/schema", "unsupported schema version");
}

Json number_or_null(double x) {
  if (std::isnan(x)) return nullptr;
  if (std::isinf(x)) return x > 0 ? Json("inf") : Json("-inf");
  return x;
}

double parse_number_or_null(const Json& j, double when_null) {
  if (j.is_null()) return when_null;
  if (j.is_string()) {
    if (j == "inf") return kInf;
    if (j == "-inf") return -kInf;
    schema_error("", "expected a number or inf marker");
  }
  return j.get<double>();
}

Json vector_to_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from_json(const Json& j, const std::string& pointer) {
  if (!j.is_array()) schema_error(pointer, "expected an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  Eigen::Index i = 0;
  for (const auto& x : j) {
    if (!x.is_number()) schema_error(pointer, "expected numbers");
    v[i++] = x.get<double>();
  }
  return v;
}

}  // namespace

const BuiltChain* ParsedChain::finite() const {
  if (const BuiltChain* c = std::get_if<BuiltChain>(&chain)) return c;
  if (const MMInftyDiscretization* mm = std::get_if<MMInftyDiscretization>(&chain))
    return &mm->chain;
  return nullptr;
}

BuiltChain* ParsedChain::finite() {
  return const_cast<BuiltChain*>(static_cast<const ParsedChain*>(this)->finite());
}

ParsedChain parse_chain_spec(const Json& doc) {
  check_schema(doc, "");
  const Json& family_j = require(doc, "family", "");
  if (!family_j.is_string()) schema_error("/family", "expected a string");
  std::string family = family_j.get<std::string>();
  const Json& params = require(doc, "params", "");
  const std::string p = "/params";

  if (family == "hypercube") {
    int n_bits = static_cast<int>(require_int(params, "N", p, 1, 20));
    return ParsedChain{family, hypercube(n_bits)};
  }
  if (family == "ising") {
    double beta = require_num(params, "beta", p);
    double h = num_or(params, "h", 0.0);
    const Json& edges_j = require(params, "edges", p);
    if (!edges_j.is_array()) schema_error(p + "/edges", "expected a list of [a,b] pairs");
    std::vector<std::pair<int, int>> edges;
    int max_vertex = -1;
    std::size_t idx = 0;
    for (const auto& e : edges_j) {
      std::string ep = p + "/edges/" + std::to_string(idx++);
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
          !e[1].is_number_integer())
        schema_error(ep, "expected a pair of vertex ids");
      int a = e[0].get<int>(), b = e[1].get<int>();
      if (a < 0 || b < 0 || a == b) schema_error(ep, "vertex ids must be distinct and nonnegative");
      edges.emplace_back(a, b);
      max_vertex = std::max({max_vertex, a, b});
    }
    int n_vertices = params.contains("n_vertices")
                         ? static_cast<int>(require_int(params, "n_vertices", p, 1, 16))
                         : max_vertex + 1;
    if (max_vertex >= n_vertices) schema_error(p + "/n_vertices", "edge references missing vertex");
    if (beta < 0.0) schema_error(p + "/beta", "beta must be nonnegative");
    return ParsedChain{family, ising_heat_bath(edges, n_vertices, beta, h)};
  }
  if (family == "binomial") {
    int d = static_cast<int>(require_int(params, "d", p, 1, 100000));
    double lambda = require_num(params, "lambda", p);
    if (!(lambda > 0.0) || lambda >= d) schema_error(p + "/lambda", "need 0 < lambda < d");
    return ParsedChain{family, binomial_chain(d, lambda)};
  }
  if (family == "mm_infty_discrete") {
    double lambda = require_num(params, "lambda", p);
    int d = static_cast<int>(require_int(params, "d", p, 1, 100000));
    double t = require_num(params, "t", p);
    long steps = require_int(params, "steps", p, 1, 100000000);
    if (!(lambda > 0.0) || lambda >= d) schema_error(p + "/lambda", "need 0 < lambda < d");
    if (!(t > 0.0)) schema_error(p + "/t", "need t > 0");
    return ParsedChain{family, mm_infty_discrete(lambda, d, t, steps)};
  }
  if (family == "euler_sde") {
    std::string model = require(params, "model", p).get<std::string>();
    int dim = static_cast<int>(require_int(params, "dim", p, 1, 64));
    double dt = require_num(params, "dt", p);
    double trunc = num_or(params, "trunc_R", 6.0);
    if (!(dt > 0.0)) schema_error(p + "/dt", "need dt > 0");
    if (model == "ou") return ParsedChain{family, ornstein_uhlenbeck(dim, dt, trunc)};
    schema_error(p + "/model", "unknown model '" + model + "' (builtin: ou)");
  }
  if (family == "state_space") {
    std::string model = require(params, "model", p).get<std::string>();
    if (model == "linear") {
      double r = require_num(params, "r", p);
      double sd = num_or(params, "noise_sd", 1.0);
      if (!(r >= 0.0) || r >= 1.0) schema_error(p + "/r", "need 0 <= r < 1");
      if (!(sd > 0.0)) schema_error(p + "/noise_sd", "need noise_sd > 0");
      return ParsedChain{family, linear_state_space(r, sd)};
    }
    schema_error(p + "/model", "unknown model '" + model + "' (builtin: linear)");
  }
  schema_error("/family", "unknown family '" + family + "'");
}

ParsedChain load_chain_spec(const std::string& path) {
  return parse_chain_spec(Json::parse(read_file(path)));
}

namespace {

int bits_of(const ParsedChain& chain) {
  const BuiltChain* c = chain.finite();
  int n = c->kernel.space().size();
  int bits = 0;
  while ((1 << bits) < n) ++bits;
  return bits;
}

}  // namespace

Observable builtin_observable(const Json& spec, const ParsedChain& chain) {
  check_schema(spec, "");
  std::string name = require(spec, "name", "").get<std::string>();
  const BuiltChain* finite = chain.finite();
  if (!finite)
    throw Error("ExactModeRequired", "builtin table observables need a finite chain");
  const int n = finite->kernel.space().size();

  if (name == "identity") {
    // On bit-coded spaces the index is not Lipschitz in the Hamming metric;
    // identity is meant for the integer-line chains.
    if (chain.family == "hypercube" || chain.family == "ising")
      schema_error("/name", "identity is not Lipschitz on bit-coded states; use fraction_zero");
    Eigen::VectorXd v(n);
    for (int x = 0; x < n; ++x) v[x] = x;
    return Observable{std::move(v), 1.0, name};
  }
  if (name == "fraction_zero") {
    if (chain.family != "hypercube" && chain.family != "ising")
      schema_error("/name", "fraction_zero applies to bit-coded states");
    int bits = bits_of(chain);
    Eigen::VectorXd v(n);
    for (int x = 0; x < n; ++x)
      v[x] = static_cast<double>(bits - std::popcount(static_cast<unsigned>(x))) / bits;
    return Observable{std::move(v), 1.0 / bits, name};
  }
  if (name == "magnetization") {
    if (chain.family != "hypercube" && chain.family != "ising")
      schema_error("/name", "magnetization applies to bit-coded states");
    int bits = bits_of(chain);
    Eigen::VectorXd v(n);
    for (int x = 0; x < n; ++x) {
      int up = std::popcount(static_cast<unsigned>(x));
      v[x] = static_cast<double>(2 * up - bits) / bits;
    }
    return Observable{std::move(v), 2.0 / bits, name};
  }
  if (name == "coordinate") {
    long index = require_int(spec, "index", "", 0, 62);
    if (chain.family == "binomial" || chain.family == "mm_infty_discrete")
      schema_error("/name", "coordinate applies to bit-coded states; use identity");
    if (index >= bits_of(chain)) schema_error("/index", "coordinate index out of range");
    Eigen::VectorXd v(n);
    for (int x = 0; x < n; ++x) v[x] = (x >> index) & 1;
    return Observable{std::move(v), 1.0, name + "_" + std::to_string(index)};
  }
  schema_error("/name", "unknown observable '" + name + "'");
}

PointObservable builtin_point_observable(const Json& spec) {
  check_schema(spec, "");
  std::string name = require(spec, "name", "").get<std::string>();
  if (name == "identity") {
    return PointObservable{[](const SamplerChain::Point& x) { return x[0]; }, 1.0, name};
  }
  if (name == "coordinate") {
    long index = require_int(spec, "index", "", 0, 63);
    return PointObservable{
        [index](const SamplerChain::Point& x) { return x[static_cast<Eigen::Index>(index)]; },
        1.0, name + "_" + std::to_string(index)};
  }
  schema_error("/name", "unknown point observable '" + name + "'");
}

Json to_json(const FiniteDistribution& dist) {
  Json out;
  out["support"] = dist.support();
  out["weights"] = vector_to_json(dist.weights());
  return out;
}

FiniteDistribution distribution_from_json(const Json& j) {
  const Json& support_j = require(j, "support", "");
  std::vector<int> support;
  for (const auto& s : support_j) support.push_back(s.get<int>());
  Eigen::VectorXd w = vector_from_json(require(j, "weights", ""), "/weights");
  return FiniteDistribution(std::move(support), std::move(w));
}

Json to_json(const DiagnosticsBundle& diag) {
  Json out;
  out["schema"] = "v1";
  out["chain"] = diag.chain_label;
  out["kappa"] = diag.kappa;
  out["witness_pair"] = {diag.witness_pair.first, diag.witness_pair.second};
  out["pair_mode"] = diag.mode == PairMode::AllPairs ? "all" : "neighbors";
  out["ecc"] = vector_to_json(diag.ecc);
  out["sigma2"] = vector_to_json(diag.sigma2);
  out["n_lower"] = vector_to_json(diag.n_lower);
  out["sigma_inf"] = diag.sigma_inf;
  out["sup_ratio"] = diag.sup_ratio ? Json(*diag.sup_ratio) : Json(nullptr);
  if (diag.s_spec) {
    Json s;
    s["values"] = vector_to_json(diag.s_spec->S.values);
    s["lip_norm"] = diag.s_spec->S.lip_norm;
    s["name"] = diag.s_spec->S.name;
    s["mean_source"] = diag.s_spec->mean_source == SFunctionSpec::MeanSource::ExactStationary
                           ? "exact"
                           : diag.s_spec->mean_source == SFunctionSpec::MeanSource::OriginBound
                                 ? "origin_bound"
                                 : "declared";
    s["mean_value"] = diag.s_spec->mean_value;
    s["origin"] = diag.s_spec->origin;
    out["s_spec"] = std::move(s);
  } else {
    out["s_spec"] = nullptr;
  }
  out["stationary"] = diag.stationary ? to_json(*diag.stationary) : Json(nullptr);
  return out;
}

DiagnosticsBundle diagnostics_from_json(const Json& j) {
  check_schema(j, "");
  DiagnosticsBundle diag;
  diag.chain_label = require(j, "chain", "").get<std::string>();
  diag.kappa = require_num(j, "kappa", "");
  const Json& wp = require(j, "witness_pair", "");
  diag.witness_pair = {wp[0].get<int>(), wp[1].get<int>()};
  diag.mode = require(j, "pair_mode", "") == "all" ? PairMode::AllPairs : PairMode::NeighborPairs;
  diag.ecc = vector_from_json(require(j, "ecc", ""), "/ecc");
  diag.sigma2 = vector_from_json(require(j, "sigma2", ""), "/sigma2");
  diag.n_lower = vector_from_json(require(j, "n_lower", ""), "/n_lower");
  diag.sigma_inf = require_num(j, "sigma_inf", "");
  const Json& ratio = require(j, "sup_ratio", "");
  if (!ratio.is_null()) diag.sup_ratio = ratio.get<double>();
  const Json& s = require(j, "s_spec", "");
  if (!s.is_null()) {
    SFunctionSpec spec;
    spec.S.values = vector_from_json(require(s, "values", "/s_spec"), "/s_spec/values");
    spec.S.lip_norm = require_num(s, "lip_norm", "/s_spec");
    spec.S.name = require(s, "name", "/s_spec").get<std::string>();
    std::string source = require(s, "mean_source", "/s_spec").get<std::string>();
    spec.mean_source = source == "exact" ? SFunctionSpec::MeanSource::ExactStationary
                       : source == "origin_bound" ? SFunctionSpec::MeanSource::OriginBound
                                                  : SFunctionSpec::MeanSource::Declared;
    spec.mean_value = require_num(s, "mean_value", "/s_spec");
    spec.origin = static_cast<int>(require_int(s, "origin", "/s_spec", 0, 1 << 30));
    diag.s_spec = std::move(spec);
  }
  const Json& pi = require(j, "stationary", "");
  if (!pi.is_null()) diag.stationary = distribution_from_json(pi);
  return diag;
}

Json to_json(const BoundCertificate& cert) {
  Json out;
  out["schema"] = "v1";
  out["kind"] = cert.kind;
  out["formula_id"] = cert.formula_id;
  out["value"] = cert.value;
  out["raw_value"] = cert.raw_value;
  out["log_value"] = number_or_null(cert.log_value);
  out["regime"] = cert.regime;
  out["r_max"] = number_or_null(cert.r_max);
  out["vacuous"] = cert.vacuous;
  out["T"] = cert.T;
  out["T0"] = cert.T0;
  out["kappa"] = cert.kappa;
  out["lip_norm"] = cert.lip_norm;
  Json inputs;
  for (const auto& [key, val] : cert.inputs) inputs[key] = number_or_null(val);
  out["inputs"] = std::move(inputs);
  return out;
}

BoundCertificate certificate_from_json(const Json& j) {
  check_schema(j, "");
  BoundCertificate cert;
  cert.kind = require(j, "kind", "").get<std::string>();
  cert.formula_id = require(j, "formula_id", "").get<std::string>();
  cert.value = require_num(j, "value", "");
  cert.raw_value = require_num(j, "raw_value", "");
  cert.log_value = parse_number_or_null(require(j, "log_value", ""), kNaN);
  cert.regime = require(j, "regime", "").get<std::string>();
  cert.r_max = parse_number_or_null(require(j, "r_max", ""), kInf);
  cert.vacuous = require(j, "vacuous", "").get<bool>();
  cert.T = require_int(j, "T", "", 0, std::numeric_limits<long>::max());
  cert.T0 = require_int(j, "T0", "", 0, std::numeric_limits<long>::max());
  cert.kappa = require_num(j, "kappa", "");
  cert.lip_norm = require_num(j, "lip_norm", "");
  const Json& inputs = require(j, "inputs", "");
  for (auto it = inputs.begin(); it != inputs.end(); ++it)
    cert.inputs.emplace_back(it.key(), parse_number_or_null(it.value(), kNaN));
  return cert;
}

Json to_json(const EnsembleResult& result) {
  Json out;
  out["schema"] = "v1";
  out["replicas"] = result.replicas;
  out["T"] = result.T;
  out["T0"] = result.T0;
  out["lip_norm"] = result.lip_norm;
  out["seed"] = result.seed;
  out["empirical_mean_of_means"] = result.empirical_mean_of_means;
  out["empirical_variance"] = result.empirical_variance;
  out["empirical_bias"] = result.empirical_bias ? Json(*result.empirical_bias) : Json(nullptr);
  out["center"] = result.center;
  out["center_source"] = result.center_source;
  Json tail = Json::array();
  for (const auto& [r, freq] : result.tail_freq) tail.push_back({r, freq});
  out["tail_freq"] = std::move(tail);
  return out;
}

Json to_json(const ValidationReport& report) {
  Json out;
  out["schema"] = "v1";
  out["replicas"] = report.replicas;
  out["seed"] = report.seed;
  out["any_violated"] = report.any_violated;
  Json checks = Json::array();
  for (const auto& c : report.checks) {
    Json jc;
    jc["formula_id"] = c.formula_id;
    jc["kind"] = c.kind;
    jc["verdict"] = verdict_name(c.verdict);
    jc["bound"] = c.bound;
    jc["observed"] = c.observed;
    jc["slack"] = c.slack;
    jc["note"] = c.note;
    checks.push_back(std::move(jc));
  }
  out["checks"] = std::move(checks);
  return out;
}

PointCloudDistribution load_point_cloud(const std::string& path) {
  Json doc = Json::parse(read_file(path));
  check_schema(doc, "");
  const Json& pts = require(doc, "points", "");
  if (!pts.is_array() || pts.empty()) schema_error("/points", "expected a nonempty array");
  PointCloudDistribution out;
  Eigen::Index dim = -1;
  Eigen::Index row = 0;
  out.points.resize(static_cast<Eigen::Index>(pts.size()), 1);
  for (const auto& pt : pts) {
    std::string ptr = "/points/" + std::to_string(row);
    Eigen::VectorXd v;
    if (pt.is_number()) {
      v.resize(1);
      v[0] = pt.get<double>();
    } else {
      v = vector_from_json(pt, ptr);
    }
    if (dim < 0) {
      dim = v.size();
      out.points.resize(static_cast<Eigen::Index>(pts.size()), dim);
    } else if (v.size() != dim) {
      schema_error(ptr, "inconsistent point dimension");
    }
    out.points.row(row++) = v.transpose();
  }
  out.weights = vector_from_json(require(doc, "weights", ""), "/weights");
  if (out.weights.size() != out.points.rows())
    schema_error("/weights", "weight count must match point count");
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("IoError", "cannot read " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("IoError", "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error("IoError", "short write to " + tmp.string());
  }
  fs::rename(tmp, target);
}

}  // namespace mcmccert
