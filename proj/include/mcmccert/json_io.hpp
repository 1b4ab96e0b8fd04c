#pragma once

#include <json.hpp>
#include <string>
#include <variant>

#include "mcmccert/bounds.hpp"
#include "mcmccert/chains.hpp"
#include "mcmccert/diagnostics.hpp"
#include "mcmccert/harness.hpp"
#include "mcmccert/sampler_chain.hpp"

namespace mcmccert {

using Json = nlohmann::ordered_json;

// Chain documents: {"schema":"v1","family":"...","params":{...}}. Families:
//   hypercube          params: N
//   ising              params: beta, h, edges (list of [a,b] pairs), optional n_vertices
//   binomial           params: d, lambda
//   mm_infty_discrete  params: lambda, d, t, steps
//   euler_sde          params: model ("ou"), dim, dt, optional trunc_R
//   state_space        params: model ("linear"), r, noise_sd
// Schema violations surface as Error("SchemaViolation") with a JSON-pointer
// path in the message.
struct ParsedChain {
  std::string family;
  std::variant<BuiltChain, MMInftyDiscretization, EulerChain, StateSpaceChain> chain;

  // The finite exact-mode chain when the family has one (the queue adapter
  // exposes its underlying birth-death chain); nullptr for sampler families.
  const BuiltChain* finite() const;
  BuiltChain* finite();
};

ParsedChain parse_chain_spec(const Json& doc);
ParsedChain load_chain_spec(const std::string& path);

// Observable documents: {"schema":"v1","name":"..."} with optional "index".
// Builtins: fraction_zero, magnetization, identity, coordinate.
Observable builtin_observable(const Json& spec, const ParsedChain& chain);
PointObservable builtin_point_observable(const Json& spec);

Json to_json(const FiniteDistribution& dist);
FiniteDistribution distribution_from_json(const Json& j);

Json to_json(const DiagnosticsBundle& diag);
DiagnosticsBundle diagnostics_from_json(const Json& j);

Json to_json(const BoundCertificate& cert);
BoundCertificate certificate_from_json(const Json& j);

Json to_json(const EnsembleResult& result);
Json to_json(const ValidationReport& report);

// Distribution over a point cloud for the standalone w1 command:
// {"schema":"v1","points":[[...],...],"weights":[...]}.
struct PointCloudDistribution {
  Eigen::MatrixXd points;  // rows = points
  Eigen::VectorXd weights;
};
PointCloudDistribution load_point_cloud(const std::string& path);

std::string read_file(const std::string& path);
// Writes through a temporary file in the same directory, then renames.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace mcmccert
