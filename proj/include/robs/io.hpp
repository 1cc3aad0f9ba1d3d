#pragma once

#include "robs/pipeline.hpp"
#include "robs/robust.hpp"

#include <json.hpp>

#include <optional>
#include <stdexcept>
#include <string>

namespace robs
{

using Json = nlohmann::json;

// Malformed input; the message starts with the offending field path.
struct ConfigError : std::invalid_argument
{
  ConfigError(const std::string & field, const std::string & what)
  : std::invalid_argument(field + ": " + what), field(field) {}

  std::string field;
};

/* -------------------------------------------------------------------------- */
/*                                   Schemas                                  */
/* -------------------------------------------------------------------------- */

// Matrices are arrays of rows. Shapes are carried explicitly so that empty
// dimensions survive a round trip.

// {"states","inputs","outputs","A","B","C","D"}
Json to_json(const System & s);
System system_from_json(const Json & j, const std::string & where = "system");

// {"rows","cols","taps":[matrix,...]}
Json to_json(const Fir & f);
Fir fir_from_json(const Json & j, const std::string & where = "fir");

// {"plant","gains":{"F","L"},"fir_len","factors":{"M","N","Mt","Nt","X","Y","Xt","Yt"}}
Json to_json(const Dcf & d);
Dcf dcf_from_json(const Json & j, const std::string & where = "dcf");

// {"d_mt","d_nt","d_m","d_n","left_norm","right_residual","right_tail"}
Json to_json(const Perturbation & p);

// Non-finite numbers are written as null.
Json to_json(const SynthesisResult & r);
SynthesisResult synthesis_from_json(const Json & j, const std::string & where = "synthesis");

// d_hat, order, singular values, radii and residuals; errors against the
// truth when `truth` is given.
Json identification_report(const IdentifiedModel & im, const Dcf & initial, const System * truth = nullptr);

Json to_json(const GapRow & g);

// seed,fraction,pert_norm,product_norm,phi_invertible,loop_stable
std::string monte_carlo_csv(const std::vector<MonteCarloRow> & rows);

// Reads e1, e2 columns from a trajectory CSV written by trajectory_csv.
DualYoulaSignals signals_from_csv(const std::string & text, Index m, Index p);

/* -------------------------------------------------------------------------- */
/*                             Experiment config                              */
/* -------------------------------------------------------------------------- */

struct ExperimentConfig
{
  System true_plant;
  System model;                 // plant used for the initial factorization
  std::string gains_mode = "riccati";
  GainPair gains;               // filled for both modes
  Index factor_len = 40;
  NoiseConfig noise;
  std::vector<Index> T_list;
  std::vector<std::uint64_t> seeds;
  IdentifyConfig identify;
  SynthesisConfig synthesis;    // gamma ignored unless gamma_override
  int alpha_points = 12;        // default grid size when the grid is empty
  std::optional<double> gamma_override;
  int threads = 1;
  std::string out_dir = "out";

  void validate() const;
  Experiment experiment() const;
  SweepConfig sweep() const;
};

// "reference": the sweep plant of reference_experiment().
// "scalar": x+ = 2 x + u, y = x with F = -1.5, L = 1.5; model pole 2.05.
ExperimentConfig named_experiment(const std::string & name);

// Missing keys keep the defaults of the named base ("plant" given as a name)
// or of "reference".
ExperimentConfig parse_experiment_config(const Json & j, const std::string & base_dir = ".");
ExperimentConfig load_experiment_config(const std::string & path);

// "log:N" (N points of the default grid), "lo:hi:N" (log spaced) or "a,b,c".
struct AlphaGridSpec
{
  std::vector<double> values;
  int default_points = 0;  // > 0: default grid with this many points
};
AlphaGridSpec parse_alpha_grid(const std::string & spec, const std::string & where = "alpha_grid");

std::string read_file(const std::string & path);
void write_file(const std::string & path, const std::string & text);

}  // namespace robs
