#ifndef BLL_HARNESS_HPP
#define BLL_HARNESS_HPP

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bll/expansion.hpp"
#include "bll/ns.hpp"

namespace bll {

// Version string recorded in every report for provenance.
extern const char* kCodeVersion;

// Declarative run configuration, loaded from a flat `key = value` text file
// (see load_config). Unknown keys are errors; the schema_version key is
// required and must match kConfigSchemaVersion.
struct RunConfig {
  int schema_version = 1;
  Gamma gamma = Gamma::half;
  double beta = 1.0;
  std::vector<double> epsilon_list{0.2, 0.14, 0.1, 0.07};
  GridParams grid;
  double T = 0.25;
  double pipeline_dt = 2e-3;  // expansion output step
  // Solver step (must divide pipeline_dt).  Kept well below pipeline_dt so
  // the reference solution's time error does not pollute the error fields:
  // the measured error is that of the discrete expansion product.
  double ns_dt = 5e-4;
  // Error norms are evaluated every norm_stride-th expansion output time.
  int norm_stride = 5;
  std::string datum = "standard";  // standard | zero | shear
  double u_far = 0.0;
  double gevrey_rho0 = 2.0, gevrey_lambda = 1.0;
  int gevrey_M = 6, gevrey_dy_cap = 3;
  double layer_a0 = 0.25;
  unsigned long seed = 12345;
  int oracle_trials = 20;
  std::string out_dir = "out";
  int jobs = 1;
  bool verbose = false;
  bool dump_fields = false;

  // for_fit additionally requires >= 3 strictly decreasing epsilons.
  void validate(bool for_fit) const;
};

extern const int kConfigSchemaVersion;

RunConfig load_config(const std::string& path);
// Hash of the canonical serialization of the config (provenance field).
std::string config_hash(const RunConfig& cfg);
// Initial vorticity for the named datum.
Field make_datum(GridPtr g, const std::string& name);

// Log-log least-squares fit of value against epsilon.
struct FitResult {
  double slope = 0.0, intercept = 0.0, r2 = 0.0, slope_stderr = 0.0;
  bool ok = false;
  std::string note;      // warnings: excluded points, degenerate fits
  int points_used = 0;
};
FitResult fit_rate(const std::vector<std::pair<double, double>>& points);

// Per-epsilon results; sup values are over the sampled output times.
struct CaseRecord {
  double epsilon = 0.0;
  bool ok = false;
  std::string error;  // failure description when !ok (crash isolation)
  double err_u_l2 = 0.0, err_u_linf = 0.0, err_u_hs2 = 0.0, err_u_x3 = 0.0;
  double err_omega_l2 = 0.0, err_omega_x2 = 0.0;
  double r_x3 = 0.0, h2_ratio_eps4 = 0.0;
  double sup_e_over_eps2 = 0.0;
  double dual_path_max = 0.0;
  double div_max = 0.0, eta_wall_max = 0.0, robin_residual = 0.0;
  double wall_seconds = 0.0;  // provenance only; not serialized (determinism)
};

struct Verdict {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct RunReport {
  int schema_version = 1;
  std::string config_hash, code_version;
  std::string gamma;
  double beta = 1.0, T = 0.0;
  std::string datum;
  std::vector<CaseRecord> cases;
  // Keyed by the summary.csv column the fit belongs to.
  std::map<std::string, FitResult> fits;
  std::vector<Verdict> verdicts;
  std::vector<std::string> notes;
};

// Builds the expansion once (it is epsilon-independent), then runs each
// epsilon case in a worker pool of cfg.jobs threads. A case failure is
// recorded on its record and the sweep continues.
RunReport run_sweep(const RunConfig& cfg);

// Writes report.json, summary.csv, one SVG log-log plot per fitted norm, and
// verdict.txt into dir. Re-emission of the same report is byte-identical.
void emit_report(const RunReport& rep, const std::string& dir);
RunReport parse_report(const std::string& json_path);
bool reports_equal(const RunReport& a, const RunReport& b);

// The summary.csv header line (golden schema).
extern const char* kSummaryCsvHeader;

// Raw little-endian float64 dump, row-major with x fastest, plus a JSON
// manifest at <path_base>.json naming the dimensions and metadata.
void dump_field(const Field& f, const std::string& path_base,
                const std::map<std::string, double>& meta);

// Randomized norm-oracle battery: every Gevrey/conormal/layer norm evaluator
// against an independent brute-force oracle on `trials` random smooth fields.
struct OracleResult {
  std::string name;
  double max_rel = 0.0;
  bool pass = false;  // max_rel <= 1e-10
};
std::vector<OracleResult> run_norm_oracles(GridPtr g, unsigned long seed,
                                           int trials);

// Subcommand bodies (return a process exit code, write artifacts to out_dir).
int run_expansion_only(const RunConfig& cfg, const std::string& out_dir);
int run_check_assumptions(const RunConfig& cfg, const std::string& out_dir);
int run_norm_oracle_cmd(const RunConfig& cfg, const std::string& out_dir);

}  // namespace bll

#endif
