#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "esdmix/em.hpp"

namespace esdmix {

/// Reads a rectangular numeric CSV (comma separated, decimal point). A
/// single leading header row is skipped when any of its cells is
/// non-numeric. Throws CsvError on ragged rows, non-numeric cells or an
/// empty file.
class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Eigen::MatrixXd parse_csv(const std::string& path);

enum class Command { CheckExistence, Fit, Classify, ConsistencyExp, SeparationExp };

/// Everything a CLI invocation needs; built from a manifest file, command
/// line flags, or both (flags win).
struct Manifest {
  Command command = Command::Fit;
  std::string data_path;
  std::string output_path;  // empty means stdout
  std::string params_path;  // classify: fit report holding theta

  FitConfig fit;

  // Experiment scenario (shifted mixture of identical laws on a collinear
  // shift schedule; richer law lists can be given in a manifest file).
  std::string law = "gauss";       // "gauss", "ball:<r>", "cube:<h>",
                                   // "contaminated:<eps>:<inflation>"
  int p = 2;                       // law dimension
  std::vector<double> xi;          // component proportions
  std::vector<double> levels;      // shift gaps, one level per entry
  int level = 0;                   // which level the consistency run uses
  double epsilon = 1.0;
  double eta = 0.01;
  std::vector<int> sizes;          // consistency sample sizes
  int reference_M = 200000;
  int n = 5000;                    // separation sample size per level
  int n_test = 2000;               // containment Monte Carlo size
};

/// Parses a manifest JSON file; unknown keys are rejected.
Manifest parse_manifest_file(const std::string& path);

/// Executes the manifest and writes the JSON report. Returns the process
/// exit code: 0 success, 1 I/O or parse failure, 2 precondition failure.
/// Error detail goes to the diagnostic stream.
int run_manifest(const Manifest& manifest);

/// Shortest fixed-format rendering used in all reports: 17 significant
/// digits, which round-trips IEEE doubles exactly.
std::string format_double(double value);

}  // namespace esdmix
