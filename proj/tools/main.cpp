#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "esdmix/cli.hpp"

namespace {

struct FlagValues {
  std::optional<std::string> data, out, params, model, law, manifest;
  std::optional<int> K, starts, max_iter, p, n, ref_M, n_test, level;
  std::optional<double> gamma, nu, tol, min_weight, epsilon, eta;
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<double>> levels, xi;
  std::optional<std::vector<int>> sizes;
};

void add_common_flags(CLI::App* cmd, FlagValues& f) {
  cmd->add_option("--manifest", f.manifest, "manifest JSON file; flags override its keys");
  cmd->add_option("--data", f.data, "input CSV path");
  cmd->add_option("--out", f.out, "report output path (stdout if omitted)");
  cmd->add_option("--K", f.K, "number of mixture components");
  cmd->add_option("--gamma", f.gamma, "eigen-ratio bound, >= 1");
  cmd->add_option("--model", f.model, "gaussian or t");
  cmd->add_option("--nu", f.nu, "Student-t degrees of freedom");
  cmd->add_option("--starts", f.starts, "number of independent starts");
  cmd->add_option("--seed", f.seed, "64-bit seed");
  cmd->add_option("--max-iter", f.max_iter, "iteration cap per start");
  cmd->add_option("--tol", f.tol, "relative log-likelihood stopping tolerance");
  cmd->add_option("--min-weight", f.min_weight, "empty-component threshold");
}

void add_experiment_flags(CLI::App* cmd, FlagValues& f) {
  cmd->add_option("--law", f.law, "component law: gauss, ball:<r>, cube:<h>, contaminated:<e>:<c>");
  cmd->add_option("--p", f.p, "dimension of the component laws");
  cmd->add_option("--xi", f.xi, "component proportions")->delimiter(',');
  cmd->add_option("--levels", f.levels, "shift gaps, one per separation level")->delimiter(',');
  cmd->add_option("--epsilon", f.epsilon, "central-set radius");
  cmd->add_option("--eta", f.eta, "central-set mass tolerance");
}

int apply_and_run(esdmix::Command command, const FlagValues& f) {
  esdmix::Manifest m;
  if (f.manifest) m = esdmix::parse_manifest_file(*f.manifest);
  m.command = command;
  if (f.data) m.data_path = *f.data;
  if (f.out) m.output_path = *f.out;
  if (f.params) m.params_path = *f.params;
  if (f.K) m.fit.K = *f.K;
  if (f.gamma) m.fit.gamma = *f.gamma;
  if (f.model) {
    if (*f.model == "gaussian") m.fit.model = esdmix::ModelFamily::Gaussian;
    else if (*f.model == "t") m.fit.model = esdmix::ModelFamily::StudentT;
    else {
      std::cerr << "error: unknown model '" << *f.model << "'\n";
      return 1;
    }
  }
  if (f.nu) m.fit.nu = *f.nu;
  if (f.starts) m.fit.n_starts = *f.starts;
  if (f.seed) m.fit.seed = *f.seed;
  if (f.max_iter) m.fit.max_iter = *f.max_iter;
  if (f.tol) m.fit.rel_tol = *f.tol;
  if (f.min_weight) m.fit.min_weight = *f.min_weight;
  if (f.law) m.law = *f.law;
  if (f.p) m.p = *f.p;
  if (f.xi) m.xi = *f.xi;
  if (f.levels) m.levels = *f.levels;
  if (f.level) m.level = *f.level;
  if (f.epsilon) m.epsilon = *f.epsilon;
  if (f.eta) m.eta = *f.eta;
  if (f.sizes) m.sizes = *f.sizes;
  if (f.ref_M) m.reference_M = *f.ref_M;
  if (f.n) m.n = *f.n;
  if (f.n_test) m.n_test = *f.n_test;
  return esdmix::run_manifest(m);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Eigen-ratio-constrained maximum likelihood for mixtures of "
               "elliptically symmetric distributions"};
  app.require_subcommand(1);
  FlagValues f;

  CLI::App* check = app.add_subcommand("check-existence",
                                       "verify the finite-sample existence conditions");
  add_common_flags(check, f);

  CLI::App* fit_cmd = app.add_subcommand("fit", "fit a constrained mixture by multi-start ECM");
  add_common_flags(fit_cmd, f);

  CLI::App* classify = app.add_subcommand("classify", "MAP-classify rows with a saved fit");
  add_common_flags(classify, f);
  classify->add_option("--params", f.params, "fit report JSON holding the parameters");

  CLI::App* cons = app.add_subcommand("consistency-exp",
                                      "parameter-distance decay toward a reference fit");
  add_common_flags(cons, f);
  add_experiment_flags(cons, f);
  cons->add_option("--sizes", f.sizes, "ascending sample sizes")->delimiter(',');
  cons->add_option("--ref-M", f.ref_M, "reference sample size");
  cons->add_option("--level", f.level, "shift schedule level to use");

  CLI::App* sep = app.add_subcommand("separation-exp",
                                     "cluster containment and moment errors per separation level");
  add_common_flags(sep, f);
  add_experiment_flags(sep, f);
  sep->add_option("--n", f.n, "sample size per level");
  sep->add_option("--n-test", f.n_test, "containment Monte Carlo size");

  CLI11_PARSE(app, argc, argv);

  esdmix::Command command = esdmix::Command::Fit;
  if (check->parsed()) command = esdmix::Command::CheckExistence;
  else if (fit_cmd->parsed()) command = esdmix::Command::Fit;
  else if (classify->parsed()) command = esdmix::Command::Classify;
  else if (cons->parsed()) command = esdmix::Command::ConsistencyExp;
  else if (sep->parsed()) command = esdmix::Command::SeparationExp;

  try {
    return apply_and_run(command, f);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
