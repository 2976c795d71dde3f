// Command-line front end: subcommands for end-to-end runs, validity
// simulation, and the file-based train / calibrate / predict / sweep /
// inspect pipeline.
//
// Exit codes: 0 success, 1 configuration error, 2 data error,
// 3 numeric failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "icp/cascade.hpp"
#include "icp/conformal.hpp"
#include "icp/csv.hpp"
#include "icp/dataset.hpp"
#include "icp/error.hpp"
#include "icp/kernel.hpp"
#include "icp/metrics.hpp"
#include "icp/naive_bayes.hpp"
#include "icp/ncm.hpp"
#include "icp/run.hpp"
#include "icp/svm.hpp"
#include "icp/version.hpp"

namespace {

struct CliOptions {
  icp::RunConfig run;
  std::string kernel_name = "tanimoto";
  std::string knn_metric_name = "tanimoto";
  double eps_both = -1.0;  // --eps sets both significance levels
  bool informational = false;

  // file-pipeline options
  std::string model_path;
  std::string model_out;
  std::string calibration_data;
  std::string calibration_scores;
  std::string reference_path;
  std::string predictions_path;
  std::string truth_path;
  std::string output_csv;
  std::string ranked_out;
  std::string decision_out;
  std::string decision_values_path;
  std::string gram_cache;
  double rank_threshold = 0.0;

  void finalize() {
    run.kernel.kind = icp::kernel_kind_from_name(kernel_name);
    run.knn_metric = icp::knn_metric_from_name(knn_metric_name);
    if (eps_both >= 0.0) {
      run.eps.active = eps_both;
      run.eps.inactive = eps_both;
    }
  }
};

void add_data_options(CLI::App* cmd, CliOptions& o) {
  cmd->add_option("--train", o.run.train_path, "training data file");
  cmd->add_option("--test", o.run.test_path,
                  "fixed test data file (default: split from --train)");
  cmd->add_option("--num-features", o.run.force_num_features,
                  "force the feature-space dimension");
  cmd->add_option("--proper-train-size", o.run.proper_train_size,
                  "size of the proper training split");
  cmd->add_option("--calibration-size", o.run.calibration_size,
                  "calibration split size (default: remainder)");
  cmd->add_option("--test-size", o.run.test_size,
                  "test split size when no --test file is given");
  cmd->add_option("--seed", o.run.seed, "master seed");
  cmd->add_flag("--synthetic", o.run.synthetic,
                "generate synthetic data instead of reading --train");
  cmd->add_option("--synthetic-size", o.run.synthetic_spec.n,
                  "synthetic: number of examples");
  cmd->add_option("--synthetic-positive-fraction",
                  o.run.synthetic_spec.positive_fraction,
                  "synthetic: Active fraction");
  cmd->add_option("--synthetic-features", o.run.synthetic_spec.num_features,
                  "synthetic: feature count");
  cmd->add_option("--synthetic-signal-features",
                  o.run.synthetic_spec.signal_features,
                  "synthetic: boosted features per class");
  cmd->add_option("--synthetic-base-rate", o.run.synthetic_spec.base_rate,
                  "synthetic: shared Poisson rate");
  cmd->add_option("--synthetic-signal-rate", o.run.synthetic_spec.signal_rate,
                  "synthetic: class signal Poisson rate");
  cmd->add_option("--synthetic-drift", o.run.synthetic_spec.drift_factor,
                  "synthetic: drift factor for validity experiments");
  cmd->add_option("--synthetic-seed", o.run.synthetic_spec.seed,
                  "synthetic: generator seed");
}

void add_underlying_options(CLI::App* cmd, CliOptions& o) {
  cmd->add_option("--underlying", o.run.underlying, "svm | knn | nb");
  cmd->add_option("--kernel", o.kernel_name,
                  "linear | rbf | tanimoto | tanimoto-rbf");
  cmd->add_option("--gamma", o.run.kernel.gamma,
                  "kernel width; plain RBF uses k = exp(-gamma*||a-b||^2)");
  cmd->add_option("-C,--cost", o.run.C, "SVM soft-margin penalty");
  cmd->add_option("--c-grid", o.run.c_grid,
                  "C grid for cross-validation (2+ values trigger CV)");
  cmd->add_option("--folds", o.run.folds, "cross-validation folds");
  cmd->add_option("--class-weights", o.run.class_weights,
                  "'auto' or explicit 'w+:w-'");
  cmd->add_option("--tolerance", o.run.tolerance, "SVM KKT tolerance");
  cmd->add_option("--block-size", o.run.block_size,
                  "cascade block size (0 = monolithic training)");
  cmd->add_option("--max-outer-iterations", o.run.max_outer_iterations,
                  "cascade convergence pass limit");
  cmd->add_option("--k", o.run.knn_k, "kNN neighbor count");
  cmd->add_option("--knn-metric", o.knn_metric_name,
                  "tanimoto | euclidean");
  cmd->add_option("--nb-smoothing", o.run.nb_smoothing,
                  "Naive Bayes additive smoothing");
  cmd->add_flag("--nb-smoothing-cv", o.run.nb_smoothing_cv,
                "choose smoothing by cross-validation");
  cmd->add_option("--nb-smoothing-grid", o.run.nb_smoothing_grid,
                  "smoothing grid for --nb-smoothing-cv");
}

void add_conformal_options(CLI::App* cmd, CliOptions& o) {
  cmd->add_option("--eps", o.eps_both, "significance level for both labels");
  cmd->add_option("--eps-active", o.run.eps.active,
                  "significance level for the Active label");
  cmd->add_option("--eps-inactive", o.run.eps.inactive,
                  "significance level for the Inactive label");
  cmd->add_flag("--smoothed", o.run.smoothed,
                "smoothed (tie-randomized) p-values");
}

void add_sweep_options(CLI::App* cmd, CliOptions& o) {
  cmd->add_option("--eps-grid", o.run.eps_grid, "symmetric significance grid");
  cmd->add_option("--eps-inactive-grid", o.run.eps_inactive_grid,
                  "grid for the Inactive-class significance sweep");
  cmd->add_option("--threshold-grid", o.run.threshold_grid,
                  "credibility/confidence threshold grid");
  cmd->add_option("--fixed-credibility", o.run.fixed_credibility,
                  "credibility floor while confidence varies");
  cmd->add_option("--fixed-confidence", o.run.fixed_confidence,
                  "confidence floor while credibility varies");
  cmd->add_option("--decision-threshold-points",
                  o.run.decision_threshold_points,
                  "quantile count for the decision-threshold curve");
}

// Flat key=value config files, mirrored by flags. `--config FILE` anywhere
// on the command line expands to `--key=value` tokens for every key the
// user did not pass explicitly, so explicit flags always win. Repeated
// keys feed list-valued options.
void expand_config_tokens(std::vector<std::string>& args) {
  std::string path;
  for (auto it = args.begin(); it != args.end();) {
    if (*it == "--config") {
      if (std::next(it) == args.end()) {
        throw icp::ConfigError("--config needs a file path");
      }
      path = *std::next(it);
      it = args.erase(it, it + 2);
    } else if (it->rfind("--config=", 0) == 0) {
      path = it->substr(9);
      it = args.erase(it);
    } else {
      ++it;
    }
  }
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in) throw icp::ConfigError("cannot open config file: " + path);

  const std::vector<std::string> explicit_args = args;
  auto given = [&explicit_args](const std::string& opt) {
    for (const auto& a : explicit_args) {
      if (a == opt || a.rfind(opt + "=", 0) == 0) return true;
    }
    return false;
  };
  auto trim = [](std::string s) {
    const auto l = s.find_first_not_of(" \t\r");
    if (l == std::string::npos) return std::string();
    const auto r = s.find_last_not_of(" \t\r");
    return s.substr(l, r - l + 1);
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw icp::ConfigError("config line " + std::to_string(line_no) +
                             ": expected key = value");
    }
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) {
      throw icp::ConfigError("config line " + std::to_string(line_no) +
                             ": empty key");
    }
    if (!given("--" + key)) args.push_back("--" + key + "=" + value);
  }
}

icp::NcmSpec build_file_ncm(const CliOptions& o) {
  if (o.run.underlying == "svm") {
    if (o.model_path.empty()) {
      throw icp::ConfigError("--model is required for --underlying svm");
    }
    return icp::SvmNcm{icp::load_svm_model(o.model_path)};
  }
  if (o.reference_path.empty()) {
    throw icp::ConfigError(
        "--reference (proper training data) is required for knn/nb");
  }
  icp::Dataset ref =
      icp::parse_sparse_file(o.reference_path, o.run.force_num_features);
  if (o.run.underlying == "knn") {
    return icp::KnnNcm{std::move(ref), o.run.knn_k, o.run.knn_metric};
  }
  if (o.run.underlying == "nb") {
    return icp::NbNcm{icp::train_nb(ref, o.run.nb_smoothing)};
  }
  throw icp::ConfigError("underlying must be svm, knn, or nb");
}

int do_train_svm(CliOptions& o) {
  if (o.run.train_path.empty()) throw icp::ConfigError("--train is required");
  if (o.model_out.empty()) throw icp::ConfigError("--model-out is required");
  icp::Dataset train =
      icp::parse_sparse_file(o.run.train_path, o.run.force_num_features);

  icp::SvmConfig cfg;
  cfg.kernel = o.run.kernel;
  cfg.tolerance = o.run.tolerance;
  cfg.C = o.run.C;
  std::tie(cfg.weight_active, cfg.weight_inactive) =
      o.run.resolve_weights(train);
  if (o.run.c_grid.size() > 1) {
    icp::CvConfig cv;
    cv.folds = o.run.folds;
    cv.seed = o.run.seed;
    cfg.C = icp::cross_validate_c(train, cfg, o.run.c_grid, cv);
    std::cout << "cross-validated C = " << cfg.C << "\n";
  } else if (o.run.c_grid.size() == 1) {
    cfg.C = o.run.c_grid.front();
  }

  icp::SvmModel model;
  if (o.run.block_size > 0 && o.run.block_size < train.size()) {
    icp::CascadeConfig cascade;
    cascade.block_size = o.run.block_size;
    cascade.max_outer_iterations = o.run.max_outer_iterations;
    cascade.shuffle_seed = o.run.seed;
    icp::CascadeStats stats;
    model = icp::train_cascade(train, cfg, cascade, &stats);
    std::cout << "cascade: " << stats.outer_iterations << " pass(es), "
              << stats.stages_trained << " stage(s), fixed point "
              << (stats.reached_fixed_point ? "reached" : "NOT reached")
              << "\n";
  } else {
    if (!o.gram_cache.empty()) {
      const auto fp = icp::dataset_fingerprint(train);
      icp::GramMatrix gram;
      if (!icp::load_gram_cache(o.gram_cache, cfg.kernel, fp, fp, gram)) {
        gram = icp::gram_matrix(cfg.kernel, train, 256, o.run.threads);
        icp::save_gram_cache(o.gram_cache, cfg.kernel, fp, fp, gram);
      }
      model = icp::train_svm(train, cfg, &gram);
    } else {
      model = icp::train_svm(train, cfg);
    }
  }
  if (!model.converged) {
    std::cerr << "warning: solver did not fully converge; model saved "
                 "with converged=0\n";
  }
  icp::save_svm_model(model, o.model_out);
  std::cout << "model written to " << o.model_out << " (" << model.sv_count()
            << " support vectors)\n";
  return 0;
}

int do_calibrate(CliOptions& o) {
  if (o.calibration_data.empty()) {
    throw icp::ConfigError("--calibration data file is required");
  }
  if (o.output_csv.empty()) throw icp::ConfigError("--out is required");
  const icp::NcmSpec ncm = build_file_ncm(o);
  icp::Dataset cal_data =
      icp::parse_sparse_file(o.calibration_data, o.run.force_num_features);
  const icp::CalibrationScores cal = icp::calibrate(ncm, cal_data);
  icp::save_calibration(cal, o.output_csv);
  std::cout << "calibration scores written to " << o.output_csv << " ("
            << cal.active.size() << " Active, " << cal.inactive.size()
            << " Inactive)\n";
  return 0;
}

int do_predict(CliOptions& o) {
  if (o.calibration_scores.empty()) {
    throw icp::ConfigError("--calibration-scores is required");
  }
  if (o.run.test_path.empty()) throw icp::ConfigError("--test is required");
  if (o.output_csv.empty()) throw icp::ConfigError("--out is required");
  const icp::NcmSpec ncm = build_file_ncm(o);
  const icp::CalibrationScores cal =
      icp::load_calibration(o.calibration_scores);
  icp::Dataset test =
      icp::parse_sparse_file(o.run.test_path, o.run.force_num_features);

  const std::vector<icp::PredictionRecord> records =
      o.run.smoothed ? icp::predict_batch_smoothed(ncm, cal, test, o.run.eps,
                                                   o.run.seed)
                     : icp::predict_batch(ncm, cal, test, o.run.eps);
  icp::write_predictions_csv(o.output_csv, test, records);
  std::cout << records.size() << " predictions written to " << o.output_csv
            << "\n";

  if (!o.ranked_out.empty()) {
    const auto order = icp::rank_by_p_active(records, o.rank_threshold);
    icp::write_ranked_csv(o.ranked_out, test, records, order);
  }
  if (!o.decision_out.empty()) {
    if (const auto* svm = std::get_if<icp::SvmNcm>(&ncm)) {
      icp::write_decision_values_csv(
          o.decision_out, test,
          icp::decision_batch(svm->model, test.objects));
    } else {
      throw icp::ConfigError("--decision-out needs --underlying svm");
    }
  }
  return 0;
}

std::vector<icp::PredictionRecord> read_predictions_csv(
    const std::string& path, const icp::Epsilons& eps) {
  std::ifstream in(path);
  if (!in) throw icp::DataError("cannot open predictions file: " + path);
  std::string line;
  if (!std::getline(in, line) ||
      line.rfind("id,p_active,p_inactive", 0) != 0) {
    throw icp::DataError("not a predictions CSV: " + path);
  }
  std::vector<icp::PredictionRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    // columns: id,p_active,p_inactive,...
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    const auto c3 = line.find(',', c2 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      throw icp::ParseError("malformed predictions row", line_no);
    }
    const double pa = std::strtod(line.c_str() + c1 + 1, nullptr);
    const double pi = std::strtod(line.c_str() + c2 + 1, nullptr);
    (void)c3;
    if (!(pa > 0.0) || pa > 1.0 || !(pi > 0.0) || pi > 1.0) {
      throw icp::ParseError("p-values out of range", line_no);
    }
    records.push_back(icp::record_from_pvalues(pa, pi, eps));
  }
  return records;
}

int do_sweep(CliOptions& o) {
  if (o.predictions_path.empty()) {
    throw icp::ConfigError("--predictions is required");
  }
  if (o.truth_path.empty()) {
    throw icp::ConfigError("--truth (labeled test data) is required");
  }
  if (o.run.output_dir.empty()) throw icp::ConfigError("--out-dir is required");
  namespace fs = std::filesystem;
  const auto records = read_predictions_csv(o.predictions_path, o.run.eps);
  icp::Dataset truth_ds =
      icp::parse_sparse_file(o.truth_path, o.run.force_num_features);
  if (truth_ds.size() != records.size()) {
    throw icp::DataError("predictions and truth have different sizes");
  }
  fs::create_directories(o.run.output_dir);
  const fs::path out(o.run.output_dir);

  const auto sweep = icp::eps_sweep(records, truth_ds.labels, o.run.eps_grid);
  icp::write_sweep_csv((out / "sweep_eps.csv").string(), sweep);
  const auto asym = icp::asymmetric_sweep(
      records, truth_ds.labels, o.run.eps.active, o.run.eps_inactive_grid);
  icp::write_sweep_csv((out / "sweep_asym.csv").string(), asym);
  const auto vary_conf = icp::credibility_confidence_sweep(
      records, truth_ds.labels, icp::FixedThreshold::Credibility,
      o.run.fixed_credibility, o.run.threshold_grid);
  const auto vary_cred = icp::credibility_confidence_sweep(
      records, truth_ds.labels, icp::FixedThreshold::Confidence,
      o.run.fixed_confidence, o.run.threshold_grid);
  icp::write_cred_conf_csv((out / "cred_conf.csv").string(), vary_conf,
                           o.run.fixed_credibility, vary_cred,
                           o.run.fixed_confidence);

  icp::ThreeMethodGrids grids;
  grids.eps_active = o.run.eps.active;
  grids.eps_inactive = o.run.eps_inactive_grid;
  grids.credibility = o.run.threshold_grid;
  std::vector<double> decisions;
  if (!o.decision_values_path.empty()) {
    std::ifstream in(o.decision_values_path);
    if (!in) {
      throw icp::DataError("cannot open decision values: " +
                           o.decision_values_path);
    }
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto c = line.find(',');
      decisions.push_back(std::strtod(line.c_str() + c + 1, nullptr));
    }
    if (decisions.size() != records.size()) {
      throw icp::DataError("decision values and predictions differ in size");
    }
    grids.decision_thresholds = icp::detail::decision_threshold_grid(
        decisions, o.run.decision_threshold_points);
  }
  const auto pr =
      icp::three_method_pr(records, decisions, truth_ds.labels, grids);
  icp::write_pr_curves_csv((out / "pr_curves.csv").string(), pr);
  icp::write_log10_pvalues_csv((out / "log10_pvalues.csv").string(), records,
                               truth_ds.labels);
  std::cout << "sweeps written to " << o.run.output_dir << "\n";
  return 0;
}

int do_inspect(CliOptions& o) {
  if (o.model_path.empty()) throw icp::ConfigError("--model is required");
  const icp::SvmModel m = icp::load_svm_model(o.model_path);
  std::size_t sv_act = 0;
  for (icp::Label l : m.sv_labels) {
    if (l == icp::Label::Active) ++sv_act;
  }
  std::cout << "model: " << o.model_path << "\n"
            << "  kernel:          " << icp::kernel_kind_name(m.kernel.kind);
  if (m.kernel.kind == icp::KernelKind::Rbf ||
      m.kernel.kind == icp::KernelKind::TanimotoRbf) {
    std::cout << " (gamma " << m.kernel.gamma << ")";
  }
  std::cout << "\n"
            << "  feature space:   " << m.num_features << "\n"
            << "  support vectors: " << m.sv_count() << " (" << sv_act
            << " Active, " << (m.sv_count() - sv_act) << " Inactive)\n"
            << "  bias:            " << m.bias << "\n"
            << "  C:               " << m.trained_c << "\n"
            << "  class weights:   " << m.trained_weight_active << " (Active), "
            << m.trained_weight_inactive << " (Inactive)\n"
            << "  converged:       " << (m.converged ? "yes" : "no") << "\n";
  if (!o.calibration_scores.empty()) {
    const icp::CalibrationScores cal =
        icp::load_calibration(o.calibration_scores);
    std::cout << "calibration: " << o.calibration_scores << "\n"
              << "  Active scores:   " << cal.active.size() << "\n"
              << "  Inactive scores: " << cal.inactive.size() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inductive Mondrian conformal prediction for sparse binary "
               "classification"};
  app.set_version_flag("--version", std::string(icp::kVersion));
  app.require_subcommand(1);

  CliOptions o;

  auto* run = app.add_subcommand(
      "run", "repeated split/train/calibrate/predict/evaluate cycles");
  add_data_options(run, o);
  add_underlying_options(run, o);
  add_conformal_options(run, o);
  add_sweep_options(run, o);
  run->add_option("--repetitions", o.run.repetitions, "number of cycles");
  run->add_option("--out-dir", o.run.output_dir, "output directory")
      ->required();
  run->add_option("--threads", o.run.threads, "worker threads for kernels");

  auto* validate = app.add_subcommand(
      "validate", "per-class validity simulation over a significance grid");
  add_data_options(validate, o);
  add_underlying_options(validate, o);
  add_sweep_options(validate, o);
  validate->add_option("--repetitions", o.run.repetitions,
                       "number of cycles");
  validate->add_option("--out-dir", o.run.output_dir, "output directory")
      ->required();
  validate->add_flag("--informational", o.informational,
                     "report exceedances without failing the exit code");

  auto* train = app.add_subcommand("train-svm", "train an SVM model file");
  add_data_options(train, o);
  add_underlying_options(train, o);
  train->add_option("--model-out", o.model_out, "output model file")
      ->required();
  train->add_option("--gram-cache", o.gram_cache,
                    "binary Gram matrix cache file");
  train->add_option("--threads", o.run.threads,
                    "worker threads for kernels");

  auto* cal = app.add_subcommand(
      "calibrate", "score a calibration set and write a scores file");
  add_underlying_options(cal, o);
  cal->add_option("--model", o.model_path, "SVM model file (svm underlying)");
  cal->add_option("--reference", o.reference_path,
                  "proper training data (knn/nb underlying)");
  cal->add_option("--calibration", o.calibration_data,
                  "calibration data file")
      ->required();
  cal->add_option("--num-features", o.run.force_num_features,
                  "force the feature-space dimension");
  cal->add_option("--out", o.output_csv, "output scores file")->required();

  auto* pred = app.add_subcommand("predict",
                                  "region + forced predictions for a test set");
  add_underlying_options(pred, o);
  add_conformal_options(pred, o);
  pred->add_option("--model", o.model_path, "SVM model file (svm underlying)");
  pred->add_option("--reference", o.reference_path,
                   "proper training data (knn/nb underlying)");
  pred->add_option("--calibration-scores", o.calibration_scores,
                   "calibration scores file")
      ->required();
  pred->add_option("--test", o.run.test_path, "test data file")->required();
  pred->add_option("--num-features", o.run.force_num_features,
                   "force the feature-space dimension");
  pred->add_option("--out", o.output_csv, "predictions CSV")->required();
  pred->add_option("--ranked-out", o.ranked_out,
                   "ranked-by-p_active CSV output");
  pred->add_option("--rank-threshold", o.rank_threshold,
                   "keep only p_active above this in the ranked list");
  pred->add_option("--decision-out", o.decision_out,
                   "SVM decision values CSV output");
  pred->add_option("--seed", o.run.seed, "seed for --smoothed tie-splitting");

  auto* sweep = app.add_subcommand(
      "sweep", "significance and threshold sweeps over saved predictions");
  add_conformal_options(sweep, o);
  add_sweep_options(sweep, o);
  sweep->add_option("--predictions", o.predictions_path,
                    "predictions CSV from `predict`")
      ->required();
  sweep->add_option("--truth", o.truth_path, "labeled test data file")
      ->required();
  sweep->add_option("--decision-values", o.decision_values_path,
                    "decision values CSV for the decision-threshold curve");
  sweep->add_option("--num-features", o.run.force_num_features,
                    "force the feature-space dimension");
  sweep->add_option("--out-dir", o.run.output_dir, "output directory")
      ->required();

  auto* inspect = app.add_subcommand("inspect", "summarize model files");
  inspect->add_option("--model", o.model_path, "SVM model file")->required();
  inspect->add_option("--calibration", o.calibration_scores,
                      "calibration scores file");

  // help text only; the token is consumed by expand_config_tokens before
  // CLI11 sees the command line
  std::string config_doc;
  for (auto* sub : {run, validate, train, cal, pred, sweep, inspect}) {
    sub->add_option("--config", config_doc,
                    "flat key=value config file; flags override its values");
  }

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    expand_config_tokens(args);
  } catch (const icp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    o.finalize();
    if (run->parsed()) return icp::cmd_run(o.run);
    if (validate->parsed()) return icp::cmd_validate(o.run, o.informational);
    if (train->parsed()) return do_train_svm(o);
    if (cal->parsed()) return do_calibrate(o);
    if (pred->parsed()) return do_predict(o);
    if (sweep->parsed()) return do_sweep(o);
    if (inspect->parsed()) return do_inspect(o);
  } catch (const icp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const icp::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const icp::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
