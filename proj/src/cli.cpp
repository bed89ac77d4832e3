#include "vo2/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <iostream>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include "vo2/errors.hpp"
#include "vo2/eval.hpp"
#include "vo2/model_io.hpp"
#include "vo2/parallel.hpp"
#include "vo2/stats.hpp"
#include "vo2/synth.hpp"
#include "vo2/version.hpp"

namespace vo2 {

using nlohmann::ordered_json;

std::vector<FeatureVector> cohort_features(const CohortManifest& manifest, const CpsjtConfig& cfg,
                                           int threads) {
  std::vector<FeatureVector> rows(manifest.entries.size());
  parallel_for(manifest.entries.size(), threads, [&](std::size_t i) {
    const auto& entry = manifest.entries[i];
    const auto rec = load_session(manifest, entry, SessionKind::cpsjt);
    const auto outcome = run_cpsjt(rec, entry.participant, cfg);
    rows[i] = build_feature_vector(entry.participant, outcome, rec);
  });
  return rows;
}

namespace {

namespace fs = std::filesystem;

struct ProtocolFlags {
  std::string config_path;
  std::string termination_mode = "cpet_max_hr";
  double hr_allowance = 10.0;
  double interp_factor = 0.75;
  double legacy_fraction = 0.90;
  double grace_period = 3.0;
  CLI::Option* mode_opt = nullptr;
  CLI::Option* allowance_opt = nullptr;
  CLI::Option* interp_opt = nullptr;
  CLI::Option* legacy_opt = nullptr;
  CLI::Option* grace_opt = nullptr;

  void attach(CLI::App* cmd) {
    cmd->add_option("--protocol-config", config_path,
                    "Session config JSON; explicit flags override its fields");
    mode_opt = cmd->add_option("--termination-mode", termination_mode,
                               "Session cutoff rule: cpet_max_hr or legacy_theoretical")
                   ->check(CLI::IsMember({"cpet_max_hr", "legacy_theoretical"}));
    allowance_opt = cmd->add_option("--hr-allowance", hr_allowance,
                                    "Beats below the personal max HR that end the session");
    interp_opt = cmd->add_option("--interp-factor", interp_factor,
                                 "Scale on the extrapolated endurance after movement failure");
    legacy_opt = cmd->add_option("--legacy-fraction", legacy_fraction,
                                 "Fraction of age-predicted max HR in legacy mode");
    grace_opt = cmd->add_option("--grace-period", grace_period,
                                "Movement-failure debounce, seconds");
  }

  CpsjtConfig config() const {
    CpsjtConfig cfg = config_path.empty() ? CpsjtConfig::defaults()
                                          : cpsjt_config_from_json(read_text(config_path));
    if (config_path.empty() || mode_opt->count())
      cfg.termination_mode = termination_mode_from_string(termination_mode);
    if (config_path.empty() || allowance_opt->count()) cfg.hr_allowance_bpm = hr_allowance;
    if (config_path.empty() || interp_opt->count()) cfg.interp_factor = interp_factor;
    if (config_path.empty() || legacy_opt->count()) cfg.legacy_fraction = legacy_fraction;
    if (config_path.empty() || grace_opt->count()) cfg.grace_period_s = grace_period;
    validate(cfg);
    return cfg;
  }

  ordered_json echo() const { return ordered_json::parse(cpsjt_config_to_json(config())); }
};

// materialized even when the flag is absent, and echoed into provenance
std::uint64_t entropy_seed() {
  std::random_device rd;
  const auto now = static_cast<std::uint64_t>(
      std::chrono::steady_clock::now().time_since_epoch().count());
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd() ^ now;
}

struct ModelFlags {
  double lambda1 = 0.1;
  double lambda2 = 1.0;
  double enet_lambda1 = 0.1;
  double enet_lambda2 = 0.5;
  int rf_trees = 200;
  int rf_max_depth = 0;
  int rf_min_leaf = 2;
  int rf_max_features = 2;
  bool rf_no_bootstrap = false;
  std::string svr_kernel = "rbf";
  double svr_gamma = 0.0;
  double svr_c = 10.0;
  double svr_epsilon = 0.5;

  void attach(CLI::App* cmd) {
    cmd->add_option("--lambda1", lambda1, "L1 penalty for lasso");
    cmd->add_option("--lambda2", lambda2, "L2 penalty for ridge");
    cmd->add_option("--enet-lambda1", enet_lambda1, "L1 penalty for elastic net");
    cmd->add_option("--enet-lambda2", enet_lambda2, "L2 penalty for elastic net");
    cmd->add_option("--rf-trees", rf_trees, "Forest size");
    cmd->add_option("--rf-max-depth", rf_max_depth, "Tree depth cap, 0 = unlimited");
    cmd->add_option("--rf-min-leaf", rf_min_leaf, "Minimum samples per leaf");
    cmd->add_option("--rf-max-features", rf_max_features, "Split candidates per node");
    cmd->add_flag("--rf-no-bootstrap", rf_no_bootstrap, "Grow trees on the full sample");
    cmd->add_option("--svr-kernel", svr_kernel, "rbf or linear")
        ->check(CLI::IsMember({"rbf", "linear"}));
    cmd->add_option("--svr-gamma", svr_gamma, "RBF width, 0 = 1/(d*var)");
    cmd->add_option("--svr-c", svr_c, "Box constraint");
    cmd->add_option("--svr-epsilon", svr_epsilon, "Insensitive tube half-width");
  }

  ModelSpec spec(ModelKind kind, std::uint64_t seed) const {
    ModelSpec s = ModelSpec::make(kind);
    switch (kind) {
      case ModelKind::ridge: s.lambda2 = lambda2; break;
      case ModelKind::lasso: s.lambda1 = lambda1; break;
      case ModelKind::elastic_net:
        s.lambda1 = enet_lambda1;
        s.lambda2 = enet_lambda2;
        break;
      default: break;
    }
    s.rf.n_trees = rf_trees;
    s.rf.max_depth = rf_max_depth;
    s.rf.min_samples_leaf = rf_min_leaf;
    s.rf.max_features = rf_max_features;
    s.rf.bootstrap = !rf_no_bootstrap;
    s.rf.seed = seed;
    s.svr.kernel = svr_kernel_from_string(svr_kernel);
    s.svr.gamma = svr_gamma;
    s.svr.C = svr_c;
    s.svr.epsilon = svr_epsilon;
    return s;
  }

  ordered_json echo() const {
    return {{"lambda1", lambda1},
            {"lambda2", lambda2},
            {"enet_lambda1", enet_lambda1},
            {"enet_lambda2", enet_lambda2},
            {"rf_trees", rf_trees},
            {"rf_max_depth", rf_max_depth},
            {"rf_min_leaf", rf_min_leaf},
            {"rf_max_features", rf_max_features},
            {"rf_bootstrap", !rf_no_bootstrap},
            {"svr_kernel", svr_kernel},
            {"svr_gamma", svr_gamma},
            {"svr_c", svr_c},
            {"svr_epsilon", svr_epsilon}};
  }
};

std::vector<ModelKind> parse_models(const std::string& arg) {
  if (arg == "all")
    return {ModelKind::ols,         ModelKind::ridge, ModelKind::lasso,
            ModelKind::elastic_net, ModelKind::rf,    ModelKind::svr};
  std::vector<ModelKind> out;
  std::stringstream ss(arg);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(model_kind_from_string(tok));
  }
  if (out.empty()) throw ValidationError("--model: no model named");
  return out;
}

struct CvChoice {
  bool kfold = false;
  int k = 5;
  bool loocv = false;
};

CvChoice parse_cv(const std::string& arg) {
  CvChoice cv;
  if (arg == "loocv") {
    cv.loocv = true;
  } else if (arg == "both") {
    cv.kfold = true;
    cv.loocv = true;
  } else if (arg.rfind("stratified", 0) == 0) {
    cv.kfold = true;
    const auto colon = arg.find(':');
    if (colon != std::string::npos) cv.k = std::stoi(arg.substr(colon + 1));
  } else {
    throw ValidationError("--cv: expected stratified[:k], loocv or both, got \"" + arg + "\"");
  }
  return cv;
}

ordered_json provenance(std::uint64_t seed, int threads, ordered_json config) {
  ordered_json p;
  p["tool"] = "vo2kit";
  p["version"] = kVersion;
  p["seed"] = seed;
  p["threads"] = threads;
  p["config"] = std::move(config);
  return p;
}

std::vector<int> gender_labels(const std::vector<FeatureVector>& rows) {
  std::vector<int> labels;
  labels.reserve(rows.size());
  for (const auto& r : rows) labels.push_back(r.gender_code);
  return labels;
}

EvalReport evaluate_models(const DesignMatrix& design, const std::vector<ModelSpec>& specs,
                           const CvChoice& cv, const FoldPlan& plan, std::uint64_t seed,
                           int threads) {
  EvalReport report;
  report.seed = seed;
  if (cv.kfold) {
    report.k = cv.k;
    report.plan_hash = fold_plan_hash(plan);
  }
  for (const auto& spec : specs) {
    ModelReport mr;
    mr.model = spec.name();
    if (cv.kfold) mr.kfold = run_kfold(design, spec, plan, threads);
    if (cv.loocv) mr.loocv = loocv(design, spec, threads);
    report.models.push_back(std::move(mr));
  }
  return report;
}

bool has_penalty(ModelKind k) {
  return k == ModelKind::ridge || k == ModelKind::lasso || k == ModelKind::elastic_net;
}

// tunes penalized specs in place; returns an echo of the chosen values
ordered_json tune_specs(std::vector<ModelSpec>& specs, const DesignMatrix& design,
                        const FoldPlan& plan, int threads) {
  const std::vector<double> l1_grid = {0.01, 0.03, 0.1, 0.3, 1.0};
  const std::vector<double> l2_grid = {0.01, 0.1, 0.5, 1.0, 3.0};
  ordered_json echo = ordered_json::object();
  for (auto& spec : specs) {
    if (!has_penalty(spec.kind)) continue;
    const auto result = grid_search(design, spec, l1_grid, l2_grid, plan, threads);
    spec = result.best;
    echo[spec.name()] = {{"lambda1", spec.lambda1},
                        {"lambda2", spec.lambda2},
                        {"mean_rmse", result.best_mean_rmse}};
  }
  return echo;
}

std::string stats_json(const std::vector<CorrelationEntry>& entries, const ordered_json& prov) {
  ordered_json j;
  j["provenance"] = prov;
  j["correlations"] = ordered_json::array();
  for (const auto& e : entries) {
    ordered_json ej;
    ej["metric"] = e.metric;
    ej["n"] = e.n;
    ej["r"] = e.r ? ordered_json(*e.r) : ordered_json(nullptr);
    ej["p"] = e.p ? ordered_json(*e.p) : ordered_json(nullptr);
    if (!e.note.empty()) ej["note"] = e.note;
    j["correlations"].push_back(std::move(ej));
  }
  return j.dump(2) + "\n";
}

// prediction CSV for rows that may or may not carry targets
std::string predictions_csv(const std::vector<FeatureVector>& rows, const Eigen::VectorXd& pred) {
  std::ostringstream os;
  os << "id,predicted,actual,error\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    os << rows[i].id << ',' << format_number(pred(static_cast<Eigen::Index>(i))) << ',';
    if (rows[i].vo2max) {
      os << format_number(*rows[i].vo2max) << ','
         << format_number(*rows[i].vo2max - pred(static_cast<Eigen::Index>(i)));
    } else {
      os << ',';
    }
    os << '\n';
  }
  return os.str();
}

Eigen::MatrixXd feature_matrix(const std::vector<FeatureVector>& rows) {
  const auto& cols = model_feature_columns();
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          *feature_value(rows[i], cols[j]);
  return X;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Gamified cardiac-assessment toolkit: session simulation, feature extraction,\n"
               "regression models and cross-validated evaluation."};
  app.require_subcommand(1);

  // ---- simulate ----------------------------------------------------------
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic cohort");
  struct {
    std::string spec = "default";
    std::uint64_t seed = 1;
    std::string out;
    double sigma = -1.0;
    double interaction = std::numeric_limits<double>::quiet_NaN();
    double movement_failure_rate = -1.0;
    double hr_noise = -1.0;
    std::vector<int> cells;
  } sim;
  simulate->add_option("--spec", sim.spec, "Cohort spec JSON path, or \"default\"");
  auto* sim_seed_opt = simulate->add_option("--seed", sim.seed, "Generator seed (entropy when omitted)");
  simulate->add_option("--out", sim.out, "Output directory")->required();
  simulate->add_option("--sigma", sim.sigma, "Override target noise SD");
  simulate->add_option("--interaction", sim.interaction, "Override nonlinearity coefficient");
  simulate->add_option("--movement-failure-rate", sim.movement_failure_rate,
                       "Override movement-failure probability");
  simulate->add_option("--hr-noise", sim.hr_noise, "Override HR sensor noise SD");
  simulate->add_option("--cells", sim.cells,
                       "Override cell counts: male-young male-old female-young female-old")
      ->expected(4);
  ProtocolFlags sim_proto;
  sim_proto.attach(simulate);

  // ---- ingest ------------------------------------------------------------
  auto* ingest = app.add_subcommand("ingest", "Load and validate a cohort manifest");
  struct {
    std::string manifest;
    std::string out;
  } ing;
  ingest->add_option("--manifest", ing.manifest, "Manifest JSON path")->required();
  ingest->add_option("--out", ing.out, "Summary JSON path (stdout when omitted)");

  // ---- features ----------------------------------------------------------
  auto* features = app.add_subcommand("features", "Extract the feature table from a cohort");
  struct {
    std::string manifest;
    std::string out;
    int threads = 1;
  } feat;
  features->add_option("--manifest", feat.manifest, "Manifest JSON path")->required();
  features->add_option("--out", feat.out, "Feature table CSV path")->required();
  features->add_option("--threads", feat.threads, "Worker cap");
  ProtocolFlags feat_proto;
  feat_proto.attach(features);

  // ---- stats -------------------------------------------------------------
  auto* stats = app.add_subcommand("stats", "Correlations of session metrics against vo2max");
  struct {
    std::string features;
    std::string out;
    std::vector<std::string> metrics;
  } st;
  stats->add_option("--features", st.features, "Feature table CSV path")->required();
  stats->add_option("--out", st.out, "Report JSON path (stdout text always printed)");
  stats->add_option("--metrics", st.metrics, "Metric columns to correlate");

  // ---- train -------------------------------------------------------------
  auto* train = app.add_subcommand("train", "Fit one model on a feature table");
  struct {
    std::string features;
    std::string model = "linear";
    std::string out;
    std::uint64_t seed = 1;
  } tr;
  train->add_option("--features", tr.features, "Feature table CSV path")->required();
  train->add_option("--model", tr.model, "linear|ridge|lasso|elasticnet|rf|svr");
  train->add_option("--out", tr.out, "Fit JSON path")->required();
  auto* tr_seed_opt = train->add_option("--seed", tr.seed, "Seed for randomized models (entropy when omitted)");
  ModelFlags train_models;
  train_models.attach(train);

  // ---- predict -----------------------------------------------------------
  auto* predict_cmd = app.add_subcommand("predict", "Apply a saved fit to a feature table");
  struct {
    std::string fit;
    std::string features;
    std::string out;
  } pr;
  predict_cmd->add_option("--fit", pr.fit, "Fit JSON path")->required();
  predict_cmd->add_option("--features", pr.features, "Feature table CSV path")->required();
  predict_cmd->add_option("--out", pr.out, "Prediction CSV path (stdout when omitted)");

  // ---- eval --------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "Cross-validated model comparison");
  struct {
    std::string manifest;
    std::string model = "all";
    std::string cv = "both";
    std::uint64_t seed = 1;
    std::string out;
    int threads = 1;
    bool grid = false;
  } ev;
  eval_cmd->add_option("--manifest", ev.manifest, "Manifest JSON path")->required();
  eval_cmd->add_option("--model", ev.model, "Comma list of models, or \"all\"");
  eval_cmd->add_option("--cv", ev.cv, "stratified[:k], loocv or both");
  auto* ev_seed_opt = eval_cmd->add_option("--seed", ev.seed, "Fold shuffling / model seed (entropy when omitted)");
  eval_cmd->add_option("--out", ev.out, "Report JSON path");
  eval_cmd->add_option("--threads", ev.threads, "Worker cap");
  eval_cmd->add_flag("--grid", ev.grid, "Tune linear penalties by fold RMSE first");
  ProtocolFlags eval_proto;
  eval_proto.attach(eval_cmd);
  ModelFlags eval_models;
  eval_models.attach(eval_cmd);

  // ---- pipeline ----------------------------------------------------------
  auto* pipeline = app.add_subcommand(
      "pipeline", "simulate -> features -> stats -> train -> eval in one run");
  struct {
    std::string spec = "default";
    std::uint64_t seed = 1;
    std::string out;
    double sigma = -1.0;
    std::vector<int> cells;
    std::string model = "all";
    std::string cv = "both";
    int threads = 1;
  } pl;
  pipeline->add_option("--spec", pl.spec, "Cohort spec JSON path, or \"default\"");
  auto* pl_seed_opt = pipeline->add_option("--seed", pl.seed, "Seed for the whole run (entropy when omitted)");
  pipeline->add_option("--out", pl.out, "Output directory")->required();
  pipeline->add_option("--sigma", pl.sigma, "Override target noise SD");
  pipeline->add_option("--cells", pl.cells,
                       "Override cell counts: male-young male-old female-young female-old")
      ->expected(4);
  pipeline->add_option("--model", pl.model, "Comma list of models, or \"all\"");
  pipeline->add_option("--cv", pl.cv, "stratified[:k], loocv or both");
  pipeline->add_option("--threads", pl.threads, "Worker cap");
  ProtocolFlags pipe_proto;
  pipe_proto.attach(pipeline);
  ModelFlags pipe_models;
  pipe_models.attach(pipeline);

  // ---- parse & dispatch --------------------------------------------------
  std::vector<const char*> argv;
  argv.push_back("vo2kit");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const auto load_spec = [](const std::string& arg) {
    if (arg == "default") return CohortSpec::defaults();
    return cohort_spec_from_json(read_text(arg));
  };

  try {
    if (simulate->parsed()) {
      if (!sim_seed_opt->count()) sim.seed = entropy_seed();
      CohortSpec spec = load_spec(sim.spec);
      if (sim.sigma >= 0.0) spec.sigma = sim.sigma;
      if (!std::isnan(sim.interaction)) spec.interaction = sim.interaction;
      if (sim.movement_failure_rate >= 0.0) spec.movement_failure_rate = sim.movement_failure_rate;
      if (sim.hr_noise >= 0.0) spec.hr_noise_sd = sim.hr_noise;
      if (!sim.cells.empty()) {
        if (spec.cells.size() != 4)
          throw ValidationError("--cells override requires the default 4-cell spec");
        for (int i = 0; i < 4; ++i) spec.cells[static_cast<std::size_t>(i)].count = sim.cells[static_cast<std::size_t>(i)];
      }
      const auto cohort = generate_cohort(spec, sim.seed, sim_proto.config());
      materialize_cohort(cohort, sim.out);
      ordered_json summary;
      summary["provenance"] = provenance(sim.seed, 1, sim_proto.echo());
      summary["participants"] = cohort.manifest.entries.size();
      summary["out"] = sim.out;
      write_text_atomic(fs::path(sim.out) / "simulate.json", summary.dump(2) + "\n");
      std::cout << "wrote " << cohort.manifest.entries.size() << " participants to " << sim.out
                << "\n";
      return 0;
    }

    if (ingest->parsed()) {
      const auto manifest = read_manifest(ing.manifest);
      ordered_json summary;
      summary["provenance"] = provenance(0, 1, ordered_json::object());
      summary["participants"] = manifest.entries.size();
      summary["sessions"] = ordered_json::array();
      for (const auto& entry : manifest.entries) {
        const auto cpet = load_session(manifest, entry, SessionKind::cpet);
        const auto cpsjt = load_session(manifest, entry, SessionKind::cpsjt);
        summary["sessions"].push_back({{"id", entry.participant.id},
                                       {"cpet_hr_samples", cpet.hr.size()},
                                       {"cpsjt_hr_samples", cpsjt.hr.size()},
                                       {"cpsjt_accel_samples", cpsjt.accel.size()},
                                       {"recovery_marker", cpsjt.recovery_start_ms.has_value()}});
      }
      const auto text = summary.dump(2) + "\n";
      if (ing.out.empty())
        std::cout << text;
      else
        write_text_atomic(ing.out, text);
      return 0;
    }

    if (features->parsed()) {
      const auto manifest = read_manifest(feat.manifest);
      const auto rows = cohort_features(manifest, feat_proto.config(), feat.threads);
      write_feature_table(rows, feat.out);
      std::cout << "wrote " << rows.size() << " feature rows to " << feat.out << "\n";
      return 0;
    }

    if (stats->parsed()) {
      const auto rows = read_feature_table(st.features);
      const auto& metrics = st.metrics.empty() ? default_correlation_metrics() : st.metrics;
      const auto entries = correlation_table(rows, metrics);
      std::cout << correlation_table_text(entries);
      if (!st.out.empty())
        write_text_atomic(st.out, stats_json(entries, provenance(0, 1, ordered_json::object())));
      return 0;
    }

    if (train->parsed()) {
      if (!tr_seed_opt->count()) tr.seed = entropy_seed();
      const auto rows = read_feature_table(tr.features);
      const auto design = design_from_features(rows);
      const auto spec = train_models.spec(model_kind_from_string(tr.model), tr.seed);
      const auto fit = fit_model(design, spec);
      auto fit_json = ordered_json::parse(fitted_model_to_json(fit, spec));
      fit_json["provenance"] = provenance(tr.seed, 1, train_models.echo());
      write_text_atomic(tr.out, fit_json.dump(2) + "\n");
      if (const auto* lin = std::get_if<LinearFit>(&fit.model)) {
        std::cout << "intercept " << lin->intercept << "\n";
        for (std::size_t c = 0; c < lin->column_names.size(); ++c)
          std::cout << lin->column_names[c] << " "
                    << lin->coefficients(static_cast<Eigen::Index>(c)) << "\n";
      }
      std::cout << "wrote fit to " << tr.out << "\n";
      return 0;
    }

    if (predict_cmd->parsed()) {
      const auto loaded = fitted_model_from_json(read_text(pr.fit));
      const auto rows = read_feature_table(pr.features);
      if (rows.empty()) throw ValidationError("empty feature table");
      const auto pred = loaded.fit.predict(feature_matrix(rows));
      const auto csv = predictions_csv(rows, pred);
      if (pr.out.empty())
        std::cout << csv;
      else
        write_text_atomic(pr.out, csv);
      return 0;
    }

    if (eval_cmd->parsed()) {
      if (!ev_seed_opt->count()) ev.seed = entropy_seed();
      const auto manifest = read_manifest(ev.manifest);
      const auto rows = cohort_features(manifest, eval_proto.config(), ev.threads);
      const auto design = design_from_features(rows);
      const auto cv = parse_cv(ev.cv);
      std::vector<ModelSpec> specs;
      for (const auto kind : parse_models(ev.model)) specs.push_back(eval_models.spec(kind, ev.seed));
      FoldPlan plan;
      if (cv.kfold) plan = stratified_kfold(gender_labels(rows), cv.k, ev.seed);
      ordered_json config;
      config["protocol"] = eval_proto.echo();
      config["models"] = eval_models.echo();
      config["cv"] = ev.cv;
      if (ev.grid) {
        if (!cv.kfold) throw ValidationError("--grid needs a stratified --cv to score candidates");
        config["grid"] = tune_specs(specs, design, plan, ev.threads);
      }
      auto report = evaluate_models(design, specs, cv, plan, ev.seed, ev.threads);
      report.provenance_json = provenance(ev.seed, ev.threads, std::move(config)).dump();
      std::cout << report_to_text(report);
      if (!ev.out.empty()) write_text_atomic(ev.out, report_to_json(report));
      return 0;
    }

    if (pipeline->parsed()) {
      if (!pl_seed_opt->count()) pl.seed = entropy_seed();
      CohortSpec spec = load_spec(pl.spec);
      if (pl.sigma >= 0.0) spec.sigma = pl.sigma;
      if (!pl.cells.empty()) {
        if (spec.cells.size() != 4)
          throw ValidationError("--cells override requires the default 4-cell spec");
        for (int i = 0; i < 4; ++i) spec.cells[static_cast<std::size_t>(i)].count = pl.cells[static_cast<std::size_t>(i)];
      }
      const auto cfg = pipe_proto.config();
      const fs::path dir(pl.out);

      const auto cohort = generate_cohort(spec, pl.seed, cfg);
      materialize_cohort(cohort, dir);
      write_feature_table(cohort.features, dir / "features.csv");

      bool all_targets = true;
      for (const auto& r : cohort.features) all_targets = all_targets && r.vo2max.has_value();
      if (all_targets && cohort.features.size() >= 3) {
        const auto entries = correlation_table(cohort.features, default_correlation_metrics());
        write_text_atomic(dir / "stats.json",
                          stats_json(entries, provenance(pl.seed, pl.threads, ordered_json())));
      }

      const auto design = design_from_features(cohort.features);
      std::vector<ModelSpec> specs;
      for (const auto kind : parse_models(pl.model)) specs.push_back(pipe_models.spec(kind, pl.seed));
      for (const auto& spec_k : specs) {
        const auto fit = fit_model(design, spec_k, pl.threads);
        write_text_atomic(dir / ("fit_" + spec_k.name() + ".json"),
                          fitted_model_to_json(fit, spec_k));
      }

      const auto cv = parse_cv(pl.cv);
      FoldPlan plan;
      if (cv.kfold) plan = stratified_kfold(gender_labels(cohort.features), cv.k, pl.seed);
      auto report = evaluate_models(design, specs, cv, plan, pl.seed, pl.threads);
      ordered_json config;
      config["protocol"] = pipe_proto.echo();
      config["models"] = pipe_models.echo();
      config["cv"] = pl.cv;
      config["sigma"] = spec.sigma;
      report.provenance_json = provenance(pl.seed, pl.threads, std::move(config)).dump();
      std::cout << report_to_text(report);
      write_text_atomic(dir / "report.json", report_to_json(report));
      return 0;
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace vo2
