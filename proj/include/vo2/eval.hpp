#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "vo2/forest.hpp"
#include "vo2/linear.hpp"
#include "vo2/svr.hpp"

namespace vo2 {

// Index partition for k-fold evaluation, stratified on an integer label.
struct FoldPlan {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<int>> folds;  // disjoint, exhaustive test-index lists
  std::vector<int> labels;              // stratification label per row
};

// Shuffles within each label class, then deals members round-robin from a
// seeded starting fold, so per-fold class counts differ from exact
// proportionality by less than one.
FoldPlan stratified_kfold(const std::vector<int>& labels, int k, std::uint64_t seed);

// Rejects plans that drop, duplicate or stray outside [0, n).
void validate_plan(const FoldPlan& plan, int n);

// FNV-1a over the fold structure; lets reports prove two models shared a plan.
std::uint64_t fold_plan_hash(const FoldPlan& plan);

enum class ModelKind { ols, ridge, lasso, elastic_net, rf, svr };

const char* to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

struct ModelSpec {
  ModelKind kind = ModelKind::ols;
  double lambda1 = 0.1;  // lasso / elastic net
  double lambda2 = 1.0;  // ridge; elastic net uses 0.5
  ForestConfig rf;
  SvrConfig svr;

  static ModelSpec make(ModelKind kind);
  std::string name() const { return to_string(kind); }
};

// A trained model of any kind; features standardized internally where the
// model requires it.
struct FittedModel {
  struct SvrWithScaler {
    Standardization scaler;
    SvrFit fit;
  };
  std::variant<LinearFit, Forest, SvrWithScaler> model;

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
  bool converged() const;
};

FittedModel fit_model(const DesignMatrix& train, const ModelSpec& spec, int threads = 1);

struct FoldRecord {
  int fold = 0;
  int n_train = 0;
  int n_test = 0;
  double rmse_test = 0.0;
  std::optional<double> train_corr;  // absent when predictions are constant
  std::optional<double> test_corr;
};

// Fits on each fold's complement and scores the held-out rows. Standardization
// parameters are always fitted on training rows only.
std::vector<FoldRecord> cross_validate(const DesignMatrix& d, const ModelSpec& spec,
                                       const FoldPlan& plan, int threads = 1);

struct ParticipantError {
  std::string id;
  double actual = 0.0;
  double predicted = 0.0;
  double error = 0.0;  // actual - predicted
};

struct LoocvResult {
  double pooled_rmse = 0.0;
  std::vector<ParticipantError> errors;
};

LoocvResult loocv(const DesignMatrix& d, const ModelSpec& spec, int threads = 1);

struct KfoldSummary {
  double mean_rmse = 0.0;
  double pooled_rmse = 0.0;
  std::optional<double> mean_train_corr;
  std::optional<double> mean_test_corr;
  std::vector<FoldRecord> folds;
};

// Full k-fold pass: per-fold records plus mean and pooled aggregates. Both
// aggregates are reported because either reading of "k-fold RMSE" is defensible.
KfoldSummary run_kfold(const DesignMatrix& d, const ModelSpec& spec, const FoldPlan& plan,
                       int threads = 1);

struct GridCandidate {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double mean_rmse = 0.0;
};

struct GridSearchResult {
  ModelSpec best;
  double best_mean_rmse = 0.0;
  std::vector<GridCandidate> tried;
};

// Penalty tuning for the regularized linear kinds by mean fold RMSE over the
// given plan. Ties resolve to the first candidate in grid order. Off by
// default everywhere; the CLI only runs it behind --grid.
GridSearchResult grid_search(const DesignMatrix& d, const ModelSpec& base,
                             const std::vector<double>& lambda1_grid,
                             const std::vector<double>& lambda2_grid, const FoldPlan& plan,
                             int threads = 1);

struct ModelReport {
  std::string model;
  std::optional<KfoldSummary> kfold;
  std::optional<LoocvResult> loocv;
};

struct EvalReport {
  std::vector<ModelReport> models;
  std::uint64_t seed = 0;
  int k = 0;
  std::uint64_t plan_hash = 0;  // 0 when no k-fold ran
  std::string provenance_json;  // version, seed, configs echo; excluded from identity
};

// Report body as canonical JSON (stable key order, shortest-round-trip floats).
std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);

// Fixed-width text table, one row per model.
std::string report_to_text(const EvalReport& report);

}  // namespace vo2
