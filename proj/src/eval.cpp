#include "vo2/eval.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vo2/errors.hpp"
#include "vo2/parallel.hpp"
#include "vo2/rng.hpp"
#include "vo2/stats.hpp"

namespace vo2 {

using nlohmann::ordered_json;

FoldPlan stratified_kfold(const std::vector<int>& labels, int k, std::uint64_t seed) {
  const int n = static_cast<int>(labels.size());
  if (k < 2) throw ValidationError("stratified_kfold: k must be >= 2");
  if (k > n) throw ValidationError("stratified_kfold: k exceeds sample count");

  std::map<int, std::vector<int>> by_class;
  for (int i = 0; i < n; ++i) by_class[labels[i]].push_back(i);

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.labels = labels;
  plan.folds.assign(static_cast<std::size_t>(k), {});

  // Per class: floor(n_c / k) everywhere, remainders to the currently
  // lightest folds (seeded tie-break). Class counts per fold differ by < 1
  // from proportional, and overall fold sizes stay balanced, so k = n
  // degenerates to singleton folds.
  std::vector<int> load(static_cast<std::size_t>(k), 0);
  std::uint64_t class_ordinal = 0;
  for (auto& [label, members] : by_class) {
    Rng rng(split_seed(seed, class_ordinal++));
    rng.shuffle(members);

    std::vector<int> order(static_cast<std::size_t>(k));
    for (int f = 0; f < k; ++f) order[static_cast<std::size_t>(f)] = f;
    rng.shuffle(order);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return load[static_cast<std::size_t>(a)] < load[static_cast<std::size_t>(b)]; });

    const auto n_c = static_cast<int>(members.size());
    const int base = n_c / k;
    const int remainder = n_c % k;
    std::size_t next = 0;
    for (int rank = 0; rank < k; ++rank) {
      const auto fold = static_cast<std::size_t>(order[static_cast<std::size_t>(rank)]);
      const int take = base + (rank < remainder ? 1 : 0);
      for (int c = 0; c < take; ++c) plan.folds[fold].push_back(members[next++]);
      load[fold] += take;
    }
  }
  for (auto& fold : plan.folds) std::sort(fold.begin(), fold.end());
  return plan;
}

void validate_plan(const FoldPlan& plan, int n) {
  std::vector<int> seen(static_cast<std::size_t>(n), 0);
  for (const auto& fold : plan.folds) {
    for (int i : fold) {
      if (i < 0 || i >= n)
        throw ValidationError("fold plan: index " + std::to_string(i) + " out of range");
      if (seen[static_cast<std::size_t>(i)]++)
        throw ValidationError("fold plan: index " + std::to_string(i) +
                              " appears in more than one fold");
    }
  }
  for (int i = 0; i < n; ++i)
    if (!seen[static_cast<std::size_t>(i)])
      throw ValidationError("fold plan: index " + std::to_string(i) + " missing from all folds");
}

std::uint64_t fold_plan_hash(const FoldPlan& plan) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  const auto mix = [&](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 0x100000001b3ull;
    }
  };
  mix(static_cast<std::uint64_t>(plan.k));
  for (const auto& fold : plan.folds) {
    mix(fold.size());
    for (int i : fold) mix(static_cast<std::uint64_t>(i));
  }
  return h;
}

const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::ols: return "linear";
    case ModelKind::ridge: return "ridge";
    case ModelKind::lasso: return "lasso";
    case ModelKind::elastic_net: return "elasticnet";
    case ModelKind::rf: return "rf";
    default: return "svr";
  }
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "linear" || s == "ols") return ModelKind::ols;
  if (s == "ridge") return ModelKind::ridge;
  if (s == "lasso") return ModelKind::lasso;
  if (s == "elasticnet" || s == "elastic_net") return ModelKind::elastic_net;
  if (s == "rf") return ModelKind::rf;
  if (s == "svr") return ModelKind::svr;
  throw ValidationError("unknown model \"" + s + "\"");
}

ModelSpec ModelSpec::make(ModelKind kind) {
  ModelSpec spec;
  spec.kind = kind;
  switch (kind) {
    case ModelKind::ridge: spec.lambda2 = 1.0; break;
    case ModelKind::lasso: spec.lambda1 = 0.1; spec.lambda2 = 0.0; break;
    case ModelKind::elastic_net: spec.lambda1 = 0.1; spec.lambda2 = 0.5; break;
    default: break;
  }
  return spec;
}

Eigen::VectorXd FittedModel::predict(const Eigen::MatrixXd& X) const {
  if (const auto* lin = std::get_if<LinearFit>(&model)) return vo2::predict(*lin, X);
  if (const auto* forest = std::get_if<Forest>(&model)) return rf_predict(*forest, X);
  const auto& s = std::get<SvrWithScaler>(model);
  return svr_predict(s.fit, standardize_apply(s.scaler, X));
}

bool FittedModel::converged() const {
  if (const auto* lin = std::get_if<LinearFit>(&model)) return lin->converged;
  if (const auto* s = std::get_if<SvrWithScaler>(&model)) return s->fit.converged;
  return true;
}

FittedModel fit_model(const DesignMatrix& train, const ModelSpec& spec, int threads) {
  FittedModel out;
  switch (spec.kind) {
    case ModelKind::ols: out.model = ols_fit(train); break;
    case ModelKind::ridge: out.model = ridge_fit(train, spec.lambda2); break;
    case ModelKind::lasso: out.model = lasso_fit(train, spec.lambda1); break;
    case ModelKind::elastic_net:
      out.model = elastic_net_fit(train, spec.lambda1, spec.lambda2);
      break;
    case ModelKind::rf: out.model = rf_fit(train, spec.rf, threads); break;
    case ModelKind::svr: {
      FittedModel::SvrWithScaler s;
      s.scaler = standardize_fit(train.X, train.column_names);
      DesignMatrix std_train;
      std_train.X = standardize_apply(s.scaler, train.X);
      std_train.y = train.y;
      std_train.column_names = train.column_names;
      s.fit = svr_fit(std_train, spec.svr);
      out.model = std::move(s);
      break;
    }
  }
  return out;
}

namespace {

DesignMatrix take_rows(const DesignMatrix& d, const std::vector<int>& rows) {
  DesignMatrix out;
  out.column_names = d.column_names;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), d.d());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  out.row_ids.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.X.row(static_cast<Eigen::Index>(i)) = d.X.row(rows[i]);
    out.y(static_cast<Eigen::Index>(i)) = d.y(rows[i]);
    if (!d.row_ids.empty()) out.row_ids.push_back(d.row_ids[static_cast<std::size_t>(rows[i])]);
  }
  return out;
}

void require_feature_variance(const DesignMatrix& train, int fold) {
  for (Eigen::Index j = 0; j < train.d(); ++j) {
    const double first = train.X(0, j);
    bool constant = true;
    for (Eigen::Index i = 1; i < train.n() && constant; ++i) constant = train.X(i, j) == first;
    if (constant) {
      const std::string name = static_cast<std::size_t>(j) < train.column_names.size()
                                   ? train.column_names[static_cast<std::size_t>(j)]
                                   : "column " + std::to_string(j);
      throw ValidationError("fold " + std::to_string(fold) + ": zero-variance feature " + name);
    }
  }
}

std::optional<double> safe_corr(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  try {
    return pearson_r(a, b);
  } catch (const ValidationError&) {
    return std::nullopt;  // constant predictions or degenerate targets
  }
}

struct CvPass {
  std::vector<FoldRecord> records;
  Eigen::VectorXd held_out;  // prediction for every row, from its test fold
};

CvPass run_cv(const DesignMatrix& d, const ModelSpec& spec, const FoldPlan& plan, int threads) {
  validate_plan(plan, static_cast<int>(d.n()));
  CvPass pass;
  pass.records.resize(plan.folds.size());
  pass.held_out.resize(d.n());

  parallel_for(plan.folds.size(), threads, [&](std::size_t f) {
    const auto& test_rows = plan.folds[f];
    std::vector<int> train_rows;
    train_rows.reserve(static_cast<std::size_t>(d.n()) - test_rows.size());
    for (int i = 0; i < static_cast<int>(d.n()); ++i)
      if (!std::binary_search(test_rows.begin(), test_rows.end(), i)) train_rows.push_back(i);

    const DesignMatrix train = take_rows(d, train_rows);
    const DesignMatrix test = take_rows(d, test_rows);
    require_feature_variance(train, static_cast<int>(f));

    const FittedModel fit = fit_model(train, spec, 1);
    const Eigen::VectorXd pred_train = fit.predict(train.X);
    const Eigen::VectorXd pred_test = fit.predict(test.X);
    for (std::size_t i = 0; i < test_rows.size(); ++i)
      pass.held_out(test_rows[i]) = pred_test(static_cast<Eigen::Index>(i));

    FoldRecord rec;
    rec.fold = static_cast<int>(f);
    rec.n_train = static_cast<int>(train_rows.size());
    rec.n_test = static_cast<int>(test_rows.size());
    rec.rmse_test = rmse(pred_test, test.y);
    rec.train_corr = safe_corr(pred_train, train.y);
    rec.test_corr = safe_corr(pred_test, test.y);
    pass.records[f] = rec;
  });
  return pass;
}

std::optional<double> mean_present(const std::vector<FoldRecord>& records,
                                   std::optional<double> FoldRecord::* field) {
  double sum = 0.0;
  int count = 0;
  for (const auto& r : records) {
    if (r.*field) {
      sum += *(r.*field);
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / count;
}

}  // namespace

std::vector<FoldRecord> cross_validate(const DesignMatrix& d, const ModelSpec& spec,
                                       const FoldPlan& plan, int threads) {
  return run_cv(d, spec, plan, threads).records;
}

KfoldSummary run_kfold(const DesignMatrix& d, const ModelSpec& spec, const FoldPlan& plan,
                       int threads) {
  const CvPass pass = run_cv(d, spec, plan, threads);
  KfoldSummary s;
  s.folds = pass.records;
  double sum = 0.0;
  for (const auto& r : pass.records) sum += r.rmse_test;
  s.mean_rmse = sum / static_cast<double>(pass.records.size());
  s.pooled_rmse = rmse(pass.held_out, d.y);
  s.mean_train_corr = mean_present(pass.records, &FoldRecord::train_corr);
  s.mean_test_corr = mean_present(pass.records, &FoldRecord::test_corr);
  return s;
}

GridSearchResult grid_search(const DesignMatrix& d, const ModelSpec& base,
                             const std::vector<double>& lambda1_grid,
                             const std::vector<double>& lambda2_grid, const FoldPlan& plan,
                             int threads) {
  const bool uses_l1 = base.kind == ModelKind::lasso || base.kind == ModelKind::elastic_net;
  const bool uses_l2 = base.kind == ModelKind::ridge || base.kind == ModelKind::elastic_net;
  if (!uses_l1 && !uses_l2)
    throw ValidationError("grid_search: model \"" + base.name() + "\" has no penalty to tune");
  const std::vector<double> ones{base.lambda1};
  const std::vector<double> twos{base.lambda2};
  const auto& l1s = uses_l1 ? (lambda1_grid.empty() ? ones : lambda1_grid) : ones;
  const auto& l2s = uses_l2 ? (lambda2_grid.empty() ? twos : lambda2_grid) : twos;

  GridSearchResult out;
  out.best = base;
  out.best_mean_rmse = std::numeric_limits<double>::infinity();
  for (double l1 : l1s) {
    for (double l2 : l2s) {
      ModelSpec spec = base;
      spec.lambda1 = l1;
      spec.lambda2 = l2;
      const auto summary = run_kfold(d, spec, plan, threads);
      out.tried.push_back({l1, l2, summary.mean_rmse});
      if (summary.mean_rmse < out.best_mean_rmse) {
        out.best_mean_rmse = summary.mean_rmse;
        out.best = spec;
      }
    }
  }
  return out;
}

LoocvResult loocv(const DesignMatrix& d, const ModelSpec& spec, int threads) {
  const int n = static_cast<int>(d.n());
  if (n < 3) throw ValidationError("loocv: need at least 3 samples");

  std::vector<double> predicted(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
    std::vector<int> train_rows;
    train_rows.reserve(static_cast<std::size_t>(n) - 1);
    for (int r = 0; r < n; ++r)
      if (r != static_cast<int>(i)) train_rows.push_back(r);
    const DesignMatrix train = take_rows(d, train_rows);
    require_feature_variance(train, static_cast<int>(i));
    const FittedModel fit = fit_model(train, spec, 1);
    predicted[i] = fit.predict(d.X.row(static_cast<Eigen::Index>(i)))(0);
  });

  LoocvResult out;
  double ss = 0.0;
  out.errors.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    ParticipantError e;
    e.id = d.row_ids.empty() ? std::to_string(i) : d.row_ids[static_cast<std::size_t>(i)];
    e.actual = d.y(i);
    e.predicted = predicted[static_cast<std::size_t>(i)];
    e.error = e.actual - e.predicted;
    ss += e.error * e.error;
    out.errors.push_back(std::move(e));
  }
  out.pooled_rmse = std::sqrt(ss / static_cast<double>(n));
  return out;
}

namespace {

ordered_json fold_record_json(const FoldRecord& r) {
  ordered_json j;
  j["fold"] = r.fold;
  j["n_train"] = r.n_train;
  j["n_test"] = r.n_test;
  j["rmse"] = r.rmse_test;
  j["train_corr"] = r.train_corr ? ordered_json(*r.train_corr) : ordered_json(nullptr);
  j["test_corr"] = r.test_corr ? ordered_json(*r.test_corr) : ordered_json(nullptr);
  return j;
}

std::string hash_hex(std::uint64_t h) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016" PRIx64, h);
  return buf;
}

}  // namespace

std::string report_to_json(const EvalReport& report) {
  ordered_json j;
  if (!report.provenance_json.empty()) j["provenance"] = ordered_json::parse(report.provenance_json);
  j["seed"] = report.seed;
  j["k"] = report.k;
  j["fold_plan_hash"] = hash_hex(report.plan_hash);
  j["models"] = ordered_json::array();
  for (const auto& m : report.models) {
    ordered_json mj;
    mj["model"] = m.model;
    if (m.kfold) {
      ordered_json kj;
      kj["mean_rmse"] = m.kfold->mean_rmse;
      kj["pooled_rmse"] = m.kfold->pooled_rmse;
      kj["mean_train_corr"] =
          m.kfold->mean_train_corr ? ordered_json(*m.kfold->mean_train_corr) : ordered_json(nullptr);
      kj["mean_test_corr"] =
          m.kfold->mean_test_corr ? ordered_json(*m.kfold->mean_test_corr) : ordered_json(nullptr);
      kj["folds"] = ordered_json::array();
      for (const auto& r : m.kfold->folds) kj["folds"].push_back(fold_record_json(r));
      mj["kfold"] = std::move(kj);
    }
    if (m.loocv) {
      ordered_json lj;
      lj["rmse"] = m.loocv->pooled_rmse;
      lj["per_participant"] = ordered_json::array();
      for (const auto& e : m.loocv->errors) {
        ordered_json ej;
        ej["id"] = e.id;
        ej["actual"] = e.actual;
        ej["predicted"] = e.predicted;
        ej["error"] = e.error;
        lj["per_participant"].push_back(std::move(ej));
      }
      mj["loocv"] = std::move(lj);
    }
    j["models"].push_back(std::move(mj));
  }
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  const auto j = ordered_json::parse(text);
  EvalReport report;
  if (j.contains("provenance")) report.provenance_json = j["provenance"].dump();
  report.seed = j.at("seed").get<std::uint64_t>();
  report.k = j.at("k").get<int>();
  report.plan_hash = std::stoull(j.at("fold_plan_hash").get<std::string>(), nullptr, 16);
  for (const auto& mj : j.at("models")) {
    ModelReport m;
    m.model = mj.at("model").get<std::string>();
    if (mj.contains("kfold")) {
      KfoldSummary k;
      const auto& kj = mj["kfold"];
      k.mean_rmse = kj.at("mean_rmse").get<double>();
      k.pooled_rmse = kj.at("pooled_rmse").get<double>();
      if (!kj.at("mean_train_corr").is_null()) k.mean_train_corr = kj["mean_train_corr"].get<double>();
      if (!kj.at("mean_test_corr").is_null()) k.mean_test_corr = kj["mean_test_corr"].get<double>();
      for (const auto& rj : kj.at("folds")) {
        FoldRecord r;
        r.fold = rj.at("fold").get<int>();
        r.n_train = rj.at("n_train").get<int>();
        r.n_test = rj.at("n_test").get<int>();
        r.rmse_test = rj.at("rmse").get<double>();
        if (!rj.at("train_corr").is_null()) r.train_corr = rj["train_corr"].get<double>();
        if (!rj.at("test_corr").is_null()) r.test_corr = rj["test_corr"].get<double>();
        k.folds.push_back(r);
      }
      m.kfold = std::move(k);
    }
    if (mj.contains("loocv")) {
      LoocvResult l;
      const auto& lj = mj["loocv"];
      l.pooled_rmse = lj.at("rmse").get<double>();
      for (const auto& ej : lj.at("per_participant")) {
        ParticipantError e;
        e.id = ej.at("id").get<std::string>();
        e.actual = ej.at("actual").get<double>();
        e.predicted = ej.at("predicted").get<double>();
        e.error = ej.at("error").get<double>();
        l.errors.push_back(std::move(e));
      }
      m.loocv = std::move(l);
    }
    report.models.push_back(std::move(m));
  }
  return report;
}

std::string report_to_text(const EvalReport& report) {
  std::ostringstream os;
  const auto cell = [&](std::optional<double> v) {
    std::ostringstream c;
    if (v)
      c << std::fixed << std::setprecision(6) << *v;
    else
      c << "-";
    return c.str();
  };
  os << std::left << std::setw(12) << "model" << std::right << std::setw(14) << "kfold_rmse"
     << std::setw(14) << "train_corr" << std::setw(14) << "test_corr" << std::setw(14)
     << "loocv_rmse" << "\n";
  for (const auto& m : report.models) {
    os << std::left << std::setw(12) << m.model << std::right;
    os << std::setw(14) << (m.kfold ? cell(m.kfold->mean_rmse) : "-");
    os << std::setw(14) << (m.kfold ? cell(m.kfold->mean_train_corr) : "-");
    os << std::setw(14) << (m.kfold ? cell(m.kfold->mean_test_corr) : "-");
    os << std::setw(14) << (m.loocv ? cell(m.loocv->pooled_rmse) : "-");
    os << "\n";
  }
  return os.str();
}

}  // namespace vo2
