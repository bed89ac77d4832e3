#include "vo2/model_io.hpp"

#include <nlohmann/json.hpp>

#include "vo2/errors.hpp"

namespace vo2 {

using nlohmann::ordered_json;

namespace {

ordered_json vec_json(const Eigen::VectorXd& v) {
  ordered_json j = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

Eigen::VectorXd vec_from(const ordered_json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

ordered_json scaler_json(const Standardization& s) {
  return {{"mean", vec_json(s.mean)}, {"sd", vec_json(s.sd)}};
}

Standardization scaler_from(const ordered_json& j) {
  return {vec_from(j.at("mean")), vec_from(j.at("sd"))};
}

}  // namespace

std::string fitted_model_to_json(const FittedModel& fit, const ModelSpec& spec) {
  ordered_json j;
  j["model"] = spec.name();
  if (const auto* lin = std::get_if<LinearFit>(&fit.model)) {
    j["type"] = "linear";
    j["intercept"] = lin->intercept;
    ordered_json coef, coef_std;
    for (std::size_t c = 0; c < lin->column_names.size(); ++c) {
      coef[lin->column_names[c]] = lin->coefficients(static_cast<Eigen::Index>(c));
      coef_std[lin->column_names[c]] = lin->coefficients_std(static_cast<Eigen::Index>(c));
    }
    j["coefficients"] = std::move(coef);          // original units
    j["coefficients_std"] = std::move(coef_std);  // per-SD influences
    j["standardization"] = scaler_json(lin->standardization);
    j["columns"] = lin->column_names;
    j["lambda1"] = lin->lambda1;
    j["lambda2"] = lin->lambda2;
    j["converged"] = lin->converged;
    j["iterations"] = lin->iterations;
  } else if (const auto* forest = std::get_if<Forest>(&fit.model)) {
    j["type"] = "rf";
    j["config"] = {{"n_trees", forest->config.n_trees},
                   {"max_depth", forest->config.max_depth},
                   {"min_samples_leaf", forest->config.min_samples_leaf},
                   {"max_features", forest->config.max_features},
                   {"bootstrap", forest->config.bootstrap},
                   {"seed", forest->config.seed}};
    ordered_json trees = ordered_json::array();
    for (const auto& t : forest->trees) {
      ordered_json nodes = ordered_json::array();
      for (const auto& nd : t.nodes)
        nodes.push_back({nd.feature, nd.threshold, nd.left, nd.right, nd.value});
      trees.push_back(std::move(nodes));
    }
    j["trees"] = std::move(trees);
  } else {
    const auto& s = std::get<FittedModel::SvrWithScaler>(fit.model);
    j["type"] = "svr";
    j["config"] = {{"kernel", to_string(s.fit.config.kernel)}, {"gamma", s.fit.config.gamma},
                   {"C", s.fit.config.C},                      {"epsilon", s.fit.config.epsilon},
                   {"tol", s.fit.config.tol},                  {"max_passes", s.fit.config.max_passes}};
    j["scaler"] = scaler_json(s.scaler);
    ordered_json svs = ordered_json::array();
    for (Eigen::Index r = 0; r < s.fit.support_vectors.rows(); ++r)
      svs.push_back(vec_json(s.fit.support_vectors.row(r).transpose()));
    j["support_vectors"] = std::move(svs);
    j["dual_coef"] = vec_json(s.fit.dual_coef);
    j["sv_indices"] = s.fit.sv_indices;
    j["bias"] = s.fit.bias;
    j["converged"] = s.fit.converged;
    j["passes"] = s.fit.passes;
  }
  return j.dump(2) + "\n";
}

LoadedModel fitted_model_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::exception& e) {
    throw ParseError(std::string("model file: ") + e.what());
  }
  LoadedModel out;
  out.model = j.at("model").get<std::string>();
  const auto type = j.at("type").get<std::string>();
  if (type == "linear") {
    LinearFit lin;
    lin.intercept = j.at("intercept").get<double>();
    lin.column_names = j.at("columns").get<std::vector<std::string>>();
    const auto d = static_cast<Eigen::Index>(lin.column_names.size());
    lin.coefficients.resize(d);
    lin.coefficients_std.resize(d);
    for (Eigen::Index c = 0; c < d; ++c) {
      const auto& name = lin.column_names[static_cast<std::size_t>(c)];
      lin.coefficients(c) = j.at("coefficients").at(name).get<double>();
      lin.coefficients_std(c) = j.at("coefficients_std").at(name).get<double>();
    }
    lin.standardization = scaler_from(j.at("standardization"));
    lin.lambda1 = j.at("lambda1").get<double>();
    lin.lambda2 = j.at("lambda2").get<double>();
    lin.converged = j.at("converged").get<bool>();
    lin.iterations = j.at("iterations").get<int>();
    out.fit.model = std::move(lin);
  } else if (type == "rf") {
    Forest forest;
    const auto& cj = j.at("config");
    forest.config.n_trees = cj.at("n_trees").get<int>();
    forest.config.max_depth = cj.at("max_depth").get<int>();
    forest.config.min_samples_leaf = cj.at("min_samples_leaf").get<int>();
    forest.config.max_features = cj.at("max_features").get<int>();
    forest.config.bootstrap = cj.at("bootstrap").get<bool>();
    forest.config.seed = cj.at("seed").get<std::uint64_t>();
    for (const auto& tj : j.at("trees")) {
      RegressionTree t;
      for (const auto& nj : tj) {
        TreeNode nd;
        nd.feature = nj.at(0).get<int>();
        nd.threshold = nj.at(1).get<double>();
        nd.left = nj.at(2).get<int>();
        nd.right = nj.at(3).get<int>();
        nd.value = nj.at(4).get<double>();
        t.nodes.push_back(nd);
      }
      forest.trees.push_back(std::move(t));
    }
    out.fit.model = std::move(forest);
  } else if (type == "svr") {
    FittedModel::SvrWithScaler s;
    const auto& cj = j.at("config");
    s.fit.config.kernel = svr_kernel_from_string(cj.at("kernel").get<std::string>());
    s.fit.config.gamma = cj.at("gamma").get<double>();
    s.fit.config.C = cj.at("C").get<double>();
    s.fit.config.epsilon = cj.at("epsilon").get<double>();
    s.fit.config.tol = cj.at("tol").get<double>();
    s.fit.config.max_passes = cj.at("max_passes").get<int>();
    s.scaler = scaler_from(j.at("scaler"));
    const auto& svs = j.at("support_vectors");
    const auto rows = static_cast<Eigen::Index>(svs.size());
    const auto cols = static_cast<Eigen::Index>(s.scaler.mean.size());
    s.fit.support_vectors.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      s.fit.support_vectors.row(r) = vec_from(svs[static_cast<std::size_t>(r)]).transpose();
    s.fit.dual_coef = vec_from(j.at("dual_coef"));
    s.fit.sv_indices = j.at("sv_indices").get<std::vector<int>>();
    s.fit.bias = j.at("bias").get<double>();
    s.fit.converged = j.at("converged").get<bool>();
    s.fit.passes = j.at("passes").get<int>();
    out.fit.model = std::move(s);
  } else {
    throw ParseError("model file: unknown type \"" + type + "\"");
  }
  return out;
}

}  // namespace vo2
