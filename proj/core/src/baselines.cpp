#include "lesionuq/baselines.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace lesionuq {
namespace {

void require_nonempty(const Lesion& lesion) {
  if (lesion.voxels.empty()) throw InputError("aggregation over an empty lesion");
}

const double& map_at(const Volume& map, const Voxel& v) {
  if (!map.dims().contains(v)) throw InputError("lesion voxel outside the uncertainty map");
  return map.at(v);
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Matrix with_intercept(const Matrix& x) {
  Matrix xa(x.rows(), x.cols() + 1);
  xa.leftCols(x.cols()) = x;
  xa.col(x.cols()).setOnes();
  return xa;
}

LinearModel split(const Eigen::VectorXd& w) {
  LinearModel m;
  m.weights.assign(w.data(), w.data() + w.size() - 1);
  m.intercept = w(w.size() - 1);
  return m;
}

}  // namespace

double aggregate_mean(const Lesion& lesion, const Volume& map) {
  require_nonempty(lesion);
  double sum = 0.0;
  for (const auto& v : lesion.voxels) sum += map_at(map, v);
  return sum / static_cast<double>(lesion.size());
}

double aggregate_logsum(const Lesion& lesion, const Volume& map) {
  require_nonempty(lesion);
  double sum = 0.0;
  for (const auto& v : lesion.voxels) sum += std::log(map_at(map, v) + kLogsumDelta);
  return sum;
}

double size_uncertainty(std::size_t size) {
  if (size == 0) throw InputError("lesion size must be >= 1");
  return 1.0 / static_cast<double>(size);
}

LesionFeatures lesion_features(const Lesion& lesion, const UncertaintyMaps& maps) {
  LesionFeatures f;
  f.mean_entropy = aggregate_mean(lesion, maps.entropy);
  f.mean_variance = aggregate_mean(lesion, maps.variance);
  f.mean_pcs = aggregate_mean(lesion, maps.pcs_uncertainty);
  f.logsum_entropy = aggregate_logsum(lesion, maps.entropy);
  f.logsum_variance = aggregate_logsum(lesion, maps.variance);
  f.logsum_pcs = aggregate_logsum(lesion, maps.pcs_uncertainty);
  f.size = lesion.size();
  return f;
}

LesionFeatures lesion_features(const LesionGraph& graph) {
  if (graph.size == 0 || graph.size > graph.n_nodes()) {
    throw InputError("graph lesion size out of range");
  }
  if (graph.n_features < 5) throw InputError("graph has fewer than 5 feature columns");
  const std::size_t entropy_col = graph.n_features - 3;
  double me = 0, mv = 0, mp = 0, le = 0, lv = 0, lp = 0;
  for (std::size_t n = 0; n < graph.size; ++n) {
    const double e = graph.feature(n, entropy_col);
    const double v = graph.feature(n, entropy_col + 1);
    const double p = graph.feature(n, entropy_col + 2);
    me += e;
    mv += v;
    mp += p;
    le += std::log(e + kLogsumDelta);
    lv += std::log(v + kLogsumDelta);
    lp += std::log(p + kLogsumDelta);
  }
  const auto s = static_cast<double>(graph.size);
  return {me / s, mv / s, mp / s, le, lv, lp, graph.size};
}

double LinearModel::decision(std::span<const double> x) const {
  if (x.size() != weights.size()) throw InputError("feature width does not match the model");
  double z = intercept;
  for (std::size_t i = 0; i < x.size(); ++i) z += weights[i] * x[i];
  return z;
}

LinearModel linear_regression_fit(const Matrix& x, std::span<const double> y, double ridge) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw InputError("X and y lengths differ");
  if (x.rows() <= x.cols() + 1) {
    throw FitError("linear regression needs more samples than coefficients");
  }
  const Matrix xa = with_intercept(x);
  const Eigen::Map<const Eigen::VectorXd> target(y.data(), static_cast<Eigen::Index>(y.size()));
  Eigen::MatrixXd gram = xa.transpose() * xa;
  gram.diagonal().array() += ridge;
  const Eigen::VectorXd rhs = xa.transpose() * target;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-15)) {
    throw FitError("normal equations are singular even with the ridge term");
  }
  const Eigen::VectorXd w = ldlt.solve(rhs);
  if (!w.allFinite()) throw FitError("non-finite least-squares solution");
  return split(w);
}

LinearModel logistic_regression_fit(const Matrix& x, std::span<const int> labels,
                                    const LogisticOptions& options) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) {
    throw InputError("X and labels lengths differ");
  }
  if (x.rows() <= x.cols() + 1) {
    throw FitError("logistic regression needs more samples than coefficients");
  }
  const auto positives = std::count_if(labels.begin(), labels.end(), [](int l) { return l != 0; });
  if (positives == 0 || positives == static_cast<std::ptrdiff_t>(labels.size())) {
    throw FitError("logistic regression needs both classes");
  }
  const Matrix xa = with_intercept(x);
  const auto m = static_cast<double>(xa.rows());
  Eigen::VectorXd y(xa.rows());
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0;

  // Step 1/L with L bounding the Hessian of the mean log-loss.
  const Eigen::MatrixXd gram = (xa.transpose() * xa) / m;
  const double lmax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram).eigenvalues().maxCoeff();
  if (!(lmax > 0.0)) throw FitError("feature matrix is identically zero");
  const double step = 1.0 / (0.25 * lmax);

  Eigen::VectorXd w = Eigen::VectorXd::Zero(xa.cols());
  Eigen::VectorXd p(xa.rows());
  for (long it = 0; it < options.max_iterations; ++it) {
    const Eigen::VectorXd z = xa * w;
    for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = sigmoid(z(i));
    const Eigen::VectorXd grad = xa.transpose() * (p - y) / m;
    if (grad.norm() < options.gradient_tolerance) break;
    w -= step * grad;
  }
  if (!w.allFinite()) throw FitError("logistic regression diverged");
  return split(w);
}

MetaSegModel fit_metaseg(std::span<const LesionFeatures> features, std::span<const int> tp,
                         std::span<const double> iou_adj, MetaSegKind kind) {
  const std::size_t n = features.size();
  if (tp.size() != n || iou_adj.size() != n) throw InputError("MetaSeg inputs differ in length");
  MetaSegModel model;
  model.kind = kind;
  Matrix x(static_cast<Eigen::Index>(n), 4);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = features[i].metaseg_inputs();
    for (int c = 0; c < 4; ++c) x(static_cast<Eigen::Index>(i), c) = row[static_cast<std::size_t>(c)];
  }
  for (int c = 0; c < 4; ++c) {
    const double mean = x.col(c).mean();
    const double sd = std::sqrt((x.col(c).array() - mean).square().mean());
    if (sd > 1e-12 * std::max(1.0, std::abs(mean))) {
      model.mean[static_cast<std::size_t>(c)] = mean;
      model.stddev[static_cast<std::size_t>(c)] = sd;
    }
    x.col(c) = (x.col(c).array() - model.mean[static_cast<std::size_t>(c)]) /
               model.stddev[static_cast<std::size_t>(c)];
  }
  if (kind == MetaSegKind::Classification) {
    std::vector<int> is_fp(n);
    for (std::size_t i = 0; i < n; ++i) is_fp[i] = tp[i] ? 0 : 1;
    model.fit = logistic_regression_fit(x, is_fp);
  } else {
    model.fit = linear_regression_fit(x, iou_adj);
  }
  return model;
}

double metaseg_predict(const LesionFeatures& features, const MetaSegModel& model) {
  auto raw = features.metaseg_inputs();
  for (std::size_t c = 0; c < raw.size(); ++c) raw[c] = (raw[c] - model.mean[c]) / model.stddev[c];
  const double z = model.fit.decision(raw);
  if (model.kind == MetaSegKind::Classification) return sigmoid(z);
  return std::clamp(1.0 - z, 0.0, 1.0);
}

void save_metaseg(const MetaSegModel& model, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "lesionuq-metaseg";
  j["format_version"] = 1;
  j["kind"] = model.kind == MetaSegKind::Classification ? "classification" : "regression";
  j["features"] = {"mean_entropy", "mean_variance", "mean_pcs_uncertainty", "size"};
  j["scaler"] = {{"mean", model.mean}, {"stddev", model.stddev}};
  j["weights"] = model.fit.weights;
  j["intercept"] = model.fit.intercept;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failure on " + path.string());
}

MetaSegModel load_metaseg(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  MetaSegModel model;
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("format").get<std::string>() != "lesionuq-metaseg") {
      throw FormatError("not a MetaSeg model file: " + path.string());
    }
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "classification") {
      model.kind = MetaSegKind::Classification;
    } else if (kind == "regression") {
      model.kind = MetaSegKind::Regression;
    } else {
      throw FormatError("unknown MetaSeg kind '" + kind + "'");
    }
    model.mean = j.at("scaler").at("mean").get<std::array<double, 4>>();
    model.stddev = j.at("scaler").at("stddev").get<std::array<double, 4>>();
    model.fit.weights = j.at("weights").get<std::vector<double>>();
    model.fit.intercept = j.at("intercept").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad MetaSeg model " + path.string() + ": " + e.what());
  }
  if (model.fit.weights.size() != 4) throw FormatError("MetaSeg model needs 4 weights");
  return model;
}

BaselineScores score_baselines(const LesionFeatures& f, const MetaSegModel& classif,
                               const MetaSegModel& reg) {
  return {f.mean_entropy,  f.logsum_entropy,          f.mean_variance,
          f.logsum_variance, f.mean_pcs,              f.logsum_pcs,
          size_uncertainty(f.size), metaseg_predict(f, classif), metaseg_predict(f, reg)};
}

}  // namespace lesionuq
