#pragma once
// svm.hpp - linear soft-margin SVM trained in the dual by coordinate descent,
// multiclass via one-vs-rest, probabilities via per-class sigmoid calibration
// fitted on out-of-fold decision values.
//
// The bias is handled as an augmented constant feature, so each coordinate
// update touches w and b together. Hinge loss, box constraint [0, C].

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "propdiag/ioutil.hpp"

namespace propdiag {

using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SvmHyperParams {
  double c = 1.0;
  double tol = 1e-4;
  int max_epochs = 1000;
  std::uint64_t seed = 0;
};

struct BinarySvm {
  Eigen::VectorXd w;
  double b = 0.0;
  double decision(const Eigen::Ref<const Eigen::VectorXd>& x) const { return w.dot(x) + b; }
};

// y in {-1,+1}. Dual coordinate descent until the largest projected gradient
// magnitude over a full sweep drops below tol.
inline BinarySvm svm_train_binary(const RowMatrixXd& x, const std::vector<int>& y,
                                  const SvmHyperParams& hp) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (n == 0) throw std::invalid_argument("svm: no rows");
  if (static_cast<Eigen::Index>(y.size()) != n)
    throw std::invalid_argument("svm: label count mismatch");
  bool has_pos = false, has_neg = false;
  for (int v : y) {
    if (v == 1) has_pos = true;
    else if (v == -1) has_neg = true;
    else throw std::invalid_argument("svm: binary labels must be -1/+1");
  }
  if (!has_pos || !has_neg) throw std::invalid_argument("svm: need both classes");

  Eigen::VectorXd qii(n);
  for (Eigen::Index i = 0; i < n; ++i) qii[i] = x.row(i).squaredNorm() + 1.0;  // +1: bias feature

  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  double b = 0.0;
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(hp.seed);

  for (int epoch = 0; epoch < hp.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double max_pg = 0.0;
    for (Eigen::Index i : order) {
      const double yi = static_cast<double>(y[i]);
      const double g = yi * (x.row(i).dot(w) + b) - 1.0;
      double pg = g;
      if (alpha[i] <= 0.0) pg = std::min(g, 0.0);
      else if (alpha[i] >= hp.c) pg = std::max(g, 0.0);
      max_pg = std::max(max_pg, std::abs(pg));
      if (std::abs(pg) > 1e-12) {
        double a_new = std::clamp(alpha[i] - g / qii[i], 0.0, hp.c);
        double delta = (a_new - alpha[i]) * yi;
        if (delta != 0.0) {
          w.noalias() += delta * x.row(i).transpose();
          b += delta;
          alpha[i] = a_new;
        }
      }
    }
    if (max_pg < hp.tol) break;
  }
  return {std::move(w), b};
}

namespace detail {

// Sigmoid calibration fit (regularized maximum likelihood, Newton steps with
// backtracking). decisions/labels: positives get target (n+ + 1)/(n+ + 2),
// negatives 1/(n- + 2).
inline std::pair<double, double> platt_fit(const std::vector<double>& decisions,
                                           const std::vector<int>& positive) {
  const std::size_t n = decisions.size();
  double prior1 = 0.0, prior0 = 0.0;
  for (int p : positive) (p ? prior1 : prior0) += 1.0;
  if (prior1 < 1.0 || prior0 < 1.0)
    throw std::invalid_argument("platt: need both outcomes among decisions");

  const double hi = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo = 1.0 / (prior0 + 2.0);
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = positive[i] ? hi : lo;

  double a = 0.0;
  double b = std::log((prior0 + 1.0) / (prior1 + 1.0));

  auto objective = [&](double aa, double bb) {
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double fapb = aa * decisions[i] + bb;
      if (fapb >= 0.0)
        f += t[i] * fapb + std::log1p(std::exp(-fapb));
      else
        f += (t[i] - 1.0) * fapb + std::log1p(std::exp(fapb));
    }
    return f;
  };

  double fval = objective(a, b);
  const double min_step = 1e-10, sigma = 1e-12;
  for (int iter = 0; iter < 100; ++iter) {
    double h11 = sigma, h22 = sigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double fapb = a * decisions[i] + b;
      double p, q;
      if (fapb >= 0.0) {
        p = std::exp(-fapb) / (1.0 + std::exp(-fapb));
        q = 1.0 / (1.0 + std::exp(-fapb));
      } else {
        p = 1.0 / (1.0 + std::exp(fapb));
        q = std::exp(fapb) / (1.0 + std::exp(fapb));
      }
      double d2 = p * q;
      h11 += decisions[i] * decisions[i] * d2;
      h22 += d2;
      h21 += decisions[i] * d2;
      double d1 = t[i] - p;
      g1 += decisions[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) break;

    double det = h11 * h22 - h21 * h21;
    double da = -(h22 * g1 - h21 * g2) / det;
    double db = -(-h21 * g1 + h11 * g2) / det;
    double gd = g1 * da + g2 * db;
    double step = 1.0;
    while (step >= min_step) {
      double na = a + step * da;
      double nb = b + step * db;
      double nf = objective(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        a = na;
        b = nb;
        fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < min_step) break;
  }
  return {a, b};
}

inline double platt_prob(double decision, double a, double b) {
  double fapb = a * decision + b;
  if (fapb >= 0.0)
    return std::exp(-fapb) / (1.0 + std::exp(-fapb));
  return 1.0 / (1.0 + std::exp(fapb));
}

}  // namespace detail

// One-vs-rest multiclass linear SVM with calibrated probabilities.
struct SvmClassifier {
  std::vector<int> classes;            // sorted ascending
  std::vector<Eigen::VectorXd> w;      // per class
  std::vector<double> b;
  std::vector<double> platt_a, platt_b;
  SvmHyperParams hyper;
  std::string schema_id;

  int n_classes() const { return static_cast<int>(classes.size()); }

  Eigen::VectorXd decision_values(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    Eigen::VectorXd s(n_classes());
    for (int c = 0; c < n_classes(); ++c) s[c] = w[c].dot(x) + b[c];
    return s;
  }

  // Renormalized per-class sigmoids; rows sum to one.
  Eigen::VectorXd predict_proba(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    Eigen::VectorXd p(n_classes());
    for (int c = 0; c < n_classes(); ++c)
      p[c] = detail::platt_prob(w[c].dot(x) + b[c], platt_a[c], platt_b[c]);
    double total = p.sum();
    if (total <= 1e-300)
      p.setConstant(1.0 / n_classes());
    else
      p /= total;
    return p;
  }

  // Ties resolve to the lowest class label.
  int predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    Eigen::VectorXd p = predict_proba(x);
    int best = 0;
    for (int c = 1; c < n_classes(); ++c)
      if (p[c] > p[best]) best = c;
    return classes[best];
  }

  std::vector<int> predict_batch(const Eigen::MatrixXd& x) const {
    std::vector<int> out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = predict(x.row(i).transpose());
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["schema_id"] = schema_id;
    j["model"] = "linear-svm-ovr";
    j["classes"] = classes;
    j["hyperparams"] = {{"c", hyper.c},
                        {"tol", hyper.tol},
                        {"max_epochs", hyper.max_epochs},
                        {"seed", hyper.seed}};
    nlohmann::json per;
    for (int c = 0; c < n_classes(); ++c) {
      nlohmann::json m;
      m["class"] = classes[c];
      m["w"] = std::vector<double>(w[c].data(), w[c].data() + w[c].size());
      m["b"] = b[c];
      m["platt_a"] = platt_a[c];
      m["platt_b"] = platt_b[c];
      per.push_back(m);
    }
    j["per_class"] = per;
    return j;
  }

  static SvmClassifier from_json(const nlohmann::json& j) {
    SvmClassifier s;
    s.schema_id = j.at("schema_id").get<std::string>();
    s.classes = j.at("classes").get<std::vector<int>>();
    s.hyper.c = j.at("hyperparams").at("c").get<double>();
    s.hyper.tol = j.at("hyperparams").at("tol").get<double>();
    s.hyper.max_epochs = j.at("hyperparams").at("max_epochs").get<int>();
    s.hyper.seed = j.at("hyperparams").at("seed").get<std::uint64_t>();
    for (const auto& m : j.at("per_class")) {
      auto wv = m.at("w").get<std::vector<double>>();
      s.w.push_back(Eigen::Map<const Eigen::VectorXd>(wv.data(),
                                                      static_cast<Eigen::Index>(wv.size())));
      s.b.push_back(m.at("b").get<double>());
      s.platt_a.push_back(m.at("platt_a").get<double>());
      s.platt_b.push_back(m.at("platt_b").get<double>());
    }
    if (s.w.size() != s.classes.size()) throw std::invalid_argument("svm: malformed model json");
    return s;
  }
};

// Multiclass training. Calibration decision values come from 3-fold
// cross-validation so the sigmoid never sees in-sample scores.
inline SvmClassifier svm_train(const Eigen::MatrixXd& x_in, const std::vector<int>& labels,
                               const SvmHyperParams& hp, const std::string& schema_id = "") {
  const Eigen::Index n = x_in.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw std::invalid_argument("svm: label count mismatch");
  RowMatrixXd x = x_in;  // row-major copy: coordinate descent walks rows

  std::vector<int> classes = labels;
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2) throw std::invalid_argument("svm: need at least two classes");
  for (int cls : classes) {
    long count = std::count(labels.begin(), labels.end(), cls);
    if (count < 3)
      throw std::invalid_argument("svm: class " + std::to_string(cls) +
                                  " has fewer than 3 samples (calibration needs folds)");
  }

  constexpr int kFolds = 3;
  std::vector<Eigen::Index> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(mix_seed(hp.seed, 0xf01d));
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> fold_of(n);
  for (Eigen::Index i = 0; i < n; ++i) fold_of[perm[i]] = static_cast<int>(i % kFolds);

  SvmClassifier out;
  out.classes = classes;
  out.hyper = hp;
  out.schema_id = schema_id;

  for (std::size_t ci = 0; ci < classes.size(); ++ci) {
    const int cls = classes[ci];
    std::vector<int> y(n);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = (labels[i] == cls) ? 1 : -1;

    // Out-of-fold decision values for calibration.
    std::vector<double> oof_decisions;
    std::vector<int> oof_positive;
    oof_decisions.reserve(n);
    oof_positive.reserve(n);
    for (int f = 0; f < kFolds; ++f) {
      std::vector<Eigen::Index> tr, te;
      for (Eigen::Index i = 0; i < n; ++i) (fold_of[i] == f ? te : tr).push_back(i);
      RowMatrixXd xt(tr.size(), x.cols());
      std::vector<int> yt(tr.size());
      bool pos = false, neg = false;
      for (std::size_t i = 0; i < tr.size(); ++i) {
        xt.row(i) = x.row(tr[i]);
        yt[i] = y[tr[i]];
        (yt[i] == 1 ? pos : neg) = true;
      }
      if (!pos || !neg)
        throw std::invalid_argument("svm: calibration fold lost a class; need more samples");
      SvmHyperParams fold_hp = hp;
      fold_hp.seed = mix_seed(hp.seed, 100 * ci + f);
      BinarySvm bin = svm_train_binary(xt, yt, fold_hp);
      for (Eigen::Index i : te) {
        oof_decisions.push_back(bin.decision(x.row(i).transpose()));
        oof_positive.push_back(y[i] == 1 ? 1 : 0);
      }
    }
    auto [pa, pb] = detail::platt_fit(oof_decisions, oof_positive);

    SvmHyperParams final_hp = hp;
    final_hp.seed = mix_seed(hp.seed, 100 * ci + 99);
    BinarySvm bin = svm_train_binary(x, y, final_hp);
    out.w.push_back(std::move(bin.w));
    out.b.push_back(bin.b);
    out.platt_a.push_back(pa);
    out.platt_b.push_back(pb);
  }
  return out;
}

}  // namespace propdiag
