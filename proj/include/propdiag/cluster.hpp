#pragma once
// cluster.hpp - k-means (k-means++ seeding, Lloyd refinement) used to shrink
// oversized classes to a fixed number of synthetic representative rows.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>
#include <vector>

#include "propdiag/ioutil.hpp"

namespace propdiag {

struct KMeansResult {
  Eigen::MatrixXd centroids;       // k x d
  std::vector<int> assignments;    // n
  double inertia = 0.0;
  int iterations_run = 0;
  std::vector<double> inertia_history;  // post-assignment inertia per iteration
};

namespace detail {

// Squared distances of every row of x to every row of c, written into d2.
inline void pairwise_sq_dist(const Eigen::MatrixXd& x, const Eigen::MatrixXd& c,
                             Eigen::MatrixXd& d2) {
  Eigen::VectorXd xn = x.rowwise().squaredNorm();
  Eigen::VectorXd cn = c.rowwise().squaredNorm();
  d2.noalias() = -2.0 * (x * c.transpose());
  d2.colwise() += xn;
  d2.rowwise() += cn.transpose();
  d2 = d2.cwiseMax(0.0);
}

}  // namespace detail

inline KMeansResult kmeans(const Eigen::MatrixXd& x, int k, std::uint64_t seed,
                           double tol = 1e-4, int max_iter = 300) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (k <= 0) throw std::invalid_argument("kmeans: k must be positive");
  if (n < k) throw std::invalid_argument("kmeans: fewer points than clusters");
  if (!x.allFinite()) throw std::invalid_argument("kmeans: non-finite input");

  std::mt19937_64 rng(seed);

  // k-means++ seeding: first centroid uniform, then squared-distance weighted.
  Eigen::MatrixXd centroids(k, d);
  {
    std::uniform_int_distribution<Eigen::Index> uni(0, n - 1);
    centroids.row(0) = x.row(uni(rng));
    Eigen::VectorXd best_d2 =
        (x.rowwise() - centroids.row(0)).rowwise().squaredNorm();
    for (int c = 1; c < k; ++c) {
      double total = best_d2.sum();
      Eigen::Index pick = 0;
      if (total > 0.0) {
        std::uniform_real_distribution<double> ur(0.0, total);
        double target = ur(rng);
        double acc = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          acc += best_d2[i];
          if (acc >= target) {
            pick = i;
            break;
          }
        }
      } else {
        pick = uni(rng);  // all points coincide with chosen centroids
      }
      centroids.row(c) = x.row(pick);
      best_d2 = best_d2.cwiseMin(
          (x.rowwise() - centroids.row(c)).rowwise().squaredNorm());
    }
  }

  KMeansResult res;
  res.assignments.assign(n, 0);
  std::vector<Eigen::Index> counts(k, 0);
  double prev_inertia = std::numeric_limits<double>::infinity();

  constexpr Eigen::Index kBlock = 512;
  Eigen::MatrixXd d2;
  for (int iter = 0; iter < max_iter; ++iter) {
    // Assignment step (blocked so the distance matrix stays small).
    double inertia = 0.0;
    for (Eigen::Index r0 = 0; r0 < n; r0 += kBlock) {
      Eigen::Index rows = std::min(kBlock, n - r0);
      detail::pairwise_sq_dist(x.middleRows(r0, rows), centroids, d2);
      for (Eigen::Index i = 0; i < rows; ++i) {
        Eigen::Index best;
        inertia += d2.row(i).minCoeff(&best);
        res.assignments[r0 + i] = static_cast<int>(best);
      }
    }
    res.inertia_history.push_back(inertia);
    res.inertia = inertia;
    res.iterations_run = iter + 1;

    bool converged = std::isfinite(prev_inertia) &&
                     std::abs(prev_inertia - inertia) <=
                         tol * std::max(prev_inertia, 1e-300);
    prev_inertia = inertia;

    // Update step.
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, d);
    std::fill(counts.begin(), counts.end(), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(res.assignments[i]) += x.row(i);
      ++counts[res.assignments[i]];
    }
    for (int c = 0; c < k; ++c)
      if (counts[c] > 0) centroids.row(c) = sums.row(c) / static_cast<double>(counts[c]);

    // Empty clusters grab the points currently farthest from their centroid.
    std::vector<int> empties;
    for (int c = 0; c < k; ++c)
      if (counts[c] == 0) empties.push_back(c);
    if (!empties.empty()) {
      std::vector<std::pair<double, Eigen::Index>> far(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        double dist = (x.row(i) - centroids.row(res.assignments[i])).squaredNorm();
        far[i] = {dist, i};
      }
      std::sort(far.begin(), far.end(),
                [](const auto& a, const auto& b) { return a.first > b.first; });
      for (std::size_t e = 0; e < empties.size(); ++e)
        centroids.row(empties[e]) = x.row(far[e].second);
      converged = false;
    }

    if (converged) break;
  }

  res.centroids = std::move(centroids);
  return res;
}

// Classes larger than target_count are replaced by that many k-means
// centroids (synthetic rows); smaller classes pass through untouched.
template <typename Label>
std::map<Label, Eigen::MatrixXd> balance_classes(const std::map<Label, Eigen::MatrixXd>& classes,
                                                 int target_count, std::uint64_t seed) {
  if (target_count <= 0) throw std::invalid_argument("balance: target_count must be positive");
  std::map<Label, Eigen::MatrixXd> out;
  std::uint64_t stream = 0;
  for (const auto& [label, rows] : classes) {
    if (rows.rows() == 0) throw std::invalid_argument("balance: empty class");
    if (rows.rows() > target_count) {
      KMeansResult km = kmeans(rows, target_count, mix_seed(seed, stream));
      out[label] = km.centroids;
    } else {
      out[label] = rows;
    }
    ++stream;
  }
  return out;
}

}  // namespace propdiag
