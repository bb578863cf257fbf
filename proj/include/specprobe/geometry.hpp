#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "specprobe/embedding.hpp"
#include "specprobe/errors.hpp"
#include "specprobe/probe.hpp"

namespace specprobe {

struct CentroidEntry {
  Vector centroid;
  std::size_t count = 0;
};

struct CentroidTable {
  std::map<std::pair<std::string, std::string>, CentroidEntry> entries;
  std::vector<std::string> subject_names;
  std::vector<std::string> task_names;
  Eigen::Index dim = 0;
};

// Arithmetic mean of embeddings per (subject, task) cell; cells with no
// epochs are absent rather than zero.
inline CentroidTable centroids(const EmbeddingSet& emb, const LabelSet& subjects,
                               const LabelSet& tasks) {
  emb.validate();
  subjects.validate(emb.rows());
  tasks.validate(emb.rows());

  CentroidTable table;
  table.subject_names = subjects.names;
  table.task_names = tasks.names;
  table.dim = emb.data.cols();

  std::map<std::pair<std::string, std::string>, std::size_t> counts;
  for (std::size_t i = 0; i < emb.rows(); ++i) {
    const auto key = std::make_pair(subjects.names[std::size_t(subjects.labels[i])],
                                    tasks.names[std::size_t(tasks.labels[i])]);
    auto [it, inserted] = table.entries.try_emplace(key);
    if (inserted) it->second.centroid = Vector::Zero(table.dim);
    it->second.centroid += emb.data.row(Eigen::Index(i)).transpose();
    it->second.count += 1;
  }
  for (auto& [key, entry] : table.entries)
    entry.centroid /= double(entry.count);
  return table;
}

struct GeometryReport {
  double d_cs = 0.0;
  double d_ct = 0.0;
  std::vector<std::pair<std::string, double>> per_subject_terms;
  std::vector<std::pair<std::string, double>> per_task_terms;
  std::vector<std::string> excluded_subjects;
  std::vector<std::string> excluded_tasks;
};

namespace geometry_detail {

// Mean pairwise distance with the ordered-pair normalization m(m-1); the
// double-counted sum cancels, leaving the unordered mean.
inline double mean_pairwise(const std::vector<const Vector*>& points) {
  const std::size_t m = points.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (i != j) acc += (*points[i] - *points[j]).norm();
  return acc / (double(m) * double(m - 1));
}

}  // namespace geometry_detail

// Eq.-style cluster separations: d_cs averages, over subjects, the mean
// distance between that subject's task centroids; d_ct swaps the roles.
// Groups with fewer than two centroids are excluded and reported.
inline GeometryReport cluster_distances(const CentroidTable& table) {
  GeometryReport report;

  for (const std::string& s : table.subject_names) {
    std::vector<const Vector*> points;
    for (const std::string& t : table.task_names) {
      auto it = table.entries.find({s, t});
      if (it != table.entries.end()) points.push_back(&it->second.centroid);
    }
    if (points.size() < 2)
      report.excluded_subjects.push_back(s);
    else
      report.per_subject_terms.emplace_back(
          s, geometry_detail::mean_pairwise(points));
  }
  for (const std::string& t : table.task_names) {
    std::vector<const Vector*> points;
    for (const std::string& s : table.subject_names) {
      auto it = table.entries.find({s, t});
      if (it != table.entries.end()) points.push_back(&it->second.centroid);
    }
    if (points.size() < 2)
      report.excluded_tasks.push_back(t);
    else
      report.per_task_terms.emplace_back(t,
                                         geometry_detail::mean_pairwise(points));
  }

  if (report.per_subject_terms.empty())
    throw validation_error(
        "cluster distances: no subject has centroids for 2 or more tasks, "
        "so d_cs is undefined");
  if (report.per_task_terms.empty())
    throw validation_error(
        "cluster distances: no task has centroids for 2 or more subjects, "
        "so d_ct is undefined");

  for (const auto& [name, term] : report.per_subject_terms) report.d_cs += term;
  report.d_cs /= double(report.per_subject_terms.size());
  for (const auto& [name, term] : report.per_task_terms) report.d_ct += term;
  report.d_ct /= double(report.per_task_terms.size());
  return report;
}

// Mean-centered projection onto the top two principal directions. Signs are
// fixed by making each direction's largest-magnitude loading positive.
inline Matrix pca2d(const Matrix& data) {
  if (data.rows() < 3)
    throw validation_error("pca2d: need at least 3 rows");
  if (data.cols() < 2)
    throw validation_error("pca2d: need at least 2 feature dimensions");
  if (!data.allFinite())
    throw validation_error("pca2d: non-finite entries");

  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Matrix centered = data.rowwise() - mean;
  const Eigen::MatrixXd cov =
      (centered.transpose() * centered) / double(data.rows() - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    throw validation_error("pca2d: eigendecomposition failed");

  // Eigenvalues ascend; take the last two, largest first.
  Eigen::MatrixXd axes(data.cols(), 2);
  axes.col(0) = solver.eigenvectors().col(data.cols() - 1);
  axes.col(1) = solver.eigenvectors().col(data.cols() - 2);
  for (int c = 0; c < 2; ++c) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < axes.rows(); ++i)
      if (std::fabs(axes(i, c)) > best) {
        best = std::fabs(axes(i, c));
        arg = i;
      }
    if (axes(arg, c) < 0.0) axes.col(c) = -axes.col(c);
  }
  return centered * axes;
}

}  // namespace specprobe
