#include "egat/graph/pca.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "egat/errors.hpp"

namespace egat::graph {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMatrix> as_matrix(const numerics::Tensor& t) {
  return {t.values().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}

}  // namespace

numerics::Tensor PcaModel::project(const numerics::Tensor& x) const {
  if (x.cols() != mean.size()) {
    throw ShapeError("pca: expected " + std::to_string(mean.size()) + " features, got " + std::to_string(x.cols()));
  }
  const Eigen::Map<const Eigen::RowVectorXd> mu(mean.data(), static_cast<Eigen::Index>(mean.size()));
  RowMatrix centred = as_matrix(x).rowwise() - mu;
  numerics::Tensor out = numerics::Tensor::matrix(x.rows(), dims());
  Eigen::Map<RowMatrix>(out.values().data(), static_cast<Eigen::Index>(x.rows()), static_cast<Eigen::Index>(dims())) =
      centred * as_matrix(components);
  return out;
}

numerics::Tensor PcaModel::reconstruct(const numerics::Tensor& z) const {
  if (z.cols() != dims()) throw ShapeError("pca: reconstruct expects " + std::to_string(dims()) + " columns");
  const Eigen::Map<const Eigen::RowVectorXd> mu(mean.data(), static_cast<Eigen::Index>(mean.size()));
  numerics::Tensor out = numerics::Tensor::matrix(z.rows(), mean.size());
  Eigen::Map<RowMatrix>(out.values().data(), static_cast<Eigen::Index>(z.rows()),
                        static_cast<Eigen::Index>(mean.size())) =
      (as_matrix(z) * as_matrix(components).transpose()).rowwise() + mu;
  return out;
}

std::pair<PcaModel, numerics::Tensor> pca_fit_project(const numerics::Tensor& x, std::size_t d) {
  const std::size_t n = x.rows(), p = x.cols();
  if (n == 0 || p == 0) throw DataError("pca: empty input matrix");
  if (!x.all_finite()) throw DataError("pca: input contains non-finite values");
  if (d == 0) d = std::max<std::size_t>(1, std::min<std::size_t>({50, n - 1, p}));
  if (d > std::min(n, p)) {
    throw ConfigError("pca: d=" + std::to_string(d) + " exceeds min(cells, genes)=" + std::to_string(std::min(n, p)));
  }

  const auto xm = as_matrix(x);
  const Eigen::RowVectorXd mu = xm.colwise().mean();
  const Eigen::MatrixXd centred = xm.rowwise() - mu;
  const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;

  // Eigen-decompose whichever Gram matrix is smaller.
  Eigen::MatrixXd vecs;  // p x d, descending variance
  Eigen::VectorXd vals(static_cast<Eigen::Index>(d));
  if (p <= n) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es((centred.transpose() * centred) / denom);
    const auto k = static_cast<Eigen::Index>(p);
    vecs.resize(k, static_cast<Eigen::Index>(d));
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(d); ++c) {
      vecs.col(c) = es.eigenvectors().col(k - 1 - c);
      vals(c) = es.eigenvalues()(k - 1 - c);
    }
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es((centred * centred.transpose()) / denom);
    const auto k = static_cast<Eigen::Index>(n);
    vecs.resize(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(d));
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(d); ++c) {
      Eigen::VectorXd v = centred.transpose() * es.eigenvectors().col(k - 1 - c);
      const double norm = v.norm();
      if (norm > 0) v /= norm;
      vecs.col(c) = v;
      vals(c) = es.eigenvalues()(k - 1 - c);
    }
  }

  PcaModel model;
  model.mean.assign(mu.data(), mu.data() + p);
  model.components = numerics::Tensor::matrix(p, d);
  for (std::size_t c = 0; c < d; ++c) {
    const auto col = vecs.col(static_cast<Eigen::Index>(c));
    Eigen::Index best = 0;
    for (Eigen::Index r = 1; r < col.size(); ++r) {
      if (std::abs(col(r)) > std::abs(col(best))) best = r;
    }
    const double sign = col(best) < 0 ? -1.0 : 1.0;
    for (std::size_t r = 0; r < p; ++r) model.components.at(r, c) = sign * col(static_cast<Eigen::Index>(r));
    model.explained_variance.push_back(std::max(0.0, vals(static_cast<Eigen::Index>(c))));
  }
  numerics::Tensor projected = model.project(x);
  return {std::move(model), std::move(projected)};
}

}  // namespace egat::graph
