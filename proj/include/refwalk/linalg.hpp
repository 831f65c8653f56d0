#pragma once

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "refwalk/errors.hpp"
#include "refwalk/graph.hpp"

namespace refwalk {

struct SolverOptions {
  double tol = 1e-8;          // harmonic residual bound, relative to π(x)
  int dense_threshold = 500;  // unknown count below which a dense factorization is used
  int max_iterations = 0;     // conjugate gradient budget, 0 = 10 × unknowns
};

/// Graph Laplacian restricted to the unpinned vertices, L_UU = diag(π) - C on U.
/// One factorization serves any number of right-hand sides. Keeps a pointer to `graph`.
class PinnedLaplacian {
 public:
  enum class Backend { Dense, SparseDirect, Iterative };

  /// `expected_rhs` selects between a sparse factorization (several right-hand sides) and
  /// conjugate gradients (a single one) above the dense threshold.
  PinnedLaplacian(const WeightedGraph& graph, std::span<const int> pinned, SolverOptions options = {},
                  int expected_rhs = 1)
      : graph_(&graph), options_(options), local_(static_cast<std::size_t>(graph.vertex_count()), -1) {
    std::vector<char> is_pinned(static_cast<std::size_t>(graph.vertex_count()), 0);
    for (int a : pinned) {
      if (a < 0 || a >= graph.vertex_count()) throw ConstructionError("pinned vertex out of range");
      is_pinned[a] = 1;
    }
    for (int v = 0; v < graph.vertex_count(); ++v) {
      if (!is_pinned[v]) {
        local_[v] = static_cast<int>(unknowns_.size());
        unknowns_.push_back(v);
      }
    }
    const auto n = static_cast<Eigen::Index>(unknowns_.size());
    if (n == 0) {
      backend_ = Backend::Dense;
      return;
    }
    std::vector<Eigen::Triplet<double>> triplets;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int v = unknowns_[i];
      triplets.emplace_back(i, i, graph.pi(v));
      for (const Arc& a : graph.neighbors(v)) {
        if (local_[a.to] >= 0) triplets.emplace_back(i, local_[a.to], -a.c);
      }
    }
    matrix_.resize(n, n);
    matrix_.setFromTriplets(triplets.begin(), triplets.end());

    if (n < options_.dense_threshold) {
      backend_ = Backend::Dense;
      dense_ = std::make_unique<Eigen::LLT<Eigen::MatrixXd>>(Eigen::MatrixXd(matrix_));
      if (dense_->info() != Eigen::Success) {
        throw SolverError("pinned Laplacian is not positive definite (is every component pinned?)", 0.0);
      }
    } else if (expected_rhs > 1) {
      backend_ = Backend::SparseDirect;
      sparse_ = std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>(matrix_);
      if (sparse_->info() != Eigen::Success) {
        throw SolverError("sparse factorization of the pinned Laplacian failed", 0.0);
      }
    } else {
      backend_ = Backend::Iterative;
    }
  }

  Backend backend() const noexcept { return backend_; }
  int unknown_count() const noexcept { return static_cast<int>(unknowns_.size()); }
  std::span<const int> unknowns() const noexcept { return unknowns_; }
  /// Position of a graph vertex among the unknowns, -1 if pinned.
  int local(int v) const { return local_[v]; }
  const Eigen::SparseMatrix<double>& matrix() const noexcept { return matrix_; }

  /// Solves L_UU X = B column by column; every column must meet |r_x| ≤ tol·π(x).
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const {
    if (rhs.rows() != matrix_.rows()) throw ConstructionError("right-hand side has the wrong size");
    if (matrix_.rows() == 0) return Eigen::MatrixXd(0, rhs.cols());
    Eigen::MatrixXd x;
    switch (backend_) {
      case Backend::Dense:
        x = dense_->solve(rhs);
        break;
      case Backend::SparseDirect:
        x = sparse_->solve(rhs);
        break;
      case Backend::Iterative:
        x.resize(rhs.rows(), rhs.cols());
        for (Eigen::Index j = 0; j < rhs.cols(); ++j) x.col(j) = iterate(rhs.col(j));
        break;
    }
    check(rhs, x);
    return x;
  }

  /// Solves block by block and keeps only the requested unknown rows (local indices).
  Eigen::MatrixXd solve_rows(const Eigen::MatrixXd& rhs, std::span<const int> rows, int block = 64) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), rhs.cols());
    for (Eigen::Index j0 = 0; j0 < rhs.cols(); j0 += block) {
      const Eigen::Index width = std::min<Eigen::Index>(block, rhs.cols() - j0);
      const Eigen::MatrixXd x = solve(rhs.middleCols(j0, width));
      for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)).segment(j0, width) = x.row(rows[r]);
    }
    return out;
  }

  /// Largest harmonic residual relative to π(x) over all columns.
  double relative_residual(const Eigen::MatrixXd& rhs, const Eigen::MatrixXd& x) const {
    const Eigen::MatrixXd r = rhs - matrix_ * x;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
      worst = std::max(worst, r.row(i).cwiseAbs().maxCoeff() / graph_->pi(unknowns_[i]));
    }
    return worst;
  }

 private:
  Eigen::VectorXd iterate(const Eigen::VectorXd& b) const {
    const double min_pi = [&] {
      double m = std::numeric_limits<double>::infinity();
      for (int v : unknowns_) m = std::min(m, graph_->pi(v));
      return m;
    }();
    const double bnorm = b.norm();
    if (bnorm == 0.0) return Eigen::VectorXd::Zero(b.size());
    // the l2 stopping rule of CG implies the per-vertex bound once it is this tight
    double target = std::max(options_.tol * min_pi / bnorm, 1e-15);
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
    cg.compute(matrix_);
    cg.setMaxIterations(options_.max_iterations > 0 ? options_.max_iterations : static_cast<int>(10 * b.size()));
    Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
    for (int attempt = 0; attempt < 3; ++attempt) {
      cg.setTolerance(target);
      x = cg.solveWithGuess(b, x);
      const Eigen::VectorXd r = b - matrix_ * x;
      bool ok = true;
      for (Eigen::Index i = 0; i < r.size() && ok; ++i) ok = std::abs(r[i]) <= options_.tol * graph_->pi(unknowns_[i]);
      if (ok) return x;
      target *= 1e-2;
    }
    return x;  // check() reports the failure with its residual
  }

  void check(const Eigen::MatrixXd& rhs, const Eigen::MatrixXd& x) const {
    if (!x.allFinite()) throw SolverError("solver produced non-finite values", std::numeric_limits<double>::infinity());
    const double residual = relative_residual(rhs, x);
    if (residual > options_.tol) throw SolverError("linear solve missed its residual target", residual);
  }

  const WeightedGraph* graph_;
  SolverOptions options_;
  std::vector<int> local_;
  std::vector<int> unknowns_;
  Eigen::SparseMatrix<double> matrix_;
  Backend backend_ = Backend::Dense;
  std::unique_ptr<Eigen::LLT<Eigen::MatrixXd>> dense_;
  std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> sparse_;
};

}  // namespace refwalk
