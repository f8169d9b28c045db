#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "getnet/errors.hpp"
#include "getnet/hsicube.hpp"

namespace getnet {

/// b x m endmember matrix; column i is the spectrum of endmember i.
struct EndmemberSet {
  Eigen::MatrixXd matrix;
  std::vector<std::size_t> source_indices;  // empty when not drawn from pixels

  std::size_t bands() const noexcept { return static_cast<std::size_t>(matrix.rows()); }
  std::size_t count() const noexcept { return static_cast<std::size_t>(matrix.cols()); }
  void validate() const;
};

enum class AbundanceKind { linear, nonlinear };

struct AbundanceVector {
  Eigen::VectorXd values;
  AbundanceKind kind = AbundanceKind::linear;
};

/// h x w x m fractions, stored pixel-major (m values per pixel).
struct AbundanceCube {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t m = 0;
  AbundanceKind kind = AbundanceKind::linear;
  std::vector<double> data;

  std::size_t pixels() const noexcept { return height * width; }
  double at(std::size_t pixel, std::size_t k) const { return data[pixel * m + k]; }
  Eigen::Map<const Eigen::VectorXd> vector(std::size_t pixel) const {
    return {data.data() + pixel * m, static_cast<Eigen::Index>(m)};
  }
  void validate(double tol = 1e-6) const;

  /// m-band cube, one abundance plane per band.
  HyperCube to_cube() const;
  static AbundanceCube from_cube(const HyperCube& cube, AbundanceKind kind);
};

/// Per-pixel failures collected by the cube-level solvers. Carries the exit
/// code of the first failure.
class PixelFailureError : public Error {
 public:
  struct Failure {
    std::size_t row;
    std::size_t col;
    std::string message;
  };
  PixelFailureError(std::vector<Failure> failures, std::size_t total, int code);
  const std::vector<Failure>& failures() const noexcept { return failures_; }
  std::size_t total() const noexcept { return total_; }
  int exit_code() const noexcept override { return code_; }

 private:
  std::vector<Failure> failures_;
  std::size_t total_;
  int code_;
};

/// Pixels of a cube as columns of a b x N matrix.
Eigen::MatrixXd pixel_matrix(const HyperCube& cube);

/// Pixels of both dates side by side: columns [0, N) are time 1, [N, 2N) time 2.
Eigen::MatrixXd pooled_pixels(const CubePair& pair);

/// Automatic target generation process: greedy orthogonal-subspace search for
/// m endmembers among the columns of `pixels`. Ties go to the lowest index.
EndmemberSet atgp(const Eigen::MatrixXd& pixels, std::size_t m);

/// Lawson-Hanson active-set solver for min ||Ax - y|| subject to x >= 0.
/// `max_iterations` = 0 selects the default of 3q outer iterations.
Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& y,
                     std::size_t max_iterations = 0);

inline constexpr double kFclsDelta = 1e-3;

/// Fully constrained least squares via the delta-weighted sum-to-one row.
AbundanceVector fcls(const EndmemberSet& endmembers, const Eigen::VectorXd& pixel,
                     double delta = kFclsDelta);

/// Bilinear-Fan forward model: sum w_i x_i + sum_{i<j} w_i w_j (x_i .* x_j).
Eigen::VectorXd bfm_forward(const EndmemberSet& endmembers, const Eigen::VectorXd& w);

struct BfmOptions {
  std::size_t max_iterations = 500;
  double tolerance = 1e-8;  // relative residual improvement that ends the descent
};

/// Projected-gradient fit of the bilinear-Fan model on the probability simplex,
/// started from `init` (normally the FCLS solution).
AbundanceVector bfm_unmix(const EndmemberSet& endmembers, const Eigen::VectorXd& pixel,
                          const AbundanceVector& init, const BfmOptions& options = {});

/// Same as above; `trace` receives the residual norm after every accepted step.
AbundanceVector bfm_unmix(const EndmemberSet& endmembers, const Eigen::VectorXd& pixel,
                          const AbundanceVector& init, const BfmOptions& options,
                          std::vector<double>* trace);

/// Euclidean projection onto {w : w >= 0, sum w = 1}.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

AbundanceCube fcls_cube(const EndmemberSet& endmembers, const HyperCube& cube,
                        double delta = kFclsDelta);

/// BFM for every pixel. `init` defaults to the per-pixel FCLS solution.
AbundanceCube bfm_cube(const EndmemberSet& endmembers, const HyperCube& cube,
                       const AbundanceCube* init = nullptr, const BfmOptions& options = {});

/// Text matrix: b rows, m space-separated columns.
void write_endmembers(const EndmemberSet& endmembers, const std::filesystem::path& path);
EndmemberSet read_endmembers(const std::filesystem::path& path);

}  // namespace getnet
