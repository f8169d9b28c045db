#include "getnet/unmixing.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "getnet/errors.hpp"

namespace getnet {

namespace {

const char* kind_name(AbundanceKind kind) {
  return kind == AbundanceKind::linear ? "linear" : "nonlinear";
}

}  // namespace

void EndmemberSet::validate() const {
  if (matrix.cols() < 1 || matrix.rows() < 1) throw ShapeError("endmember set is empty");
  if (!matrix.allFinite()) throw DataError("endmember matrix has non-finite values");
  for (Eigen::Index i = 0; i < matrix.cols(); ++i)
    for (Eigen::Index j = i + 1; j < matrix.cols(); ++j)
      if (matrix.col(i) == matrix.col(j))
        throw DegeneracyError("endmembers " + std::to_string(i) + " and " + std::to_string(j) +
                              " are identical");
  if (!source_indices.empty() && source_indices.size() != count())
    throw ShapeError("endmember source index count does not match endmember count");
}

void AbundanceCube::validate(double tol) const {
  if (m < 1) throw ShapeError("abundance cube needs m >= 1");
  if (data.size() != pixels() * m) throw ShapeError("abundance cube data length mismatch");
  for (std::size_t p = 0; p < pixels(); ++p) {
    double sum = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double v = at(p, k);
      if (!(v >= -tol && v <= 1.0 + tol))
        throw DataError(std::string(kind_name(kind)) + " abundance out of [0,1] at pixel " +
                        std::to_string(p));
      sum += v;
    }
    if (std::abs(sum - 1.0) > tol)
      throw DataError(std::string(kind_name(kind)) + " abundances do not sum to one at pixel " +
                      std::to_string(p));
  }
}

HyperCube AbundanceCube::to_cube() const {
  HyperCube cube(height, width, m);
  for (std::size_t p = 0; p < pixels(); ++p)
    for (std::size_t k = 0; k < m; ++k) cube.data[k * pixels() + p] = static_cast<float>(at(p, k));
  return cube;
}

AbundanceCube AbundanceCube::from_cube(const HyperCube& cube, AbundanceKind kind) {
  cube.validate();
  AbundanceCube out{cube.height, cube.width, cube.bands, kind, {}};
  out.data.resize(cube.pixels() * cube.bands);
  for (std::size_t p = 0; p < cube.pixels(); ++p)
    for (std::size_t k = 0; k < cube.bands; ++k) out.data[p * out.m + k] = cube.data[k * cube.pixels() + p];
  return out;
}

PixelFailureError::PixelFailureError(std::vector<Failure> failures, std::size_t total, int code)
    : Error([&] {
        std::ostringstream os;
        os << total << " pixel(s) failed to unmix";
        for (const auto& f : failures) os << "\n  (" << f.row << ", " << f.col << "): " << f.message;
        return os.str();
      }()),
      failures_(std::move(failures)),
      total_(total),
      code_(code) {}

Eigen::MatrixXd pixel_matrix(const HyperCube& cube) {
  cube.validate();
  const auto n = static_cast<Eigen::Index>(cube.pixels());
  const auto b = static_cast<Eigen::Index>(cube.bands);
  Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic>> bsq(cube.data.data(), n, b);
  return bsq.transpose().cast<double>();
}

Eigen::MatrixXd pooled_pixels(const CubePair& pair) {
  pair.validate();
  const Eigen::MatrixXd a = pixel_matrix(pair.time1);
  const Eigen::MatrixXd b = pixel_matrix(pair.time2);
  Eigen::MatrixXd out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

EndmemberSet atgp(const Eigen::MatrixXd& pixels, std::size_t m) {
  const auto b = static_cast<std::size_t>(pixels.rows());
  const auto n = static_cast<std::size_t>(pixels.cols());
  if (m == 0) throw ConfigError("atgp needs m >= 1");
  if (m > b) throw ConfigError("atgp: m = " + std::to_string(m) + " exceeds band count " + std::to_string(b));
  if (n == 0) throw ShapeError("atgp: empty pixel set");
  if (!pixels.allFinite()) throw DataError("atgp: non-finite pixel values");

  EndmemberSet result;
  result.matrix.resize(pixels.rows(), static_cast<Eigen::Index>(m));
  Eigen::MatrixXd basis(pixels.rows(), 0);  // orthonormal span of chosen targets
  Eigen::MatrixXd residual = pixels;

  for (std::size_t k = 0; k < m; ++k) {
    Eigen::Index best = -1;
    double best_norm = 1e-12;
    for (Eigen::Index j = 0; j < residual.cols(); ++j) {
      const double norm = residual.col(j).norm();
      if (norm > best_norm) {
        best_norm = norm;
        best = j;
      }
    }
    if (best < 0)
      throw DegeneracyError("atgp: pixel set spans only " + std::to_string(k) + " of " +
                            std::to_string(m) + " requested endmembers");

    result.matrix.col(static_cast<Eigen::Index>(k)) = pixels.col(best);
    result.source_indices.push_back(static_cast<std::size_t>(best));

    Eigen::VectorXd u = residual.col(best);
    for (int pass = 0; pass < 2; ++pass) u -= basis * (basis.transpose() * u);
    u.normalize();
    basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
    basis.col(basis.cols() - 1) = u;
    residual.noalias() -= u * (u.transpose() * residual);
  }
  return result;
}

Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, std::size_t max_iterations) {
  const Eigen::Index p = a.rows();
  const Eigen::Index q = a.cols();
  if (p < 1 || q < 1) throw ShapeError("nnls: matrix must be at least 1x1");
  if (y.size() != p) throw ShapeError("nnls: right-hand side length does not match matrix rows");
  if (max_iterations == 0) max_iterations = 3 * static_cast<std::size_t>(q);

  const double tol = 10.0 * std::numeric_limits<double>::epsilon() *
                     a.cwiseAbs().colwise().sum().maxCoeff() * static_cast<double>(std::max(p, q));

  Eigen::VectorXd x = Eigen::VectorXd::Zero(q);
  std::vector<bool> passive(static_cast<std::size_t>(q), false);

  auto solve_passive = [&]() {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < q; ++i)
      if (passive[static_cast<std::size_t>(i)]) idx.push_back(i);
    Eigen::MatrixXd sub(p, static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = a.col(idx[k]);
    const Eigen::VectorXd zs = sub.colPivHouseholderQr().solve(y);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(q);
    for (std::size_t k = 0; k < idx.size(); ++k) z(idx[k]) = zs(static_cast<Eigen::Index>(k));
    return z;
  };

  Eigen::VectorXd w = a.transpose() * (y - a * x);
  std::size_t iterations = 0;
  for (;;) {
    Eigen::Index j = -1;
    double best = tol;
    for (Eigen::Index i = 0; i < q; ++i)
      if (!passive[static_cast<std::size_t>(i)] && w(i) > best) {
        best = w(i);
        j = i;
      }
    if (j < 0) break;
    if (++iterations > max_iterations)
      throw ConvergenceError("nnls: exceeded " + std::to_string(max_iterations) + " iterations",
                             std::vector<double>(x.data(), x.data() + x.size()));
    passive[static_cast<std::size_t>(j)] = true;

    Eigen::VectorXd z = solve_passive();
    for (;;) {
      Eigen::Index blocking = -1;
      double alpha = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < q; ++i) {
        if (!passive[static_cast<std::size_t>(i)] || z(i) > 0.0) continue;
        const double ratio = x(i) / (x(i) - z(i));
        if (ratio < alpha) {
          alpha = ratio;
          blocking = i;
        }
      }
      if (blocking < 0) break;
      x += alpha * (z - x);
      x(blocking) = 0.0;
      for (Eigen::Index i = 0; i < q; ++i)
        if (passive[static_cast<std::size_t>(i)] && x(i) <= tol) {
          passive[static_cast<std::size_t>(i)] = false;
          x(i) = 0.0;
        }
      z = solve_passive();
    }
    x = z;
    w = a.transpose() * (y - a * x);
  }
  return x;
}

AbundanceVector fcls(const EndmemberSet& endmembers, const Eigen::VectorXd& pixel, double delta) {
  const Eigen::Index b = endmembers.matrix.rows();
  const Eigen::Index m = endmembers.matrix.cols();
  if (pixel.size() != b)
    throw ShapeError("fcls: pixel has " + std::to_string(pixel.size()) + " bands, endmembers have " +
                     std::to_string(b));
  Eigen::MatrixXd a(b + 1, m);
  a.topRows(b) = delta * endmembers.matrix;
  a.row(b).setOnes();
  Eigen::VectorXd y(b + 1);
  y.head(b) = delta * pixel;
  y(b) = 1.0;

  Eigen::VectorXd x = nnls(a, y);
  const double sum = x.sum();
  if (!(sum > 0.0)) throw DegeneracyError("fcls: all abundances are zero");
  return {x / sum, AbundanceKind::linear};
}

Eigen::VectorXd bfm_forward(const EndmemberSet& endmembers, const Eigen::VectorXd& w) {
  const Eigen::MatrixXd& x = endmembers.matrix;
  if (w.size() != x.cols()) throw ShapeError("bfm_forward: abundance length does not match endmember count");
  Eigen::VectorXd out = x * w;
  for (Eigen::Index i = 0; i < x.cols(); ++i)
    for (Eigen::Index j = i + 1; j < x.cols(); ++j)
      out.array() += w(i) * w(j) * x.col(i).array() * x.col(j).array();
  return out;
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumulative += u[j];
    const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  Eigen::VectorXd w = (v.array() - theta).max(0.0);
  const double s = w.sum();
  if (s > 0.0) w /= s;
  return w;
}

AbundanceVector bfm_unmix(const EndmemberSet& endmembers, const Eigen::VectorXd& pixel,
                          const AbundanceVector& init, const BfmOptions& options) {
  return bfm_unmix(endmembers, pixel, init, options, nullptr);
}

AbundanceVector bfm_unmix(const EndmemberSet& endmembers, const Eigen::VectorXd& pixel,
                          const AbundanceVector& init, const BfmOptions& options,
                          std::vector<double>* trace) {
  const Eigen::MatrixXd& x = endmembers.matrix;
  if (pixel.size() != x.rows()) throw ShapeError("bfm_unmix: pixel length does not match endmember bands");
  if (init.values.size() != x.cols()) throw ShapeError("bfm_unmix: init length does not match endmember count");

  auto objective = [&](const Eigen::VectorXd& w) { return (bfm_forward(endmembers, w) - pixel).squaredNorm(); };

  Eigen::VectorXd w = project_to_simplex(init.values);
  double f = objective(w);
  if (!std::isfinite(f)) throw NumericError("bfm_unmix: non-finite residual at iteration 0");
  if (trace) trace->push_back(std::sqrt(f));

  for (std::size_t it = 1; it <= options.max_iterations && f > 0.0; ++it) {
    const Eigen::VectorXd err = bfm_forward(endmembers, w) - pixel;
    const Eigen::VectorXd mix = x * w;
    Eigen::VectorXd grad(w.size());
    for (Eigen::Index k = 0; k < w.size(); ++k) {
      const Eigen::ArrayXd dk = x.col(k).array() * (1.0 + mix.array() - w(k) * x.col(k).array());
      grad(k) = 2.0 * (err.array() * dk).sum();
    }
    if (!grad.allFinite()) throw NumericError("bfm_unmix: non-finite gradient at iteration " + std::to_string(it));

    bool accepted = false;
    Eigen::VectorXd trial;
    double f_trial = f;
    for (double step = 1.0; step > 1e-30; step *= 0.5) {
      trial = project_to_simplex(w - step * grad);
      if (trial == w) break;
      f_trial = objective(trial);
      if (!std::isfinite(f_trial))
        throw NumericError("bfm_unmix: non-finite residual at iteration " + std::to_string(it));
      if (f_trial < f) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;

    const double improvement = (std::sqrt(f) - std::sqrt(f_trial)) / std::sqrt(f);
    w = trial;
    f = f_trial;
    if (trace) trace->push_back(std::sqrt(f));
    if (improvement < options.tolerance) break;
  }
  return {w, AbundanceKind::nonlinear};
}

namespace {

template <typename Solve>
AbundanceCube solve_cube(const HyperCube& cube, std::size_t m, AbundanceKind kind, Solve&& solve) {
  const Eigen::MatrixXd pixels = pixel_matrix(cube);
  const auto n = static_cast<std::ptrdiff_t>(cube.pixels());
  AbundanceCube out{cube.height, cube.width, m, kind, std::vector<double>(cube.pixels() * m, 0.0)};
  std::vector<std::string> messages(cube.pixels());
  std::vector<int> codes(cube.pixels(), 0);

#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t p = 0; p < n; ++p) {
    try {
      const Eigen::VectorXd w = solve(static_cast<std::size_t>(p), Eigen::VectorXd(pixels.col(p)));
      std::copy(w.data(), w.data() + w.size(), out.data.begin() + p * static_cast<std::ptrdiff_t>(m));
    } catch (const Error& e) {
      messages[static_cast<std::size_t>(p)] = e.what();
      codes[static_cast<std::size_t>(p)] = e.exit_code();
    } catch (const std::exception& e) {
      messages[static_cast<std::size_t>(p)] = e.what();
      codes[static_cast<std::size_t>(p)] = 1;
    }
  }

  std::vector<PixelFailureError::Failure> failures;
  std::size_t total = 0;
  int code = 0;
  for (std::size_t p = 0; p < cube.pixels(); ++p) {
    if (codes[p] == 0) continue;
    if (total++ == 0) code = codes[p];
    if (failures.size() < 100) failures.push_back({p / cube.width, p % cube.width, messages[p]});
  }
  if (total > 0) throw PixelFailureError(std::move(failures), total, code);
  return out;
}

}  // namespace

AbundanceCube fcls_cube(const EndmemberSet& endmembers, const HyperCube& cube, double delta) {
  endmembers.validate();
  if (cube.bands != endmembers.bands()) throw ShapeError("fcls_cube: cube bands do not match endmembers");
  return solve_cube(cube, endmembers.count(), AbundanceKind::linear,
                    [&](std::size_t, const Eigen::VectorXd& r) { return fcls(endmembers, r, delta).values; });
}

AbundanceCube bfm_cube(const EndmemberSet& endmembers, const HyperCube& cube, const AbundanceCube* init,
                       const BfmOptions& options) {
  endmembers.validate();
  if (cube.bands != endmembers.bands()) throw ShapeError("bfm_cube: cube bands do not match endmembers");
  if (init && (init->pixels() != cube.pixels() || init->m != endmembers.count()))
    throw ShapeError("bfm_cube: initial abundance cube does not match");
  return solve_cube(cube, endmembers.count(), AbundanceKind::nonlinear,
                    [&](std::size_t p, const Eigen::VectorXd& r) {
                      const AbundanceVector start =
                          init ? AbundanceVector{init->vector(p), AbundanceKind::linear} : fcls(endmembers, r);
                      return bfm_unmix(endmembers, r, start, options).values;
                    });
}

void write_endmembers(const EndmemberSet& endmembers, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  for (Eigen::Index r = 0; r < endmembers.matrix.rows(); ++r) {
    for (Eigen::Index c = 0; c < endmembers.matrix.cols(); ++c) out << (c ? " " : "") << endmembers.matrix(r, c);
    out << "\n";
  }
  if (!out) throw IoError("cannot write " + path.string());
}

EndmemberSet read_endmembers(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::vector<double> row;
    std::string tok;
    while (ss >> tok) {
      try {
        row.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw FormatError("endmember file " + path.string() + " has non-numeric entry '" + tok + "'");
      }
    }
    if (row.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size())
      throw FormatError("endmember file " + path.string() + " has ragged rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError("endmember file " + path.string() + " is empty");
  EndmemberSet out;
  out.matrix.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      out.matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  out.validate();
  return out;
}

}  // namespace getnet
