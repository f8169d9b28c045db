#include "getnet/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "getnet/errors.hpp"
#include "getnet/random.hpp"

namespace getnet {

namespace {

constexpr double kMinAngleDeg = 15.0;
constexpr std::size_t kEndmemberAttempts = 100;
constexpr std::size_t kBlobAttempts = 1000;
constexpr double kPedestal = 0.02;
constexpr double kPurityShrink = 0.2;  // mixing toward the barycentre when pure pixels are planted

double angle_deg(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double c = std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0);
  return std::acos(c) * 180.0 / M_PI;
}

Eigen::VectorXd random_spectrum(std::size_t b, Rng& rng) {
  const std::size_t bumps = 2 + static_cast<std::size_t>(uniform_index(rng, 3));
  const double span = static_cast<double>(std::max<std::size_t>(b, 2) - 1);
  Eigen::VectorXd s = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(b), kPedestal);
  for (std::size_t q = 0; q < bumps; ++q) {
    const double center = uniform(rng, 0.0, span);
    const double sigma = std::max(1.0, uniform(rng, 0.05, 0.25) * static_cast<double>(b));
    const double amplitude = uniform(rng, 0.3, 1.0);
    for (std::size_t j = 0; j < b; ++j) {
      const double d = static_cast<double>(j) - center;
      s(static_cast<Eigen::Index>(j)) += amplitude * std::exp(-d * d / (2.0 * sigma * sigma));
    }
  }
  return s / s.maxCoeff();
}

}  // namespace

void SceneConfig::validate() const {
  if (height == 0 || width == 0) throw ConfigError("scene height and width must be >= 1");
  if (b == 0) throw ConfigError("scene needs at least one band");
  if (m < 2) throw ConfigError("scene needs m >= 2 so that changes are possible");
  if (m > b) throw ConfigError("scene m must not exceed b");
  if (!(change_fraction > 0.0 && change_fraction < 1.0)) throw ConfigError("change_fraction must be in (0, 1)");
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity())
    throw ConfigError("snr_db must be finite or +infinity");
  if (plant_pure_pixels && m > height * width) throw ConfigError("too few pixels to plant pure pixels");
}

EndmemberSet gen_endmembers(std::size_t m, std::size_t b, std::uint64_t seed) {
  if (m == 0 || b == 0) throw ConfigError("gen_endmembers needs m >= 1 and b >= 1");
  Rng rng(seed);
  EndmemberSet set;
  set.matrix.resize(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(m));
  for (std::size_t k = 0; k < m; ++k) {
    std::size_t attempts = 0;
    for (;;) {
      const Eigen::VectorXd s = random_spectrum(b, rng);
      bool ok = true;
      for (std::size_t j = 0; j < k && ok; ++j)
        ok = angle_deg(s, set.matrix.col(static_cast<Eigen::Index>(j))) >= kMinAngleDeg;
      if (ok) {
        set.matrix.col(static_cast<Eigen::Index>(k)) = s;
        break;
      }
      if (++attempts >= kEndmemberAttempts)
        throw DegeneracyError("gen_endmembers: could not separate endmember " + std::to_string(k) + " by " +
                              std::to_string(kMinAngleDeg) + " degrees in " + std::to_string(kEndmemberAttempts) +
                              " attempts");
    }
  }
  return set;
}

Scene gen_scene(const SceneConfig& config) {
  config.validate();
  const std::size_t h = config.height, w = config.width, b = config.b, m = config.m;
  const std::size_t n = h * w;

  Scene scene;
  scene.config = config;
  scene.endmembers = gen_endmembers(m, b, sub_seed(config.seed, 0));

  // Time-1 abundances: smooth random fields projected onto the simplex.
  Rng field_rng(sub_seed(config.seed, 1));
  struct Wave {
    double u, v, phase, amplitude;
  };
  std::vector<std::vector<Wave>> fields(m);
  for (auto& field : fields)
    for (int q = 0; q < 4; ++q)
      field.push_back({uniform(field_rng, -2.0, 2.0), uniform(field_rng, -2.0, 2.0), uniform(field_rng, 0.0, 2.0 * M_PI),
                       uniform(field_rng, 0.5, 1.0)});

  scene.abundances1 = AbundanceCube{h, w, m, AbundanceKind::linear, std::vector<double>(n * m)};
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      Eigen::VectorXd v(static_cast<Eigen::Index>(m));
      for (std::size_t k = 0; k < m; ++k) {
        double s = 0.0;
        for (const Wave& wave : fields[k])
          s += wave.amplitude * std::cos(2.0 * M_PI * (wave.u * static_cast<double>(r) / static_cast<double>(h) +
                                                       wave.v * static_cast<double>(c) / static_cast<double>(w)) +
                                         wave.phase);
        v(static_cast<Eigen::Index>(k)) = s;
      }
      Eigen::VectorXd a = project_to_simplex(v);
      if (config.plant_pure_pixels) a = (1.0 - kPurityShrink) * a.array() + kPurityShrink / static_cast<double>(m);
      std::copy(a.data(), a.data() + m, scene.abundances1.data.begin() + static_cast<std::ptrdiff_t>((r * w + c) * m));
    }

  // Change blobs.
  Rng blob_rng(sub_seed(config.seed, 2));
  scene.truth = BinaryMap(h, w);
  const double tolerance = std::max(0.02, 2.0 / static_cast<double>(n));
  std::size_t changed = 0;
  std::size_t placements = 0;
  while (static_cast<double>(changed) / static_cast<double>(n) < config.change_fraction - tolerance) {
    if (++placements > kBlobAttempts)
      throw CapacityError("gen_scene: change fraction " + std::to_string(config.change_fraction) +
                          " not reached within " + std::to_string(kBlobAttempts) + " blob placements");
    const double cy = uniform(blob_rng, 0.0, static_cast<double>(h));
    const double cx = uniform(blob_rng, 0.0, static_cast<double>(w));
    const double max_axis = std::max(2.5, 0.2 * static_cast<double>(std::min(h, w)));
    const double ay = uniform(blob_rng, 1.5, max_axis);
    const double ax = uniform(blob_rng, 1.5, max_axis);
    const double theta = uniform(blob_rng, 0.0, M_PI);
    const double ct = std::cos(theta), st = std::sin(theta);
    std::vector<std::size_t> added;
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c) {
        const double dy = static_cast<double>(r) + 0.5 - cy, dx = static_cast<double>(c) + 0.5 - cx;
        const double u = (ct * dx + st * dy) / ax, v = (-st * dx + ct * dy) / ay;
        if (u * u + v * v <= 1.0 && !scene.truth.labels[r * w + c]) added.push_back(r * w + c);
      }
    if (static_cast<double>(changed + added.size()) / static_cast<double>(n) > config.change_fraction + tolerance) continue;
    for (std::size_t p : added) scene.truth.labels[p] = 1;
    changed += added.size();
  }

  if (config.plant_pure_pixels) {
    Rng pure_rng(sub_seed(config.seed, 4));
    std::vector<std::size_t> candidates;
    for (std::size_t p = 0; p < n; ++p)
      if (!scene.truth.labels[p]) candidates.push_back(p);
    if (candidates.size() < m) throw CapacityError("gen_scene: not enough unchanged pixels for pure pixels");
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t j = k + static_cast<std::size_t>(uniform_index(pure_rng, candidates.size() - k));
      std::swap(candidates[k], candidates[j]);
      const std::size_t p = candidates[k];
      scene.pure_pixels.push_back(p);
      for (std::size_t e = 0; e < m; ++e) scene.abundances1.data[p * m + e] = e == k ? 1.0 : 0.0;
    }
  }

  // Time 2: swap dominant and weakest endmember fractions inside the blobs.
  scene.abundances2 = scene.abundances1;
  for (std::size_t p = 0; p < n; ++p) {
    if (!scene.truth.labels[p]) continue;
    double* a = scene.abundances2.data.data() + p * m;
    const std::size_t dominant = static_cast<std::size_t>(std::max_element(a, a + m) - a);
    std::size_t weakest = static_cast<std::size_t>(std::min_element(a, a + m) - a);
    if (weakest == dominant) weakest = (dominant + 1) % m;
    std::swap(a[dominant], a[weakest]);
  }

  // Mixing and noise.
  Rng noise_rng(sub_seed(config.seed, 3));
  auto render = [&](const AbundanceCube& abundances) {
    HyperCube cube(h, w, b);
    for (std::size_t k = 0; k < b; ++k) cube.wavelengths.push_back(400.0 + 10.0 * static_cast<double>(k));
    std::vector<double> clean(n * b);
    for (std::size_t p = 0; p < n; ++p) {
      const Eigen::VectorXd a = abundances.vector(p);
      const Eigen::VectorXd r = config.mixing == MixingModel::linear ? Eigen::VectorXd(scene.endmembers.matrix * a)
                                                                     : bfm_forward(scene.endmembers, a);
      for (std::size_t k = 0; k < b; ++k) clean[k * n + p] = r(static_cast<Eigen::Index>(k));
    }
    double sigma = 0.0;
    if (std::isfinite(config.snr_db)) {
      double power = 0.0;
      for (double v : clean) power += v * v;
      power /= static_cast<double>(clean.size());
      sigma = std::sqrt(power / std::pow(10.0, config.snr_db / 10.0));
    }
    for (std::size_t i = 0; i < clean.size(); ++i)
      cube.data[i] = static_cast<float>(clean[i] + (sigma > 0.0 ? sigma * standard_normal(noise_rng) : 0.0));
    return cube;
  };
  scene.pair.time1 = render(scene.abundances1);
  scene.pair.time2 = render(scene.abundances2);
  return scene;
}

double empirical_snr_db(const HyperCube& clean, const HyperCube& noisy) {
  if (clean.data.size() != noisy.data.size()) throw ShapeError("empirical_snr_db: cube sizes differ");
  double signal = 0.0, noise = 0.0;
  for (std::size_t i = 0; i < clean.data.size(); ++i) {
    const double s = clean.data[i];
    const double e = static_cast<double>(noisy.data[i]) - s;
    signal += s * s;
    noise += e * e;
  }
  if (noise == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal / noise);
}

void write_scene(const Scene& scene, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_envi(scene.pair.time1, dir / "time1");
  write_envi(scene.pair.time2, dir / "time2");
  write_map(scene.truth, dir / "truth.pgm");
  write_endmembers(scene.endmembers, dir / "endmembers.txt");
  write_envi(scene.abundances1.to_cube(), dir / "abundances1");
  write_envi(scene.abundances2.to_cube(), dir / "abundances2");

  std::ofstream out(dir / "scene.txt");
  if (!out) throw IoError("cannot write " + (dir / "scene.txt").string());
  const SceneConfig& c = scene.config;
  out.precision(17);
  out << "height = " << c.height << "\n"
      << "width = " << c.width << "\n"
      << "bands = " << c.b << "\n"
      << "endmembers = " << c.m << "\n"
      << "mixing = " << (c.mixing == MixingModel::linear ? "linear" : "bilinear") << "\n"
      << "snr-db = " << (std::isfinite(c.snr_db) ? std::to_string(c.snr_db) : std::string("inf")) << "\n"
      << "change-fraction = " << c.change_fraction << "\n"
      << "seed = " << c.seed << "\n"
      << "pure-pixels = " << (c.plant_pure_pixels ? "true" : "false") << "\n";
  if (!scene.pure_pixels.empty()) {
    out << "# planted pure pixel indices:";
    for (std::size_t p : scene.pure_pixels) out << " " << p;
    out << "\n";
  }
  std::size_t changed = 0;
  for (auto l : scene.truth.labels) changed += l;
  out << "# changed pixels: " << changed << " of " << scene.truth.pixels() << "\n";
}

}  // namespace getnet
