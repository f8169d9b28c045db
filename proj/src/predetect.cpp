#include "getnet/predetect.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "getnet/errors.hpp"
#include "getnet/random.hpp"

namespace getnet {

void PredetectConfig::validate() const {
  if (!(changed_percentile > 0.0 && changed_percentile < 100.0))
    throw ConfigError("changed_percentile must be in (0, 100)");
  if (!(unchanged_percentile > 0.0 && unchanged_percentile < 100.0))
    throw ConfigError("unchanged_percentile must be in (0, 100)");
  if (changed_percentile + unchanged_percentile > 100.0)
    throw ConfigError("changed and unchanged percentile windows overlap");
  if (!(positive_fraction > 0.0 && positive_fraction <= 1.0))
    throw ConfigError("positive_fraction must be in (0, 1]");
}

MagnitudeMap cva_magnitude(const CubePair& pair) {
  pair.validate();
  const HyperCube& a = pair.time1;
  const HyperCube& b = pair.time2;
  MagnitudeMap out{a.height, a.width, std::vector<double>(a.pixels(), 0.0)};
  const std::size_t plane = a.pixels();
  for (std::size_t k = 0; k < a.bands; ++k)
    for (std::size_t p = 0; p < plane; ++p) {
      const double d = static_cast<double>(a.data[k * plane + p]) - static_cast<double>(b.data[k * plane + p]);
      out.values[p] += d * d;
    }
  for (double& v : out.values) v = std::sqrt(v);
  return out;
}

namespace {

// First `count` entries of a seeded Fisher-Yates shuffle of `pool`.
std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> pool, std::size_t count, Rng& rng) {
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_index(rng, pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

LabeledSampleSet select_pseudo_labels(const MagnitudeMap& magnitude, const PredetectConfig& config) {
  config.validate();
  const std::size_t n = magnitude.pixels();
  if (magnitude.values.size() != n) throw ShapeError("magnitude map length does not match its dimensions");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return magnitude.values[a] < magnitude.values[b]; });

  const auto changed_count =
      static_cast<std::size_t>(std::floor(static_cast<double>(n) * config.changed_percentile / 100.0));
  const auto unchanged_count =
      static_cast<std::size_t>(std::floor(static_cast<double>(n) * config.unchanged_percentile / 100.0));
  if (changed_count == 0)
    throw CapacityError("changed pool is empty for " + std::to_string(n) + " pixels; achievable counts: 0 positives, 0 negatives");

  std::size_t positives = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(config.positive_fraction * static_cast<double>(changed_count))));
  if (2 * positives > unchanged_count) positives = unchanged_count / 2;
  if (positives == 0)
    throw CapacityError("unchanged pool of " + std::to_string(unchanged_count) +
                        " pixels cannot supply a 1:2 ratio; achievable counts: 0 positives, 0 negatives");

  std::vector<std::size_t> changed_pool(order.end() - static_cast<std::ptrdiff_t>(changed_count), order.end());
  std::vector<std::size_t> unchanged_pool(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(unchanged_count));

  Rng rng(config.seed);
  LabeledSampleSet out;
  out.config = config;
  out.positives = positives;
  out.negatives = 2 * positives;
  for (std::size_t p : sample_without_replacement(std::move(changed_pool), positives, rng)) out.samples.push_back({p, 1});
  for (std::size_t p : sample_without_replacement(std::move(unchanged_pool), 2 * positives, rng))
    out.samples.push_back({p, 0});
  return out;
}

BinaryMap cva_change_map(const MagnitudeMap& magnitude, double threshold) {
  if (!std::isfinite(threshold)) throw ConfigError("CVA threshold must be finite");
  BinaryMap map(magnitude.height, magnitude.width);
  for (std::size_t p = 0; p < magnitude.pixels(); ++p) map.labels[p] = magnitude.values[p] > threshold ? 1 : 0;
  return map;
}

double median_magnitude(const MagnitudeMap& magnitude) {
  if (magnitude.values.empty()) throw ShapeError("median of an empty magnitude map");
  std::vector<double> v = magnitude.values;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void write_samples(const LabeledSampleSet& set, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  const PredetectConfig& c = set.config;
  out.precision(17);
  out << "# changed_percentile=" << c.changed_percentile << " unchanged_percentile=" << c.unchanged_percentile
      << " positive_fraction=" << c.positive_fraction << " seed=" << c.seed << "\n";
  out << "pixel_index,label\n";
  for (const auto& s : set.samples) out << s.pixel << "," << static_cast<int>(s.label) << "\n";
  if (!out) throw IoError("cannot write " + path.string());
}

LabeledSampleSet read_samples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  LabeledSampleSet set;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string kv;
      while (ss >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = kv.substr(0, eq);
        const std::string value = kv.substr(eq + 1);
        try {
          if (key == "changed_percentile") set.config.changed_percentile = std::stod(value);
          else if (key == "unchanged_percentile") set.config.unchanged_percentile = std::stod(value);
          else if (key == "positive_fraction") set.config.positive_fraction = std::stod(value);
          else if (key == "seed") set.config.seed = std::stoull(value);
        } catch (const std::exception&) {
          throw FormatError("sample file " + path.string() + " has a bad header value for '" + key + "'");
        }
      }
      continue;
    }
    if (!header_seen) {
      if (line != "pixel_index,label") throw FormatError("sample file " + path.string() + " lacks the CSV header");
      header_seen = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError("sample file " + path.string() + ": bad row '" + line + "'");
    std::size_t pixel = 0;
    int label = 0;
    try {
      pixel = std::stoull(line.substr(0, comma));
      label = std::stoi(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw FormatError("sample file " + path.string() + ": bad row '" + line + "'");
    }
    if (label != 0 && label != 1) throw FormatError("sample file " + path.string() + ": label must be 0 or 1");
    set.samples.push_back({pixel, static_cast<std::uint8_t>(label)});
    (label ? set.positives : set.negatives)++;
  }
  if (!header_seen) throw FormatError("sample file " + path.string() + " lacks the CSV header");
  return set;
}

}  // namespace getnet
