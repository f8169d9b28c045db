#include "getnet/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "getnet/errors.hpp"

namespace getnet::nn {

namespace fs = std::filesystem;

namespace {

template <typename T>
constexpr const char* precision_name() {
  return sizeof(T) == 4 ? "float32" : "float64";
}

struct Block {
  std::string kind;
  std::size_t offset = 0;
  std::size_t count = 0;
  std::vector<std::size_t> shape;
};

template <typename T>
void append_le(std::vector<unsigned char>& out, const std::vector<T>& values) {
  using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  for (T v : values) {
    const Bits bits = std::bit_cast<Bits>(v);
    for (std::size_t j = 0; j < sizeof(T); ++j) out.push_back(static_cast<unsigned char>(bits >> (8 * j)));
  }
}

template <typename T>
void read_le(const std::vector<unsigned char>& bytes, std::size_t offset, std::vector<T>& values) {
  using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  for (std::size_t i = 0; i < values.size(); ++i) {
    Bits bits = 0;
    for (std::size_t j = 0; j < sizeof(T); ++j)
      bits |= static_cast<Bits>(bytes[(offset + i) * sizeof(T) + j]) << (8 * j);
    values[i] = std::bit_cast<T>(bits);
  }
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
  return s;
}

}  // namespace

template <typename T>
void save_checkpoint(const Network<T>& network, const AdagradState<T>& optimizer, const fs::path& dir) {
  const auto params = network.parameters();
  const auto buffers = network.buffers();
  if (optimizer.accumulators.size() != params.size())
    throw ShapeError("save_checkpoint: optimizer state does not match the network");
  fs::create_directories(dir);

  std::ostringstream manifest;
  manifest.precision(17);
  manifest << "getnet-checkpoint " << kCheckpointVersion << "\n"
           << "precision " << precision_name<T>() << "\n"
           << "b " << network.b() << "\n"
           << "m " << network.m() << "\n"
           << "n " << network.n() << "\n"
           << "conv_channels " << join({kConvChannels.begin(), kConvChannels.end()}) << "\n"
           << "conv_kernels " << join({kConvKernels.begin(), kConvKernels.end()}) << "\n"
           << "fc1_units " << kFc1Units << "\n"
           << "classes " << kClasses << "\n"
           << "bn_momentum " << network.options().bn_momentum << "\n"
           << "bn_eps " << network.options().bn_eps << "\n"
           << "statistics_initialized " << (network.statistics_initialized() ? 1 : 0) << "\n";

  std::vector<unsigned char> bytes;
  std::size_t offset = 0;
  auto block = [&](const std::string& kind, const std::string& name, const std::vector<std::size_t>& shape,
                   const std::vector<T>& values) {
    manifest << "block " << kind << " " << name << " " << offset << " " << values.size() << " " << join(shape) << "\n";
    append_le(bytes, values);
    offset += values.size();
  };
  for (const Param<T>* p : params) block("param", p->name, p->shape, p->value);
  for (const Buffer<T>* b : buffers) block("buffer", b->name, {b->value.size()}, b->value);
  for (std::size_t i = 0; i < params.size(); ++i)
    block("adagrad", params[i]->name, params[i]->shape, optimizer.accumulators[i]);

  {
    std::ofstream out(dir / "manifest.txt");
    out << manifest.str();
    if (!out) throw IoError("cannot write " + (dir / "manifest.txt").string());
  }
  std::ofstream out(dir / "values.bin", std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("cannot write " + (dir / "values.bin").string());
}

template <typename T>
Checkpoint<T> load_checkpoint(const fs::path& dir) {
  std::ifstream in(dir / "manifest.txt");
  if (!in) throw IoError("cannot open " + (dir / "manifest.txt").string());

  std::string line;
  if (!std::getline(in, line)) throw FormatError("checkpoint manifest is empty");
  {
    std::istringstream ss(line);
    std::string magic;
    int version = -1;
    ss >> magic >> version;
    if (magic != "getnet-checkpoint") throw FormatError("not a checkpoint manifest: '" + line + "'");
    if (version != kCheckpointVersion)
      throw FormatError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                        std::to_string(kCheckpointVersion) + ")");
  }

  std::map<std::string, std::string> fields;
  std::map<std::string, Block> blocks;  // key: kind + "/" + name
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "block") {
      Block blk;
      std::string name;
      if (!(ss >> blk.kind >> name >> blk.offset >> blk.count)) throw FormatError("garbled block line '" + line + "'");
      std::size_t d;
      while (ss >> d) blk.shape.push_back(d);
      blocks[blk.kind + "/" + name] = blk;
    } else {
      std::string rest;
      std::getline(ss, rest);
      const auto b = rest.find_first_not_of(' ');
      fields[key] = b == std::string::npos ? "" : rest.substr(b);
    }
  }

  auto field = [&](const std::string& key) -> const std::string& {
    auto it = fields.find(key);
    if (it == fields.end()) throw FormatError("checkpoint manifest lacks '" + key + "'");
    return it->second;
  };
  auto count = [&](const std::string& key) {
    try {
      return static_cast<std::size_t>(std::stoull(field(key)));
    } catch (const std::invalid_argument&) {
      throw FormatError("checkpoint field '" + key + "' is not a number");
    }
  };

  if (field("precision") != precision_name<T>())
    throw FormatError("checkpoint precision is " + field("precision") + ", expected " + precision_name<T>());
  const std::size_t b = count("b");
  const std::size_t m = count("m");
  if (count("n") != b + 2 * m)
    throw ShapeError("checkpoint n = " + field("n") + " is inconsistent with b + 2m = " + std::to_string(b + 2 * m));
  if (field("conv_channels") != join({kConvChannels.begin(), kConvChannels.end()}) ||
      field("conv_kernels") != join({kConvKernels.begin(), kConvKernels.end()}) || count("fc1_units") != kFc1Units ||
      count("classes") != kClasses)
    throw ShapeError("checkpoint architecture does not match this build");

  NetworkOptions options;
  try {
    options.bn_momentum = std::stod(field("bn_momentum"));
    options.bn_eps = std::stod(field("bn_eps"));
  } catch (const std::invalid_argument&) {
    throw FormatError("checkpoint batch-norm settings are not numbers");
  }

  Checkpoint<T> ckpt{Network<T>(b, m, 0, options), {}};
  const auto params = ckpt.network.parameters();
  const auto buffers = ckpt.network.buffers();

  const fs::path values_path = dir / "values.bin";
  if (!fs::exists(values_path)) throw IoError("missing " + values_path.string());
  std::size_t total = 0;
  for (const auto& [key, blk] : blocks) total = std::max(total, blk.offset + blk.count);
  const std::size_t expected_bytes = total * sizeof(T);
  const std::size_t actual_bytes = fs::file_size(values_path);
  if (actual_bytes != expected_bytes) throw SizeError("checkpoint values file size mismatch", expected_bytes, actual_bytes);
  std::vector<unsigned char> bytes(actual_bytes);
  {
    std::ifstream vin(values_path, std::ios::binary);
    vin.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!vin) throw IoError("cannot read " + values_path.string());
  }

  auto take = [&](const std::string& kind, const std::string& name, const std::vector<std::size_t>& shape,
                  std::vector<T>& values) {
    auto it = blocks.find(kind + "/" + name);
    if (it == blocks.end()) throw ShapeError("checkpoint lacks " + kind + " block '" + name + "'");
    const Block& blk = it->second;
    if (blk.count != values.size() || blk.shape != shape)
      throw ShapeError("checkpoint " + kind + " block '" + name + "' has shape [" + join(blk.shape) + "], expected [" +
                       join(shape) + "]");
    read_le(bytes, blk.offset, values);
  };
  for (Param<T>* p : params) take("param", p->name, p->shape, p->value);
  for (Buffer<T>* buf : buffers) take("buffer", buf->name, {buf->value.size()}, buf->value);
  ckpt.optimizer = AdagradState<T>::zeros_like(params);
  for (std::size_t i = 0; i < params.size(); ++i)
    take("adagrad", params[i]->name, params[i]->shape, ckpt.optimizer.accumulators[i]);
  if (blocks.size() != 2 * params.size() + buffers.size())
    throw ShapeError("checkpoint has " + std::to_string(blocks.size()) + " blocks, expected " +
                     std::to_string(2 * params.size() + buffers.size()));

  ckpt.network.set_statistics_initialized(count("statistics_initialized") != 0);
  return ckpt;
}

std::string checkpoint_precision(const fs::path& dir) {
  std::ifstream in(dir / "manifest.txt");
  if (!in) throw IoError("cannot open " + (dir / "manifest.txt").string());
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string key, value;
    if (ss >> key >> value && key == "precision") return value;
  }
  throw FormatError("checkpoint manifest lacks 'precision'");
}

template void save_checkpoint<float>(const Network<float>&, const AdagradState<float>&, const fs::path&);
template void save_checkpoint<double>(const Network<double>&, const AdagradState<double>&, const fs::path&);
template Checkpoint<float> load_checkpoint<float>(const fs::path&);
template Checkpoint<double> load_checkpoint<double>(const fs::path&);

}  // namespace getnet::nn
