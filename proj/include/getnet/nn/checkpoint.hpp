#pragma once

#include <filesystem>
#include <string>

#include "getnet/nn/adagrad.hpp"
#include "getnet/nn/network.hpp"

namespace getnet::nn {

inline constexpr int kCheckpointVersion = 1;

template <typename T>
struct Checkpoint {
  Network<T> network;
  AdagradState<T> optimizer;
};

/// Writes `<dir>/manifest.txt` (versioned text: b, m, n, architecture,
/// precision, block table) and `<dir>/values.bin` (little-endian blocks).
template <typename T>
void save_checkpoint(const Network<T>& network, const AdagradState<T>& optimizer, const std::filesystem::path& dir);

/// Validates version, precision, architecture and every block shape.
template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& dir);

/// "float32" or "float64", read from the manifest.
std::string checkpoint_precision(const std::filesystem::path& dir);

}  // namespace getnet::nn
