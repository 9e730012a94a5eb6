// SPDX-License-Identifier: Apache-2.0
//
// Versioned little-endian binary model file:
//
//   magic        8 bytes  "ATTNSUM\0"
//   version      u32
//   hyperparams  u32 D, H, C, L, Q, V, encoder kind
//   tensors      u32 count, then per tensor:
//                  u32 name length, name bytes,
//                  u32 rank, u64 dims[rank],
//                  f64 payload (row-major)
//   vocabulary   u32 count, then per token:
//                  u32 length, bytes, u64 frequency

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "attnsum/corpus.hpp"
#include "attnsum/model.hpp"

namespace attnsum {

inline constexpr std::uint32_t kModelFormatVersion = 1;

struct ModelFile {
  Model model;
  Vocab vocab;
};

void write_model(std::ostream& os, const Model& model, const Vocab& vocab);
/// Throws DataError on bad magic, unsupported version or truncated payload.
ModelFile read_model(std::istream& is);

void save_model(const std::filesystem::path& path, const Model& model, const Vocab& vocab);
ModelFile load_model(const std::filesystem::path& path);

/// Human-readable header summary: version, hyperparameters, tensor shapes.
std::string describe_model(const ModelFile& file);

}  // namespace attnsum
