#pragma once

// Versioned plain-text model checkpoint.
//
//   udareg-checkpoint 1
//   mode pairwise
//   feature_dim 16
//   seed 42
//   normalization 0 116          (or: normalization none)
//   adapt_layers conv+fc1        (or: adapt_layers none)
//   network trunk 32 1
//   layer conv_proxy relu 64
//   weights <out*in values, row-major>
//   bias <out values>
//   ...
//   end
//
// Networks appear in the order trunk, regression, [rank_head],
// [discriminator]. Values are written in shortest round-trip form, so a
// save/load cycle reproduces every parameter bit for bit.

#include <filesystem>
#include <iosfwd>

#include "udareg/model.hpp"

namespace udareg {

inline constexpr int kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const ModelAssembly& model);
void save_checkpoint(const std::filesystem::path& path, const ModelAssembly& model);

// Throws DataError on malformed input or a version mismatch.
ModelAssembly read_checkpoint(std::istream& in, const std::string& source_name = "<stream>");
ModelAssembly load_checkpoint(const std::filesystem::path& path);

}  // namespace udareg
