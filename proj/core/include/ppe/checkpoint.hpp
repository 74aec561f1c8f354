#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ppe/encoder.hpp"

namespace ppe {

// Binary layout, all integers and floats little-endian:
//   "PPE1" | u32 version | u64 init_seed | u32 layer_count
//   layer_count x { u32 kind, u32 in_ch, u32 out_ch, u32 kernel, u32 activation }
//   layer_count x { u64 n_weights, f64[n_weights], u64 n_biases, f64[n_biases] }

std::vector<std::uint8_t> serialize_model(const EncoderModel& model);

/// Throws IoFailure on a bad magic, unsupported version, truncated or
/// trailing data, or an architecture that fails validation.
EncoderModel deserialize_model(const std::vector<std::uint8_t>& bytes);

void save_model(const EncoderModel& model, const std::filesystem::path& path);
EncoderModel load_model(const std::filesystem::path& path);

}  // namespace ppe
