#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ppe/grid_env.hpp"

namespace ppe {

/// FNV-1a, 64 bit.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::string checksum_hex(std::string_view bytes);

/// Binary PPM (P6) with maxval 255.
std::string encode_ppm(const ImageRGB& image);
/// Throws IoFailure on a malformed header or short payload.
ImageRGB decode_ppm(std::string_view bytes);

/// Binary PGM (P5): 255 on the path, 0 elsewhere.
std::string encode_pgm(const PathLabel& label);
/// Returns the 0/1 mask. Throws IoFailure.
std::vector<std::uint8_t> decode_pgm(std::string_view bytes, int& width, int& height);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

struct LabeledScene {
    std::string id;  // "<family>/<index>"
    GridScene scene;
    PathLabel label;
};

/// Per-scene generation seed for (base seed, family, index).
std::uint64_t scene_seed(std::uint64_t base_seed, FamilyId family, std::size_t index);

/// Scenes `first .. first + count - 1` of a family, labelled. Deterministic in
/// (family, seed, first, count, size) and independent of the worker count.
std::vector<LabeledScene> generate_split(const ScenarioFamily& family, std::size_t count,
                                         std::uint64_t seed, int size = 60,
                                         std::size_t first = 0);

struct ManifestFamily {
    ScenarioFamily family;
    std::size_t count = 0;
    std::uint64_t base_seed = 0;
    std::size_t first_index = 0;  // scene indices first_index .. first_index + count - 1
};

struct ManifestEntry {
    std::string id;
    FamilyId family = FamilyId::UniformClutter;
    std::uint64_t seed = 0;
    std::string scene_file;  // relative to the dataset root
    std::string label_file;
    std::string checksum;    // over scene bytes followed by label bytes
};

inline constexpr int kManifestFormatVersion = 1;

struct DatasetManifest {
    int format_version = kManifestFormatVersion;
    int size = 60;
    std::vector<ManifestFamily> families;
    std::vector<ManifestEntry> entries;

    std::string to_json() const;
    /// Throws IoFailure on a malformed document.
    static DatasetManifest from_json(std::string_view text);
};

/// Writes <out_dir>/<family>/<index>.ppm|.pgm and <out_dir>/manifest.json.
/// Each label is checked against an independent BFS before it is written.
/// Throws ConfigError (count < 1), IoFailure or GenerationExhausted.
DatasetManifest gen_dataset(std::span<const ScenarioFamily> families, std::size_t count_per_family,
                            std::uint64_t seed, const std::filesystem::path& out_dir,
                            int size = 60);

/// Reads the manifest and verifies counts, file presence and checksums.
/// Throws IoFailure or ChecksumMismatch.
DatasetManifest load_manifest(const std::filesystem::path& root);

/// Loads every scene (optionally only one family) after verifying checksums.
std::vector<LabeledScene> load_dataset(const std::filesystem::path& root,
                                       std::optional<FamilyId> only = std::nullopt);

}  // namespace ppe
