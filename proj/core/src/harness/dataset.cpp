#include "ppe/harness/dataset.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ppe/errors.hpp"
#include "ppe/harness/parallel.hpp"
#include "ppe/planners.hpp"
#include "ppe/rng.hpp"

namespace ppe {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string checksum_hex(std::string_view bytes) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

namespace {

// Parses "P5"/"P6" headers: magic, width, height, maxval, one whitespace byte.
std::size_t parse_pnm_header(std::string_view bytes, std::string_view magic, int& width,
                             int& height) {
    if (bytes.substr(0, 2) != magic) throw IoFailure("not a " + std::string(magic) + " image");
    std::size_t pos = 2;
    auto next_int = [&]() {
        while (pos < bytes.size()) {
            const char c = bytes[pos];
            if (c == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                ++pos;
            } else {
                break;
            }
        }
        int v = 0;
        const auto [ptr, ec] = std::from_chars(bytes.data() + pos, bytes.data() + bytes.size(), v);
        if (ec != std::errc() || v <= 0) throw IoFailure("malformed image header");
        pos = static_cast<std::size_t>(ptr - bytes.data());
        return v;
    };
    width = next_int();
    height = next_int();
    if (next_int() != 255) throw IoFailure("unsupported image maxval");
    if (pos >= bytes.size()) throw IoFailure("truncated image");
    return pos + 1;
}

std::string header(std::string_view magic, int w, int h) {
    return std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
}

}  // namespace

std::string encode_ppm(const ImageRGB& image) {
    std::string out = header("P6", image.width, image.height);
    out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
    return out;
}

ImageRGB decode_ppm(std::string_view bytes) {
    ImageRGB img;
    const std::size_t off = parse_pnm_header(bytes, "P6", img.width, img.height);
    const std::size_t n = std::size_t(img.width) * std::size_t(img.height) * 3;
    if (bytes.size() - off != n) throw IoFailure("image payload size mismatch");
    img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(off), bytes.end());
    return img;
}

std::string encode_pgm(const PathLabel& label) {
    std::string out = header("P5", label.width, label.height);
    for (std::uint8_t m : label.mask) out.push_back(static_cast<char>(m ? 255 : 0));
    return out;
}

std::vector<std::uint8_t> decode_pgm(std::string_view bytes, int& width, int& height) {
    const std::size_t off = parse_pnm_header(bytes, "P5", width, height);
    const std::size_t n = std::size_t(width) * std::size_t(height);
    if (bytes.size() - off != n) throw IoFailure("label payload size mismatch");
    std::vector<std::uint8_t> mask(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto v = static_cast<unsigned char>(bytes[off + i]);
        if (v != 0 && v != 255) throw IoFailure("label pixel is neither 0 nor 255");
        mask[i] = v ? 1 : 0;
    }
    return mask;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

void write_file(const fs::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot write '" + path.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoFailure("short write to '" + path.string() + "'");
}

std::uint64_t scene_seed(std::uint64_t base_seed, FamilyId family, std::size_t index) {
    return derive_seed(derive_seed(base_seed, 0xDA7A + static_cast<std::uint64_t>(family)), index);
}

std::vector<LabeledScene> generate_split(const ScenarioFamily& family, std::size_t count,
                                         std::uint64_t seed, int size, std::size_t first) {
    family.validate();
    std::vector<LabeledScene> out(count);
    parallel_for(count, [&](std::size_t i) {
        const std::size_t index = first + i;
        LabeledScene& s = out[i];
        s.id = std::string(family_name(family.id)) + "/" + std::to_string(index);
        s.scene = generate_scene(family, scene_seed(seed, family.id, index), size, size);
        s.label = compute_label(s.scene);
    });
    return out;
}

std::string DatasetManifest::to_json() const {
    json j;
    j["format_version"] = format_version;
    j["size"] = size;
    j["families"] = json::array();
    for (const auto& f : families) {
        j["families"].push_back({{"family", std::string(family_name(f.family.id))},
                                 {"params",
                                  {{"clutter", f.family.clutter},
                                   {"spacing", f.family.spacing},
                                   {"gap", f.family.gap}}},
                                 {"count", f.count},
                                 {"base_seed", f.base_seed},
                                 {"first_index", f.first_index}});
    }
    j["entries"] = json::array();
    for (const auto& e : entries) {
        j["entries"].push_back({{"id", e.id},
                                {"family", std::string(family_name(e.family))},
                                {"seed", e.seed},
                                {"scene", e.scene_file},
                                {"label", e.label_file},
                                {"checksum", e.checksum}});
    }
    return j.dump(2) + "\n";
}

DatasetManifest DatasetManifest::from_json(std::string_view text) {
    DatasetManifest m;
    try {
        const json j = json::parse(text);
        m.format_version = j.at("format_version").get<int>();
        if (m.format_version != kManifestFormatVersion)
            throw IoFailure("unsupported manifest format_version " + std::to_string(m.format_version));
        m.size = j.at("size").get<int>();
        for (const auto& f : j.at("families")) {
            ManifestFamily mf;
            const auto id = parse_family_name(f.at("family").get<std::string>());
            if (!id) throw IoFailure("manifest names an unknown family");
            mf.family.id = *id;
            mf.family.clutter = f.at("params").at("clutter").get<double>();
            mf.family.spacing = f.at("params").at("spacing").get<int>();
            mf.family.gap = f.at("params").at("gap").get<int>();
            mf.count = f.at("count").get<std::size_t>();
            mf.base_seed = f.at("base_seed").get<std::uint64_t>();
            mf.first_index = f.at("first_index").get<std::size_t>();
            m.families.push_back(mf);
        }
        for (const auto& e : j.at("entries")) {
            ManifestEntry me;
            me.id = e.at("id").get<std::string>();
            const auto id = parse_family_name(e.at("family").get<std::string>());
            if (!id) throw IoFailure("manifest entry names an unknown family");
            me.family = *id;
            me.seed = e.at("seed").get<std::uint64_t>();
            me.scene_file = e.at("scene").get<std::string>();
            me.label_file = e.at("label").get<std::string>();
            me.checksum = e.at("checksum").get<std::string>();
            m.entries.push_back(std::move(me));
        }
    } catch (const json::exception& e) {
        throw IoFailure(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

DatasetManifest gen_dataset(std::span<const ScenarioFamily> families, std::size_t count_per_family,
                            std::uint64_t seed, const fs::path& out_dir, int size) {
    if (count_per_family < 1) throw ConfigError("count must be >= 1");
    if (families.empty()) throw ConfigError("at least one family is required");
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoFailure("cannot create '" + out_dir.string() + "': " + ec.message());

    DatasetManifest manifest;
    manifest.size = size;
    for (const auto& family : families) {
        const std::string name(family_name(family.id));
        fs::create_directories(out_dir / name, ec);
        if (ec) throw IoFailure("cannot create '" + (out_dir / name).string() + "'");

        auto split = generate_split(family, count_per_family, seed, size);
        std::vector<ManifestEntry> entries(split.size());
        parallel_for(split.size(), [&](std::size_t i) {
            const auto& s = split[i];
            const PlanResult oracle = bfs_shortest(s.scene);
            if (!oracle.found() || oracle.cost != s.label.cost())
                throw Error("label for " + s.id + " is not a shortest path");
            const std::string scene_bytes = encode_ppm(render_scene(s.scene));
            const std::string label_bytes = encode_pgm(s.label);
            ManifestEntry& e = entries[i];
            e.id = s.id;
            e.family = family.id;
            e.seed = s.scene.seed;
            e.scene_file = name + "/" + std::to_string(i) + ".ppm";
            e.label_file = name + "/" + std::to_string(i) + ".pgm";
            e.checksum = checksum_hex(scene_bytes + label_bytes);
            write_file(out_dir / e.scene_file, scene_bytes);
            write_file(out_dir / e.label_file, label_bytes);
        });
        manifest.families.push_back({family, count_per_family, seed, 0});
        for (auto& e : entries) manifest.entries.push_back(std::move(e));
    }
    write_file(out_dir / "manifest.json", manifest.to_json());
    return manifest;
}

namespace {

DatasetManifest verified_manifest(const fs::path& root) {
    DatasetManifest m = DatasetManifest::from_json(read_file(root / "manifest.json"));
    for (const auto& f : m.families) {
        std::size_t n = 0;
        for (const auto& e : m.entries) n += e.family == f.family.id;
        if (n != f.count)
            throw IoFailure("manifest lists " + std::to_string(n) + " entries for " +
                            std::string(family_name(f.family.id)) + ", expected " +
                            std::to_string(f.count));
    }
    return m;
}

void verify_entry(const ManifestEntry& e, const std::string& scene_bytes,
                  const std::string& label_bytes) {
    if (checksum_hex(scene_bytes + label_bytes) != e.checksum)
        throw ChecksumMismatch("checksum mismatch for " + e.id);
}

}  // namespace

DatasetManifest load_manifest(const fs::path& root) {
    DatasetManifest m = verified_manifest(root);
    for (const auto& e : m.entries) {
        if (!fs::exists(root / e.scene_file) || !fs::exists(root / e.label_file))
            throw IoFailure("missing file for " + e.id);
        verify_entry(e, read_file(root / e.scene_file), read_file(root / e.label_file));
    }
    return m;
}

std::vector<LabeledScene> load_dataset(const fs::path& root, std::optional<FamilyId> only) {
    const DatasetManifest m = verified_manifest(root);
    std::vector<const ManifestEntry*> picked;
    for (const auto& e : m.entries)
        if (!only || e.family == *only) picked.push_back(&e);

    std::vector<LabeledScene> out(picked.size());
    parallel_for(picked.size(), [&](std::size_t i) {
        const ManifestEntry& e = *picked[i];
        const std::string scene_bytes = read_file(root / e.scene_file);
        const std::string label_bytes = read_file(root / e.label_file);
        verify_entry(e, scene_bytes, label_bytes);

        LabeledScene& s = out[i];
        s.id = e.id;
        try {
            s.scene = parse_image(decode_ppm(scene_bytes));
        } catch (const std::invalid_argument& err) {
            throw IoFailure("bad scene image for " + e.id + ": " + err.what());
        }
        for (const auto& f : m.families)
            if (f.family.id == e.family) s.scene.family = f.family;
        s.scene.seed = e.seed;

        int w = 0, h = 0;
        const auto mask = decode_pgm(label_bytes, w, h);
        s.label = compute_label(s.scene);
        if (w != s.scene.width || h != s.scene.height || mask != s.label.mask)
            throw IoFailure("stored label for " + e.id + " is not the canonical shortest path");
    });
    return out;
}

}  // namespace ppe
