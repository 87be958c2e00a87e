#pragma once

#include <filesystem>
#include <string>

#include "mhop/world.hpp"

// Episodes are stored one JSON object per line ("mhop.episode/1"); a
// dataset directory holds episodes.jsonl next to manifest.json. The field
// layout is documented in docs/formats.md.
namespace mhop::world {

inline constexpr const char* kEpisodeSchema = "mhop.episode/1";
inline constexpr const char* kManifestSchema = "mhop.manifest/1";

std::string episode_to_line(const Episode& episode, Split split = Split::train);
// Parses one record; `split` receives the stored split tag when non-null.
Episode episode_from_line(const std::string& line, Split* split = nullptr);

void save_dataset(const std::filesystem::path& dir, const DatasetManifest& manifest);
DatasetManifest load_dataset(const std::filesystem::path& dir);

// FNV-1a over the episodes file, hex encoded. Identifies the data a run saw.
std::string dataset_hash(const std::filesystem::path& dir);

}  // namespace mhop::world
