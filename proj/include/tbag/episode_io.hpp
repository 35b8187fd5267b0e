#pragma once

#include <filesystem>
#include <stdexcept>
#include <vector>

#include "tbag/recorder.hpp"

namespace tbag {

enum class EpisodeIoError {
  MissingManifest,
  BadManifest,
  MissingRecords,
  BadRecordsHeader,
  TruncatedRecords,
  ChecksumMismatch,
  BadFrameFile,
  WriteFailed,
};

const char* to_string(EpisodeIoError e);

class EpisodeIoFailure : public std::runtime_error {
 public:
  EpisodeIoFailure(EpisodeIoError code, const std::string& detail);
  EpisodeIoError code() const noexcept { return code_; }

 private:
  EpisodeIoError code_;
};

inline constexpr int kManifestFormatVersion = 1;
inline constexpr std::size_t kRecordSize = 541;

/// Writes `<root>/<episode_dir_name(id)>/` and returns that directory. The
/// directory is assembled under a temporary name and renamed into place.
std::filesystem::path write_episode(const Episode& episode, const std::filesystem::path& root);

/// Reads one episode directory. Content problems such as dangling frame
/// references are left to validate_episode.
Episode read_episode(const std::filesystem::path& episode_dir);

/// Serialized records file (header + fixed-width rows).
std::vector<std::uint8_t> encode_records(const std::vector<EpisodeRecord>& records);

/// Episode directories under `root` (those containing manifest.json, or a
/// records file), sorted by name. `root` itself counts if it is an episode.
std::vector<std::filesystem::path> find_episodes(const std::filesystem::path& root);

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);

}  // namespace tbag
