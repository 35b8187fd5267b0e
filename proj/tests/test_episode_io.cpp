#include <fstream>
#include <random>

#include "doctest.h"
#include "scenarios.hpp"
#include "tbag/episode_io.hpp"
#include "json.hpp"

using namespace tbag;
namespace fs = std::filesystem;

namespace {

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::vector<char>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

EpisodeIoError read_error(const fs::path& dir) {
  try {
    read_episode(dir);
  } catch (const EpisodeIoFailure& e) {
    return e.code();
  }
  FAIL("read unexpectedly succeeded");
  return EpisodeIoError::WriteFailed;
}

}  // namespace

TEST_SUITE("episode_io") {
  TEST_CASE("read(write(episode)) is bit exact over random episodes") {
    scenario::TempDir tmp("io");
    std::mt19937_64 rng(71);
    for (std::uint64_t i = 0; i < 1000; ++i) {
      const Episode ep = scenario::random_episode(rng, i);
      const fs::path dir = write_episode(ep, tmp.path());
      const Episode back = read_episode(dir);
      CHECK(back == ep);
      CHECK(encode_records(back.records) == encode_records(ep.records));
      fs::remove_all(dir);
    }
  }

  TEST_CASE("directory layout and manifest fields") {
    scenario::TempDir tmp("layout");
    std::mt19937_64 rng(72);
    Episode ep = scenario::random_episode(rng, 42, 10);
    while (ep.records.empty()) ep = scenario::random_episode(rng, 42, 10);
    const fs::path dir = write_episode(ep, tmp.path());
    CHECK(dir.filename() == "episode_000042");
    CHECK(fs::exists(dir / "manifest.json"));
    CHECK(fs::file_size(dir / "records.tbr") == 12 + ep.records.size() * kRecordSize);
    const auto& f = ep.records[0].frames[1];
    CHECK(fs::exists(dir / "frames" / "1" / (std::to_string(f.frame_index) + ".rgb")));
    const auto j = nlohmann::json::parse(std::ifstream(dir / "manifest.json"));
    CHECK(j["record_count"] == ep.records.size());
    CHECK(j["rig_hash"] == ep.manifest.rig_hash);
    CHECK(j["status"] == ep.manifest.status);
    CHECK(j["format_version"] == kManifestFormatVersion);
    // No temporary directories are left behind.
    for (const auto& e : fs::directory_iterator(tmp.path())) CHECK(e.path().filename().string()[0] != '.');
  }

  TEST_CASE("corruptions are reported by cause") {
    scenario::TempDir tmp("corrupt");
    std::mt19937_64 rng(73);
    Episode ep = scenario::random_episode(rng, 1, 10);
    while (ep.records.size() < 3) ep = scenario::random_episode(rng, 1, 10);
    const fs::path dir = write_episode(ep, tmp.path());
    const auto records = slurp(dir / "records.tbr");
    const auto manifest = slurp(dir / "manifest.json");

    auto bytes = records;
    bytes.resize(bytes.size() - 100);
    spit(dir / "records.tbr", bytes);
    CHECK(read_error(dir) == EpisodeIoError::TruncatedRecords);

    bytes = records;
    bytes[40] ^= 0x01;
    spit(dir / "records.tbr", bytes);
    CHECK(read_error(dir) == EpisodeIoError::ChecksumMismatch);

    bytes = records;
    bytes[0] = 'X';
    spit(dir / "records.tbr", bytes);
    CHECK(read_error(dir) == EpisodeIoError::BadRecordsHeader);

    spit(dir / "records.tbr", records);
    fs::remove(dir / "records.tbr");
    CHECK(read_error(dir) == EpisodeIoError::MissingRecords);
    spit(dir / "records.tbr", records);

    spit(dir / "manifest.json", {'{', 'x'});
    CHECK(read_error(dir) == EpisodeIoError::BadManifest);
    fs::remove(dir / "manifest.json");
    CHECK(read_error(dir) == EpisodeIoError::MissingManifest);
    spit(dir / "manifest.json", manifest);

    const auto frame_file = *fs::directory_iterator(dir / "frames" / "0");
    spit(frame_file.path(), {1, 0, 1, 0, 9});
    CHECK(read_error(dir) == EpisodeIoError::BadFrameFile);
  }

  TEST_CASE("find_episodes lists episode directories sorted") {
    scenario::TempDir tmp("find");
    std::mt19937_64 rng(74);
    for (std::uint64_t id : {3, 1, 2}) write_episode(scenario::random_episode(rng, id, 2), tmp.path() / "sub");
    const auto found = find_episodes(tmp.path());
    REQUIRE(found.size() == 3);
    CHECK(found[0].filename() == "episode_000001");
    CHECK(found[2].filename() == "episode_000003");
    CHECK(find_episodes(found[1]).size() == 1);
    CHECK(find_episodes(tmp.path() / "nothing").empty());
  }
}
