#include "tbag/episode_io.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "tbag/detail/byte_io.hpp"

namespace fs = std::filesystem;

namespace tbag {

namespace {

constexpr std::array<std::uint8_t, 4> kRecordsMagic{'T', 'B', 'R', '1'};
constexpr const char* kManifestName = "manifest.json";
constexpr const char* kRecordsName = "records.tbr";

std::vector<std::uint8_t> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, std::span<const std::uint8_t> bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw EpisodeIoFailure(EpisodeIoError::WriteFailed, p.string());
}

struct Truncated {
  [[noreturn]] void operator()() const {
    throw EpisodeIoFailure(EpisodeIoError::TruncatedRecords, "records file ends early");
  }
};

void write_arm_state(detail::ByteWriter& w, const ArmJointState& s) {
  w.f64s(s.position);
  w.f64s(s.velocity);
  w.f64s(s.effort);
  w.f64(s.gripper);
}

template <typename R>
void read_arm_state(R& r, ArmJointState& s) {
  r.f64s(s.position);
  r.f64s(s.velocity);
  r.f64s(s.effort);
  s.gripper = r.f64();
}

nlohmann::json manifest_json(const EpisodeManifest& m, std::uint32_t crc, std::size_t count) {
  return {
      {"format_version", kManifestFormatVersion},
      {"episode_id", m.episode_id},
      {"wall_clock_start", m.wall_clock_start},
      {"rig_hash", m.rig_hash},
      {"task", m.task},
      {"location", m.location},
      {"operator", m.operator_label},
      {"start_stamp_ns", m.start_stamp},
      {"status", m.status},
      {"stale_records", m.stale_records},
      {"skipped_ticks", m.skipped_ticks},
      {"record_count", count},
      {"records_crc32", crc},
  };
}

}  // namespace

const char* to_string(EpisodeIoError e) {
  switch (e) {
    case EpisodeIoError::MissingManifest: return "MissingManifest";
    case EpisodeIoError::BadManifest: return "BadManifest";
    case EpisodeIoError::MissingRecords: return "MissingRecords";
    case EpisodeIoError::BadRecordsHeader: return "BadRecordsHeader";
    case EpisodeIoError::TruncatedRecords: return "TruncatedRecords";
    case EpisodeIoError::ChecksumMismatch: return "ChecksumMismatch";
    case EpisodeIoError::BadFrameFile: return "BadFrameFile";
    case EpisodeIoError::WriteFailed: return "WriteFailed";
  }
  return "Unknown";
}

EpisodeIoFailure::EpisodeIoFailure(EpisodeIoError code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - pos, 1u << 30));
    crc = crc32(crc, bytes.data() + pos, n);
    pos += n;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode_records(const std::vector<EpisodeRecord>& records) {
  std::vector<std::uint8_t> out;
  out.reserve(12 + records.size() * kRecordSize);
  detail::ByteWriter w(out);
  w.bytes(kRecordsMagic);
  w.u64(records.size());
  for (const auto& r : records) {
    w.f64(r.t);
    write_arm_state(w, r.obs.left);
    write_arm_state(w, r.obs.right);
    for (std::size_t arm = 0; arm < 2; ++arm) {
      w.f64s(r.action[arm].angles);
      w.f64(r.action[arm].gripper);
    }
    for (const auto& f : r.frames) {
      w.u8(f.camera_id);
      w.u64(f.frame_index);
      w.u64(f.frame_stamp);
    }
    w.u8(r.feedback_cause);
    w.u8(r.gated ? 1 : 0);
  }
  return out;
}

fs::path write_episode(const Episode& episode, const fs::path& root) {
  const fs::path final_dir = root / episode_dir_name(episode.manifest.episode_id);
  const fs::path tmp_dir = root / ("." + episode_dir_name(episode.manifest.episode_id) + ".tmp");
  std::error_code ec;
  fs::remove_all(tmp_dir, ec);
  fs::create_directories(tmp_dir / "frames", ec);
  if (ec) throw EpisodeIoFailure(EpisodeIoError::WriteFailed, tmp_dir.string() + ": " + ec.message());

  const auto records = encode_records(episode.records);
  spit(tmp_dir / kRecordsName, records);

  for (const auto& [camera, frames] : episode.frames) {
    const fs::path cam_dir = tmp_dir / "frames" / std::to_string(camera);
    fs::create_directories(cam_dir);
    for (const auto& [index, frame] : frames) {
      std::vector<std::uint8_t> bytes;
      detail::ByteWriter w(bytes);
      w.u16(frame.width);
      w.u16(frame.height);
      w.bytes(frame.rgb);
      spit(cam_dir / (std::to_string(index) + ".rgb"), bytes);
    }
  }

  const auto manifest = manifest_json(episode.manifest, crc32_of(records), episode.records.size());
  const std::string text = manifest.dump(2) + "\n";
  spit(tmp_dir / kManifestName,
       {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});

  fs::remove_all(final_dir, ec);
  fs::rename(tmp_dir, final_dir, ec);
  if (ec) throw EpisodeIoFailure(EpisodeIoError::WriteFailed, final_dir.string() + ": " + ec.message());
  return final_dir;
}

Episode read_episode(const fs::path& dir) {
  Episode ep;
  const fs::path manifest_path = dir / kManifestName;
  if (!fs::is_regular_file(manifest_path)) {
    throw EpisodeIoFailure(EpisodeIoError::MissingManifest, manifest_path.string());
  }
  std::uint32_t expected_crc = 0;
  std::uint64_t expected_count = 0;
  try {
    std::ifstream in(manifest_path);
    const auto j = nlohmann::json::parse(in);
    if (j.at("format_version").get<int>() != kManifestFormatVersion) {
      throw EpisodeIoFailure(EpisodeIoError::BadManifest, "unsupported format_version");
    }
    auto& m = ep.manifest;
    m.episode_id = j.at("episode_id").get<std::uint64_t>();
    m.wall_clock_start = j.at("wall_clock_start").get<std::string>();
    m.rig_hash = j.at("rig_hash").get<std::string>();
    m.task = j.at("task").get<std::string>();
    m.location = j.at("location").get<std::string>();
    m.operator_label = j.at("operator").get<std::string>();
    m.start_stamp = j.at("start_stamp_ns").get<Stamp>();
    m.status = j.at("status").get<std::string>();
    m.stale_records = j.at("stale_records").get<std::uint64_t>();
    m.skipped_ticks = j.at("skipped_ticks").get<std::uint64_t>();
    expected_count = j.at("record_count").get<std::uint64_t>();
    expected_crc = j.at("records_crc32").get<std::uint32_t>();
  } catch (const nlohmann::json::exception& e) {
    throw EpisodeIoFailure(EpisodeIoError::BadManifest, e.what());
  }

  const fs::path records_path = dir / kRecordsName;
  if (!fs::is_regular_file(records_path)) {
    throw EpisodeIoFailure(EpisodeIoError::MissingRecords, records_path.string());
  }
  const auto bytes = slurp(records_path);
  if (bytes.size() < 12 || !std::equal(kRecordsMagic.begin(), kRecordsMagic.end(), bytes.begin())) {
    if (bytes.size() < 12 && bytes.size() >= 4 &&
        std::equal(kRecordsMagic.begin(), kRecordsMagic.end(), bytes.begin())) {
      throw EpisodeIoFailure(EpisodeIoError::TruncatedRecords, "header cut short");
    }
    throw EpisodeIoFailure(EpisodeIoError::BadRecordsHeader, records_path.string());
  }
  detail::ByteReader r(std::span<const std::uint8_t>(bytes), Truncated{});
  r.bytes(4);
  const std::uint64_t count = r.u64();
  if (r.remaining() < count * kRecordSize || count != expected_count) {
    throw EpisodeIoFailure(EpisodeIoError::TruncatedRecords,
                           std::to_string(count) + " records declared, " +
                               std::to_string(r.remaining()) + " bytes present");
  }
  if (r.remaining() != count * kRecordSize) {
    throw EpisodeIoFailure(EpisodeIoError::ChecksumMismatch, "trailing bytes after records");
  }
  if (crc32_of(bytes) != expected_crc) {
    throw EpisodeIoFailure(EpisodeIoError::ChecksumMismatch, records_path.string());
  }

  ep.records.resize(count);
  for (auto& rec : ep.records) {
    rec.t = r.f64();
    read_arm_state(r, rec.obs.left);
    read_arm_state(r, rec.obs.right);
    for (std::size_t arm = 0; arm < 2; ++arm) {
      r.f64s(rec.action[arm].angles);
      rec.action[arm].gripper = r.f64();
    }
    for (auto& f : rec.frames) {
      f.camera_id = r.u8();
      f.frame_index = r.u64();
      f.frame_stamp = r.u64();
    }
    rec.feedback_cause = r.u8();
    rec.gated = r.u8() != 0;
  }

  const fs::path frames_dir = dir / "frames";
  if (fs::is_directory(frames_dir)) {
    for (const auto& cam : fs::directory_iterator(frames_dir)) {
      if (!cam.is_directory()) continue;
      int camera = -1;
      try {
        camera = std::stoi(cam.path().filename().string());
      } catch (const std::exception&) {
        continue;
      }
      if (camera < 0 || camera > 255) continue;
      auto& store = ep.frames[static_cast<std::uint8_t>(camera)];
      for (const auto& f : fs::directory_iterator(cam.path())) {
        if (f.path().extension() != ".rgb") continue;
        const auto index = std::stoull(f.path().stem().string());
        const auto fb = slurp(f.path());
        struct BadFrame {
          std::string path;
          [[noreturn]] void operator()() const {
            throw EpisodeIoFailure(EpisodeIoError::BadFrameFile, path);
          }
        };
        detail::ByteReader fr(std::span<const std::uint8_t>(fb), BadFrame{f.path().string()});
        StoredFrame sf;
        sf.width = fr.u16();
        sf.height = fr.u16();
        const auto px = fr.bytes(std::size_t{sf.width} * sf.height * 3);
        if (fr.remaining() != 0) BadFrame{f.path().string()}();
        sf.rgb.assign(px.begin(), px.end());
        store.emplace(index, std::move(sf));
      }
    }
  }

  return ep;
}

std::vector<fs::path> find_episodes(const fs::path& root) {
  std::vector<fs::path> out;
  if (!fs::exists(root)) return out;
  const auto is_episode = [](const fs::path& p) {
    return fs::is_regular_file(p / kManifestName) || fs::is_regular_file(p / kRecordsName);
  };
  if (is_episode(root)) return {root};
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    const auto name = entry.path().filename().string();
    if (!name.empty() && name.front() == '.') continue;
    if (is_episode(entry.path())) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace tbag
