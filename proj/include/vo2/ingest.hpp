#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vo2/features.hpp"
#include "vo2/types.hpp"

namespace vo2 {

// One cohort member with the paths to both session files, resolved relative to
// the manifest location.
struct ManifestEntry {
  Participant participant;
  std::filesystem::path cpet_file;
  std::filesystem::path cpsjt_file;
  std::optional<std::int64_t> cpet_recovery_start_ms;
  std::optional<std::int64_t> cpsjt_recovery_start_ms;
};

struct CohortManifest {
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;  // directory the relative paths resolve against
};

// Writes content to a sibling temp file and renames it into place, so readers
// never observe a partial artifact.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_text(const std::filesystem::path& path);

// Session stream CSV. Accepted headers:
//   t_ms,hr_bpm
//   t_ms,ax_g,ay_g,az_g
//   t_ms,hr_bpm,ax_g,ay_g,az_g   (combined; empty cells mark absent readings)
// The loaded recording must pass validate_recording.
SessionRecording read_recording(const std::filesystem::path& path, SessionKind kind);

// Combined layout when both streams are present, single-stream layout otherwise.
void write_recording(const SessionRecording& rec, const std::filesystem::path& path);

// Manifest JSON: { "participants": [ { id, gender, age, height_m, weight_kg,
// cpet_max_hr, cpet_vo2max?, cpet_file, cpsjt_file,
// cpet_recovery_start_ms?, cpsjt_recovery_start_ms? } ] }
CohortManifest read_manifest(const std::filesystem::path& path);

std::string manifest_to_json(const CohortManifest& manifest);
void write_manifest(const CohortManifest& manifest, const std::filesystem::path& path);

// Loads one referenced recording, attaching the participant id and recovery marker.
SessionRecording load_session(const CohortManifest& manifest, const ManifestEntry& entry,
                              SessionKind kind);

// Feature table CSV with the fixed header
// id,gender,bmi,aerobic_s,anaerobic_s,endured_raw_s,endured_interp_s,hrr30,hrr60,hrr120,vo2max
// Numeric cells carry 6 decimal places; absent optionals are empty cells.
void write_feature_table(const std::vector<FeatureVector>& rows,
                         const std::filesystem::path& path);

std::vector<FeatureVector> read_feature_table(const std::filesystem::path& path);

// Fixed-point decimal with 6 places, locale-independent.
std::string format_number(double v);

}  // namespace vo2
