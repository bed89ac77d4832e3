#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace vo2 {

enum class Gender { male, female };

inline int gender_code(Gender g) { return g == Gender::male ? 1 : 0; }

const char* to_string(Gender g);
Gender gender_from_string(const std::string& s);

// One subject: demographics plus the treadmill-test ground truth used both as
// the session cutoff reference and (when present) the regression target.
struct Participant {
  std::string id;
  Gender gender = Gender::male;
  int age = 0;          // years
  double height_m = 0.0;
  double weight_kg = 0.0;
  double cpet_max_hr = 0.0;            // beats/min
  std::optional<double> cpet_vo2max;   // mL/kg/min; absent for prediction-only subjects
};

// Field-range violations as messages; empty means valid.
std::vector<std::string> validate_participant(const Participant& p);
// Throws ValidationError listing every violation.
void require_valid(const Participant& p);

struct HrSample {
  std::int64_t t_ms = 0;  // since session start
  double hr_bpm = 0.0;
};

struct AccelSample {
  std::int64_t t_ms = 0;
  double ax_g = 0.0, ay_g = 0.0, az_g = 0.0;
};

enum class SessionKind { cpet, cpsjt };

const char* to_string(SessionKind k);

// Timestamped HR and acceleration streams for one test session. Immutable
// value data after construction; freely shareable across threads.
struct SessionRecording {
  std::string participant_id;
  SessionKind kind = SessionKind::cpsjt;
  std::vector<HrSample> hr;        // sorted by t_ms, strictly increasing
  std::vector<AccelSample> accel;  // sorted by t_ms, strictly increasing; may be empty for cpet
  std::optional<std::int64_t> recovery_start_ms;  // start of post-exercise recovery

  // Union span of both streams; {0, 0} when empty.
  std::int64_t span_begin_ms() const;
  std::int64_t span_end_ms() const;
};

struct Violation {
  std::string stream;     // "hr", "accel" or "session"
  std::ptrdiff_t index;   // sample index; -1 for whole-recording rules
  std::string rule;
};

// Violations are data, not errors: an empty list means every invariant holds.
std::vector<Violation> validate_recording(const SessionRecording& rec);

std::string format_violations(const std::vector<Violation>& v);

// weight / height^2. Rejects out-of-range inputs naming the offending field.
double compute_bmi(double weight_kg, double height_m);

// Age-predicted maximum heart rate, 220 - age. Valid for ages 10..90.
double theoretical_max_hr(int age_years);

}  // namespace vo2
