#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "vo2/types.hpp"

namespace vo2 {

enum class TerminationMode { cpet_max_hr, legacy_theoretical };
enum class TerminationReason { hr_limit, movement_failure, time_elapsed };

const char* to_string(TerminationMode m);
const char* to_string(TerminationReason r);
TerminationMode termination_mode_from_string(const std::string& s);

struct LevelBounds {
  double lower = 0.0;  // movement-index floor the player must sustain
  double upper = 0.0;  // overexertion ceiling shown by the game
};

// Game-session parameters. Defaults give a 12-minute session of 24 levels
// stepping every 30 seconds.
struct CpsjtConfig {
  double level_duration_s = 30.0;
  double max_game_duration_s = 720.0;
  double hr_allowance_bpm = 10.0;
  TerminationMode termination_mode = TerminationMode::cpet_max_hr;
  double legacy_fraction = 0.90;   // of age-predicted max HR, legacy mode only
  double interp_factor = 0.75;     // endurance extrapolation factor
  double grace_period_s = 3.0;     // movement failure debounce
  std::vector<LevelBounds> level_cadence_bounds;

  static CpsjtConfig defaults();
};

// Lower bound 0.05 + 0.02*L g-RMS per level, band width 0.15.
std::vector<LevelBounds> default_level_bounds(int levels);

void validate(const CpsjtConfig& cfg);

std::string cpsjt_config_to_json(const CpsjtConfig& cfg);
CpsjtConfig cpsjt_config_from_json(const std::string& text);

struct LevelStat {
  int level = 0;
  double mean_movement_index = 0.0;
  double mean_hr_bpm = 0.0;
};

struct CpsjtOutcome {
  TerminationReason reason = TerminationReason::time_elapsed;
  double endured_raw_s = 0.0;
  double endured_interp_s = 0.0;   // == raw except after movement failure
  double actual_max_hr = 0.0;      // peak of the smoothed stream up to termination
  bool interp_fallback = false;    // set when the extrapolation anchor was missing
  std::vector<LevelStat> level_log;
};

// Treadmill ramp: constant walk speed with inclination stepping once per
// minute, then a fixed-length low-speed recovery.
struct CpetSchedule {
  double speed_kmh = 5.0;
  double incline_step_pct_per_min = 1.0;
  double max_duration_min = 25.0;
  double recovery_speed_kmh = 3.0;
  double recovery_duration_min = 2.0;
};

void validate(const CpetSchedule& sched);

struct TreadmillPoint {
  double speed_kmh = 0.0;
  double incline_pct = 0.0;
};

// Speed/incline commanded at time t. Exercise runs until the earlier of
// exhaustion_s and the schedule cap, then recovery, then idle (0, 0).
TreadmillPoint cpet_intensity_at(double t_s, const CpetSchedule& sched,
                                 double exhaustion_s = std::numeric_limits<double>::infinity());

// Cadence proxy: RMS of the high-pass filtered acceleration magnitude over the
// window (gravity and posture are DC and get rejected). The window should span
// at least one second.
double movement_index(std::span<const AccelSample> window);

// Trailing-window movement index at every accel sample. Entries whose trailing
// window does not yet span `window_s` are NaN.
std::vector<double> movement_index_series(const std::vector<AccelSample>& accel,
                                          double window_s = 1.0);

// 5-sample centered median; shrinks at the edges. Knocks out single-lead ECG
// spike artifacts without smearing ramps.
std::vector<double> median_smooth_hr(const std::vector<HrSample>& hr);

struct InterpolationResult {
  double endured_interp_s = 0.0;
  bool fallback = false;  // no anchor found; raw duration returned unchanged
};

// Estimates how much longer the session would have run had the player been
// able to keep moving: the time the final climb of `delta = cpet_max - actual_max`
// beats took, scaled by interp_factor, added to the raw duration.
InterpolationResult interpolate_endurance(const std::vector<HrSample>& hr_stream,
                                          double endured_raw_s, double actual_max_hr,
                                          double cpet_max_hr, double interp_factor);

// Walks a session chronologically and terminates at the first of: smoothed HR
// reaching the personal limit, movement index holding below the level floor for
// the grace period, or the game clock running out.
CpsjtOutcome run_cpsjt(const SessionRecording& rec, const Participant& p, const CpsjtConfig& cfg);

}  // namespace vo2
