#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vo2/protocol.hpp"
#include "vo2/types.hpp"

namespace vo2 {

// Exact time partition of a session at the anaerobic-threshold heart rate.
// Held in integer milliseconds: 1/1000 is not dyadic, so second-valued doubles
// cannot sum exactly; the millisecond lattice can.
struct DurationSplit {
  std::int64_t aerobic_ms = 0;
  std::int64_t anaerobic_ms = 0;

  double aerobic_s() const { return static_cast<double>(aerobic_ms) / 1000.0; }
  double anaerobic_s() const { return static_cast<double>(anaerobic_ms) / 1000.0; }
  std::int64_t total_ms() const { return aerobic_ms + anaerobic_ms; }
};

// Time-weighted split of [0, endured_raw_s] by the left sample's HR against
// threshold_fraction * cpet_max_hr. Below counts as aerobic, at or above as
// anaerobic. The two parts partition the endured time exactly.
DurationSplit aerobic_anaerobic_split(const std::vector<HrSample>& hr_stream,
                                      double endured_raw_s, double cpet_max_hr,
                                      double threshold_fraction = 0.80);

// Steepest HR drop over any `window_s`-wide interval starting at or after
// recovery_start_ms, with HR linearly interpolated between samples. Negative
// when HR only rises. Requires the stream to extend window_s past the marker.
double hrr(const std::vector<HrSample>& hr_stream, std::int64_t recovery_start_ms,
           double window_s);

// Model inputs plus auxiliary session metrics for one participant.
struct FeatureVector {
  std::string id;
  int gender_code = 0;  // male 1, female 0
  double bmi = 0.0;
  double aerobic_s = 0.0;
  double anaerobic_s = 0.0;  // includes extrapolated extra time after movement failure
  double endured_raw_s = 0.0;
  double endured_interp_s = 0.0;
  std::optional<double> hrr30;   // absent without recovery data, never zero-filled
  std::optional<double> hrr60;
  std::optional<double> hrr120;
  std::optional<double> vo2max;  // target; absent for prediction-only rows
};

// Assembles the feature vector from a session outcome. HRR windows that the
// recording cannot cover are left absent.
FeatureVector build_feature_vector(const Participant& p, const CpsjtOutcome& outcome,
                                   const SessionRecording& rec);

// Feature-table access by column name; absent when the row lacks the value.
std::optional<double> feature_value(const FeatureVector& row, const std::string& name);

const std::vector<std::string>& feature_table_columns();

}  // namespace vo2
