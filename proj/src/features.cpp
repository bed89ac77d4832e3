#include "vo2/features.hpp"

#include <algorithm>
#include <cmath>

#include "vo2/errors.hpp"

namespace vo2 {

DurationSplit aerobic_anaerobic_split(const std::vector<HrSample>& hr_stream,
                                      double endured_raw_s, double cpet_max_hr,
                                      double threshold_fraction) {
  if (hr_stream.empty()) throw ValidationError("aerobic_anaerobic_split: empty HR stream");
  if (endured_raw_s < 0.0) throw ValidationError("aerobic_anaerobic_split: negative duration");
  const auto endured_ms = static_cast<std::int64_t>(std::llround(endured_raw_s * 1000.0));
  if (hr_stream.back().t_ms < endured_ms)
    throw ValidationError("truncated stream: ends at " + std::to_string(hr_stream.back().t_ms) +
                          " ms, endured " + std::to_string(endured_ms) + " ms");

  const double threshold = threshold_fraction * cpet_max_hr;
  DurationSplit split;

  // left-sample rule: each subinterval belongs to the most recent sample's HR;
  // time before the first sample belongs to the first sample
  std::int64_t cursor = 0;
  std::size_t i = 0;
  while (cursor < endured_ms) {
    while (i + 1 < hr_stream.size() && hr_stream[i + 1].t_ms <= cursor) ++i;
    const double governing = hr_stream[i].hr_bpm;
    std::int64_t next = endured_ms;
    if (i + 1 < hr_stream.size()) next = std::min(next, hr_stream[i + 1].t_ms);
    if (hr_stream[i].t_ms > cursor) next = std::min(next, hr_stream[i].t_ms);
    const std::int64_t len = next - cursor;
    if (governing < threshold)
      split.aerobic_ms += len;
    else
      split.anaerobic_ms += len;
    cursor = next;
  }
  return split;
}

namespace {

double hr_interp(const std::vector<HrSample>& hr, double t_ms) {
  if (t_ms <= static_cast<double>(hr.front().t_ms)) return hr.front().hr_bpm;
  if (t_ms >= static_cast<double>(hr.back().t_ms)) return hr.back().hr_bpm;
  auto it = std::upper_bound(hr.begin(), hr.end(), t_ms, [](double t, const HrSample& s) {
    return t < static_cast<double>(s.t_ms);
  });
  const auto hi = static_cast<std::size_t>(it - hr.begin());
  const auto lo = hi - 1;
  const double t0 = static_cast<double>(hr[lo].t_ms), t1 = static_cast<double>(hr[hi].t_ms);
  const double w = (t_ms - t0) / (t1 - t0);
  return hr[lo].hr_bpm + w * (hr[hi].hr_bpm - hr[lo].hr_bpm);
}

}  // namespace

double hrr(const std::vector<HrSample>& hr_stream, std::int64_t recovery_start_ms,
           double window_s) {
  if (hr_stream.empty()) throw ValidationError("hrr: empty HR stream");
  const double w_ms = window_s * 1000.0;
  const double rs = static_cast<double>(recovery_start_ms);
  const double t_end = static_cast<double>(hr_stream.back().t_ms);
  if (t_end < rs + w_ms)
    throw ValidationError("hrr: stream must extend to " +
                          std::to_string(recovery_start_ms + static_cast<std::int64_t>(w_ms)) +
                          " ms (recovery start + " + std::to_string(window_s) + " s window)");

  // drop(t) = H(t) - H(t+w) is piecewise linear in t; its maximum sits at a
  // breakpoint, where either t or t+w hits a sample
  std::vector<double> candidates = {rs, t_end - w_ms};
  for (const auto& s : hr_stream) {
    const double t = static_cast<double>(s.t_ms);
    if (t >= rs && t <= t_end - w_ms) candidates.push_back(t);
    if (t - w_ms >= rs && t <= t_end) candidates.push_back(t - w_ms);
  }
  double best = -std::numeric_limits<double>::infinity();
  for (double t : candidates) {
    if (t < rs || t > t_end - w_ms) continue;
    best = std::max(best, hr_interp(hr_stream, t) - hr_interp(hr_stream, t + w_ms));
  }
  return best;
}

FeatureVector build_feature_vector(const Participant& p, const CpsjtOutcome& outcome,
                                   const SessionRecording& rec) {
  require_valid(p);
  FeatureVector fv;
  fv.id = p.id;
  fv.gender_code = gender_code(p.gender);
  fv.bmi = compute_bmi(p.weight_kg, p.height_m);
  fv.endured_raw_s = outcome.endured_raw_s;
  fv.endured_interp_s = outcome.endured_interp_s;

  const auto split = aerobic_anaerobic_split(rec.hr, outcome.endured_raw_s, p.cpet_max_hr);
  fv.aerobic_s = split.aerobic_s();
  // extrapolated time lies above the threshold by construction, so it accrues
  // to the anaerobic side
  fv.anaerobic_s = split.anaerobic_s() + (outcome.endured_interp_s - outcome.endured_raw_s);

  if (rec.recovery_start_ms && !rec.hr.empty()) {
    const auto rs = *rec.recovery_start_ms;
    const auto covered = [&](double w_s) {
      return static_cast<double>(rec.hr.back().t_ms) >= static_cast<double>(rs) + w_s * 1000.0;
    };
    if (covered(30.0)) fv.hrr30 = hrr(rec.hr, rs, 30.0);
    if (covered(60.0)) fv.hrr60 = hrr(rec.hr, rs, 60.0);
    if (covered(120.0)) fv.hrr120 = hrr(rec.hr, rs, 120.0);
  }
  fv.vo2max = p.cpet_vo2max;
  return fv;
}

std::optional<double> feature_value(const FeatureVector& row, const std::string& name) {
  if (name == "gender") return static_cast<double>(row.gender_code);
  if (name == "bmi") return row.bmi;
  if (name == "aerobic_s") return row.aerobic_s;
  if (name == "anaerobic_s") return row.anaerobic_s;
  if (name == "endured_raw_s") return row.endured_raw_s;
  if (name == "endured_interp_s") return row.endured_interp_s;
  if (name == "hrr30") return row.hrr30;
  if (name == "hrr60") return row.hrr60;
  if (name == "hrr120") return row.hrr120;
  if (name == "vo2max") return row.vo2max;
  throw ValidationError("unknown feature \"" + name + "\"");
}

const std::vector<std::string>& feature_table_columns() {
  static const std::vector<std::string> cols = {
      "id",       "gender",        "bmi",   "aerobic_s", "anaerobic_s", "endured_raw_s",
      "endured_interp_s", "hrr30", "hrr60", "hrr120",    "vo2max"};
  return cols;
}

}  // namespace vo2
