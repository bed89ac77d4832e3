#include "vo2/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "vo2/errors.hpp"

namespace vo2 {

const char* to_string(TerminationMode m) {
  return m == TerminationMode::cpet_max_hr ? "cpet_max_hr" : "legacy_theoretical";
}

const char* to_string(TerminationReason r) {
  switch (r) {
    case TerminationReason::hr_limit: return "hr_limit";
    case TerminationReason::movement_failure: return "movement_failure";
    default: return "time_elapsed";
  }
}

TerminationMode termination_mode_from_string(const std::string& s) {
  if (s == "cpet_max_hr") return TerminationMode::cpet_max_hr;
  if (s == "legacy_theoretical") return TerminationMode::legacy_theoretical;
  throw ValidationError("termination_mode must be \"cpet_max_hr\" or \"legacy_theoretical\", got \"" +
                        s + "\"");
}

std::vector<LevelBounds> default_level_bounds(int levels) {
  std::vector<LevelBounds> out;
  out.reserve(static_cast<std::size_t>(levels));
  for (int l = 0; l < levels; ++l) {
    const double lower = 0.05 + 0.02 * l;
    out.push_back({lower, lower + 0.15});
  }
  return out;
}

CpsjtConfig CpsjtConfig::defaults() {
  CpsjtConfig cfg;
  cfg.level_cadence_bounds = default_level_bounds(24);
  return cfg;
}

void validate(const CpsjtConfig& cfg) {
  if (!(cfg.interp_factor > 0.0 && cfg.interp_factor <= 1.0))
    throw ValidationError("interp_factor: must lie in (0, 1]");
  if (!(cfg.level_duration_s > 0.0)) throw ValidationError("level_duration_s: must be positive");
  if (!(cfg.max_game_duration_s > 0.0))
    throw ValidationError("max_game_duration_s: must be positive");
  if (cfg.hr_allowance_bpm < 0.0) throw ValidationError("hr_allowance_bpm: must be non-negative");
  if (!(cfg.legacy_fraction > 0.0 && cfg.legacy_fraction <= 1.0))
    throw ValidationError("legacy_fraction: must lie in (0, 1]");
  if (cfg.grace_period_s < 0.0) throw ValidationError("grace_period_s: must be non-negative");
  const auto levels_needed =
      static_cast<std::size_t>(std::ceil(cfg.max_game_duration_s / cfg.level_duration_s));
  if (cfg.level_cadence_bounds.size() < levels_needed)
    throw ValidationError("level_cadence_bounds: covers " +
                          std::to_string(cfg.level_cadence_bounds.size()) + " levels, need " +
                          std::to_string(levels_needed));
  for (std::size_t l = 0; l < cfg.level_cadence_bounds.size(); ++l)
    if (!(cfg.level_cadence_bounds[l].lower < cfg.level_cadence_bounds[l].upper))
      throw ValidationError("level_cadence_bounds: lower must be < upper at level " +
                            std::to_string(l));
}

std::string cpsjt_config_to_json(const CpsjtConfig& cfg) {
  nlohmann::ordered_json j;
  j["level_duration_s"] = cfg.level_duration_s;
  j["max_game_duration_s"] = cfg.max_game_duration_s;
  j["hr_allowance_bpm"] = cfg.hr_allowance_bpm;
  j["termination_mode"] = to_string(cfg.termination_mode);
  j["legacy_fraction"] = cfg.legacy_fraction;
  j["interp_factor"] = cfg.interp_factor;
  j["grace_period_s"] = cfg.grace_period_s;
  j["level_cadence_bounds"] = nlohmann::ordered_json::array();
  for (const auto& b : cfg.level_cadence_bounds)
    j["level_cadence_bounds"].push_back({b.lower, b.upper});
  return j.dump(2) + "\n";
}

CpsjtConfig cpsjt_config_from_json(const std::string& text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::ordered_json::exception& e) {
    throw ParseError(std::string("cpsjt config: ") + e.what());
  }
  CpsjtConfig cfg = CpsjtConfig::defaults();
  try {
    if (j.contains("level_duration_s")) cfg.level_duration_s = j["level_duration_s"].get<double>();
    if (j.contains("max_game_duration_s"))
      cfg.max_game_duration_s = j["max_game_duration_s"].get<double>();
    if (j.contains("hr_allowance_bpm")) cfg.hr_allowance_bpm = j["hr_allowance_bpm"].get<double>();
    if (j.contains("termination_mode"))
      cfg.termination_mode = termination_mode_from_string(j["termination_mode"].get<std::string>());
    if (j.contains("legacy_fraction")) cfg.legacy_fraction = j["legacy_fraction"].get<double>();
    if (j.contains("interp_factor")) cfg.interp_factor = j["interp_factor"].get<double>();
    if (j.contains("grace_period_s")) cfg.grace_period_s = j["grace_period_s"].get<double>();
    if (j.contains("level_cadence_bounds")) {
      cfg.level_cadence_bounds.clear();
      for (const auto& b : j["level_cadence_bounds"])
        cfg.level_cadence_bounds.push_back({b.at(0).get<double>(), b.at(1).get<double>()});
    }
  } catch (const nlohmann::ordered_json::exception& e) {
    throw ParseError(std::string("cpsjt config: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

void validate(const CpetSchedule& sched) {
  if (!(sched.speed_kmh > 0 && sched.incline_step_pct_per_min > 0 && sched.max_duration_min > 0 &&
        sched.recovery_speed_kmh > 0 && sched.recovery_duration_min > 0))
    throw ValidationError("CpetSchedule: all fields must be positive");
}

TreadmillPoint cpet_intensity_at(double t_s, const CpetSchedule& sched, double exhaustion_s) {
  if (t_s < 0.0) throw ValidationError("cpet_intensity_at: t must be non-negative");
  const double end_exercise = std::min(exhaustion_s, sched.max_duration_min * 60.0);
  if (t_s < end_exercise)
    return {sched.speed_kmh, sched.incline_step_pct_per_min * std::floor(t_s / 60.0)};
  if (t_s < end_exercise + sched.recovery_duration_min * 60.0) return {sched.recovery_speed_kmh, 0.0};
  return {0.0, 0.0};
}

namespace {

constexpr double kHighpassCutoffHz = 0.5;

// First-order high pass over an irregularly sampled signal. Starts in the
// settled state for a constant input (first output is zero).
std::vector<double> highpass(const std::vector<double>& x, const std::vector<std::int64_t>& t_ms) {
  const double tau = 1.0 / (2.0 * std::numbers::pi * kHighpassCutoffHz);
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double dt = static_cast<double>(t_ms[i] - t_ms[i - 1]) / 1000.0;
    const double alpha = tau / (tau + dt);
    y[i] = alpha * (y[i - 1] + x[i] - x[i - 1]);
  }
  return y;
}

std::vector<double> magnitudes(std::span<const AccelSample> a) {
  std::vector<double> m(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    m[i] = std::sqrt(a[i].ax_g * a[i].ax_g + a[i].ay_g * a[i].ay_g + a[i].az_g * a[i].az_g);
  return m;
}

}  // namespace

double movement_index(std::span<const AccelSample> window) {
  if (window.empty()) throw ValidationError("movement_index: empty window");
  std::vector<std::int64_t> t(window.size());
  for (std::size_t i = 0; i < window.size(); ++i) t[i] = window[i].t_ms;
  const auto y = highpass(magnitudes(window), t);
  double ss = 0.0;
  for (double v : y) ss += v * v;
  return std::sqrt(ss / static_cast<double>(y.size()));
}

std::vector<double> movement_index_series(const std::vector<AccelSample>& accel, double window_s) {
  std::vector<double> out(accel.size(), std::numeric_limits<double>::quiet_NaN());
  if (accel.empty()) return out;
  std::vector<std::int64_t> t(accel.size());
  for (std::size_t i = 0; i < accel.size(); ++i) t[i] = accel[i].t_ms;
  const auto y = highpass(magnitudes(accel), t);
  const auto window_ms = static_cast<std::int64_t>(std::llround(window_s * 1000.0));

  std::size_t lo = 0;
  double ss = 0.0;  // running sum over [lo, i]
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss += y[i] * y[i];
    while (t[i] - t[lo] > window_ms) {
      ss -= y[lo] * y[lo];
      ++lo;
    }
    if (t[i] - t.front() < window_ms) continue;  // window not yet spanned
    const auto count = i - lo + 1;
    out[i] = std::sqrt(std::max(0.0, ss) / static_cast<double>(count));
  }
  return out;
}

std::vector<double> median_smooth_hr(const std::vector<HrSample>& hr) {
  const std::size_t n = hr.size();
  std::vector<double> out(n);
  double buf[5];
  for (std::size_t i = 0; i < n; ++i) {
    // symmetric shrink at the edges keeps the window odd
    const std::size_t k = std::min({std::size_t{2}, i, n - 1 - i});
    std::size_t m = 0;
    for (std::size_t j = i - k; j <= i + k; ++j) buf[m++] = hr[j].hr_bpm;
    std::sort(buf, buf + m);
    out[i] = buf[m / 2];
  }
  return out;
}

namespace {

// Piecewise-linear HR value at time t_s over (t_ms, value) nodes; clamps
// outside the node span.
double hr_at(const std::vector<std::int64_t>& t_ms, const std::vector<double>& v, double t_s) {
  const double t = t_s * 1000.0;
  if (t <= static_cast<double>(t_ms.front())) return v.front();
  if (t >= static_cast<double>(t_ms.back())) return v.back();
  auto it = std::upper_bound(t_ms.begin(), t_ms.end(), static_cast<std::int64_t>(std::floor(t)));
  const auto hi = static_cast<std::size_t>(it - t_ms.begin());
  const auto lo = hi - 1;
  const double t0 = static_cast<double>(t_ms[lo]), t1 = static_cast<double>(t_ms[hi]);
  const double w = (t - t0) / (t1 - t0);
  return v[lo] + w * (v[hi] - v[lo]);
}

struct InterpInput {
  const std::vector<std::int64_t>& t_ms;
  const std::vector<double>& hr;
};

InterpolationResult interpolate_core(const InterpInput& in, double endured_raw_s,
                                     double actual_max_hr, double cpet_max_hr,
                                     double interp_factor) {
  const double delta = cpet_max_hr - actual_max_hr;
  if (delta <= 0.0) return {endured_raw_s, false};

  const double end_ms = endured_raw_s * 1000.0;

  // first time the stream reaches the session peak
  double t_max_s = -1.0;
  for (std::size_t i = 0; i < in.hr.size() && static_cast<double>(in.t_ms[i]) <= end_ms; ++i) {
    if (in.hr[i] >= actual_max_hr) {
      if (i > 0 && in.hr[i] > actual_max_hr && in.hr[i - 1] < actual_max_hr) {
        // crossing lies inside the previous segment
        const double w = (actual_max_hr - in.hr[i - 1]) / (in.hr[i] - in.hr[i - 1]);
        t_max_s = (static_cast<double>(in.t_ms[i - 1]) +
                   w * static_cast<double>(in.t_ms[i] - in.t_ms[i - 1])) /
                  1000.0;
      } else {
        t_max_s = static_cast<double>(in.t_ms[i]) / 1000.0;
      }
      break;
    }
  }
  if (t_max_s < 0.0)
    throw ValidationError("interpolate_endurance: actual_max_hr not attained within the session");

  // latest time at or before the peak with HR <= actual_max - delta
  const double threshold = actual_max_hr - delta;
  const double t_max_ms = t_max_s * 1000.0;
  double t_low_s = -1.0;
  std::size_t last = 0;
  while (last + 1 < in.t_ms.size() && static_cast<double>(in.t_ms[last + 1]) <= t_max_ms) ++last;
  for (std::size_t i = last + 1; i-- > 0;) {
    const double ta = static_cast<double>(in.t_ms[i]) / 1000.0;
    const double ha = in.hr[i];
    const double tb = std::min(t_max_s, i + 1 < in.t_ms.size()
                                            ? static_cast<double>(in.t_ms[i + 1]) / 1000.0
                                            : t_max_s);
    if (tb < ta) continue;
    const double hb = hr_at(in.t_ms, in.hr, tb);
    if (hb <= threshold) {
      t_low_s = tb;
      break;
    }
    if (ha <= threshold) {
      // linear crossing inside [ta, tb]
      t_low_s = ha == hb ? ta : ta + (threshold - ha) / (hb - ha) * (tb - ta);
      break;
    }
  }
  if (t_low_s < 0.0) return {endured_raw_s, true};  // no anchor; keep the raw duration

  return {endured_raw_s + interp_factor * (t_max_s - t_low_s), false};
}

}  // namespace

InterpolationResult interpolate_endurance(const std::vector<HrSample>& hr_stream,
                                          double endured_raw_s, double actual_max_hr,
                                          double cpet_max_hr, double interp_factor) {
  if (hr_stream.empty()) throw ValidationError("interpolate_endurance: empty HR stream");
  if (actual_max_hr > cpet_max_hr)
    throw ValidationError("interpolate_endurance: actual_max_hr exceeds cpet_max_hr");
  if (static_cast<double>(hr_stream.back().t_ms) < endured_raw_s * 1000.0)
    throw ValidationError("interpolate_endurance: stream does not cover the endured span");
  std::vector<std::int64_t> t(hr_stream.size());
  std::vector<double> v(hr_stream.size());
  for (std::size_t i = 0; i < hr_stream.size(); ++i) {
    t[i] = hr_stream[i].t_ms;
    v[i] = hr_stream[i].hr_bpm;
  }
  return interpolate_core({t, v}, endured_raw_s, actual_max_hr, cpet_max_hr, interp_factor);
}

CpsjtOutcome run_cpsjt(const SessionRecording& rec, const Participant& p, const CpsjtConfig& cfg) {
  validate(cfg);
  require_valid(p);
  if (rec.kind != SessionKind::cpsjt) throw ValidationError("run_cpsjt: recording kind must be cpsjt");
  if (rec.hr.empty()) throw ValidationError("run_cpsjt: empty HR stream");
  if (rec.accel.empty()) throw ValidationError("run_cpsjt: empty acceleration stream");

  const double limit = cfg.termination_mode == TerminationMode::cpet_max_hr
                           ? p.cpet_max_hr - cfg.hr_allowance_bpm
                           : cfg.legacy_fraction * theoretical_max_hr(p.age);

  const auto smoothed = median_smooth_hr(rec.hr);
  std::vector<std::int64_t> hr_t(rec.hr.size());
  for (std::size_t i = 0; i < rec.hr.size(); ++i) hr_t[i] = rec.hr[i].t_ms;

  const double inf = std::numeric_limits<double>::infinity();

  double t_hr = inf;
  for (std::size_t i = 0; i < smoothed.size(); ++i) {
    if (smoothed[i] >= limit) {
      t_hr = static_cast<double>(hr_t[i]) / 1000.0;
      break;
    }
  }

  // movement floor violated continuously for the grace period
  const auto mi = movement_index_series(rec.accel, 1.0);
  const int n_levels = static_cast<int>(cfg.level_cadence_bounds.size());
  const auto level_at = [&](double t_s) {
    return std::min(static_cast<int>(std::floor(t_s / cfg.level_duration_s)), n_levels - 1);
  };
  double t_mv = inf;
  double run_start = -1.0;
  for (std::size_t i = 0; i < mi.size(); ++i) {
    const double t_s = static_cast<double>(rec.accel[i].t_ms) / 1000.0;
    const bool below =
        !std::isnan(mi[i]) && mi[i] < cfg.level_cadence_bounds[static_cast<std::size_t>(level_at(t_s))].lower;
    if (!below) {
      run_start = -1.0;
      continue;
    }
    if (run_start < 0.0) run_start = t_s;
    if (t_s - run_start >= cfg.grace_period_s) {
      t_mv = run_start + cfg.grace_period_s;
      break;
    }
  }

  const double t_time =
      static_cast<double>(rec.span_end_ms()) / 1000.0 >= cfg.max_game_duration_s
          ? cfg.max_game_duration_s
          : inf;

  CpsjtOutcome out;
  // tie order: heart-rate limit, then movement, then clock
  if (t_hr <= t_mv && t_hr <= t_time && t_hr < inf) {
    out.reason = TerminationReason::hr_limit;
    out.endured_raw_s = t_hr;
  } else if (t_mv <= t_time && t_mv < inf) {
    out.reason = TerminationReason::movement_failure;
    out.endured_raw_s = t_mv;
  } else if (t_time < inf) {
    out.reason = TerminationReason::time_elapsed;
    out.endured_raw_s = t_time;
  } else {
    throw ValidationError("truncated session: recording ends before any trigger");
  }

  const double end_ms = out.endured_raw_s * 1000.0;
  out.actual_max_hr = 0.0;
  for (std::size_t i = 0; i < smoothed.size() && static_cast<double>(hr_t[i]) <= end_ms; ++i)
    out.actual_max_hr = std::max(out.actual_max_hr, smoothed[i]);

  if (out.reason == TerminationReason::movement_failure) {
    const auto r = interpolate_core({hr_t, smoothed}, out.endured_raw_s,
                                    std::min(out.actual_max_hr, p.cpet_max_hr), p.cpet_max_hr,
                                    cfg.interp_factor);
    out.endured_interp_s = r.endured_interp_s;
    out.interp_fallback = r.fallback;
  } else {
    out.endured_interp_s = out.endured_raw_s;
  }

  // per-level session log
  const int used_levels = std::min(n_levels, level_at(out.endured_raw_s) + 1);
  out.level_log.reserve(static_cast<std::size_t>(used_levels));
  for (int l = 0; l < used_levels; ++l) {
    const double lo = l * cfg.level_duration_s, hi = (l + 1) * cfg.level_duration_s;
    LevelStat st;
    st.level = l;
    double mi_sum = 0.0, hr_sum = 0.0;
    std::size_t mi_n = 0, hr_n = 0;
    for (std::size_t i = 0; i < mi.size(); ++i) {
      const double t_s = static_cast<double>(rec.accel[i].t_ms) / 1000.0;
      if (t_s < lo || t_s >= hi || t_s > out.endured_raw_s || std::isnan(mi[i])) continue;
      mi_sum += mi[i];
      ++mi_n;
    }
    for (std::size_t i = 0; i < smoothed.size(); ++i) {
      const double t_s = static_cast<double>(hr_t[i]) / 1000.0;
      if (t_s < lo || t_s >= hi || t_s > out.endured_raw_s) continue;
      hr_sum += smoothed[i];
      ++hr_n;
    }
    st.mean_movement_index = mi_n ? mi_sum / static_cast<double>(mi_n) : 0.0;
    st.mean_hr_bpm = hr_n ? hr_sum / static_cast<double>(hr_n) : 0.0;
    out.level_log.push_back(st);
  }
  return out;
}

}  // namespace vo2
