#include "vo2/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vo2/errors.hpp"

namespace vo2 {

using nlohmann::ordered_json;

void validate(const PhysioModel& m) {
  if (!(m.resting_hr < m.true_max_hr))
    throw ValidationError("PhysioModel: resting_hr must be below true_max_hr");
  if (!(m.rise_tau_s > 0.0 && m.recovery_tau_s > 0.0))
    throw ValidationError("PhysioModel: time constants must be positive");
  if (!(m.fitness > 0.0 && m.fitness <= 1.0))
    throw ValidationError("PhysioModel: fitness must lie in (0, 1]");
  if (m.noise_sd < 0.0) throw ValidationError("PhysioModel: noise_sd must be non-negative");
}

double steady_state_hr(const PhysioModel& m, double intensity) {
  const double span = m.true_max_hr - m.resting_hr;
  const double raw = m.resting_hr + span * std::max(0.0, intensity) / m.fitness;
  return std::min(raw, m.true_max_hr);
}

HrSimulator::HrSimulator(const PhysioModel& m)
    : model_(m), state_(m.resting_hr), noise_(m.seed) {
  validate(m);
}

double HrSimulator::emit(double value) const {
  double v = value;
  if (model_.noise_sd > 0.0) v += noise_.normal(0.0, model_.noise_sd);
  v = std::clamp(v, model_.resting_hr - 5.0, model_.true_max_hr);
  // quantize to the on-disk precision so written streams read back bit-exact
  return std::round(v * 1e6) / 1e6;
}

HrSample HrSimulator::sample() const { return {t_ms_, emit(state_)}; }

HrSample HrSimulator::step(double intensity, double dt_s) {
  const double ss = steady_state_hr(model_, intensity);
  const double tau = ss > state_ ? model_.rise_tau_s : model_.recovery_tau_s;
  state_ = ss - (ss - state_) * std::exp(-dt_s / tau);
  t_ms_ += static_cast<std::int64_t>(std::llround(dt_s * 1000.0));
  return {t_ms_, emit(state_)};
}

std::vector<HrSample> simulate_hr(const PhysioModel& m,
                                  const std::function<double(double)>& intensity_at,
                                  double duration_s, double dt_s) {
  if (!(dt_s > 0.0)) throw ValidationError("simulate_hr: dt must be positive");
  HrSimulator sim(m);
  std::vector<HrSample> out;
  out.reserve(static_cast<std::size_t>(duration_s / dt_s) + 2);
  out.push_back(sim.sample());
  for (double t = 0.0; t + dt_s <= duration_s + 1e-9; t += dt_s)
    out.push_back(sim.step(intensity_at(t), dt_s));
  return out;
}

double treadmill_intensity(const TreadmillPoint& pt) {
  if (pt.speed_kmh <= 0.0) return 0.0;
  return (pt.speed_kmh / 5.0) * (0.35 + 0.65 * pt.incline_pct / 24.0);
}

CohortSpec CohortSpec::defaults() {
  CohortSpec spec;
  spec.cells = {
      {Gender::male, 19.0, 30.0, 19},
      {Gender::male, 30.0, 41.0, 11},
      {Gender::female, 19.0, 30.0, 8},
      {Gender::female, 30.0, 44.0, 6},
  };
  spec.male.age = {27.6, 6.37, 19.0, 41.0};
  spec.male.weight_kg = {71.92, 9.74, 50.0, 94.0};
  spec.male.height_cm = {173.26, 6.44, 161.0, 186.0};
  spec.female.age = {27.29, 7.74, 19.0, 44.0};
  spec.female.weight_kg = {62.61, 11.1, 51.0, 88.0};
  spec.female.height_cm = {160.01, 4.0, 150.0, 165.0};
  return spec;
}

void validate(const CohortSpec& spec) {
  if (spec.cells.empty()) throw ValidationError("CohortSpec: no cells");
  for (const auto& c : spec.cells) {
    if (c.count < 0) throw ValidationError("CohortSpec: negative cell count");
    if (!(c.age_lo < c.age_hi)) throw ValidationError("CohortSpec: empty age band");
  }
  if (spec.sigma < 0.0) throw ValidationError("CohortSpec: sigma must be non-negative");
  if (spec.movement_failure_rate < 0.0 || spec.movement_failure_rate > 1.0)
    throw ValidationError("CohortSpec: movement_failure_rate must lie in [0, 1]");
  for (const auto* g : {&spec.male, &spec.female}) {
    for (const auto* t : {&g->age, &g->weight_kg, &g->height_cm}) {
      if (!(t->sd > 0.0)) throw ValidationError("CohortSpec: demographic sd must be positive");
      if (!(t->lo < t->hi)) throw ValidationError("CohortSpec: demographic range empty");
      if (t->mean < t->lo - 4.0 * t->sd || t->mean > t->hi + 4.0 * t->sd)
        throw ValidationError("CohortSpec: demographic range excludes mean +- 4 sd");
    }
  }
}

namespace {

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

double truncated_normal_mean(double mu, double sigma, double lo, double hi) {
  const double a = (lo - mu) / sigma, b = (hi - mu) / sigma;
  const double mass = normal_cdf(b) - normal_cdf(a);
  if (mass <= 1e-300) return mu < lo ? lo : hi;  // essentially all mass clipped away
  return mu + sigma * (normal_pdf(a) - normal_pdf(b)) / mass;
}

double calibrate_truncated_mu(double target_mean, double sigma,
                              const std::vector<std::pair<double, double>>& bands,
                              const std::vector<double>& weights) {
  if (bands.empty() || bands.size() != weights.size())
    throw ValidationError("calibrate_truncated_mu: bands/weights mismatch");
  const auto mixture_mean = [&](double mu) {
    double m = 0.0, w_total = 0.0;
    for (std::size_t i = 0; i < bands.size(); ++i) {
      m += weights[i] * truncated_normal_mean(mu, sigma, bands[i].first, bands[i].second);
      w_total += weights[i];
    }
    return m / w_total;
  };
  // the mixture mean is strictly increasing in mu
  double lo = target_mean - 8.0 * sigma, hi = target_mean + 8.0 * sigma;
  if (mixture_mean(lo) > target_mean || mixture_mean(hi) < target_mean)
    throw ValidationError("calibrate_truncated_mu: target mean unreachable within the bands");
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    (mixture_mean(mid) < target_mean ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double sample_truncated(Rng& rng, double mu, double sigma, double lo, double hi) {
  for (int tries = 0; tries < 100000; ++tries) {
    const double v = rng.normal(mu, sigma);
    if (v >= lo && v <= hi) return v;
  }
  throw ValidationError("sample_truncated: acceptance region too small");
}

namespace {

struct GenderCalibration {
  double age_mu = 0.0;
  double weight_mu = 0.0;
  double height_mu = 0.0;
};

// Age bands clipped to the gender's table range, with cell-count weights.
GenderCalibration calibrate_gender(const CohortSpec& spec, Gender g) {
  const auto& d = g == Gender::male ? spec.male : spec.female;
  std::vector<std::pair<double, double>> bands;
  std::vector<double> weights;
  for (const auto& c : spec.cells) {
    if (c.gender != g || c.count == 0) continue;
    bands.emplace_back(std::max(c.age_lo, d.age.lo), std::min(c.age_hi, d.age.hi));
    weights.push_back(static_cast<double>(c.count));
  }
  GenderCalibration cal;
  if (bands.empty()) return cal;
  cal.age_mu = calibrate_truncated_mu(d.age.mean, d.age.sd, bands, weights);
  cal.weight_mu = calibrate_truncated_mu(d.weight_kg.mean, d.weight_kg.sd,
                                         {{d.weight_kg.lo, d.weight_kg.hi}}, {1.0});
  cal.height_mu = calibrate_truncated_mu(d.height_cm.mean, d.height_cm.sd,
                                         {{d.height_cm.lo, d.height_cm.hi}}, {1.0});
  return cal;
}

}  // namespace

Demographics sample_demographics(const CohortSpec& spec, std::size_t cell_index, Rng& rng) {
  validate(spec);
  if (cell_index >= spec.cells.size())
    throw ValidationError("sample_demographics: cell index out of range");
  const auto& cell = spec.cells[cell_index];
  const auto& d = cell.gender == Gender::male ? spec.male : spec.female;
  // calibration depends only on the spec, so repeated draws stay consistent
  const auto cal = calibrate_gender(spec, cell.gender);

  const double band_lo = std::max(cell.age_lo, d.age.lo);
  const double band_hi = std::min(cell.age_hi, d.age.hi);
  Demographics out;
  const double age = sample_truncated(rng, cal.age_mu, d.age.sd, band_lo, band_hi);
  out.age = std::clamp(static_cast<int>(std::lround(age)), static_cast<int>(std::ceil(band_lo)),
                       static_cast<int>(std::floor(band_hi)));
  out.weight_kg =
      sample_truncated(rng, cal.weight_mu, d.weight_kg.sd, d.weight_kg.lo, d.weight_kg.hi);
  out.height_m =
      sample_truncated(rng, cal.height_mu, d.height_cm.sd, d.height_cm.lo, d.height_cm.hi) / 100.0;
  return out;
}

namespace {

constexpr double kAccelDt = 0.04;       // 25 Hz motion stream
constexpr double kRecoveryTailS = 150.0;
constexpr double kRecoveryIntensity = 0.15;

double quantize(double v) { return std::round(v * 1e6) / 1e6; }

PhysioModel derive_physio(const CohortSpec& spec, int age, Rng& rng, std::uint64_t stream_seed) {
  PhysioModel m;
  m.true_max_hr = std::clamp(220.0 - age + rng.normal(0.0, 6.0), 150.0, 222.0);
  m.resting_hr = std::clamp(rng.normal(66.0, 7.0), 48.0, 85.0);
  m.rise_tau_s = std::clamp(rng.normal(32.0, 6.0), 18.0, 55.0);
  m.recovery_tau_s = std::clamp(rng.normal(42.0, 9.0), 25.0, 75.0);
  m.fitness = std::clamp(rng.normal(0.88, 0.06), 0.72, 1.0);
  m.noise_sd = spec.hr_noise_sd;
  m.seed = stream_seed;
  return m;
}

// Treadmill session: ramp until the state saturates (or the schedule caps),
// then recovery. Returns the recording; max HR ground truth is its peak sample.
SessionRecording run_cpet_session(const PhysioModel& m, const CpetSchedule& sched) {
  HrSimulator sim(m);
  SessionRecording rec;
  rec.kind = SessionKind::cpet;
  rec.hr.push_back(sim.sample());

  const double cap_s = sched.max_duration_min * 60.0;
  double t = 0.0;
  while (t < cap_s && sim.state() < m.true_max_hr - 0.25) {
    rec.hr.push_back(sim.step(treadmill_intensity(cpet_intensity_at(t, sched)), 1.0));
    t += 1.0;
  }
  const double exhaustion = t;
  rec.recovery_start_ms = static_cast<std::int64_t>(std::llround(exhaustion * 1000.0));
  const double recovery_end = exhaustion + sched.recovery_duration_min * 60.0;
  while (t < recovery_end) {
    rec.hr.push_back(sim.step(treadmill_intensity(cpet_intensity_at(t, sched, exhaustion)), 1.0));
    t += 1.0;
  }
  return rec;
}

double cpsjt_level_intensity(int level) { return std::min(1.1, 0.40 + 0.055 * level); }

// Game session: leveled spot jog until the HR limit, a movement collapse at
// the capped level, or the clock. The recording keeps running through a
// seated-recovery tail so recovery metrics are computable.
SessionRecording run_cpsjt_session(const PhysioModel& m, double hr_limit, const CpsjtConfig& cfg,
                                   std::optional<int> movement_cap_level, Rng& rng) {
  HrSimulator sim(m);
  SessionRecording rec;
  rec.kind = SessionKind::cpsjt;
  rec.hr.push_back(sim.sample());

  const auto level_at = [&](double t) {
    return std::min(static_cast<int>(std::floor(t / cfg.level_duration_s)),
                    static_cast<int>(cfg.level_cadence_bounds.size()) - 1);
  };

  // 1 Hz heart-rate walk with generator-side termination detection
  double t = 0.0;
  double t_term = -1.0;
  bool moving = true;
  double hold_until = -1.0;  // keeps effort up briefly past the limit crossing
  while (t < cfg.max_game_duration_s) {
    const int level = level_at(t);
    if (movement_cap_level && level >= *movement_cap_level && moving) {
      moving = false;
      t_term = t + cfg.grace_period_s + 1.0;  // the machine needs the grace period to notice
    }
    double intensity = moving ? cpsjt_level_intensity(level) : 0.3;
    rec.hr.push_back(sim.step(intensity, 1.0));
    t += 1.0;
    if (moving && t_term < 0.0 && sim.state() >= hr_limit && hold_until < 0.0)
      hold_until = t + 5.0;  // crossing confirmed; taper shortly after
    if (hold_until > 0.0 && t >= hold_until) {
      t_term = t;
      break;
    }
    if (t_term > 0.0 && t >= t_term) break;
  }
  if (t_term < 0.0) t_term = std::min(t, cfg.max_game_duration_s);

  rec.recovery_start_ms = static_cast<std::int64_t>(std::llround(t_term * 1000.0));
  const double end_s = t_term + kRecoveryTailS;
  while (t < end_s) {
    rec.hr.push_back(sim.step(kRecoveryIntensity, 1.0));
    t += 1.0;
  }

  // motion stream: level-paced oscillation riding on gravity, collapsing to a
  // fidget once the player stops
  const auto samples = static_cast<std::size_t>(std::floor(end_s / kAccelDt));
  rec.accel.reserve(samples + 1);
  for (std::size_t i = 0; i <= samples; ++i) {
    const double ts = static_cast<double>(i) * kAccelDt;
    const int level = level_at(ts);
    const bool active = ts < t_term && (!movement_cap_level || level < *movement_cap_level);
    double amp;
    double freq;
    if (active) {
      const auto& band = cfg.level_cadence_bounds[static_cast<std::size_t>(level)];
      amp = 0.5 * (band.lower + band.upper) * std::numbers::sqrt2;
      freq = 1.2 + 0.1 * level;
    } else {
      amp = 0.008 * std::numbers::sqrt2;
      freq = 0.8;
    }
    AccelSample s;
    s.t_ms = static_cast<std::int64_t>(std::llround(ts * 1000.0));
    s.az_g = quantize(1.0 + amp * std::sin(2.0 * std::numbers::pi * freq * ts));
    s.ax_g = quantize(0.01 * rng.normal());
    s.ay_g = quantize(0.01 * rng.normal());
    rec.accel.push_back(s);
  }
  return rec;
}

}  // namespace

GeneratedCohort generate_cohort(const CohortSpec& spec, std::uint64_t seed,
                                const CpsjtConfig& cfg) {
  validate(spec);
  validate(cfg);

  GeneratedCohort cohort;
  cohort.spec = spec;
  cohort.seed = seed;

  int total = 0;
  for (const auto& c : spec.cells) total += c.count;
  const int pad = total >= 1000 ? 4 : 3;

  std::size_t index = 0;
  for (std::size_t cell = 0; cell < spec.cells.size(); ++cell) {
    for (int k = 0; k < spec.cells[cell].count; ++k, ++index) {
      // disjoint per-participant streams: one for draws, one root for sensors
      Rng rng(split_seed(seed, 2 * index));
      const std::uint64_t sensor_root = split_seed(seed, 2 * index + 1);

      Participant p;
      {
        std::ostringstream id;
        id << "P";
        id.width(pad);
        id.fill('0');
        id << index + 1;
        p.id = id.str();
      }
      p.gender = spec.cells[cell].gender;
      const auto demo = sample_demographics(spec, cell, rng);
      p.age = demo.age;
      p.height_m = demo.height_m;
      p.weight_kg = demo.weight_kg;

      PhysioModel physio = derive_physio(spec, p.age, rng, split_seed(sensor_root, 0));
      auto cpet_rec = run_cpet_session(physio, CpetSchedule{});
      double max_hr = 0.0;
      for (const auto& s : cpet_rec.hr) max_hr = std::max(max_hr, s.hr_bpm);
      p.cpet_max_hr = max_hr;

      std::optional<int> cap;
      if (rng.uniform01() < spec.movement_failure_rate)
        cap = 4 + static_cast<int>(rng.below(3));

      PhysioModel game_physio = physio;
      game_physio.seed = split_seed(sensor_root, 1);
      const double limit = p.cpet_max_hr - cfg.hr_allowance_bpm;
      auto cpsjt_rec = run_cpsjt_session(game_physio, limit, cfg, cap, rng);

      cpet_rec.participant_id = p.id;
      cpsjt_rec.participant_id = p.id;

      // targets come from the same feature path consumers will run
      const auto outcome = run_cpsjt(cpsjt_rec, p, cfg);
      auto fv = build_feature_vector(p, outcome, cpsjt_rec);
      double target = spec.beta.intercept + spec.beta.gender * fv.gender_code +
                      spec.beta.bmi * fv.bmi + spec.beta.aerobic_s * fv.aerobic_s +
                      spec.beta.anaerobic_s * fv.anaerobic_s;
      if (spec.interaction != 0.0)
        target += spec.interaction * (fv.aerobic_s / 60.0) * (fv.anaerobic_s / 60.0);
      if (spec.sigma > 0.0) {
        // noise may stray past the plausible range; the clamp stays off in
        // noiseless runs so the target is exactly linear in the features
        target = std::clamp(target + rng.normal(0.0, spec.sigma), 10.5, 94.5);
      }
      p.cpet_vo2max = target;
      fv.vo2max = target;
      require_valid(p);

      ManifestEntry entry;
      entry.participant = p;
      entry.cpet_file = p.id + "_cpet.csv";
      entry.cpsjt_file = p.id + "_cpsjt.csv";
      entry.cpet_recovery_start_ms = cpet_rec.recovery_start_ms;
      entry.cpsjt_recovery_start_ms = cpsjt_rec.recovery_start_ms;

      cohort.manifest.entries.push_back(std::move(entry));
      cohort.cpet.push_back(std::move(cpet_rec));
      cohort.cpsjt.push_back(std::move(cpsjt_rec));
      cohort.features.push_back(std::move(fv));
    }
  }
  return cohort;
}

void materialize_cohort(const GeneratedCohort& cohort, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < cohort.manifest.entries.size(); ++i) {
    const auto& e = cohort.manifest.entries[i];
    write_recording(cohort.cpet[i], dir / e.cpet_file);
    write_recording(cohort.cpsjt[i], dir / e.cpsjt_file);
  }
  CohortManifest on_disk = cohort.manifest;
  on_disk.base_dir = dir;
  write_manifest(on_disk, dir / "manifest.json");

  ordered_json truth;
  truth["seed"] = cohort.seed;
  truth["sigma"] = cohort.spec.sigma;
  truth["interaction"] = cohort.spec.interaction;
  truth["beta"] = {{"intercept", cohort.spec.beta.intercept},
                   {"gender", cohort.spec.beta.gender},
                   {"bmi", cohort.spec.beta.bmi},
                   {"aerobic_s", cohort.spec.beta.aerobic_s},
                   {"anaerobic_s", cohort.spec.beta.anaerobic_s}};
  write_text_atomic(dir / "truth.json", truth.dump(2) + "\n");
}

namespace {

ordered_json target_json(const DemographicTarget& t) {
  return {{"mean", t.mean}, {"sd", t.sd}, {"lo", t.lo}, {"hi", t.hi}};
}

DemographicTarget target_from(const ordered_json& j) {
  return {j.at("mean").get<double>(), j.at("sd").get<double>(), j.at("lo").get<double>(),
          j.at("hi").get<double>()};
}

ordered_json gender_json(const GenderDemographics& g) {
  return {{"age", target_json(g.age)},
          {"weight_kg", target_json(g.weight_kg)},
          {"height_cm", target_json(g.height_cm)}};
}

GenderDemographics gender_from(const ordered_json& j) {
  return {target_from(j.at("age")), target_from(j.at("weight_kg")),
          target_from(j.at("height_cm"))};
}

}  // namespace

std::string cohort_spec_to_json(const CohortSpec& spec) {
  ordered_json j;
  j["cells"] = ordered_json::array();
  for (const auto& c : spec.cells)
    j["cells"].push_back({{"gender", to_string(c.gender)},
                          {"age_lo", c.age_lo},
                          {"age_hi", c.age_hi},
                          {"count", c.count}});
  j["male"] = gender_json(spec.male);
  j["female"] = gender_json(spec.female);
  j["beta"] = {{"intercept", spec.beta.intercept},
               {"gender", spec.beta.gender},
               {"bmi", spec.beta.bmi},
               {"aerobic_s", spec.beta.aerobic_s},
               {"anaerobic_s", spec.beta.anaerobic_s}};
  j["sigma"] = spec.sigma;
  j["interaction"] = spec.interaction;
  j["movement_failure_rate"] = spec.movement_failure_rate;
  j["hr_noise_sd"] = spec.hr_noise_sd;
  return j.dump(2) + "\n";
}

CohortSpec cohort_spec_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::exception& e) {
    throw ParseError(std::string("cohort spec: ") + e.what());
  }
  CohortSpec spec = CohortSpec::defaults();
  try {
    if (j.contains("cells")) {
      spec.cells.clear();
      for (const auto& cj : j["cells"])
        spec.cells.push_back({gender_from_string(cj.at("gender").get<std::string>()),
                              cj.at("age_lo").get<double>(), cj.at("age_hi").get<double>(),
                              cj.at("count").get<int>()});
    }
    if (j.contains("male")) spec.male = gender_from(j["male"]);
    if (j.contains("female")) spec.female = gender_from(j["female"]);
    if (j.contains("beta")) {
      const auto& b = j["beta"];
      spec.beta = {b.at("intercept").get<double>(), b.at("gender").get<double>(),
                   b.at("bmi").get<double>(), b.at("aerobic_s").get<double>(),
                   b.at("anaerobic_s").get<double>()};
    }
    if (j.contains("sigma")) spec.sigma = j["sigma"].get<double>();
    if (j.contains("interaction")) spec.interaction = j["interaction"].get<double>();
    if (j.contains("movement_failure_rate"))
      spec.movement_failure_rate = j["movement_failure_rate"].get<double>();
    if (j.contains("hr_noise_sd")) spec.hr_noise_sd = j["hr_noise_sd"].get<double>();
  } catch (const ordered_json::exception& e) {
    throw ParseError(std::string("cohort spec: ") + e.what());
  }
  validate(spec);
  return spec;
}

}  // namespace vo2
