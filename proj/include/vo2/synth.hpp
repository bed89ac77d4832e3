#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "vo2/features.hpp"
#include "vo2/ingest.hpp"
#include "vo2/protocol.hpp"
#include "vo2/rng.hpp"
#include "vo2/types.hpp"

namespace vo2 {

// First-order heart-rate dynamics: the state relaxes toward a steady-state HR
// that is linear in intensity, with separate rise and recovery time constants.
// Test plumbing, not a physiological claim.
struct PhysioModel {
  double resting_hr = 68.0;
  double true_max_hr = 190.0;
  double rise_tau_s = 35.0;
  double recovery_tau_s = 45.0;
  double fitness = 0.9;    // in (0, 1]; lower reaches max HR at lower intensity
  double noise_sd = 0.0;   // additive on emitted samples only
  std::uint64_t seed = 0;
};

void validate(const PhysioModel& m);

// resting + (max - resting) * intensity / fitness, capped at the true max.
double steady_state_hr(const PhysioModel& m, double intensity);

// Steps the state with the exact exponential solution over piecewise-constant
// intensity, so noise-free trajectories match the closed form to rounding.
class HrSimulator {
 public:
  explicit HrSimulator(const PhysioModel& m);

  double state() const { return state_; }
  std::int64_t t_ms() const { return t_ms_; }

  // Advances dt under the given intensity and returns the (noisy, clipped)
  // sample at the new time.
  HrSample step(double intensity, double dt_s);

  // Sample of the current state without advancing.
  HrSample sample() const;

 private:
  double emit(double value) const;

  PhysioModel model_;
  double state_;
  std::int64_t t_ms_ = 0;
  mutable Rng noise_;
};

// Samples at t = 0, dt, ..., duration under intensity_at(t) held constant over
// each step.
std::vector<HrSample> simulate_hr(const PhysioModel& m,
                                  const std::function<double(double)>& intensity_at,
                                  double duration_s, double dt_s = 1.0);

// Normalized effort of a treadmill setting; 1.0 is the steepest scheduled climb.
double treadmill_intensity(const TreadmillPoint& pt);

struct DemographicTarget {
  double mean = 0.0;
  double sd = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

struct GenderDemographics {
  DemographicTarget age;        // years
  DemographicTarget weight_kg;
  DemographicTarget height_cm;
};

struct CohortCell {
  Gender gender = Gender::male;
  double age_lo = 18.0;
  double age_hi = 30.0;
  int count = 0;
};

// Ground-truth linear map from features to the target.
struct TruthCoefficients {
  double intercept = 36.0;
  double gender = 6.5;
  double bmi = -0.45;
  double aerobic_s = 0.03;
  double anaerobic_s = 0.012;
};

struct CohortSpec {
  std::vector<CohortCell> cells;
  GenderDemographics female;
  GenderDemographics male;
  TruthCoefficients beta;
  double sigma = 5.0;               // target noise SD
  double interaction = 0.0;         // optional nonlinearity on top of the linear map
  double movement_failure_rate = 0.15;
  double hr_noise_sd = 1.5;

  static CohortSpec defaults();  // 30 male / 14 female reference cohort
};

void validate(const CohortSpec& spec);

// Mean of a normal(mu, sigma) truncated to [lo, hi].
double truncated_normal_mean(double mu, double sigma, double lo, double hi);

// Parent mu such that the band-weighted mixture of truncated normals hits
// target_mean. Throws when the target is unreachable inside the bands.
double calibrate_truncated_mu(double target_mean, double sigma,
                              const std::vector<std::pair<double, double>>& bands,
                              const std::vector<double>& weights);

double sample_truncated(Rng& rng, double mu, double sigma, double lo, double hi);

struct Demographics {
  int age = 0;
  double height_m = 0.0;
  double weight_kg = 0.0;
};

// Draws one member of the given cell, with parent means calibrated so the
// cell-weighted cohort matches the spec's demographic targets.
Demographics sample_demographics(const CohortSpec& spec, std::size_t cell_index, Rng& rng);

struct GeneratedCohort {
  CohortManifest manifest;               // relative file names; base_dir set on materialize
  std::vector<SessionRecording> cpet;
  std::vector<SessionRecording> cpsjt;
  std::vector<FeatureVector> features;   // as the generator computed them
  CohortSpec spec;
  std::uint64_t seed = 0;
};

// Full synthetic cohort: demographics, a treadmill session giving the max-HR
// ground truth, a game session driven through the protocol state machine, and
// targets assigned from the generator's own feature extraction.
GeneratedCohort generate_cohort(const CohortSpec& spec, std::uint64_t seed,
                                const CpsjtConfig& cfg = CpsjtConfig::defaults());

// Writes manifest.json, truth.json and all session CSVs into dir.
void materialize_cohort(const GeneratedCohort& cohort, const std::filesystem::path& dir);

std::string cohort_spec_to_json(const CohortSpec& spec);
CohortSpec cohort_spec_from_json(const std::string& text);

}  // namespace vo2
