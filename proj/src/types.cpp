#include "vo2/types.hpp"

#include <cmath>
#include <sstream>

#include "vo2/errors.hpp"

namespace vo2 {

const char* to_string(Gender g) { return g == Gender::male ? "male" : "female"; }

Gender gender_from_string(const std::string& s) {
  if (s == "male") return Gender::male;
  if (s == "female") return Gender::female;
  throw ValidationError("gender must be \"male\" or \"female\", got \"" + s + "\"");
}

const char* to_string(SessionKind k) { return k == SessionKind::cpet ? "cpet" : "cpsjt"; }

std::vector<std::string> validate_participant(const Participant& p) {
  std::vector<std::string> out;
  if (p.id.empty()) out.push_back("id: must be non-empty");
  if (p.age < 18) out.push_back("age: must be >= 18 years, got " + std::to_string(p.age));
  if (!(p.height_m > 1.0 && p.height_m < 2.5))
    out.push_back("height_m: must lie in (1.0, 2.5), got " + std::to_string(p.height_m));
  if (!(p.weight_kg > 25.0 && p.weight_kg < 250.0))
    out.push_back("weight_kg: must lie in (25, 250), got " + std::to_string(p.weight_kg));
  if (!(p.cpet_max_hr > 60.0 && p.cpet_max_hr < 230.0))
    out.push_back("cpet_max_hr: must lie in (60, 230), got " + std::to_string(p.cpet_max_hr));
  if (p.cpet_vo2max && !(*p.cpet_vo2max > 10.0 && *p.cpet_vo2max < 95.0))
    out.push_back("cpet_vo2max: must lie in (10, 95), got " + std::to_string(*p.cpet_vo2max));
  return out;
}

void require_valid(const Participant& p) {
  auto v = validate_participant(p);
  if (v.empty()) return;
  std::ostringstream os;
  os << "participant \"" << p.id << "\": ";
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "; " : "") << v[i];
  throw ValidationError(os.str());
}

std::int64_t SessionRecording::span_begin_ms() const {
  if (hr.empty() && accel.empty()) return 0;
  if (hr.empty()) return accel.front().t_ms;
  if (accel.empty()) return hr.front().t_ms;
  return std::min(hr.front().t_ms, accel.front().t_ms);
}

std::int64_t SessionRecording::span_end_ms() const {
  if (hr.empty() && accel.empty()) return 0;
  if (hr.empty()) return accel.back().t_ms;
  if (accel.empty()) return hr.back().t_ms;
  return std::max(hr.back().t_ms, accel.back().t_ms);
}

std::vector<Violation> validate_recording(const SessionRecording& rec) {
  std::vector<Violation> out;
  for (std::size_t i = 0; i < rec.hr.size(); ++i) {
    const auto& s = rec.hr[i];
    if (s.t_ms < 0) out.push_back({"hr", static_cast<std::ptrdiff_t>(i), "non-negative t"});
    if (i > 0 && s.t_ms <= rec.hr[i - 1].t_ms)
      out.push_back({"hr", static_cast<std::ptrdiff_t>(i), "strictly increasing t"});
    if (!(s.hr_bpm >= 25.0 && s.hr_bpm <= 250.0))
      out.push_back({"hr", static_cast<std::ptrdiff_t>(i), "hr range"});
  }
  for (std::size_t i = 0; i < rec.accel.size(); ++i) {
    const auto& s = rec.accel[i];
    if (s.t_ms < 0) out.push_back({"accel", static_cast<std::ptrdiff_t>(i), "non-negative t"});
    if (i > 0 && s.t_ms <= rec.accel[i - 1].t_ms)
      out.push_back({"accel", static_cast<std::ptrdiff_t>(i), "strictly increasing t"});
    if (std::abs(s.ax_g) > 16.0 || std::abs(s.ay_g) > 16.0 || std::abs(s.az_g) > 16.0)
      out.push_back({"accel", static_cast<std::ptrdiff_t>(i), "accel range"});
  }
  if (rec.recovery_start_ms) {
    const bool empty = rec.hr.empty() && rec.accel.empty();
    if (empty || *rec.recovery_start_ms < rec.span_begin_ms() ||
        *rec.recovery_start_ms > rec.span_end_ms())
      out.push_back({"session", -1, "recovery_start within span"});
  }
  return out;
}

std::string format_violations(const std::vector<Violation>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << "; ";
    os << v[i].stream;
    if (v[i].index >= 0) os << "[" << v[i].index << "]";
    os << ": " << v[i].rule;
  }
  return os.str();
}

double compute_bmi(double weight_kg, double height_m) {
  if (!(weight_kg > 25.0 && weight_kg < 250.0))
    throw ValidationError("weight_kg: must lie in (25, 250), got " + std::to_string(weight_kg));
  // closed at 1.0 so a unit height is computable
  if (!(height_m >= 1.0 && height_m <= 2.5))
    throw ValidationError("height_m: must lie in [1.0, 2.5], got " + std::to_string(height_m));
  return weight_kg / (height_m * height_m);
}

double theoretical_max_hr(int age_years) {
  if (age_years < 10 || age_years > 90)
    throw ValidationError("age: must lie in [10, 90] years, got " + std::to_string(age_years));
  return 220.0 - age_years;
}

}  // namespace vo2
