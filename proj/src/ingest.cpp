#include "vo2/ingest.hpp"

#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vo2/errors.hpp"

namespace vo2 {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string format_number(double v) {
  // to_chars is locale-independent by definition; printf is not
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 6);
  return std::string(buf, res.ptr);
}

void write_text_atomic(const fs::path& path, const std::string& content) {
  const fs::path dir = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + tmp.string());
    out << content;
    if (!out.good()) throw ValidationError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw ValidationError("cannot rename " + tmp.string() + " to " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  cells.push_back(cur);
  return cells;
}

double parse_double(const std::string& cell, long line) {
  double v = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end)
    throw ParseError("not a number: \"" + cell + "\"", line);
  return v;
}

std::int64_t parse_int(const std::string& cell, long line) {
  std::int64_t v = 0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end)
    throw ParseError("not an integer: \"" + cell + "\"", line);
  return v;
}

}  // namespace

SessionRecording read_recording(const fs::path& path, SessionKind kind) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());

  SessionRecording rec;
  rec.kind = kind;

  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file " + path.string(), 1);
  const auto header = split_csv_line(line);

  enum class Layout { hr_only, accel_only, combined };
  Layout layout;
  if (header == std::vector<std::string>{"t_ms", "hr_bpm"}) {
    layout = Layout::hr_only;
  } else if (header == std::vector<std::string>{"t_ms", "ax_g", "ay_g", "az_g"}) {
    layout = Layout::accel_only;
  } else if (header == std::vector<std::string>{"t_ms", "hr_bpm", "ax_g", "ay_g", "az_g"}) {
    layout = Layout::combined;
  } else {
    throw ParseError("unrecognized stream header in " + path.string() + ": \"" + line + "\"", 1);
  }

  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    const std::size_t expected = layout == Layout::hr_only ? 2 : layout == Layout::accel_only ? 4 : 5;
    if (cells.size() != expected)
      throw ParseError("expected " + std::to_string(expected) + " cells, got " +
                           std::to_string(cells.size()),
                       line_no);
    const std::int64_t t = parse_int(cells[0], line_no);
    switch (layout) {
      case Layout::hr_only:
        rec.hr.push_back({t, parse_double(cells[1], line_no)});
        break;
      case Layout::accel_only:
        rec.accel.push_back({t, parse_double(cells[1], line_no), parse_double(cells[2], line_no),
                             parse_double(cells[3], line_no)});
        break;
      case Layout::combined: {
        if (!cells[1].empty()) rec.hr.push_back({t, parse_double(cells[1], line_no)});
        const bool has_accel = !cells[2].empty() || !cells[3].empty() || !cells[4].empty();
        if (has_accel) {
          if (cells[2].empty() || cells[3].empty() || cells[4].empty())
            throw ParseError("partial acceleration row", line_no);
          rec.accel.push_back({t, parse_double(cells[2], line_no), parse_double(cells[3], line_no),
                               parse_double(cells[4], line_no)});
        }
        if (cells[1].empty() && !has_accel) throw ParseError("row carries no reading", line_no);
        break;
      }
    }
  }

  const auto violations = validate_recording(rec);
  if (!violations.empty())
    throw ValidationError("invalid recording " + path.string() + ": " +
                          format_violations(violations));
  return rec;
}

void write_recording(const SessionRecording& rec, const fs::path& path) {
  std::ostringstream os;
  if (!rec.hr.empty() && !rec.accel.empty()) {
    os << "t_ms,hr_bpm,ax_g,ay_g,az_g\n";
    std::size_t ih = 0, ia = 0;
    while (ih < rec.hr.size() || ia < rec.accel.size()) {
      const bool take_hr =
          ia >= rec.accel.size() || (ih < rec.hr.size() && rec.hr[ih].t_ms <= rec.accel[ia].t_ms);
      const bool take_accel =
          ih >= rec.hr.size() || (ia < rec.accel.size() && rec.accel[ia].t_ms <= rec.hr[ih].t_ms);
      const std::int64_t t = take_hr ? rec.hr[ih].t_ms : rec.accel[ia].t_ms;
      os << t << ',';
      if (take_hr) os << format_number(rec.hr[ih].hr_bpm);
      os << ',';
      if (take_accel)
        os << format_number(rec.accel[ia].ax_g) << ',' << format_number(rec.accel[ia].ay_g) << ','
           << format_number(rec.accel[ia].az_g);
      else
        os << ",,";
      os << '\n';
      if (take_hr) ++ih;
      if (take_accel) ++ia;
    }
  } else if (!rec.accel.empty()) {
    os << "t_ms,ax_g,ay_g,az_g\n";
    for (const auto& s : rec.accel)
      os << s.t_ms << ',' << format_number(s.ax_g) << ',' << format_number(s.ay_g) << ','
         << format_number(s.az_g) << '\n';
  } else {
    os << "t_ms,hr_bpm\n";
    for (const auto& s : rec.hr) os << s.t_ms << ',' << format_number(s.hr_bpm) << '\n';
  }
  write_text_atomic(path, os.str());
}

namespace {

Participant participant_from_json(const ordered_json& j) {
  Participant p;
  try {
    p.id = j.at("id").get<std::string>();
    p.gender = gender_from_string(j.at("gender").get<std::string>());
    p.age = j.at("age").get<int>();
    p.height_m = j.at("height_m").get<double>();
    p.weight_kg = j.at("weight_kg").get<double>();
    p.cpet_max_hr = j.at("cpet_max_hr").get<double>();
    if (j.contains("cpet_vo2max") && !j.at("cpet_vo2max").is_null())
      p.cpet_vo2max = j.at("cpet_vo2max").get<double>();
  } catch (const ordered_json::exception& e) {
    throw ParseError(std::string("manifest participant: ") + e.what());
  }
  return p;
}

}  // namespace

CohortManifest read_manifest(const fs::path& path) {
  ordered_json j;
  try {
    j = ordered_json::parse(read_text(path));
  } catch (const ordered_json::exception& e) {
    throw ParseError("manifest " + path.string() + ": " + e.what());
  }
  if (!j.contains("participants") || !j["participants"].is_array())
    throw ParseError("manifest " + path.string() + ": missing \"participants\" array");

  CohortManifest m;
  m.base_dir = path.parent_path();
  std::set<std::string> seen;
  for (const auto& pj : j["participants"]) {
    ManifestEntry e;
    e.participant = participant_from_json(pj);
    require_valid(e.participant);
    if (!seen.insert(e.participant.id).second)
      throw ValidationError("duplicate participant id \"" + e.participant.id + "\"");
    for (const char* field : {"cpet_file", "cpsjt_file"}) {
      if (!pj.contains(field))
        throw ValidationError("participant \"" + e.participant.id + "\": missing " + field);
    }
    e.cpet_file = pj.at("cpet_file").get<std::string>();
    e.cpsjt_file = pj.at("cpsjt_file").get<std::string>();
    if (pj.contains("cpet_recovery_start_ms"))
      e.cpet_recovery_start_ms = pj.at("cpet_recovery_start_ms").get<std::int64_t>();
    if (pj.contains("cpsjt_recovery_start_ms"))
      e.cpsjt_recovery_start_ms = pj.at("cpsjt_recovery_start_ms").get<std::int64_t>();
    for (const auto& f : {e.cpet_file, e.cpsjt_file}) {
      if (!fs::exists(m.base_dir / f))
        throw ValidationError("participant \"" + e.participant.id + "\": missing file " +
                              (m.base_dir / f).string());
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

std::string manifest_to_json(const CohortManifest& manifest) {
  ordered_json j;
  j["participants"] = ordered_json::array();
  for (const auto& e : manifest.entries) {
    ordered_json pj;
    pj["id"] = e.participant.id;
    pj["gender"] = to_string(e.participant.gender);
    pj["age"] = e.participant.age;
    pj["height_m"] = e.participant.height_m;
    pj["weight_kg"] = e.participant.weight_kg;
    pj["cpet_max_hr"] = e.participant.cpet_max_hr;
    if (e.participant.cpet_vo2max) pj["cpet_vo2max"] = *e.participant.cpet_vo2max;
    pj["cpet_file"] = e.cpet_file.generic_string();
    pj["cpsjt_file"] = e.cpsjt_file.generic_string();
    if (e.cpet_recovery_start_ms) pj["cpet_recovery_start_ms"] = *e.cpet_recovery_start_ms;
    if (e.cpsjt_recovery_start_ms) pj["cpsjt_recovery_start_ms"] = *e.cpsjt_recovery_start_ms;
    j["participants"].push_back(std::move(pj));
  }
  return j.dump(2) + "\n";
}

void write_manifest(const CohortManifest& manifest, const fs::path& path) {
  write_text_atomic(path, manifest_to_json(manifest));
}

SessionRecording load_session(const CohortManifest& manifest, const ManifestEntry& entry,
                              SessionKind kind) {
  const auto& file = kind == SessionKind::cpet ? entry.cpet_file : entry.cpsjt_file;
  auto rec = read_recording(manifest.base_dir / file, kind);
  rec.participant_id = entry.participant.id;
  rec.recovery_start_ms =
      kind == SessionKind::cpet ? entry.cpet_recovery_start_ms : entry.cpsjt_recovery_start_ms;
  if (rec.recovery_start_ms) {
    const auto violations = validate_recording(rec);
    if (!violations.empty())
      throw ValidationError("invalid recording " + file.string() + ": " +
                            format_violations(violations));
  }
  return rec;
}

void write_feature_table(const std::vector<FeatureVector>& rows, const fs::path& path) {
  if (rows.empty()) throw ValidationError("empty table");
  std::ostringstream os;
  const auto& cols = feature_table_columns();
  for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "," : "") << cols[c];
  os << '\n';
  for (const auto& r : rows) {
    os << r.id << ',' << r.gender_code << ',' << format_number(r.bmi) << ','
       << format_number(r.aerobic_s) << ',' << format_number(r.anaerobic_s) << ','
       << format_number(r.endured_raw_s) << ',' << format_number(r.endured_interp_s) << ',';
    os << (r.hrr30 ? format_number(*r.hrr30) : "") << ',';
    os << (r.hrr60 ? format_number(*r.hrr60) : "") << ',';
    os << (r.hrr120 ? format_number(*r.hrr120) : "") << ',';
    os << (r.vo2max ? format_number(*r.vo2max) : "") << '\n';
  }
  write_text_atomic(path, os.str());
}

std::vector<FeatureVector> read_feature_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file " + path.string(), 1);
  {
    const auto header = split_csv_line(line);
    if (header != feature_table_columns())
      throw ParseError("unexpected feature-table header in " + path.string(), 1);
  }
  std::vector<FeatureVector> rows;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != feature_table_columns().size())
      throw ParseError("expected " + std::to_string(feature_table_columns().size()) +
                           " cells, got " + std::to_string(cells.size()),
                       line_no);
    FeatureVector r;
    r.id = cells[0];
    r.gender_code = static_cast<int>(parse_int(cells[1], line_no));
    r.bmi = parse_double(cells[2], line_no);
    r.aerobic_s = parse_double(cells[3], line_no);
    r.anaerobic_s = parse_double(cells[4], line_no);
    r.endured_raw_s = parse_double(cells[5], line_no);
    r.endured_interp_s = parse_double(cells[6], line_no);
    if (!cells[7].empty()) r.hrr30 = parse_double(cells[7], line_no);
    if (!cells[8].empty()) r.hrr60 = parse_double(cells[8], line_no);
    if (!cells[9].empty()) r.hrr120 = parse_double(cells[9], line_no);
    if (!cells[10].empty()) r.vo2max = parse_double(cells[10], line_no);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace vo2
