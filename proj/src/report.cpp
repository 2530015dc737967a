#include "escalate/report.hpp"

#include <json.hpp>

#include <charconv>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace escalate {

using ordered_json = nlohmann::ordered_json;

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 6);
  if (ec != std::errc{}) throw std::runtime_error("format_number: value does not fit");
  return std::string(buf, end);
}

namespace {

constexpr StopReason kAllReasons[] = {
    StopReason::kSufficientInformation, StopReason::kLowestUnsafe, StopReason::kHighestVerySafe,
    StopReason::kPrecision,             StopReason::kHardSafety,   StopReason::kMaxPatients,
};

StopReason reason_from_string(const std::string& name) {
  for (StopReason r : kAllReasons)
    if (name == to_string(r)) return r;
  throw std::runtime_error("unknown stop reason '" + name + "'");
}

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::runtime_error("record " + path + ": " + what);
}

void reject_unknown(const ordered_json& obj, const std::string& path,
                    std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) known |= it.key() == k;
    if (!known) fail(path + "." + it.key(), "unknown key");
  }
}

const ordered_json* find(const ordered_json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double as_double(const ordered_json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

int as_int(const ordered_json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  return v.get<int>();
}

bool as_bool(const ordered_json& v, const std::string& path) {
  if (!v.is_boolean()) fail(path, "expected a boolean");
  return v.get<bool>();
}

std::string as_string(const ordered_json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

std::string hash_to_hex(std::uint64_t h) {
  char buf[19];
  int n = std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(h));
  return std::string(buf, buf + n);
}

std::uint64_t hex_to_hash(const std::string& s, const std::string& path) {
  if (s.rfind("0x", 0) != 0) fail(path, "expected an 0x-prefixed hash");
  std::uint64_t out = 0;
  auto [end, ec] = std::from_chars(s.data() + 2, s.data() + s.size(), out, 16);
  if (ec != std::errc{} || end != s.data() + s.size()) fail(path, "malformed hash");
  return out;
}

ordered_json reasons_json(const std::vector<StopReason>& reasons) {
  ordered_json arr = ordered_json::array();
  for (StopReason r : reasons) arr.push_back(to_string(r));
  return arr;
}

std::vector<StopReason> parse_reasons(const ordered_json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of stop reasons");
  std::vector<StopReason> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(reason_from_string(as_string(v[i], path + "[" + std::to_string(i) + "]")));
  return out;
}

ordered_json patient_json(const PatientRecord& p) {
  ordered_json j;
  j["id"] = p.id;
  j["z"] = p.z;
  j["dose_level"] = p.dose_level;
  j["enroll_cycle"] = p.enroll_cycle;
  j["off_study"] = p.off_study;
  ordered_json outs = ordered_json::array();
  for (const CycleOutcome& o : p.outcomes) {
    ordered_json oj;
    oj["dlt"] = o.dlt;
    oj["max_grade"] = o.max_grade;
    oj["type_grades"] = {o.type_grades[0], o.type_grades[1], o.type_grades[2]};
    outs.push_back(std::move(oj));
  }
  j["outcomes"] = std::move(outs);
  return j;
}

PatientRecord parse_patient(const ordered_json& v, const std::string& path, int index) {
  if (!v.is_object()) fail(path, "expected an object");
  reject_unknown(v, path, {"id", "z", "dose_level", "enroll_cycle", "off_study", "outcomes"});
  PatientRecord p;
  p.id = index;
  if (const ordered_json* w = find(v, "id")) p.id = as_int(*w, path + ".id");
  if (const ordered_json* w = find(v, "z")) p.z = as_double(*w, path + ".z");
  const ordered_json* dose = find(v, "dose_level");
  if (!dose) fail(path, "missing 'dose_level'");
  p.dose_level = as_int(*dose, path + ".dose_level");
  if (const ordered_json* w = find(v, "enroll_cycle")) p.enroll_cycle = as_int(*w, path + ".enroll_cycle");
  const ordered_json* outs = find(v, "outcomes");
  if (!outs || !outs->is_array()) fail(path, "missing 'outcomes' array");
  for (std::size_t i = 0; i < outs->size(); ++i) {
    const std::string op = path + ".outcomes[" + std::to_string(i) + "]";
    const ordered_json& o = (*outs)[i];
    if (!o.is_object()) fail(op, "expected an object");
    reject_unknown(o, op, {"dlt", "max_grade", "type_grades"});
    CycleOutcome oc;
    if (const ordered_json* w = find(o, "dlt")) oc.dlt = as_bool(*w, op + ".dlt");
    if (const ordered_json* w = find(o, "max_grade")) oc.max_grade = as_int(*w, op + ".max_grade");
    if (const ordered_json* w = find(o, "type_grades")) {
      if (!w->is_array() || w->size() != 3) fail(op + ".type_grades", "expected 3 grades");
      for (int t = 0; t < 3; ++t) oc.type_grades[t] = as_int((*w)[t], op + ".type_grades");
    }
    if (oc.dlt && oc.max_grade < 3) oc.max_grade = 3;
    p.outcomes.push_back(oc);
  }
  p.off_study = !p.outcomes.empty() && p.outcomes.back().dlt;
  if (const ordered_json* w = find(v, "off_study")) p.off_study = as_bool(*w, path + ".off_study");
  return p;
}

const char* kind_name(DoseDecision::Kind k) {
  switch (k) {
    case DoseDecision::Kind::kAssign: return "assign";
    case DoseDecision::Kind::kStay: return "stay";
    case DoseDecision::Kind::kStop: return "stop";
  }
  return "?";
}

DoseDecision::Kind kind_from_name(const std::string& s, const std::string& path) {
  if (s == "assign") return DoseDecision::Kind::kAssign;
  if (s == "stay") return DoseDecision::Kind::kStay;
  if (s == "stop") return DoseDecision::Kind::kStop;
  fail(path, "unknown decision kind '" + s + "'");
}

ordered_json decision_json(const DecisionTrace& t) {
  ordered_json j;
  j["clock"] = t.clock;
  j["new_exclusion"] = t.new_exclusion;
  j["raw"] = kind_name(t.raw.kind);
  j["raw_level"] = t.raw.level;
  if (!t.raw.reasons.empty()) j["raw_reasons"] = reasons_json(t.raw.reasons);
  j["assigned"] = t.assigned;
  j["stops"] = reasons_json(t.stops);
  j["prob_above"] = t.prob_above;
  if (t.cv)
    j["cv"] = *t.cv;
  else
    j["cv"] = nullptr;
  return j;
}

DecisionTrace parse_decision(const ordered_json& v, const std::string& path) {
  if (!v.is_object()) fail(path, "expected an object");
  reject_unknown(v, path,
                 {"clock", "new_exclusion", "raw", "raw_level", "raw_reasons", "assigned", "stops",
                  "prob_above", "cv"});
  DecisionTrace t;
  if (const ordered_json* w = find(v, "clock")) t.clock = as_int(*w, path + ".clock");
  if (const ordered_json* w = find(v, "new_exclusion")) t.new_exclusion = as_bool(*w, path + ".new_exclusion");
  if (const ordered_json* w = find(v, "raw")) t.raw.kind = kind_from_name(as_string(*w, path + ".raw"), path + ".raw");
  if (const ordered_json* w = find(v, "raw_level")) t.raw.level = as_int(*w, path + ".raw_level");
  if (const ordered_json* w = find(v, "raw_reasons")) t.raw.reasons = parse_reasons(*w, path + ".raw_reasons");
  if (const ordered_json* w = find(v, "assigned")) t.assigned = as_int(*w, path + ".assigned");
  if (const ordered_json* w = find(v, "stops")) t.stops = parse_reasons(*w, path + ".stops");
  if (const ordered_json* w = find(v, "prob_above")) {
    if (!w->is_array()) fail(path + ".prob_above", "expected an array");
    for (std::size_t i = 0; i < w->size(); ++i)
      t.prob_above.push_back(as_double((*w)[i], path + ".prob_above"));
  }
  if (const ordered_json* w = find(v, "cv"); w && !w->is_null()) t.cv = as_double(*w, path + ".cv");
  return t;
}

}  // namespace

void write_metrics_csv(std::ostream& os, const std::vector<StudyRow>& rows) {
  os << "design,scenario,setting,replications,flagged,pcs,benchmark_pcs,"
        "mean_duration_weeks,sd_duration_weeks,mean_patients,sd_patients\n";
  for (const StudyRow& r : rows) {
    const StudyMetrics& m = r.metrics;
    os << r.design << ',' << r.scenario << ',' << r.setting << ',' << m.replications << ','
       << m.flagged << ',' << format_number(m.pcs) << ',' << format_number(m.benchmark_pcs) << ','
       << format_number(m.mean_duration) << ',' << format_number(m.sd_duration) << ','
       << format_number(m.mean_patients) << ',' << format_number(m.sd_patients) << '\n';
  }
}

void write_allocations_csv(std::ostream& os, const std::vector<StudyRow>& rows) {
  std::size_t levels = rows.empty() ? 0 : rows.front().metrics.mean_allocations.size();
  os << "design,scenario";
  for (std::size_t j = 0; j < levels; ++j) os << ",dose_" << j + 1;
  os << '\n';
  for (const StudyRow& r : rows) {
    os << r.design << ',' << r.scenario;
    for (double a : r.metrics.mean_allocations) os << ',' << format_number(a);
    os << '\n';
  }
}

void write_stops_csv(std::ostream& os, const std::vector<StudyRow>& rows) {
  os << "design,scenario";
  for (StopReason r : kAllReasons) os << ',' << to_string(r);
  os << '\n';
  for (const StudyRow& r : rows) {
    os << r.design << ',' << r.scenario;
    for (StopReason reason : kAllReasons)
      os << ',' << format_number(r.metrics.stop_percent[stop_reason_index(reason)]);
    os << '\n';
  }
}

void write_record(std::ostream& os, const TrialRecord& rec) {
  ordered_json j;
  j["design"] = rec.design;
  j["scenario"] = rec.scenario;
  j["seed"] = rec.seed;
  j["replication"] = rec.replication;
  ordered_json pats = ordered_json::array();
  for (const PatientRecord& p : rec.patients) pats.push_back(patient_json(p));
  j["patients"] = std::move(pats);
  if (!rec.decisions.empty()) {
    ordered_json decs = ordered_json::array();
    for (const DecisionTrace& t : rec.decisions) decs.push_back(decision_json(t));
    j["decisions"] = std::move(decs);
  }
  if (rec.result) {
    const TrialResult& res = *rec.result;
    ordered_json rj;
    if (res.recommendation)
      rj["recommendation"] = *res.recommendation;
    else
      rj["recommendation"] = nullptr;
    rj["duration_weeks"] = res.duration_weeks;
    rj["n_patients"] = res.n_patients;
    rj["allocations"] = res.allocations;
    rj["stop_reasons"] = reasons_json(res.stop_reasons);
    rj["n_dlt"] = res.n_dlt;
    rj["flagged"] = res.flagged;
    rj["stream_hash"] = hash_to_hex(res.stream_hash);
    j["result"] = std::move(rj);
  }
  os << j.dump() << '\n';
}

TrialRecord parse_record(const std::string& line) {
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const ordered_json::parse_error& e) {
    throw std::runtime_error(std::string("record parse: ") + e.what());
  }
  if (!j.is_object()) throw std::runtime_error("record: expected a JSON object per line");
  reject_unknown(j, "record",
                 {"design", "scenario", "seed", "replication", "patients", "decisions", "result"});
  TrialRecord rec;
  if (const ordered_json* w = find(j, "design")) rec.design = as_string(*w, "record.design");
  if (const ordered_json* w = find(j, "scenario")) rec.scenario = as_string(*w, "record.scenario");
  if (const ordered_json* w = find(j, "seed")) {
    if (!w->is_number_integer()) fail("record.seed", "expected an integer");
    rec.seed = w->get<std::uint64_t>();
  }
  if (const ordered_json* w = find(j, "replication")) rec.replication = as_int(*w, "record.replication");
  const ordered_json* pats = find(j, "patients");
  if (!pats || !pats->is_array()) throw std::runtime_error("record: missing 'patients' array");
  for (std::size_t i = 0; i < pats->size(); ++i)
    rec.patients.push_back(
        parse_patient((*pats)[i], "record.patients[" + std::to_string(i) + "]", static_cast<int>(i)));
  if (const ordered_json* w = find(j, "decisions")) {
    if (!w->is_array()) fail("record.decisions", "expected an array");
    for (std::size_t i = 0; i < w->size(); ++i)
      rec.decisions.push_back(parse_decision((*w)[i], "record.decisions[" + std::to_string(i) + "]"));
  }
  if (const ordered_json* w = find(j, "result")) {
    const std::string path = "record.result";
    reject_unknown(*w, path,
                   {"recommendation", "duration_weeks", "n_patients", "allocations", "stop_reasons",
                    "n_dlt", "flagged", "stream_hash"});
    TrialResult res;
    if (const ordered_json* x = find(*w, "recommendation"); x && !x->is_null())
      res.recommendation = as_int(*x, path + ".recommendation");
    if (const ordered_json* x = find(*w, "duration_weeks")) res.duration_weeks = as_double(*x, path + ".duration_weeks");
    if (const ordered_json* x = find(*w, "n_patients")) res.n_patients = as_int(*x, path + ".n_patients");
    if (const ordered_json* x = find(*w, "allocations")) {
      if (!x->is_array()) fail(path + ".allocations", "expected an array");
      for (std::size_t i = 0; i < x->size(); ++i)
        res.allocations.push_back(as_int((*x)[i], path + ".allocations"));
    }
    if (const ordered_json* x = find(*w, "stop_reasons")) res.stop_reasons = parse_reasons(*x, path + ".stop_reasons");
    if (const ordered_json* x = find(*w, "n_dlt")) res.n_dlt = as_int(*x, path + ".n_dlt");
    if (const ordered_json* x = find(*w, "flagged")) res.flagged = as_bool(*x, path + ".flagged");
    if (const ordered_json* x = find(*w, "stream_hash")) res.stream_hash = hex_to_hash(as_string(*x, path + ".stream_hash"), path + ".stream_hash");
    rec.result = std::move(res);
  }
  return rec;
}

std::vector<TrialRecord> read_records(std::istream& is) {
  std::vector<TrialRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(parse_record(line));
    } catch (const std::exception& e) {
      throw std::runtime_error("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

TrialRecord read_history(std::istream& is) {
  TrialRecord rec;
  std::string line;
  std::size_t lineno = 0;
  bool full_record = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const ordered_json::parse_error& e) {
      throw std::runtime_error("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.is_object()) throw std::runtime_error("line " + std::to_string(lineno) + ": expected an object");
    try {
      if (find(j, "patients")) {
        if (full_record || !rec.patients.empty())
          throw std::runtime_error("a full record must be the only line");
        rec = parse_record(line);
        full_record = true;
      } else {
        if (full_record) throw std::runtime_error("patient lines cannot follow a full record");
        rec.patients.push_back(
            parse_patient(j, "patient", static_cast<int>(rec.patients.size())));
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rec;
}

TrialState reconstruct_state(const std::vector<PatientRecord>& patients, int clock,
                             const TrialConfig& trial) {
  if (clock < 0) {
    clock = 0;
    for (const PatientRecord& p : patients)
      clock = std::max(clock, p.enroll_cycle + p.cycles_observed());
  }
  TrialState st;
  st.clock = clock;
  for (const PatientRecord& p : patients) {
    if (p.enroll_cycle >= clock) continue;  // not yet enrolled at this decision
    PatientRecord q = p;
    int visible = std::min<int>(q.cycles_observed(), clock - q.enroll_cycle);
    visible = std::min(visible, trial.cycles);
    q.outcomes.resize(visible);
    q.off_study = !q.outcomes.empty() && q.outcomes.back().dlt;
    st.patients.push_back(std::move(q));
  }

  // cohorts in enrollment order restore the dose pointer and the
  // consecutive-cohort count the rolling rule needs
  std::map<int, std::pair<int, int>> cohorts;  // enroll cycle -> (dose, size)
  for (const PatientRecord& p : st.patients) {
    auto [it, fresh] = cohorts.try_emplace(p.enroll_cycle, p.dose_level, 0);
    if (!fresh && it->second.first != p.dose_level)
      throw std::runtime_error("reconstruct_state: mixed doses inside one enrollment cycle");
    ++it->second.second;
  }
  st.current_dose = 0;
  st.consecutive_at_current = 0;
  for (auto it = cohorts.begin(); it != cohorts.end(); ++it) {
    auto [dose, size] = it->second;
    if (it == cohorts.begin() || dose != st.current_dose) {
      st.current_dose = dose;
      st.consecutive_at_current = size;
    } else {
      st.consecutive_at_current += size;
    }
  }
  return st;
}

std::vector<std::string> replay_mismatches(const TrialRecord& rec, const Design& design,
                                           const DoseGrid& grid, const TrialConfig& trial,
                                           const RuleConfig& rules) {
  std::vector<std::string> issues;
  std::set<int> carried_exclusions;
  for (std::size_t i = 0; i < rec.decisions.size(); ++i) {
    const DecisionTrace& logged = rec.decisions[i];
    TrialState st = reconstruct_state(rec.patients, logged.clock, trial);
    st.excluded_doses = carried_exclusions;
    DesignContext ctx{&grid, &trial, decision_fit_key(rec.seed, rec.replication, logged.clock)};
    DecisionTrace fresh = decide_next(st, design, ctx, trial, rules);
    carried_exclusions = st.excluded_doses;

    auto complain = [&](const std::string& what) {
      issues.push_back("decision at clock " + std::to_string(logged.clock) + ": " + what);
    };
    if (fresh.raw.kind != logged.raw.kind)
      complain(std::string("engine proposed '") + kind_name(fresh.raw.kind) + "' vs logged '" +
               kind_name(logged.raw.kind) + "'");
    else if (fresh.raw.kind == DoseDecision::Kind::kAssign && fresh.raw.level != logged.raw.level)
      complain("engine level " + std::to_string(fresh.raw.level) + " vs logged " +
               std::to_string(logged.raw.level));
    if (fresh.assigned != logged.assigned)
      complain("assigned " + std::to_string(fresh.assigned) + " vs logged " +
               std::to_string(logged.assigned));
    if (fresh.stops != logged.stops) complain("stopping rules differ");
    if (fresh.new_exclusion != logged.new_exclusion) complain("hard-safety enforcement differs");
    if (fresh.prob_above != logged.prob_above) complain("rule posteriors differ");
    if (fresh.cv.has_value() != logged.cv.has_value() ||
        (fresh.cv && *fresh.cv != *logged.cv))
      complain("precision cv differs");
  }
  return issues;
}

}  // namespace escalate
