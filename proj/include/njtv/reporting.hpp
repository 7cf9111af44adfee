#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "njtv/evaluation.hpp"
#include "njtv/registration.hpp"
#include "njtv/simulator.hpp"

namespace njtv {

using nlohmann::json;

inline json to_json(const RigidParams& q, const Affine4& m) {
  json j;
  j["q"] = std::vector<double>(q.begin(), q.end());
  j["matrix"] = std::vector<double>(m.m.begin(), m.m.end());
  return j;
}

inline json to_json(const RegistrationResult& r) {
  json j;
  j["fixed_index"] = r.fixed_index;
  j["final_cost"] = r.final_cost;
  j["channels"] = json::array();
  for (const auto& c : r.channels) {
    json jc = to_json(c.q, c.matrix);
    jc["cost"] = c.cost;
    j["channels"].push_back(jc);
  }
  j["levels"] = json::array();
  for (const auto& l : r.levels) {
    j["levels"].push_back({{"factor", l.factor},
                           {"cost_before", l.cost_before},
                           {"cost_after", l.cost_after},
                           {"cycles", l.cycles},
                           {"evaluations", l.evaluations}});
  }
  return j;
}

inline json to_json(const TrialRecord& t) {
  json j;
  j["trial"] = t.trial;
  j["seed"] = t.seed;
  j["degradations"] = json::array();
  for (const auto& d : t.degradations) {
    j["degradations"].push_back(
        {{"inu", d.inu_magnitude},
         {"downsample_factor", d.downsample_factor},
         {"downsample_axis", d.downsample_axis},
         {"noise_percent", d.noise_percent},
         {"crop_axis", d.crop_axis},
         {"offset", std::vector<double>(d.offset.begin(), d.offset.end())}});
  }
  j["q_true"] = json::array();
  for (const auto& q : t.q_true)
    j["q_true"].push_back(std::vector<double>(q.begin(), q.end()));
  j["estimates"] = json::array();
  for (const auto& e : t.estimates) {
    json je;
    je["method"] = e.method;
    je["ok"] = e.ok;
    if (!e.ok) je["error"] = e.error;
    je["q"] = json::array();
    for (const auto& q : e.q)
      je["q"].push_back(std::vector<double>(q.begin(), q.end()));
    j["estimates"].push_back(je);
  }
  return j;
}

/// Writes content atomically (temp file, then rename).
inline void write_file_atomic(const std::string& path,
                              const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + tmp + " for writing");
    os << content;
    if (!os) throw IoError("write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp + " to " + path);
}

/// Flattens trial records into per-(trial, channel, axis) error rows. The
/// offset regressor is the mean fraction of the maximum simulated shift.
inline std::vector<ErrorRow> error_rows(const std::vector<TrialRecord>& trials,
                                        const DegradationSpec& spec) {
  std::vector<ErrorRow> rows;
  for (const auto& t : trials) {
    for (const auto& est : t.estimates) {
      if (!est.ok) continue;
      for (size_t c = 1; c < t.q_true.size(); ++c) {
        const ParamError pe = param_error(est.q[c], t.q_true[c]);
        const auto& d = t.degradations[c];
        double off_t = 0, off_r = 0;
        for (int i = 0; i < 3; ++i) {
          off_t += std::abs(d.offset[static_cast<size_t>(i)]) /
                   std::max(spec.max_offset_mm, 1e-12);
          off_r += std::abs(d.offset[static_cast<size_t>(i + 3)]) /
                   std::max(spec.max_offset_deg, 1e-12);
        }
        const double offset = (off_t + off_r) / 6.0;
        for (int axis = 0; axis < 3; ++axis) {
          ErrorRow r;
          r.method = est.method;
          r.trial = t.trial;
          r.channel = static_cast<int>(c);
          r.axis = axis;
          r.trans_err_mm = pe.translation_mm[static_cast<size_t>(axis)];
          r.rot_err_deg = pe.rotation_deg[static_cast<size_t>(axis)];
          r.inu = d.inu_magnitude;
          r.noise = d.noise_percent / 100.0;
          r.downsampling = d.downsample_factor;
          r.offset = offset;
          rows.push_back(std::move(r));
        }
      }
    }
  }
  return rows;
}

inline std::string error_csv(const std::vector<ErrorRow>& rows) {
  std::ostringstream os;
  os << "method,trial,channel,axis,trans_err_mm,rot_err_deg,inu,noise,"
        "downsampling,offset\n";
  os.precision(17);
  for (const auto& r : rows) {
    os << r.method << ',' << r.trial << ',' << r.channel << ',' << r.axis
       << ',' << r.trans_err_mm << ',' << r.rot_err_deg << ',' << r.inu
       << ',' << r.noise << ',' << r.downsampling << ',' << r.offset << '\n';
  }
  return os.str();
}

inline std::vector<ErrorRow> parse_error_csv(std::istream& is) {
  std::vector<ErrorRow> rows;
  std::string line;
  if (!std::getline(is, line))
    throw FormatError("error CSV: empty file");
  if (line.rfind("method,", 0) != 0)
    throw FormatError("error CSV: unexpected header: " + line);
  size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> f;
    while (std::getline(ls, field, ',')) f.push_back(field);
    if (f.size() != 10)
      throw FormatError("error CSV: malformed line " + std::to_string(lineno));
    try {
      ErrorRow r;
      r.method = f[0];
      r.trial = std::stoi(f[1]);
      r.channel = std::stoi(f[2]);
      r.axis = std::stoi(f[3]);
      r.trans_err_mm = std::stod(f[4]);
      r.rot_err_deg = std::stod(f[5]);
      r.inu = std::stod(f[6]);
      r.noise = std::stod(f[7]);
      r.downsampling = std::stod(f[8]);
      r.offset = std::stod(f[9]);
      rows.push_back(std::move(r));
    } catch (const std::exception&) {
      throw FormatError("error CSV: malformed line " + std::to_string(lineno));
    }
  }
  return rows;
}

struct MethodSummary {
  std::string method;
  GeometricStats translation, rotation;
  LogLinearFit fit;
  bool fit_ok = false;
  std::string fit_error;
};

/// Per-method geometric mean (s.d.) of absolute errors and the log-linear
/// coefficients of the translation errors.
inline std::vector<MethodSummary> summarize(const std::vector<ErrorRow>& rows) {
  std::map<std::string, std::vector<ErrorRow>> by_method;
  for (const auto& r : rows) by_method[r.method].push_back(r);
  std::vector<MethodSummary> out;
  for (auto& [method, mrows] : by_method) {
    MethodSummary s;
    s.method = method;
    std::vector<double> te, re;
    for (const auto& r : mrows) {
      te.push_back(r.trans_err_mm);
      re.push_back(r.rot_err_deg);
    }
    s.translation = geometric_stats(te);
    s.rotation = geometric_stats(re);
    try {
      s.fit = loglinear_fit(mrows);
      s.fit_ok = true;
    } catch (const std::exception& ex) {
      s.fit_error = ex.what();
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline std::string summary_table(const std::vector<MethodSummary>& summaries) {
  std::ostringstream os;
  os << "method  tr_gmean_mm (gsd)  rot_gmean_deg (gsd)  "
        "intercept  INU  noise  DS  offset\n";
  for (const auto& s : summaries) {
    char buf[256];
    if (s.fit_ok) {
      std::snprintf(buf, sizeof buf,
                    "%-7s %.4g (%.3g)  %.4g (%.3g)  %.4g  %.4g  %.4g  %.4g  "
                    "%.4g\n",
                    s.method.c_str(), s.translation.gmean, s.translation.gsd,
                    s.rotation.gmean, s.rotation.gsd, s.fit.intercept,
                    s.fit.beta_inu, s.fit.beta_noise, s.fit.beta_ds,
                    s.fit.beta_offset);
    } else {
      std::snprintf(buf, sizeof buf, "%-7s %.4g (%.3g)  %.4g (%.3g)  [%s]\n",
                    s.method.c_str(), s.translation.gmean, s.translation.gsd,
                    s.rotation.gmean, s.rotation.gsd, s.fit_error.c_str());
    }
    os << buf;
  }
  return os.str();
}

inline std::string sweep_csv(
    const std::vector<std::pair<double, double>>& rows) {
  std::ostringstream os;
  os << "m,njtv\n";
  os.precision(17);
  for (const auto& [m, val] : rows) os << m << ',' << val << '\n';
  return os.str();
}

}  // namespace njtv
