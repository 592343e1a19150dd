#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "tpp/verify.hpp"

namespace tpp::verify {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string o = "\"";
  for (char c : s) {
    if (c == '"') o += '"';
    o += c;
  }
  return o + '"';
}

}  // namespace

std::string format_text(const std::vector<Result>& results) {
  std::ostringstream o;
  int failed = 0;
  for (const auto& r : results) {
    failed += !r.pass;
    o << (r.pass ? "PASS " : "FAIL ");
    if (r.criterion > 0)
      o << "[" << (r.criterion < 10 ? " " : "") << r.criterion << "] ";
    else
      o << "[--] ";
    o << r.name << ": " << r.metric << " " << num(r.measured) << " (budget " << num(r.budget) << "), "
      << num(r.seconds) << " s of " << num(r.time_limit) << " s; " << r.detail << "\n";
  }
  o << (failed ? "FAILED " : "OK ") << results.size() - static_cast<std::size_t>(failed) << "/" << results.size()
    << " suites passed\n";
  return o.str();
}

std::string format_json(const std::vector<Result>& results, const Config& cfg) {
  nlohmann::ordered_json j;
  j["format"] = "tpp-verify";
  j["version"] = 1;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["max_nodes"] = cfg.max_nodes;
  bool all = true;
  auto& arr = j["results"] = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    all = all && r.pass;
    arr.push_back({{"name", r.name},
                   {"criterion", r.criterion},
                   {"pass", r.pass},
                   {"metric", r.metric},
                   {"measured", r.measured},
                   {"budget", r.budget},
                   {"seconds", r.seconds},
                   {"time_limit", r.time_limit},
                   {"detail", r.detail}});
  }
  j["pass"] = all;
  return j.dump(2) + "\n";
}

std::string format_csv(const std::vector<Result>& results) {
  std::ostringstream o;
  o << "name,criterion,pass,metric,measured,budget,seconds,time_limit,detail\n";
  for (const auto& r : results)
    o << r.name << ',' << r.criterion << ',' << (r.pass ? 1 : 0) << ',' << csv_field(r.metric) << ','
      << num(r.measured) << ',' << num(r.budget) << ',' << num(r.seconds) << ',' << num(r.time_limit) << ','
      << csv_field(r.detail) << '\n';
  return o.str();
}

}  // namespace tpp::verify
