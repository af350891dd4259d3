#include "mpgrasp/run_log.h"

#include <istream>
#include <ostream>
#include <sstream>

#include "mpgrasp/error.h"

namespace mpgrasp {

void RunLog::add(double t, std::string type, Json data) {
  records_.push_back({t, std::move(type), std::move(data)});
}

void RunLog::event(double t, const std::string& name, Json data) {
  data["name"] = name;
  add(t, "event", std::move(data));
}

std::size_t RunLog::count(std::string_view type) const {
  std::size_t n = 0;
  for (const auto& r : records_) n += r.type == type;
  return n;
}

std::vector<const LogRecord*> RunLog::events(std::string_view name) const {
  std::vector<const LogRecord*> out;
  for (const auto& r : records_) {
    if (r.type == "event" && r.data.value("name", "") == name) out.push_back(&r);
  }
  return out;
}

std::string RunLog::to_line(const LogRecord& r) {
  Json j = r.data;
  j["v"] = kSchemaVersion;
  j["t"] = r.t;
  j["type"] = r.type;
  return j.dump();
}

LogRecord RunLog::from_line(const std::string& line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("bad log line: ") + e.what());
  }
  if (!j.is_object() || j.value("v", -1) != kSchemaVersion || !j.contains("t") ||
      !j.contains("type")) {
    throw Error(ErrorCode::kConfig, "log line lacks v/t/type or has another schema");
  }
  LogRecord r;
  r.t = j["t"].get<double>();
  r.type = j["type"].get<std::string>();
  j.erase("v");
  j.erase("t");
  j.erase("type");
  r.data = std::move(j);
  return r;
}

void RunLog::write(std::ostream& out) const {
  for (const auto& r : records_) out << to_line(r) << '\n';
}

std::string RunLog::to_jsonl() const {
  std::ostringstream ss;
  write(ss);
  return ss.str();
}

RunLog RunLog::read(std::istream& in) {
  RunLog log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    log.records_.push_back(from_line(line));
  }
  return log;
}

std::uint64_t RunLog::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& r : records_) {
    for (unsigned char c : to_line(r) + '\n') {
      h ^= c;
      h *= 1099511628211ull;
    }
  }
  return h;
}

}  // namespace mpgrasp
