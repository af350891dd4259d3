#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace mpgrasp {

using Json = nlohmann::json;

/// One telemetry line. `data` holds the type-specific fields.
struct LogRecord {
  double t = 0.0;
  std::string type;  // "event" | "plan" | "sensor" | "control"
  Json data = Json::object();
};

/// Ordered run telemetry, serialized as JSON lines. See docs/telemetry.md.
class RunLog {
 public:
  static constexpr int kSchemaVersion = 1;

  void add(double t, std::string type, Json data);
  void event(double t, const std::string& name, Json data = Json::object());

  const std::vector<LogRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  std::size_t count(std::string_view type) const;
  /// Event records with the given name, in order.
  std::vector<const LogRecord*> events(std::string_view name) const;

  static std::string to_line(const LogRecord& r);
  static LogRecord from_line(const std::string& line);

  void write(std::ostream& out) const;
  std::string to_jsonl() const;
  /// Throws kConfig on malformed lines or a schema version mismatch.
  static RunLog read(std::istream& in);

  /// FNV-1a 64 over the serialized byte stream.
  std::uint64_t hash() const;

 private:
  std::vector<LogRecord> records_;
};

}  // namespace mpgrasp
