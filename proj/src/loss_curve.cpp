#include "tslab/loss_curve.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tslab/errors.hpp"

namespace tslab {

void LossCurve::validate() const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!std::isfinite(points[i].loss) || !std::isfinite(points[i].tokens_seen)) {
      throw ContractError("curve '" + run_id + "' has a non-finite point at index " + std::to_string(i));
    }
    if (i > 0 && !(points[i].tokens_seen > points[i - 1].tokens_seen)) {
      throw ContractError("curve '" + run_id + "': tokens_seen not strictly increasing at index " + std::to_string(i));
    }
  }
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

namespace {

std::string row(const std::string& run_id, std::int64_t seed, const LossPoint& p) {
  return run_id + "," + std::to_string(seed) + "," + format_number(p.tokens_seen) + "," + format_number(p.loss) + "\n";
}

template <class T>
T parse_field(const std::string& field, const std::string& where, const char* what) {
  T v{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError(where + ": " + what + " '" + field + "' is not a number");
  }
  return v;
}

}  // namespace

void write_curve_csv(const LossCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << kCurveHeader << '\n';
  for (const auto& p : curve.points) out << row(curve.run_id, curve.seed, p);
  if (!out) throw Error("failed writing " + path.string());
}

void append_curve_row(const std::filesystem::path& path, const std::string& run_id, std::int64_t seed,
                      const LossPoint& point) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error("cannot open " + path.string() + " for appending");
  if (fresh) out << kCurveHeader << '\n';
  out << row(run_id, seed, point);
  out.flush();
  if (!out) throw Error("failed writing " + path.string());
}

LossCurve read_curve_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open loss curve " + path.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCurveHeader) {
    throw ParseError(path.string() + ":1: expected header '" + std::string(kCurveHeader) + "'");
  }
  LossCurve curve;
  std::size_t line_no = 1;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 4) throw ParseError(where + ": expected 4 fields, got " + std::to_string(fields.size()));
    const auto seed = parse_field<std::int64_t>(fields[1], where, "seed");
    if (first) {
      curve.run_id = fields[0];
      curve.seed = seed;
      first = false;
    } else if (fields[0] != curve.run_id) {
      throw ParseError(where + ": run_id '" + fields[0] + "' differs from '" + curve.run_id + "'");
    }
    curve.points.push_back({parse_field<double>(fields[2], where, "tokens_seen"),
                            parse_field<double>(fields[3], where, "val_loss")});
  }
  try {
    curve.validate();
  } catch (const ContractError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return curve;
}

}  // namespace tslab
