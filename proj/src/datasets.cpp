#include "tslab/datasets.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "tslab/errors.hpp"
#include "tslab/rng.hpp"

namespace tslab {

namespace {

void check_range(const Range& r, const char* name) {
  if (!(r.lo <= r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi)) {
    throw ConfigError(std::string(name) + " range must satisfy lo <= hi");
  }
}

double draw(Rng& rng, const Range& r) { return r.lo == r.hi ? r.lo : rng.uniform(r.lo, r.hi); }

std::string trim_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (n_series <= 0) throw ConfigError("n_series must be positive");
  if (length <= 0) throw ConfigError("series length must be positive");
  if (n_sinusoids < 0) throw ConfigError("n_sinusoids must be non-negative");
  check_range(trend_slope, "trend_slope");
  check_range(period, "period");
  check_range(amplitude, "amplitude");
  if (period.lo <= 0.0) throw ConfigError("periods must be positive");
  if (!(std::abs(ar_coefficient) < 1.0)) throw ConfigError("ar_coefficient must lie in (-1, 1)");
  if (!(noise_scale >= 0.0)) throw ConfigError("noise_scale must be non-negative");
}

std::vector<Series> generate_series(const SyntheticSpec& spec) {
  spec.validate();
  std::vector<Series> out;
  out.reserve(static_cast<std::size_t>(spec.n_series));
  for (int s = 0; s < spec.n_series; ++s) {
    Rng rng(Rng::derive(spec.seed, static_cast<std::uint64_t>(s)));
    const double slope = draw(rng, spec.trend_slope);
    std::vector<double> amp, per, phase;
    for (int k = 0; k < spec.n_sinusoids; ++k) {
      amp.push_back(draw(rng, spec.amplitude));
      per.push_back(draw(rng, spec.period));
      phase.push_back(rng.uniform(0.0, 2.0 * std::numbers::pi));
    }
    const double phi = spec.ar_coefficient;
    double e = spec.noise_scale * rng.normal() / std::sqrt(1.0 - phi * phi);
    Series series;
    series.name = "synthetic_" + std::to_string(s);
    series.values.resize(static_cast<std::size_t>(spec.length));
    for (int t = 0; t < spec.length; ++t) {
      if (t > 0) e = phi * e + spec.noise_scale * rng.normal();
      double x = slope * t + e;
      for (std::size_t k = 0; k < amp.size(); ++k) {
        x += amp[k] * std::sin(2.0 * std::numbers::pi * t / per[k] + phase[k]);
      }
      series.values[static_cast<std::size_t>(t)] = static_cast<float>(x);
    }
    out.push_back(std::move(series));
  }
  return out;
}

CsvLoadResult load_csv(const std::vector<std::filesystem::path>& paths) {
  CsvLoadResult result;
  for (const auto& path : paths) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    const std::string where = path.string();
    std::string line;
    if (!std::getline(in, line)) throw ParseError(where + ":1: empty file, expected header 'timestamp,value'");
    if (trim_cr(line) != "timestamp,value") {
      throw ParseError(where + ":1: expected header 'timestamp,value', got '" + trim_cr(line) + "'");
    }
    Series series;
    series.name = path.stem().string();
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      line = trim_cr(line);
      if (line.empty()) continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
        throw ParseError(where + ":" + std::to_string(line_no) + ": expected 2 fields 'timestamp,value'");
      }
      const std::string field = line.substr(comma + 1);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size() || field.empty() || !std::isfinite(v)) {
        throw ParseError(where + ":" + std::to_string(line_no) + ": value '" + field + "' is not a finite number");
      }
      series.timestamps.push_back(line.substr(0, comma));
      series.values.push_back(static_cast<float>(v));
    }
    if (series.values.empty()) result.warnings.push_back(where + ": no data rows");
    result.series.push_back(std::move(series));
  }
  return result;
}

void write_csv(const Series& series, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "timestamp,value\n";
  char buf[64];
  for (std::size_t t = 0; t < series.values.size(); ++t) {
    if (t < series.timestamps.size()) {
      out << series.timestamps[t];
    } else {
      out << t;
    }
    const auto res = std::to_chars(buf, buf + sizeof buf, series.values[t]);
    out << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)) << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

std::pair<std::vector<Series>, std::vector<Series>> split_series(const std::vector<Series>& all, double val_fraction,
                                                                 std::uint64_t seed) {
  if (all.size() < 2) throw ConfigError("need at least 2 series to hold out a validation set");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("validation fraction must lie in (0, 1)");
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(all.size()) * val_fraction));
  n_val = std::clamp<std::size_t>(n_val, 1, all.size() - 1);
  std::vector<Series> train, val;
  for (std::size_t i = 0; i < order.size(); ++i) (i < n_val ? val : train).push_back(all[order[i]]);
  return {std::move(train), std::move(val)};
}

std::string generate_corpus(std::size_t bytes, std::uint64_t seed) {
  Rng rng(seed);
  const std::vector<std::string> onsets{"b", "c", "d", "f", "g", "h", "l", "m", "n", "p", "r", "s", "t", "v", "w",
                                        "st", "tr", "pl", "ch", "sh", "th", "gr", "br", "cl"};
  const std::vector<std::string> vowels{"a", "e", "i", "o", "u", "ea", "ou", "ai", "ie", "oo"};
  const std::vector<std::string> codas{"", "", "n", "r", "s", "t", "l", "m", "nd", "st", "ck", "ng"};
  auto make_word = [&](int syllables) {
    std::string w;
    for (int i = 0; i < syllables; ++i) {
      w += onsets[rng.below(onsets.size())];
      w += vowels[rng.below(vowels.size())];
      w += codas[rng.below(codas.size())];
    }
    return w;
  };
  auto lexicon = [&](std::size_t n, int max_syl) {
    std::vector<std::string> v;
    for (std::size_t i = 0; i < n; ++i) v.push_back(make_word(1 + static_cast<int>(rng.below(max_syl))));
    return v;
  };
  const std::vector<std::string> det{"the", "a", "every", "some", "this", "that", "one", "no"};
  const std::vector<std::string> prep{"in", "on", "under", "near", "with", "from", "over", "after"};
  const std::vector<std::string> conj{"and", "but", "so", "while", "because"};
  const auto nouns = lexicon(300, 3);
  const auto verbs = lexicon(150, 2);
  const auto adjs = lexicon(100, 2);
  auto pick = [&](const std::vector<std::string>& v) -> const std::string& { return v[rng.below(v.size())]; };

  auto noun_phrase = [&] {
    std::string s = pick(det) + " ";
    if (rng.uniform() < 0.4) s += pick(adjs) + " ";
    s += pick(nouns);
    if (rng.uniform() < 0.3) s += "s";
    return s;
  };
  auto clause = [&] {
    std::string s = noun_phrase() + " " + pick(verbs) + "s";
    if (rng.uniform() < 0.7) s += " " + noun_phrase();
    if (rng.uniform() < 0.35) s += " " + pick(prep) + " " + noun_phrase();
    if (rng.uniform() < 0.15) s += " " + std::to_string(rng.below(1000)) + " times";
    return s;
  };

  std::string text;
  text.reserve(bytes + 256);
  int in_paragraph = 0;
  while (text.size() < bytes) {
    std::string sentence = clause();
    if (rng.uniform() < 0.3) sentence += ", " + pick(conj) + " " + clause();
    sentence[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(sentence[0])));
    sentence += rng.uniform() < 0.9 ? "." : "?";
    text += sentence;
    if (++in_paragraph >= 4 + static_cast<int>(rng.below(5))) {
      text += "\n";
      in_paragraph = 0;
    } else {
      text += " ";
    }
  }
  text.resize(bytes);
  return text;
}

}  // namespace tslab
