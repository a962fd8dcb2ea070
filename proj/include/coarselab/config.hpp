#pragma once
/**
 * config.hpp — experiment configuration files.
 *
 * Line-oriented `key = value` format with `[metric <id>]` section headers.
 * Blank lines and lines starting with '#' are comments.  Global keys come
 * before the first section.  Example:
 *
 *     group   = F(2)
 *     seed    = 20260818
 *     radii   = 4, 6, 8
 *     n_max   = 12
 *     samples = 1000
 *
 *     [metric std]
 *     derivation = word
 *     window     = oracle
 *     radius     = 12
 *     gen        = a @ 0:1 @ 1
 *     gen        = b @ 0:2 @ 1
 *
 * Every parse or validation error names the file and line it came from.
 * A seed is mandatory: no operation in the toolkit draws from wall-clock
 * entropy, so a config without a seed is rejected rather than defaulted.
 */

#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "coarselab/groups.hpp"
#include "coarselab/metrics.hpp"
#include "coarselab/rational.hpp"

namespace coarse {

/** One generator line: label, element key, positive rational weight. */
struct GeneratorDef {
  std::string label;
  std::string element;  // element key, parsed against the group later
  Rat weight{1};
};

/** One `[metric <id>]` section. */
struct MetricDef {
  std::string id;
  Derivation derivation = Derivation::word();
  std::vector<GeneratorDef> gens;
  bool oracle = false;   // window = oracle | ball
  Rat radius{0};         // window radius (word metric)
  std::size_t budget = 400000;
};

/** Parsed and validated experiment configuration. */
struct ExperimentConfig {
  std::string source;      // file name, for error reporting
  std::string group_text;
  GroupSpec group;  // populated from group_text during validation
  bool peripheral_rank1 = false;

  std::uint64_t seed = 0;  // validated: must be set explicitly
  std::string out = "out";

  std::vector<Rat> radii;          // strictly increasing
  long long n_max = 12;
  long long samples = 1000;
  std::vector<std::string> elements;  // ';'-separated element keys

  std::string first, second;      // metric ids for pair subcommands
  std::optional<Rat> sweep_radius;
  std::optional<Rat> delta_threshold;
  std::optional<Rat> coset_slack;
  Rat thickening{1};
  std::vector<Rat> intersection_d;
  std::string coset_rep;          // element key whose peripheral coset is intersected
  long long lift_samples = 50;
  std::optional<std::string> power;  // element key for power quasi-geodesic checks
  Rat quasi_k{2};
  Rat quasi_l{0};

  std::vector<MetricDef> metrics;

  const MetricDef& metric(const std::string& id) const {
    for (const auto& m : metrics)
      if (m.id == id) return m;
    throw ConfigError(source + ": no metric with id '" + id + "'");
  }
};

namespace cfgdetail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) { parts.push_back(trim(cur)); cur.clear(); }
    else cur += c;
  }
  parts.push_back(trim(cur));
  return parts;
}

struct Where {
  const std::string& file;
  int line;
  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(file + ":" + std::to_string(line) + ": " + msg);
  }
};

inline Rat rat(const Where& w, const std::string& key, const std::string& v) {
  try {
    return Rat::parse(v);
  } catch (const ConfigError&) {
    w.fail(key + ": expected a rational, got '" + v + "'");
  }
}

inline long long integer(const Where& w, const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    long long n = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    w.fail(key + ": expected an integer, got '" + v + "'");
  }
}

inline bool flag(const Where& w, const std::string& key, const std::string& v) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  w.fail(key + ": expected true/false, got '" + v + "'");
}

inline std::vector<Rat> rat_list(const Where& w, const std::string& key, const std::string& v) {
  std::vector<Rat> out;
  for (const auto& piece : split(v, ','))
    if (!piece.empty()) out.push_back(rat(w, key, piece));
  return out;
}

inline Derivation derivation(const Where& w, const std::string& v) {
  auto parts = split(v, ' ');
  std::vector<std::string> words;
  for (auto& p : parts)
    if (!p.empty()) words.push_back(p);
  if (words.size() == 1 && words[0] == "word") return Derivation::word();
  if (words.size() == 1 && words[0] == "concave") return Derivation::concave();
  if (words.size() == 2 && words[0] == "additive")
    return Derivation::additive(rat(w, "derivation", words[1]));
  w.fail("derivation: expected 'word', 'concave', or 'additive <c>', got '" + v + "'");
}

}  // namespace cfgdetail

/** Parse a config from a stream.  `name` labels error messages. */
inline ExperimentConfig parse_config(std::istream& in, const std::string& name) {
  using namespace cfgdetail;
  ExperimentConfig cfg;
  cfg.source = name;
  MetricDef* section = nullptr;
  bool group_seen = false, seed_seen = false, radius_seen = false;

  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    Where w{name, lineno};
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;

    if (line.front() == '[') {
      if (line.back() != ']') w.fail("unterminated section header");
      auto inner = split(line.substr(1, line.size() - 2), ' ');
      std::vector<std::string> words;
      for (auto& p : inner)
        if (!p.empty()) words.push_back(p);
      if (words.size() != 2 || words[0] != "metric")
        w.fail("unknown section '" + line + "' (expected [metric <id>])");
      for (const auto& m : cfg.metrics)
        if (m.id == words[1]) w.fail("duplicate metric id '" + words[1] + "'");
      cfg.metrics.push_back(MetricDef{});
      cfg.metrics.back().id = words[1];
      section = &cfg.metrics.back();
      radius_seen = false;
      continue;
    }

    auto eq = line.find('=');
    if (eq == std::string::npos) w.fail("expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) w.fail("empty key");
    if (value.empty()) w.fail(key + ": empty value");

    if (section) {
      if (key == "derivation") section->derivation = derivation(w, value);
      else if (key == "window") {
        if (value == "oracle") section->oracle = true;
        else if (value == "ball") section->oracle = false;
        else w.fail("window: expected 'ball' or 'oracle', got '" + value + "'");
      } else if (key == "radius") {
        section->radius = rat(w, key, value);
        if (section->radius.sign() <= 0) w.fail("radius: must be positive");
        radius_seen = true;
      } else if (key == "budget") {
        long long b = integer(w, key, value);
        if (b <= 0) w.fail("budget: must be positive");
        section->budget = static_cast<std::size_t>(b);
      } else if (key == "gen") {
        auto parts = split(value, '@');
        if (parts.size() != 3)
          w.fail("gen: expected '<label> @ <element> @ <weight>'");
        GeneratorDef g;
        g.label = parts[0];
        g.element = parts[1];
        g.weight = rat(w, key, parts[2]);
        if (g.label.empty()) w.fail("gen: empty label");
        if (g.element.empty()) w.fail("gen: empty element");
        if (g.weight.sign() <= 0) w.fail("gen: weight must be positive");
        section->gens.push_back(std::move(g));
      } else {
        w.fail("unknown metric key '" + key + "'");
      }
      continue;
    }

    if (key == "group") { cfg.group_text = value; group_seen = true; }
    else if (key == "peripheral_rank1") cfg.peripheral_rank1 = flag(w, key, value);
    else if (key == "seed") {
      long long s = integer(w, key, value);
      if (s < 0) w.fail("seed: must be nonnegative");
      cfg.seed = static_cast<std::uint64_t>(s);
      seed_seen = true;
    }
    else if (key == "out") cfg.out = value;
    else if (key == "radii") {
      cfg.radii = rat_list(w, key, value);
      if (cfg.radii.empty()) w.fail("radii: empty list");
      for (std::size_t i = 0; i + 1 < cfg.radii.size(); ++i)
        if (!(cfg.radii[i] < cfg.radii[i + 1]))
          w.fail("radii: must be strictly increasing");
      for (const auto& r : cfg.radii)
        if (r.sign() <= 0) w.fail("radii: entries must be positive");
    }
    else if (key == "n_max") {
      cfg.n_max = integer(w, key, value);
      if (cfg.n_max < 2) w.fail("n_max: must be at least 2");
    }
    else if (key == "samples") {
      cfg.samples = integer(w, key, value);
      if (cfg.samples < 0) w.fail("samples: must be nonnegative");
    }
    else if (key == "elements") {
      for (const auto& piece : split(value, ';'))
        if (!piece.empty()) cfg.elements.push_back(piece);
    }
    else if (key == "first") cfg.first = value;
    else if (key == "second") cfg.second = value;
    else if (key == "sweep_radius") cfg.sweep_radius = rat(w, key, value);
    else if (key == "delta_threshold") cfg.delta_threshold = rat(w, key, value);
    else if (key == "coset_slack") cfg.coset_slack = rat(w, key, value);
    else if (key == "thickening") cfg.thickening = rat(w, key, value);
    else if (key == "intersection_d") cfg.intersection_d = rat_list(w, key, value);
    else if (key == "coset_rep") cfg.coset_rep = value;
    else if (key == "lift_samples") {
      cfg.lift_samples = integer(w, key, value);
      if (cfg.lift_samples <= 0) w.fail("lift_samples: must be positive");
    }
    else if (key == "power") cfg.power = value;
    else if (key == "quasi_k") cfg.quasi_k = rat(w, key, value);
    else if (key == "quasi_l") cfg.quasi_l = rat(w, key, value);
    else w.fail("unknown key '" + key + "'");
  }

  // --- cross-field validation ----------------------------------------------
  auto fail = [&](const std::string& msg) {
    throw ConfigError(name + ": " + msg);
  };
  if (!group_seen) fail("missing mandatory key 'group'");
  if (!seed_seen) fail("missing mandatory key 'seed' (runs must be reproducible)");
  try {
    cfg.group = parse_group(cfg.group_text, cfg.peripheral_rank1);
  } catch (const ConfigError& e) {
    fail(std::string("group: ") + e.what());
  }
  if (cfg.metrics.empty()) fail("at least one [metric <id>] section is required");
  for (auto& m : cfg.metrics) {
    if (m.gens.empty())
      fail("[metric " + m.id + "]: needs at least one gen line");
    if (m.radius.sign() <= 0)
      fail("[metric " + m.id + "]: needs a positive radius");
    std::set<std::string> labels;
    for (const auto& g : m.gens) {
      if (!labels.insert(g.label).second)
        fail("[metric " + m.id + "]: duplicate gen label '" + g.label + "'");
      try {
        Element e = parse_element(cfg.group, g.element);
        if (e == identity())
          fail("[metric " + m.id + "]: gen '" + g.label + "' is the identity");
      } catch (const ConfigError& e) {
        fail("[metric " + m.id + "]: gen '" + g.label + "': " + e.what());
      }
    }
  }
  if (!cfg.first.empty()) cfg.metric(cfg.first);
  if (!cfg.second.empty()) cfg.metric(cfg.second);
  (void)radius_seen;
  return cfg;
}

/** Parse a config file from disk. */
inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse_config(in, path);
}

}  // namespace coarse
