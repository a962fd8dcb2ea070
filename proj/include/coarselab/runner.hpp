#pragma once
/**
 * runner.hpp — experiment drivers behind the command-line tool.
 *
 * Each subcommand takes a validated ExperimentConfig plus output/cache
 * directories, writes CSV/summary artifacts, and returns a process exit
 * code:
 *
 *   0  success
 *   1  finding-level failure (an acceptance row failed)
 *   2  usage / configuration / stale-cache errors
 *   3  budget or window-size limits hit
 *
 * Every random draw flows from the config seed through named substreams,
 * and all file output goes through deterministic formatters, so reruns of
 * the same config are byte-identical.  Ball windows are built through a
 * shared cache lifecycle: load-or-enumerate, then a structural 1% audit and
 * an exact-oracle spot check on every run — stale or corrupted cache files
 * are refused, never silently repaired.
 */

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "coarselab/comparison.hpp"
#include "coarselab/config.hpp"
#include "coarselab/csv.hpp"
#include "coarselab/groups.hpp"
#include "coarselab/hyperbolicity.hpp"
#include "coarselab/metrics.hpp"
#include "coarselab/relhyp.hpp"
#include "coarselab/rng.hpp"
#include "coarselab/spectrum.hpp"
#include "coarselab/surd.hpp"

namespace coarse {
namespace run {

constexpr int kOk = 0;
constexpr int kFinding = 1;
constexpr int kUsage = 2;
constexpr int kBudget = 3;

struct Paths {
  std::string out;    // artifact directory
  std::string cache;  // ball cache directory ("" = keep balls in memory)
};

// ---------------------------------------------------------------------------
// Window construction with the cache lifecycle
// ---------------------------------------------------------------------------

/** Bookkeeping for one ball build: where it came from and how it audited. */
struct BallBuild {
  Window window;
  std::size_t elements = 0;
  bool from_cache = false;
  std::string file;  // cache path ("" when kept in memory)
  AuditReport audit;
  std::size_t oracle_checked = 0;  // stride-sampled exact-oracle comparisons
};

/** Totals across every ball built in one run (acceptance row 10 evidence). */
struct AuditRegistry {
  std::size_t builds = 0;
  std::size_t from_cache = 0;
  std::size_t audit_checked = 0;
  std::size_t audit_mismatches = 0;
  std::size_t oracle_checked = 0;
};

/**
 * Load the ball from `cache_dir` when a file for this metric/radius exists,
 * otherwise enumerate it (and save it when a cache directory is given).
 * Either way the ball is audited: a seeded 1% structural audit plus an
 * exact-oracle spot check on a deterministic stride of keys. Any mismatch
 * raises CacheMismatch — a bad cache is an error, not a rebuild trigger.
 */
inline BallBuild make_ball_window(const MetricSpec& metric, const Rat& radius,
                                  std::size_t budget, std::uint64_t seed,
                                  const std::string& cache_dir,
                                  AuditRegistry* reg = nullptr) {
  std::string file;
  std::optional<Ball> ball;
  bool cached = false;
  if (!cache_dir.empty()) {
    std::filesystem::create_directories(cache_dir);
    file = (std::filesystem::path(cache_dir) / cache_file_name(metric, radius)).string();
    if (std::filesystem::exists(file)) {
      std::ifstream in(file, std::ios::binary);
      if (!in) throw ConfigError("cannot read cache file: " + file);
      ball = load_ball(metric, in);
      cached = true;
    }
  }
  if (!ball) {
    ball = enumerate_ball(metric, radius, budget);
    if (!file.empty()) {
      std::ofstream out(file, std::ios::binary);
      if (!out) throw ConfigError("cannot write cache file: " + file);
      save_ball(*ball, metric, out);
    }
  }

  AuditReport audit = audit_ball(*ball, metric, seed);
  if (audit.mismatches > 0) {
    std::string what = "audit found " + std::to_string(audit.mismatches) + " mismatches in " +
                       (cached ? file : std::string("a freshly enumerated ball"));
    throw CacheMismatch(what);
  }
  std::size_t oracle_checked = 0, oracle_bad = 0;
  if (ball->size() > 0) {
    std::size_t stride = std::max<std::size_t>(1, ball->size() / 64);
    std::size_t i = 0;
    ball->for_each([&](const std::string&, const Element& g, const Rat& d) {
      if (i++ % stride) return;
      auto exact = point_distance(metric, g);
      if (!exact) return;
      ++oracle_checked;
      if (*exact != d) ++oracle_bad;
    });
  }
  if (oracle_bad > 0)
    throw CacheMismatch("exact-oracle cross-check failed on " + std::to_string(oracle_bad) +
                        " of " + std::to_string(oracle_checked) + " sampled keys");

  BallBuild b{Window::enumerated(metric, std::move(*ball)), 0, cached, file, audit,
              oracle_checked};
  b.elements = b.window.ball()->size();
  if (reg) {
    ++reg->builds;
    if (cached) ++reg->from_cache;
    reg->audit_checked += audit.checked;
    reg->audit_mismatches += audit.mismatches;
    reg->oracle_checked += oracle_checked;
  }
  return b;
}

inline std::vector<Generator> generators_for(const GroupSpec& spec, const MetricDef& def) {
  std::vector<Generator> gens;
  for (const GeneratorDef& g : def.gens)
    gens.push_back(Generator{g.label, parse_element(spec, g.element), g.weight});
  return gens;
}

/** Build one configured metric and its window (cache lifecycle included). */
inline BallBuild make_window(const ExperimentConfig& cfg, const MetricDef& def,
                             const std::string& cache_dir, AuditRegistry* reg = nullptr) {
  MetricSpec metric = build_metric(cfg.group, generators_for(cfg.group, def), def.derivation);
  if (def.oracle) {
    BallBuild b{Window::free_oracle(metric, def.radius), 0, false, "", AuditReport{}, 0};
    return b;
  }
  return make_ball_window(metric, def.radius, def.budget, cfg.seed, cache_dir, reg);
}

inline bool has_relative_structure(const GroupSpec& spec) {
  try {
    return !spec.peripherals().empty();
  } catch (const ConfigError&) {
    return false;
  }
}

// ---------------------------------------------------------------------------
// Small output helpers
// ---------------------------------------------------------------------------

namespace rundetail {

inline std::ofstream open_text(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file: " + p.string());
  return out;
}

inline std::string opt_rat(const std::optional<Rat>& v) { return v ? v->str() : ""; }

inline const MetricDef& pick_first(const ExperimentConfig& cfg) {
  return cfg.first.empty() ? cfg.metrics.at(0) : cfg.metric(cfg.first);
}

inline const MetricDef& pick_second(const ExperimentConfig& cfg) {
  if (!cfg.second.empty()) return cfg.metric(cfg.second);
  if (cfg.metrics.size() < 2)
    throw ConfigError(cfg.source + ": this subcommand needs two metrics (or 'second = <id>')");
  return cfg.metrics.at(1);
}

inline std::vector<Element> parsed_elements(const ExperimentConfig& cfg) {
  std::vector<Element> out;
  for (const std::string& key : cfg.elements) out.push_back(parse_element(cfg.group, key));
  return out;
}

}  // namespace rundetail

// ---------------------------------------------------------------------------
// Subcommand: ball
// ---------------------------------------------------------------------------

inline int run_ball(const ExperimentConfig& cfg, const Paths& paths) {
  std::filesystem::create_directories(paths.out);
  // for this subcommand the whole point is the cache file: default it to out/
  std::string cache = paths.cache.empty() ? paths.out : paths.cache;
  csv::Writer table((std::filesystem::path(paths.out) / "ball_summary.csv").string(),
                    {"metric", "window", "radius", "elements", "cache_file", "audit_checked",
                     "audit_mismatches", "oracle_checked"});
  for (const MetricDef& def : cfg.metrics) {
    if (def.oracle) {
      table.row({def.id, "oracle", def.radius.str(), "", "", "", "", ""});
      std::cout << "ball " << def.id << ": oracle window, radius " << def.radius.str()
                << " (nothing to cache)\n";
      continue;
    }
    BallBuild b = make_window(cfg, def, cache);
    table.row({def.id, "ball", def.radius.str(), csv::num(b.elements),
               std::filesystem::path(b.file).filename().string(), csv::num(b.audit.checked),
               csv::num(b.audit.mismatches), csv::num(b.oracle_checked)});
    std::cout << "ball " << def.id << ": " << b.elements << " elements, radius "
              << def.radius.str() << (b.from_cache ? " (from cache, audited)" : " (enumerated)")
              << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// Subcommand: spectrum
// ---------------------------------------------------------------------------

inline int run_spectrum(const ExperimentConfig& cfg, const Paths& paths) {
  if (cfg.elements.empty())
    throw ConfigError(cfg.source + ": spectrum needs 'elements = <key>; <key>; ...'");
  std::filesystem::create_directories(paths.out);
  std::vector<Element> els = rundetail::parsed_elements(cfg);

  std::map<std::string, Window> wins;
  for (const MetricDef& def : cfg.metrics)
    wins.emplace(def.id, make_window(cfg, def, paths.cache).window);

  csv::Writer table((std::filesystem::path(paths.out) / "spectrum.csv").string(),
                    {"element", "metric-id", "upper", "recent_slope", "exact", "verdict"});
  for (const MetricDef& def : cfg.metrics) {
    auto entries = spectrum_table(wins.at(def.id), els, cfg.n_max);
    for (const SpectrumEntry& e : entries)
      table.row({serialize(e.g), def.id, e.est.upper.str(), e.est.recent_slope.str(),
                 rundetail::opt_rat(e.est.exact), hyp_class_name(e.cls)});
  }

  if (cfg.metrics.size() >= 2) {
    const MetricDef& da = rundetail::pick_first(cfg);
    const MetricDef& db = rundetail::pick_second(cfg);
    SpectrumComparison cmp = compare_spectra(wins.at(da.id), wins.at(db.id), els, cfg.n_max);
    auto out = rundetail::open_text(std::filesystem::path(paths.out) / "spectrum_summary.txt");
    out << "first = " << da.id << "\n";
    out << "second = " << db.id << "\n";
    out << "verdict = " << verdict_name(cmp.verdict) << "\n";
    out << "witness = " << (cmp.witness ? serialize(cmp.rows[*cmp.witness].g) : "-") << "\n";
    for (const SpectrumComparisonRow& r : cmp.rows) {
      auto ba = certified_bracket(r.a);
      auto bb = certified_bracket(r.b);
      out << "row " << serialize(r.g) << ": a=[" << ba.first.str() << "," << ba.second.str()
          << "] b=[" << bb.first.str() << "," << bb.second.str() << "]"
          << (r.certified_different ? " certified-different" : "")
          << (r.exact_equal ? " exact-equal" : "") << (r.insufficient ? " insufficient" : "");
      if (!r.note.empty()) out << " (" << r.note << ")";
      out << "\n";
    }
    std::cout << "spectrum comparison: " << verdict_name(cmp.verdict) << "\n";
  } else {
    std::cout << "spectrum table written for " << cfg.metrics.size() << " metric\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// Subcommand: compare
// ---------------------------------------------------------------------------

inline int run_compare(const ExperimentConfig& cfg, const Paths& paths) {
  std::filesystem::create_directories(paths.out);
  const MetricDef& da = rundetail::pick_first(cfg);
  const MetricDef& db = rundetail::pick_second(cfg);
  MetricPair pair(make_window(cfg, da, paths.cache).window,
                  make_window(cfg, db, paths.cache).window);
  if (cfg.radii.empty())
    throw ConfigError(cfg.source + ": compare needs 'radii = r1, r2, ...' (three or more)");

  DeltaReport prof = coarse_equality_verdict(pair, cfg.radii);
  {
    csv::Writer table((std::filesystem::path(paths.out) / "delta_profile.csv").string(),
                      {"radius", "max_abs", "argmax", "evaluated"});
    for (const ProfileRow& r : prof.rows)
      table.row({r.radius.str(), r.max_abs.str(), r.argmax, csv::num(r.evaluated)});
  }

  auto out = rundetail::open_text(std::filesystem::path(paths.out) / "compare_summary.txt");
  out << "first = " << da.id << "\n";
  out << "second = " << db.id << "\n";
  out << "verdict = " << to_string(prof.verdict) << "\n";
  if (prof.verdict == GrowthVerdict::Bounded) out << "bound = " << prof.bound.str() << "\n";
  if (prof.verdict == GrowthVerdict::Growing) {
    out << "shape = " << prof.shape << "\n";
    out << "rate = " << csv::num(prof.rate) << "\n";
    out << "residual = " << csv::num(prof.residual) << "\n";
    out << "range = " << csv::num(prof.range) << "\n";
  }

  const PairFit& fit = pair.fit();
  out << "c_hat = " << fit.c_hat.str() << " at " << fit.c_witness << "\n";
  out << "l_hat = " << csv::num(fit.l_hat) << " at " << fit.l_witness << "\n";
  out << "evaluated = " << fit.evaluated << "\n";

  TriangleReport tri = triangle_check(pair, cfg.samples, cfg.seed);
  out << "triangle_samples = " << tri.samples << "\n";
  out << "triangle_violations = " << tri.violations << "\n";
  out << "triangle_min_slack = " << tri.min_slack.str() << " at " << tri.witness << "\n";

  // additivity along first-metric geodesics: configured elements, or a
  // deterministic seeded draw from the shared half-window pool
  std::vector<Element> targets;
  if (!cfg.elements.empty()) {
    targets = rundetail::parsed_elements(cfg);
  } else {
    auto strata = cmpdetail::half_pool(pair);
    Substream rng(cfg.seed, "compare-targets");
    long long want = std::min<long long>(cfg.samples, 50);
    for (long long i = 0; i < want; ++i) targets.push_back(cmpdetail::draw(strata, rng));
  }
  AdditivityScan scan = additivity_scan(pair, targets);
  out << "additivity_paths = " << scan.paths << "\n";
  out << "additivity_points = " << scan.points << "\n";
  out << "additivity_max_defect = " << scan.max_defect.str() << " at " << scan.witness << "\n";

  if (has_relative_structure(cfg.group)) {
    int factor = cfg.group.peripherals().front();
    CosetId coset = coset_of(cfg.group, factor, identity());
    std::vector<Element> zs =
        cfg.elements.empty() ? std::vector<Element>{identity()}
                             : rundetail::parsed_elements(cfg);
    ConstancyReport con = coset_constancy(pair, coset, cfg.thickening, zs);
    out << "constancy_l_hat = " << con.l_hat.str() << " at " << con.witness << "\n";
    out << "constancy_coset_points = " << con.coset_points << "\n";
    LipschitzReport lip = relative_lipschitz(pair, cfg.samples, cfg.seed);
    out << "lipschitz_p_hat = " << lip.p_hat.str() << " at " << lip.witness << "\n";
    out << "lipschitz_samples = " << lip.samples << "\n";
    out << "lipschitz_skipped = " << lip.skipped << "\n";
  }

  std::cout << "compare: " << to_string(prof.verdict) << ", c_hat = " << fit.c_hat.str()
            << ", triangle violations = " << tri.violations << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// Subcommand: hyperbolicity
// ---------------------------------------------------------------------------

inline int run_hyperbolicity(const ExperimentConfig& cfg, const Paths& paths) {
  std::filesystem::create_directories(paths.out);
  const MetricDef& da = rundetail::pick_first(cfg);
  if (da.oracle)
    throw ConfigError(cfg.source +
                      ": hyperbolicity needs a ball window for the first metric "
                      "(oracle windows cannot be sampled shell by shell)");
  Window w1 = make_window(cfg, da, paths.cache).window;

  DeltaEstimate est = estimate_delta(w1, cfg.samples, cfg.seed);
  auto out = rundetail::open_text(std::filesystem::path(paths.out) / "hyperbolicity_summary.txt");
  out << "metric = " << da.id << "\n";
  out << "delta_hat = " << est.delta_hat.str() << "\n";
  out << "delta_witness = " << est.witness << "\n";
  out << "delta_checked = " << est.checked << "\n";
  out << "delta_skipped = " << est.skipped << "\n";
  out << "delta_exhaustive = " << (est.exhaustive ? "yes" : "no") << "\n";

  if (cfg.metrics.size() >= 2) {
    const MetricDef& db = rundetail::pick_second(cfg);
    MetricPair pair(w1, make_window(cfg, db, paths.cache).window);
    // samples = 0 means "exhaustive" for the delta estimate; fellow traveling
    // is always sampled, so fall back to a fixed draw count there
    long long fellow_samples = cfg.samples > 0 ? cfg.samples : 250;
    FellowReport fel = fellow_travel(pair, fellow_samples, cfg.seed, cfg.coset_slack);
    csv::Writer table((std::filesystem::path(paths.out) / "fellow.csv").string(),
                      {"element", "out1", "out2", "excluded", "excursion"});
    for (const FellowRow& r : fel.rows)
      table.row({r.g, r.out1.str(), r.out2.str(), csv::num(r.excluded), r.excursion.str()});
    out << "fellow_c = " << fel.c_fellow.str() << " at " << fel.witness << "\n";
    out << "fellow_excluded = " << fel.excluded_total << "\n";
    out << "fellow_excursion_max = " << fel.excursion_max.str() << "\n";
    out << "fellow_samples = " << fel.samples_drawn << "\n";
  }

  if (cfg.power) {
    Element f = parse_element(cfg.group, *cfg.power);
    QuasiGeodesicFit fit =
        check_quasi_geodesic(w1, f, cfg.n_max, cfg.quasi_k, cfg.quasi_l);
    out << "power = " << *cfg.power << "\n";
    out << "power_qg_holds = " << (fit.holds ? "yes" : "no") << "\n";
    out << "power_qg_k_best = " << fit.k_best.str() << "\n";
    out << "power_qg_l_best = " << fit.l_best.str() << "\n";
    out << "power_qg_used = " << fit.used << "\n";
    out << "power_qg_truncated = " << (fit.truncated ? "yes" : "no") << "\n";
    if (has_relative_structure(cfg.group)) {
      QuasiGeodesicFit rel = check_quasi_geodesic_relative(w1.metric(), f, cfg.n_max,
                                                           cfg.quasi_k, cfg.quasi_l);
      out << "power_qg_rel_holds = " << (rel.holds ? "yes" : "no") << "\n";
      out << "power_qg_rel_k_best = " << rel.k_best.str() << "\n";
      out << "power_qg_rel_l_best = " << rel.l_best.str() << "\n";
    }
  }

  std::cout << "hyperbolicity: delta_hat = " << est.delta_hat.str()
            << (est.exhaustive ? " (exhaustive)" : " (sampled)") << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// Subcommand: relhyp
// ---------------------------------------------------------------------------

inline int run_relhyp(const ExperimentConfig& cfg, const Paths& paths) {
  std::filesystem::create_directories(paths.out);
  const MetricDef& da = rundetail::pick_first(cfg);
  if (da.oracle)
    throw ConfigError(cfg.source + ": relhyp needs a ball window for the first metric");
  BallBuild b = make_window(cfg, da, paths.cache);
  const Window& win = b.window;
  const GroupSpec& spec = cfg.group;
  if (!has_relative_structure(spec))
    throw ConfigError(cfg.source + ": relhyp needs a group with peripheral factors");

  // every window element, breadth-first distance cross-checked in-library
  // against the syllable formula
  std::map<std::string, long long> rel = relative_distances(win);
  long long rel_max = 0;
  {
    csv::Writer table((std::filesystem::path(paths.out) / "relative_distances.csv").string(),
                      {"element", "relative", "word"});
    for (const auto& [key, d] : rel) {
      table.row({key, csv::num(d), win.ball()->word_distance(key).str()});
      rel_max = std::max(rel_max, d);
    }
  }

  // projections of the configured elements onto each peripheral identity coset
  long long proj_rows = 0, proj_skipped = 0;
  {
    csv::Writer table((std::filesystem::path(paths.out) / "projections.csv").string(),
                      {"element", "factor", "dist", "diameter", "points", "note"});
    for (const std::string& key : cfg.elements) {
      Element g = parse_element(spec, key);
      for (int factor : spec.peripherals()) {
        CosetId coset = coset_of(spec, factor, identity());
        try {
          ProjectionReport p = coset_projection(win, coset, g);
          table.row({key, csv::num(static_cast<long long>(factor)), p.dist.str(),
                     p.diameter.str(), csv::num(p.points.size()), ""});
          ++proj_rows;
        } catch (const WindowTooSmall& e) {
          table.row({key, csv::num(static_cast<long long>(factor)), "", "", "",
                     std::string(e.what())});
          ++proj_skipped;
        }
      }
    }
  }

  // coset-neighborhood intersections across the configured sweep radii
  long long inter_rows = 0;
  if (!cfg.intersection_d.empty()) {
    if (cfg.coset_rep.empty())
      throw ConfigError(cfg.source + ": intersections need 'coset_rep = <element-key>'");
    if (cfg.radii.empty())
      throw ConfigError(cfg.source + ": intersections need 'radii = ...' sweep radii");
    int factor = spec.peripherals().front();
    CosetId a = coset_of(spec, factor, identity());
    CosetId bc = coset_of(spec, factor, parse_element(spec, cfg.coset_rep));
    csv::Writer table((std::filesystem::path(paths.out) / "intersections.csv").string(),
                      {"d", "sweep_radius", "points", "diameter"});
    for (const Rat& D : cfg.intersection_d)
      for (const Rat& R : cfg.radii) {
        IntersectionReport rep = coset_intersection_diameter(win.metric(), a, bc, D, R);
        table.row({D.str(), R.str(), csv::num(rep.points.size()), rep.diameter.str()});
        ++inter_rows;
      }
  }

  // lifted relative geodesics to seeded sample endpoints
  std::vector<std::string> keys;
  win.for_each([&](const std::string& key, const Element&, const Rat&) {
    if (key != serialize(identity())) keys.push_back(key);
  });
  Substream rng(cfg.seed, "lift-sample");
  std::set<std::pair<std::string, std::string>> fits;
  long long jumps_total = 0;
  {
    csv::Writer table((std::filesystem::path(paths.out) / "lifts.csv").string(),
                      {"element", "relative", "word", "lambda", "eps", "jumps"});
    for (long long i = 0; i < cfg.lift_samples; ++i) {
      const std::string& key = keys[static_cast<std::size_t>(rng.below(keys.size()))];
      Element g = win.ball()->element(key);
      RelPath rp = relative_geodesic(win, g);
      LiftReport lift = lift_relative_geodesic(win, rp);
      table.row({key, csv::num(rp.length()), lift.path.total.str(), lift.lambda_hat.str(),
                 lift.eps_hat.str(), csv::num(lift.jumps)});
      fits.insert({lift.lambda_hat.str(), lift.eps_hat.str()});
      jumps_total += lift.jumps;
    }
  }

  auto out = rundetail::open_text(std::filesystem::path(paths.out) / "relhyp_summary.txt");
  out << "metric = " << da.id << "\n";
  out << "window_elements = " << win.ball()->size() << "\n";
  out << "relative_checked = " << rel.size() << "\n";
  out << "relative_max = " << rel_max << "\n";
  out << "projection_rows = " << proj_rows << "\n";
  out << "projection_skipped = " << proj_skipped << "\n";
  out << "intersection_rows = " << inter_rows << "\n";
  out << "lift_samples = " << cfg.lift_samples << "\n";
  out << "lift_distinct_fits = " << fits.size() << "\n";
  out << "lift_jumps_total = " << jumps_total << "\n";

  std::cout << "relhyp: " << rel.size() << " relative distances validated, "
            << fits.size() << " distinct lift fit(s)\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// Subcommand: witness
// ---------------------------------------------------------------------------

inline int run_witness(const ExperimentConfig& cfg, const Paths& paths) {
  std::filesystem::create_directories(paths.out);
  if (!cfg.sweep_radius)
    throw ConfigError(cfg.source + ": witness needs 'sweep_radius = <r>'");
  if (!cfg.delta_threshold)
    throw ConfigError(cfg.source + ": witness needs 'delta_threshold = <t>'");
  const MetricDef& da = rundetail::pick_first(cfg);
  const MetricDef& db = rundetail::pick_second(cfg);
  MetricPair pair(make_window(cfg, da, paths.cache).window,
                  make_window(cfg, db, paths.cache).window);

  WitnessReport rep =
      witness_search(pair, *cfg.sweep_radius, cfg.n_max, *cfg.delta_threshold);

  {
    csv::Writer table((std::filesystem::path(paths.out) / "witness_powers.csv").string(),
                      {"n", "delta", "d1", "d2", "relative"});
    for (const WitnessPowerRow& r : rep.powers)
      table.row({csv::num(r.n), r.delta.str(), r.d1.str(), r.d2.str(),
                 r.rel ? csv::num(*r.rel) : ""});
  }

  auto out = rundetail::open_text(std::filesystem::path(paths.out) / "witness_summary.txt");
  out << "verdict = " << to_string(rep.verdict) << "\n";
  out << "scanned = " << rep.scanned << "\n";
  out << "max_delta = " << rep.max_delta.str() << "\n";
  out << "g = " << serialize(rep.g) << " (delta " << rep.delta_g.str() << ")\n";
  out << "h = " << serialize(rep.h) << " (delta " << rep.delta_h.str() << ")\n";
  out << "k = " << serialize(rep.k)
      << (rep.delta_k ? " (delta " + rep.delta_k->str() + ")" : " (delta uncertified)") << "\n";
  out << "delta_hat = " << rep.delta_hat.str() << "\n";
  if (rep.relative_mode) out << "delta_hat_rel = " << rep.delta_hat_rel.str() << "\n";
  for (const WitnessCandidate& c : rep.candidates) {
    out << "candidate " << c.name << ": passed = " << (c.passed ? "yes" : "no")
        << ", k_best = " << c.fit.k_best.str() << ", l_best = " << c.fit.l_best.str()
        << ", exceeds_claim = " << (c.exceeds_claim ? "yes" : "no");
    if (c.rel_fit)
      out << ", rel_k_best = " << c.rel_fit->k_best.str()
          << ", rel_l_best = " << c.rel_fit->l_best.str();
    out << "\n";
  }
  out << "chosen = " << (rep.chosen.empty() ? "-" : rep.chosen) << "\n";
  out << "f = " << serialize(rep.f) << "\n";
  out << "slope = " << rep.slope.str() << "\n";
  out << "residual = " << rep.residual.str() << "\n";
  out << "truncated = " << (rep.truncated ? "yes" : "no") << "\n";
  if (!rep.note.empty()) out << "note = " << rep.note << "\n";

  std::cout << "witness: " << to_string(rep.verdict) << ", slope = " << rep.slope.str()
            << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// Acceptance battery
// ---------------------------------------------------------------------------

struct RowOutcome {
  int index = 0;
  std::string title;
  bool pass = false;
  std::string detail;
};

namespace acc {

/** Assertion collector for one acceptance row. */
struct Check {
  bool ok = true;
  std::vector<std::string> fails;
  std::vector<std::string> notes;
  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      fails.push_back(what);
    }
  }
  void note(const std::string& s) { notes.push_back(s); }
  std::string detail() const {
    std::string out;
    for (const std::string& f : fails) out += (out.empty() ? "" : "; ") + ("FAILED " + f);
    for (const std::string& n : notes) out += (out.empty() ? "" : "; ") + n;
    return out;
  }
};

/** All groups, metrics, and windows the battery shares, built once. */
struct Bench {
  std::uint64_t seed;
  std::string cache_dir;
  AuditRegistry reg;

  GroupSpec z = parse_group("Z^1");
  GroupSpec f2 = parse_group("F(2)");
  GroupSpec z2 = parse_group("Z^2");
  GroupSpec zz = parse_group("Z^2 * Z^1");
  GroupSpec h3 = parse_group("H3");

  // elements used across rows
  Element a, b, ab, z2_11, zz_t, h3_z;

  MetricSpec z23, z_std, z_add;
  MetricSpec f2_std, f2_token, f2_add, f2_cc;
  MetricSpec z2_std, z2_diag, z2_add;
  MetricSpec zz_std, zz_diag, zz_add;
  MetricSpec h3_std;

  Window z23_200, z_w12, z_a12;
  Window f2_o8, f2_o12, f2_o24, f2_add_o8, f2_add_o24, f2_cc_o8, f2_cc_o90;
  Window f2_b5, token8;
  Window z2_s4, z2_s8, z2_s12, z2_s24, z2_d12, z2_d24, z2_a12;
  Window zz_s6, zz_s8, zz_d6, zz_a6;
  Window h3_b12;

  Element el(const GroupSpec& spec, const std::string& key) { return parse_element(spec, key); }

  Window ball(const MetricSpec& m, long long radius, std::size_t budget = 400000) {
    return make_ball_window(m, Rat(radius), budget, seed, cache_dir, &reg).window;
  }

  static MetricSpec metric(const GroupSpec& spec,
                           std::vector<std::pair<std::string, std::string>> gens,
                           Derivation der = Derivation::word()) {
    std::vector<Generator> gg;
    for (auto& [label, key] : gens)
      gg.push_back(Generator{label, parse_element(spec, key), Rat(1)});
    return build_metric(spec, std::move(gg), der);
  }

  explicit Bench(std::uint64_t seed_, std::string cache_dir_)
      : seed(seed_),
        cache_dir(std::move(cache_dir_)),
        a(parse_element(f2, "0:1")),
        b(parse_element(f2, "0:2")),
        ab(parse_element(f2, "0:1,2")),
        z2_11(parse_element(z2, "0:1,1")),
        zz_t(parse_element(zz, "1:1")),
        h3_z(parse_element(h3, "0:0,0,1")),
        z23(metric(z, {{"two", "0:2"}, {"three", "0:3"}})),
        z_std(metric(z, {{"u", "0:1"}})),
        z_add(metric(z, {{"u", "0:1"}}, Derivation::additive(Rat(1)))),
        f2_std(metric(f2, {{"a", "0:1"}, {"b", "0:2"}})),
        f2_token(metric(f2, {{"a", "0:1"}, {"b", "0:2"}, {"ab", "0:1,2"}})),
        f2_add(metric(f2, {{"a", "0:1"}, {"b", "0:2"}}, Derivation::additive(Rat(1)))),
        f2_cc(metric(f2, {{"a", "0:1"}, {"b", "0:2"}}, Derivation::concave())),
        z2_std(metric(z2, {{"x", "0:1,0"}, {"y", "0:0,1"}})),
        z2_diag(metric(z2, {{"x", "0:1,0"}, {"y", "0:0,1"}, {"d", "0:1,1"}})),
        z2_add(metric(z2, {{"x", "0:1,0"}, {"y", "0:0,1"}}, Derivation::additive(Rat(1)))),
        zz_std(metric(zz, {{"x", "0:1,0"}, {"y", "0:0,1"}, {"t", "1:1"}})),
        zz_diag(metric(zz, {{"x", "0:1,0"}, {"y", "0:0,1"}, {"t", "1:1"}, {"d", "0:1,1"}})),
        zz_add(metric(zz, {{"x", "0:1,0"}, {"y", "0:0,1"}, {"t", "1:1"}},
                      Derivation::additive(Rat(1)))),
        h3_std(metric(h3, {{"x", "0:1,0,0"}, {"y", "0:0,1,0"}})),
        z23_200(ball(z23, 200)),
        z_w12(ball(z_std, 12)),
        z_a12(ball(z_add, 12)),
        f2_o8(Window::free_oracle(f2_std, Rat(8))),
        f2_o12(Window::free_oracle(f2_std, Rat(12))),
        f2_o24(Window::free_oracle(f2_std, Rat(24))),
        f2_add_o8(Window::free_oracle(f2_add, Rat(8))),
        f2_add_o24(Window::free_oracle(f2_add, Rat(24))),
        f2_cc_o8(Window::free_oracle(f2_cc, Rat(8))),
        f2_cc_o90(Window::free_oracle(f2_cc, Rat(90))),
        f2_b5(ball(f2_std, 5)),
        token8(ball(f2_token, 8)),
        z2_s4(ball(z2_std, 4)),
        z2_s8(ball(z2_std, 8)),
        z2_s12(ball(z2_std, 12)),
        z2_s24(ball(z2_std, 24)),
        z2_d12(ball(z2_diag, 12)),
        z2_d24(ball(z2_diag, 24)),
        z2_a12(ball(z2_add, 12)),
        zz_s6(ball(zz_std, 6)),
        zz_s8(ball(zz_std, 8)),
        zz_d6(ball(zz_diag, 6)),
        zz_a6(ball(zz_add, 6)),
        h3_b12(ball(h3_std, 12)) {}

  MetricPair token_pair() const { return MetricPair(f2_o12, token8); }
  MetricPair z2_pair12() const { return MetricPair(z2_s12, z2_d12); }
  MetricPair z2_pair24() const { return MetricPair(z2_s24, z2_d24); }
  MetricPair z_add_pair() const { return MetricPair(z_w12, z_a12); }
  MetricPair f2_add_pair8() const { return MetricPair(f2_o8, f2_add_o8); }
  MetricPair cc_pair8() const { return MetricPair(f2_o8, f2_cc_o8); }
  MetricPair zz_pair6() const { return MetricPair(zz_s6, zz_d6); }
  MetricPair zz_add_pair6() const { return MetricPair(zz_s6, zz_a6); }
  MetricPair zz_pair86() const { return MetricPair(zz_s8, zz_d6); }
};

// --- row 1: Burago bracket on Z with generators {±2, ±3} -------------------

inline RowOutcome row1(Bench& B) {
  Check c;
  std::vector<Element> gs;
  for (long long k = 1; k <= 10; ++k) gs.push_back(B.el(B.z, "0:" + std::to_string(k)));
  BuragoReport rep = burago_check(B.z23_200, gs, 60);
  c.expect(!rep.any_growth, "deviation growth flagged");
  c.expect(rep.c_hat <= Surd(Rat(2)), "C_hat exceeds 2 (got " + rep.c_hat.str() + ")");
  for (const BuragoElementReport& e : rep.elements) {
    c.expect(e.n_used == 60 && !e.truncated,
             "power run truncated at " + serialize(e.g));
    c.expect(!e.growing, "growing deviations at " + serialize(e.g));
  }
  auto exact1 = exact_translation_length_oracle(B.z23, gs[0]);
  c.expect(exact1.has_value() && *exact1 == Rat(1, 3),
           "translation length of 1 is not 1/3");
  c.expect(rep.elements[0].exact == Rat(1, 3), "burago oracle length of 1 is not 1/3");
  c.note("C_hat = " + rep.c_hat.str() + " over g in 1..10, n <= 60; |1| = " +
         (exact1 ? exact1->str() : "?") + " exact; growth flags 0");
  return {1, "Burago bracket on Z{2,3}", c.ok, c.detail()};
}

// --- row 2: weak-asymptotic discrimination ---------------------------------

inline RowOutcome row2(Bench& B) {
  Check c;
  std::vector<Element> f2els{B.a, B.b, B.ab};

  SpectrumComparison tok = compare_spectra(B.f2_o12, B.token8, f2els, 24);
  c.expect(tok.verdict == SpectrumVerdict::Different, "F(2) token pair not DIFFERENT");
  c.expect(tok.witness && *tok.witness == 2 && tok.rows[2].g == B.ab,
           "F(2) witness is not ab");
  c.expect(tok.rows[2].a.exact && *tok.rows[2].a.exact == Rat(2),
           "std length of ab is not exactly 2");
  c.expect(!tok.rows[2].b.exact && tok.rows[2].b.upper == Rat(1),
           "token upper bound for ab is not 1");

  SpectrumComparison dg = compare_spectra(B.z2_s12, B.z2_d12, {B.z2_11}, 24);
  c.expect(dg.verdict == SpectrumVerdict::Different, "Z^2 diag pair not DIFFERENT");
  c.expect(dg.witness && *dg.witness == 0, "Z^2 witness is not (1,1)");
  c.expect(dg.rows[0].a.exact && *dg.rows[0].a.exact == Rat(2) && dg.rows[0].b.exact &&
               *dg.rows[0].b.exact == Rat(1),
           "Z^2 exact lengths are not 2 vs 1");

  SpectrumComparison sameF = compare_spectra(B.f2_o24, B.f2_add_o24, f2els, 12);
  c.expect(sameF.verdict == SpectrumVerdict::Same, "F(2) additive pair not SAME");
  for (const auto& r : sameF.rows)
    c.expect(r.exact_equal, "F(2) additive row " + serialize(r.g) + " not exact-equal");

  SpectrumComparison sameZ =
      compare_spectra(B.z2_s12, B.z2_a12, {B.z2_11, B.el(B.z2, "0:2,1")}, 24);
  c.expect(sameZ.verdict == SpectrumVerdict::Same, "Z^2 additive pair not SAME");
  for (const auto& r : sameZ.rows)
    c.expect(r.exact_equal, "Z^2 additive row " + serialize(r.g) + " not exact-equal");

  c.note("F(2) {a,b} vs {a,b,ab}: DIFFERENT at ab (2 vs [0,1]); Z^2 std vs diag: "
         "DIFFERENT at (1,1) (2 vs 1); additive(1) pairs on F(2) and Z^2: SAME exact");
  return {2, "Weak-asymptotic discrimination", c.ok, c.detail()};
}

// --- row 3: main-theorem contrapositive (witness search) -------------------

inline std::pair<bool, std::string> slope_and_residual(Check& c, const WitnessReport& rep,
                                                       const std::string& label) {
  c.expect(rep.verdict == WitnessVerdict::WitnessFound, label + " did not find a witness");
  c.expect(rep.slope > Surd(Rat(0)), label + " slope not positive");
  c.expect(!rep.powers.empty(), label + " has no power table");
  if (rep.powers.empty()) return {false, ""};
  Surd lo = rep.powers.front().delta, hi = rep.powers.front().delta;
  for (const WitnessPowerRow& r : rep.powers) {
    lo = min(lo, r.delta);
    hi = max(hi, r.delta);
  }
  Surd range = hi - lo;
  c.expect(Surd(Rat(10)) * rep.residual < range,
           label + " residual not below 10% of sweep range");
  return {true, label + ": slope " + rep.slope.str() + ", residual " + rep.residual.str() +
                    ", range " + range.str()};
}

inline RowOutcome row3(Bench& B) {
  Check c;
  WitnessReport tok = witness_search(B.token_pair(), Rat(12), 3, Rat(4));
  auto [ok1, note1] = slope_and_residual(c, tok, "F(2) token pair");
  if (ok1) c.note(note1 + ", f = " + serialize(tok.f));

  WitnessReport dg = witness_search(B.z2_pair24(), Rat(12), 3, Rat(4));
  auto [ok2, note2] = slope_and_residual(c, dg, "Z^2 diag pair");
  if (ok2) c.note(note2 + ", f = " + serialize(dg.f));

  WitnessReport zsame = witness_search(B.z_add_pair(), Rat(12), 3, Rat(2));
  c.expect(zsame.verdict == WitnessVerdict::NoLargeDelta,
           "Z additive pair did not report NO_LARGE_DELTA");
  c.expect(zsame.max_delta == Surd(Rat(1)), "Z additive max delta is not 1");

  WitnessReport fsame = witness_search(B.f2_add_pair8(), Rat(8), 3, Rat(2));
  c.expect(fsame.verdict == WitnessVerdict::NoLargeDelta,
           "F(2) additive pair did not report NO_LARGE_DELTA");
  c.note("additive pairs: NO_LARGE_DELTA (max delta " + zsame.max_delta.str() + " and " +
         fsame.max_delta.str() + ")");
  return {3, "Witness search contrapositive", c.ok, c.detail()};
}

// --- row 4: coarse-equality profiles ----------------------------------------

inline RowOutcome row4(Bench& B) {
  Check c;
  std::vector<Rat> radii{Rat(4), Rat(6), Rat(8), Rat(10), Rat(12)};

  DeltaReport add = coarse_equality_verdict(B.z_add_pair(), radii);
  c.expect(add.verdict == GrowthVerdict::Bounded, "additive pair not BOUNDED");
  c.expect(add.bound == Surd(Rat(1)), "additive bound is not 1");
  for (const ProfileRow& r : add.rows)
    c.expect(r.max_abs == Surd(Rat(1)), "additive profile row not exactly 1 at radius " +
                                            r.radius.str());

  DeltaReport tok = coarse_equality_verdict(B.token_pair(), radii);
  c.expect(tok.verdict == GrowthVerdict::Growing, "token pair not GROWING");
  c.expect(tok.shape == "linear", "token growth shape is not linear");
  c.expect(tok.rate >= 0.25, "token fitted slope below 1/4");
  for (std::size_t i = 0; i < tok.rows.size(); ++i) {
    c.expect(tok.rows[i].max_abs == Surd(Rat(static_cast<long long>(i) + 2)),
             "token profile row " + std::to_string(i) + " unexpected");
    if (i + 1 < tok.rows.size())
      c.expect(tok.rows[i].max_abs < tok.rows[i + 1].max_abs,
               "token profile not strictly increasing");
  }
  c.note("additive(1): constant 1 over radii 4..12 (BOUNDED); token pair: 2,3,4,5,6 "
         "strictly increasing, linear rate " + csv::num(tok.rate) + " >= 1/4");
  return {4, "Coarse-equality profiles", c.ok, c.detail()};
}

// --- row 5: hypothesis necessity (concave perturbation) --------------------

inline RowOutcome row5(Bench& B) {
  Check c;
  SpectrumComparison cmp = compare_spectra(B.f2_o8, B.f2_cc_o8, {B.a, B.b, B.ab}, 12);
  c.expect(cmp.verdict == SpectrumVerdict::Same, "concave pair spectra not SAME");
  for (const auto& r : cmp.rows)
    c.expect(r.exact_equal, "concave row " + serialize(r.g) + " not exact-equal");

  std::vector<Rat> radii;
  for (long long r = 1; r <= 8; ++r) radii.push_back(Rat(r));
  DeltaReport prof = coarse_equality_verdict(B.cc_pair8(), radii);
  c.expect(prof.verdict == GrowthVerdict::Growing, "concave profile not GROWING");
  c.expect(prof.shape == "sqrt", "concave growth shape is not sqrt");
  for (std::size_t i = 0; i < prof.rows.size(); ++i)
    c.expect(prof.rows[i].max_abs == Surd::sqrt(Rat(static_cast<long long>(i) + 1)),
             "concave profile row " + std::to_string(i) + " is not sqrt(radius)");

  // a 13-letter target: derived distance 13 + sqrt(13) >= 16, chain constant 1
  Element t13 = multiply(B.f2, power(B.f2, B.ab, 6), B.a);
  CoarseGeodesicReport small = check_coarse_geodesic(B.f2_cc_o90, {t13}, Rat(1));
  c.expect(small.failed == 1 && small.verified == 0 && small.inconclusive == 0,
           "13-letter chain at C = 1 did not fail conclusively");

  // an 81-letter target at C = 2
  Element t81 = multiply(B.f2, power(B.f2, B.ab, 40), B.a);
  CoarseGeodesicReport big = check_coarse_geodesic(B.f2_cc_o90, {t81}, Rat(2));
  c.expect(big.failed == 1 && big.verified == 0 && big.inconclusive == 0,
           "81-letter chain at C = 2 did not fail conclusively");

  Surd d13 = B.f2_cc_o8.metric().eval(Rat(13));
  c.expect(d13 >= Surd(Rat(16)), "13-letter derived distance below 16");
  c.note("spectra SAME exactly; |Delta| profile = sqrt(r) (GROWING/sqrt); "
         "coarse-geodesic chains fail at derived distance " + d13.decimal(2) +
         " with C = 1 and at 81 letters with C = 2 (" + std::to_string(big.pairs[0].candidates) +
         " candidates)");
  return {5, "Hypothesis necessity (concave pair)", c.ok, c.detail()};
}

// --- row 6: delta-hat estimation --------------------------------------------

inline RowOutcome row6(Bench& B) {
  Check c;
  DeltaEstimate f2d = estimate_delta(B.f2_b5, 0, B.seed);
  c.expect(f2d.exhaustive, "F(2) check not exhaustive");
  c.expect(f2d.delta_hat == Rat(0), "F(2) delta_hat is not 0 (got " + f2d.delta_hat.str() + ")");
  c.expect(f2d.checked == 485LL * 485 * 485, "F(2) quadruple count unexpected");

  std::string zs;
  const Window* wins[3] = {&B.z2_s4, &B.z2_s8, &B.z2_s12};
  long long rads[3] = {4, 8, 12};
  for (int i = 0; i < 3; ++i) {
    DeltaEstimate d = estimate_delta(*wins[i], 0, B.seed);
    c.expect(d.exhaustive, "Z^2 check not exhaustive at R = " + std::to_string(rads[i]));
    c.expect(d.delta_hat >= Rat(rads[i], 4),
             "Z^2 delta_hat below R/4 at R = " + std::to_string(rads[i]));
    c.expect(d.delta_hat == Rat(rads[i], 2),
             "Z^2 delta_hat is not R/2 at R = " + std::to_string(rads[i]));
    zs += (i ? ", " : "") + d.delta_hat.str();
  }
  c.note("F(2) ball 5: delta_hat = 0 exactly over " + std::to_string(f2d.checked) +
         " quadruples; Z^2 R in {4,8,12}: delta_hat = " + zs + " (each >= R/4)");
  return {6, "Delta-hat estimation", c.ok, c.detail()};
}

// --- row 7: lemma suite exactness -------------------------------------------

inline RowOutcome row7(Bench& B) {
  Check c;
  struct Named {
    std::string name;
    MetricPair pair;
  };
  std::vector<Named> pairs;
  pairs.push_back({"F2-token", B.token_pair()});
  pairs.push_back({"Z2-diag", B.z2_pair12()});
  pairs.push_back({"ZZ-diag", B.zz_pair6()});
  pairs.push_back({"Z-additive", B.z_add_pair()});
  pairs.push_back({"F2-concave", B.cc_pair8()});

  long long triangle_total = 0;
  for (const Named& p : pairs) {
    TriangleReport tri = triangle_check(p.pair, 10000, B.seed);
    c.expect(tri.violations == 0,
             "triangle violations on " + p.name + ": " + std::to_string(tri.violations));
    c.expect(tri.min_slack.sign() >= 0, "negative slack on " + p.name);
    triangle_total += tri.samples;
  }

  // Delta symmetry, exact, on seeded draws from every pair's shared pool
  long long sym_checked = 0;
  for (const Named& p : pairs) {
    auto strata = cmpdetail::half_pool(p.pair);
    Substream rng(B.seed, "acc-symmetry");
    for (int i = 0; i < 500; ++i) {
      const Element& x = cmpdetail::draw(strata, rng);
      const Element& y = cmpdetail::draw(strata, rng);
      if (!(p.pair.delta(x, y) == p.pair.delta(y, x))) {
        c.expect(false, "delta symmetry broken on " + p.name + " at " + serialize(x) + ";" +
                            serialize(y));
        break;
      }
      ++sym_checked;
    }
  }

  // additivity on the F(2) word/word pair, bounded via its fellow constant
  MetricPair tok = B.token_pair();
  FellowReport fel = fellow_travel(tok, 250, B.seed);
  std::vector<Element> targets;
  B.token8.for_each([&](const std::string&, const Element& g, const Rat&) {
    auto d1 = tok.first().word_dist(g);
    if (d1 && *d1 <= Rat(8)) targets.push_back(g);
  });
  AdditivityScan scan = additivity_scan(tok, targets);
  Surd bound = Surd(Rat(2) * fel.c_fellow + Rat(1));
  c.expect(scan.max_defect <= bound,
           "additivity defect " + scan.max_defect.str() + " exceeds 2*C_fellow + 1 = " +
               bound.str());
  c.note("triangle: 0 violations over " + std::to_string(triangle_total) +
         " seeded triples across " + std::to_string(pairs.size()) +
         " shipped pairs; additivity max defect " + scan.max_defect.str() + " over " +
         std::to_string(scan.paths) + " geodesics <= 2*" + fel.c_fellow.str() + "+1; delta "
         "symmetry exact on " + std::to_string(sym_checked) + " draws");
  return {7, "Lemma suite exactness", c.ok, c.detail()};
}

// --- row 8: relative geometry on Z^2 * Z ------------------------------------

inline RowOutcome row8(Bench& B) {
  Check c;

  // breadth-first relative distances equal the syllable formula on all of B(6)
  std::map<std::string, long long> rel = relative_distances(B.zz_s6);
  c.expect(rel.size() == B.zz_s6.size(), "relative distances missing window elements");
  c.expect(rel.at(serialize(B.zz_t)) == 1, "d_rel(t) is not 1");
  c.expect(rel.at("0:2,3") == 1, "d_rel((2,3)) is not 1");
  c.expect(rel.at("0:2,3|1:1") == 2, "d_rel((2,3)t) is not 2");
  c.expect(rel.at("1:1|0:1,0") == 2, "d_rel(t x) is not 2");

  // projection of t onto the identity coset of the peripheral Z^2
  int factor = B.zz.peripherals().front();
  CosetId H = coset_of(B.zz, factor, identity());
  ProjectionReport proj = coset_projection(B.zz_s6, H, B.zz_t);
  c.expect(proj.dist == Rat(1), "d(t, H) is not 1");
  c.expect(proj.diameter == Rat(2), "projection diameter is not 2");
  std::set<std::string> pkeys;
  for (const Element& p : proj.points) pkeys.insert(serialize(p));
  std::set<std::string> expect_keys{"e", "0:-1,0", "0:0,-1", "0:0,1", "0:1,0"};
  c.expect(pkeys == expect_keys, "projection set is not {0, +-e1, +-e2}");

  // intersection diameters plateau across sweep radii 6..10
  CosetId tH = coset_of(B.zz, factor, B.zz_t);
  std::string inter_note;
  for (long long D = 1; D <= 2; ++D) {
    std::optional<Rat> first_diam;
    for (long long R = 6; R <= 10; ++R) {
      IntersectionReport rep =
          coset_intersection_diameter(B.zz_std, H, tH, Rat(D), Rat(R));
      if (!first_diam) {
        first_diam = rep.diameter;
        inter_note += (D == 1 ? "D=1: " : "; D=2: ") + rep.diameter.str() + " (" +
                      std::to_string(rep.points.size()) + " pts)";
      } else {
        c.expect(rep.diameter == *first_diam,
                 "intersection diameter not constant at D = " + std::to_string(D) +
                     ", sweep " + std::to_string(R));
      }
    }
    if (D == 1) c.expect(*first_diam == Rat(1), "D = 1 intersection diameter is not 1");
  }

  // lifted relative geodesics: identical fit constants across 50 samples
  std::vector<std::string> keys;
  B.zz_s6.for_each([&](const std::string& key, const Element&, const Rat&) {
    if (key != "e") keys.push_back(key);
  });
  Substream rng(B.seed, "acc-lift");
  std::set<std::pair<std::string, std::string>> fits;
  long long jumps = 0;
  for (int i = 0; i < 50; ++i) {
    const std::string& key = keys[static_cast<std::size_t>(rng.below(keys.size()))];
    Element g = B.zz_s6.ball()->element(key);
    LiftReport lift = lift_relative_geodesic(B.zz_s6, relative_geodesic(B.zz_s6, g));
    fits.insert({lift.lambda_hat.str(), lift.eps_hat.str()});
    jumps += lift.jumps;
  }
  c.expect(fits.size() == 1, "lift fit constants differ across samples");
  c.expect(fits.count({"1/1", "0/1"}) == 1, "lift fit is not (1, 0)");
  c.expect(jumps > 0, "no coset jumps among sampled relative geodesics");

  // relative Lipschitz: additive pair small, diagonal pair grows with window.
  // The larger-window extreme is a rare draw, so the growth comparison uses a
  // deep, seeded sample.
  LipschitzReport ladd = relative_lipschitz(B.zz_add_pair6(), 5000, B.seed);
  c.expect(ladd.p_hat <= Surd(Rat(2)),
           "additive P_hat exceeds 2 (got " + ladd.p_hat.str() + ")");
  LipschitzReport l6 = relative_lipschitz(B.zz_pair6(), 60000, B.seed);
  LipschitzReport l8 = relative_lipschitz(B.zz_pair86(), 60000, B.seed);
  c.expect(l8.p_hat > l6.p_hat, "diagonal P_hat did not grow with the window (got " +
                                    l6.p_hat.str() + " -> " + l8.p_hat.str() + ")");

  c.note("BFS = formula on all " + std::to_string(rel.size()) + " elements; pi_H(t) = "
         "{0,+-e1,+-e2}, diameter 2; intersections " + inter_note +
         " constant over sweeps 6..10; 50 lifts all fit (1,0) with " +
         std::to_string(jumps) + " jumps; P_hat additive " + ladd.p_hat.str() +
         " <= 2, diagonal " + l6.p_hat.str() + " -> " + l8.p_hat.str() + " across windows");
  return {8, "Relative geometry on Z^2 * Z", c.ok, c.detail()};
}

// --- row 9: non-hyperbolic element handling ---------------------------------

inline RowOutcome row9(Bench& B) {
  Check c;
  TranslationLengthEstimate est = translation_length(B.h3_b12, B.h3_z, 24);
  c.expect(est.exact && *est.exact == Rat(0), "center length oracle is not 0");
  c.expect(classify_translation(est) == HypClass::NonHyperbolic,
           "center not classified non-hyperbolic");
  c.expect(est.truncated && est.n_used == 9, "power run shape unexpected");
  std::vector<Rat> want{Rat(4), Rat(6), Rat(8), Rat(8), Rat(10),
                        Rat(10), Rat(12), Rat(12), Rat(12)};
  c.expect(est.word_dists == want, "center power distances unexpected");

  // with exact length 0 the deviations are the distances themselves; the
  // pattern must be concave-increasing with a flat tail
  bool monotone = true;
  Rat first_half(0), last_half(0);
  std::size_t n = est.word_dists.size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    Rat inc = est.word_dists[i + 1] - est.word_dists[i];
    if (inc.sign() < 0) monotone = false;
    if (i < (n - 1) / 2)
      first_half += inc;
    else
      last_half += inc;
  }
  c.expect(monotone, "deviations not monotone");
  c.expect(last_half <= first_half, "deviation increments not concave");
  Rat tail_slope = est.word_dists[n - 1] - est.word_dists[n - 2];
  c.expect(tail_slope <= Rat(1, 24), "final one-step slope above 1/24");

  c.note("d(z^n) = 4,6,8,8,10,10,12,12,12 inside radius 12; certified exact length 0 "
         "(abelianized oracle) => non-hyperbolic; concave deviations, final slope " +
         tail_slope.str() + " <= 1/24; Fekete upper " + est.upper.str() +
         ", m->2m slope " + est.recent_slope.str() + " at window scale");
  return {9, "Non-hyperbolic element handling", c.ok, c.detail()};
}

// --- row 10: determinism and cache soundness --------------------------------

inline RowOutcome row10(Bench& B) {
  Check c;
  c.expect(B.reg.audit_mismatches == 0, "window audits reported mismatches");
  c.expect(B.reg.audit_checked > 0, "no audit coverage");

  // in-memory round trip: save, reload, full audit
  std::ostringstream os;
  save_ball(*B.z2_s12.ball(), B.z2_std, os);
  std::string blob = os.str();
  {
    std::istringstream is(blob);
    Ball back = load_ball(B.z2_std, is);
    c.expect(back.size() == B.z2_s12.ball()->size(), "reloaded ball lost records");
    AuditReport audit = audit_ball(back, B.z2_std, B.seed, Rat(1));
    c.expect(audit.mismatches == 0, "round-tripped ball failed its audit");
    bool oracle_ok = true;
    back.for_each([&](const std::string&, const Element& g, const Rat& d) {
      auto exact = point_distance(B.z2_std, g);
      if (exact && *exact != d) oracle_ok = false;
    });
    c.expect(oracle_ok, "round-tripped distances disagree with the exact oracle");
  }

  // stale fingerprint is refused outright
  {
    std::string bad = blob;
    auto pos = bad.find("metric=");
    bad.replace(pos, 7, "metric=X");
    std::istringstream is(bad);
    bool refused = false;
    try {
      (void)load_ball(B.z2_std, is);
    } catch (const CacheMismatch&) {
      refused = true;
    }
    c.expect(refused, "stale metric fingerprint was accepted");
  }

  // a corrupted record is caught by load or by the audit
  {
    std::string bad = blob;
    auto pos = bad.find("\n0:1,0\t1/1\t");
    c.expect(pos != std::string::npos, "corruption target record not found");
    if (pos != std::string::npos) {
      bad.replace(pos, 11, "\n0:1,0\t3/1\t");
      bool caught = false;
      try {
        std::istringstream is(bad);
        Ball tampered = load_ball(B.z2_std, is);
        AuditReport audit = audit_ball(tampered, B.z2_std, B.seed, Rat(1));
        caught = audit.mismatches > 0;
      } catch (const CacheMismatch&) {
        caught = true;
      }
      c.expect(caught, "corrupted record distance was not detected");
    }
  }

  // seeded operations replay bit-identically
  DeltaEstimate d1 = estimate_delta(B.z2_s8, 0, B.seed);
  DeltaEstimate d2 = estimate_delta(B.z2_s8, 0, B.seed);
  c.expect(d1.delta_hat == d2.delta_hat && d1.witness == d2.witness &&
               d1.checked == d2.checked,
           "exhaustive delta replay differs");
  TriangleReport t1 = triangle_check(B.z2_pair12(), 2000, B.seed);
  TriangleReport t2 = triangle_check(B.z2_pair12(), 2000, B.seed);
  c.expect(t1.min_slack == t2.min_slack && t1.witness == t2.witness &&
               t1.violations == t2.violations,
           "triangle replay differs");
  FellowReport f1 = fellow_travel(B.token_pair(), 50, B.seed);
  FellowReport f2 = fellow_travel(B.token_pair(), 50, B.seed);
  c.expect(f1.c_fellow == f2.c_fellow && f1.witness == f2.witness, "fellow replay differs");

  std::string cache_note = B.cache_dir.empty()
                               ? std::string("in-memory balls")
                               : std::to_string(B.reg.from_cache) + " of " +
                                     std::to_string(B.reg.builds) + " balls from cache";
  c.note("1% audits clean over " + std::to_string(B.reg.audit_checked) + " records (" +
         cache_note + ", " + std::to_string(B.reg.oracle_checked) +
         " oracle spot checks); save/load round trip audited; stale fingerprint and "
         "corrupted record both refused; seeded estimators replay identically");
  return {10, "Determinism and cache soundness", c.ok, c.detail()};
}

}  // namespace acc

/** Run the ten acceptance rows, sharing one set of windows. */
inline std::vector<RowOutcome> acceptance_battery(std::uint64_t seed,
                                                  const std::string& cache_dir) {
  acc::Bench bench(seed, cache_dir);
  std::vector<RowOutcome (*)(acc::Bench&)> rows{
      acc::row1, acc::row2, acc::row3, acc::row4, acc::row5,
      acc::row6, acc::row7, acc::row8, acc::row9, acc::row10};
  std::vector<RowOutcome> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    try {
      out.push_back(rows[i](bench));
    } catch (const std::exception& e) {
      out.push_back(RowOutcome{static_cast<int>(i) + 1, "row " + std::to_string(i + 1),
                               false, std::string("exception: ") + e.what()});
    }
  }
  return out;
}

inline void print_battery(const std::vector<RowOutcome>& rows, std::ostream& os) {
  for (const RowOutcome& r : rows) {
    os << "[" << (r.index < 10 ? " " : "") << r.index << "/10] "
       << (r.pass ? "PASS" : "FAIL") << "  " << r.title;
    if (!r.detail.empty()) os << " — " << r.detail;
    os << "\n";
  }
}

inline int run_suite(const ExperimentConfig& cfg, const Paths& paths) {
  std::filesystem::create_directories(paths.out);
  std::vector<RowOutcome> rows = acceptance_battery(cfg.seed, paths.cache);
  print_battery(rows, std::cout);
  csv::Writer table((std::filesystem::path(paths.out) / "suite.csv").string(),
                    {"row", "title", "status", "detail"});
  bool all = true;
  for (const RowOutcome& r : rows) {
    table.row({csv::num(static_cast<long long>(r.index)), r.title,
               r.pass ? "PASS" : "FAIL", r.detail});
    all = all && r.pass;
  }
  std::cout << (all ? "suite: all rows PASS\n" : "suite: FAILURES present\n");
  return all ? kOk : kFinding;
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

inline int dispatch(const std::string& subcommand, const ExperimentConfig& cfg,
                    const Paths& paths) {
  if (subcommand == "ball") return run_ball(cfg, paths);
  if (subcommand == "spectrum") return run_spectrum(cfg, paths);
  if (subcommand == "compare") return run_compare(cfg, paths);
  if (subcommand == "hyperbolicity") return run_hyperbolicity(cfg, paths);
  if (subcommand == "relhyp") return run_relhyp(cfg, paths);
  if (subcommand == "witness") return run_witness(cfg, paths);
  if (subcommand == "suite") return run_suite(cfg, paths);
  throw ConfigError("unknown subcommand: " + subcommand);
}

}  // namespace run
}  // namespace coarse
