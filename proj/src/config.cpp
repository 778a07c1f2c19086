#include "formcheck/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json_util.hpp"

namespace formcheck {
namespace detail {
namespace {

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw ConfigError("config key '" + key + "': " + what);
}

void check_keys(const Json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) bad(where.empty() ? "<root>" : where, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, _] : j.items()) {
    if (!ok.count(k)) bad(where + k, "unknown key");
  }
}

template <typename T>
T get(const Json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    bad(key, "wrong type");
  }
}

int get_int(const Json& j, const std::string& key, int min) {
  if (!j.is_number_integer()) bad(key, "expected an integer");
  const auto v = j.get<long long>();
  if (v < min || v > 1'000'000'000) bad(key, "must be at least " + std::to_string(min));
  return static_cast<int>(v);
}

double get_number(const Json& j, const std::string& key) {
  if (!j.is_number()) bad(key, "expected a number");
  return j.get<double>();
}

std::uint64_t get_seed(const Json& j, const std::string& key) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0)) {
    bad(key, "expected a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

std::vector<ErrorPattern> get_patterns(const Json& j, const std::string& key) {
  if (!j.is_array() || j.empty()) bad(key, "expected a non-empty array of pattern ids");
  std::vector<ErrorPattern> out;
  for (const Json& e : j) {
    if (!e.is_string()) bad(key, "expected pattern id strings");
    try {
      const ErrorPattern p = error_pattern_from_string(e.get<std::string>());
      if (std::find(out.begin(), out.end(), p) != out.end()) bad(key, "duplicate pattern " + e.get<std::string>());
      out.push_back(p);
    } catch (const InvalidInputError& ex) {
      bad(key, ex.what());
    }
  }
  return out;
}

void merge_forest(ForestConfig& f, const Json& j, const std::string& where) {
  check_keys(j, where, {"trees", "mtry"});
  if (j.contains("trees")) f.trees = get_int(j["trees"], where + "trees", 1);
  if (j.contains("mtry")) {
    if (j["mtry"].is_null()) {
      f.mtry.reset();
    } else {
      f.mtry = get_int(j["mtry"], where + "mtry", 1);
    }
  }
}

Json forest_json(const ForestConfig& f) {
  return Json{{"trees", f.trees}, {"mtry", f.mtry ? Json(*f.mtry) : Json(nullptr)}};
}

}  // namespace

Json to_json(const LadderConfig& c) {
  Json j;
  j["variant"] = std::string(to_string(c.variant));
  j["features"] = std::string(to_string(c.features));
  j["kernel"] = std::string(to_string(c.kernel));
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["svm"] = Json{{"c", c.svm.c},
                  {"gamma", c.svm.gamma ? Json(*c.svm.gamma) : Json(nullptr)},
                  {"balanced", c.svm.balanced},
                  {"tolerance", c.svm.tolerance},
                  {"max_iterations", c.svm.max_iterations}};
  j["forest"] = forest_json(c.forest);
  Json sel = forest_json(c.selection.forest);
  sel["probes_per_frame"] = c.selection.probes_per_frame;
  sel["fallback_count"] = c.selection.fallback_count;
  j["selection"] = sel;
  j["segmentation"] = Json{{"smoothing_window", c.segmentation.smoothing_window},
                           {"onset_speed", c.segmentation.onset_speed},
                           {"offset_speed", c.segmentation.offset_speed},
                           {"min_duration", c.segmentation.min_duration},
                           {"left_knee", c.segmentation.left_knee},
                           {"right_knee", c.segmentation.right_knee}};
  j["dtw"] = Json{{"band", c.dtw.band ? Json(*c.dtw.band) : Json(nullptr)}};
  j["inner_folds"] = c.inner_folds;
  j["reference"] = c.reference_id ? Json(*c.reference_id) : Json(nullptr);
  Json ps = Json::array();
  for (ErrorPattern p : c.patterns) ps.push_back(std::string(to_string(p)));
  j["patterns"] = ps;
  return j;
}

void merge_ladder(LadderConfig& c, const Json& j, const std::string& w) {
  try {
    if (j.contains("variant")) c.variant = variant_from_string(get<std::string>(j["variant"], w + "variant"));
    if (j.contains("features")) c.features = feature_set_from_string(get<std::string>(j["features"], w + "features"));
    if (j.contains("kernel")) c.kernel = kernel_from_string(get<std::string>(j["kernel"], w + "kernel"));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (j.contains("seed")) c.seed = get_seed(j["seed"], w + "seed");
  if (j.contains("workers")) c.workers = get_int(j["workers"], w + "workers", 0);
  if (j.contains("svm")) {
    const Json& s = j["svm"];
    const std::string p = w + "svm.";
    check_keys(s, p, {"c", "gamma", "balanced", "tolerance", "max_iterations"});
    if (s.contains("c")) c.svm.c = get_number(s["c"], p + "c");
    if (c.svm.c <= 0) bad(p + "c", "must be positive");
    if (s.contains("gamma")) {
      if (s["gamma"].is_null()) {
        c.svm.gamma.reset();
      } else {
        c.svm.gamma = get_number(s["gamma"], p + "gamma");
        if (*c.svm.gamma <= 0) bad(p + "gamma", "must be positive");
      }
    }
    if (s.contains("balanced")) c.svm.balanced = get<bool>(s["balanced"], p + "balanced");
    if (s.contains("tolerance")) c.svm.tolerance = get_number(s["tolerance"], p + "tolerance");
    if (c.svm.tolerance <= 0) bad(p + "tolerance", "must be positive");
    if (s.contains("max_iterations")) c.svm.max_iterations = get_int(s["max_iterations"], p + "max_iterations", 1);
  }
  if (j.contains("forest")) merge_forest(c.forest, j["forest"], w + "forest.");
  if (j.contains("selection")) {
    const Json& s = j["selection"];
    const std::string p = w + "selection.";
    check_keys(s, p, {"probes_per_frame", "fallback_count", "trees", "mtry"});
    if (s.contains("probes_per_frame")) c.selection.probes_per_frame = get_int(s["probes_per_frame"], p + "probes_per_frame", 1);
    if (s.contains("fallback_count")) c.selection.fallback_count = get_int(s["fallback_count"], p + "fallback_count", 1);
    Json f = Json::object();
    if (s.contains("trees")) f["trees"] = s["trees"];
    if (s.contains("mtry")) f["mtry"] = s["mtry"];
    merge_forest(c.selection.forest, f, p);
  }
  if (j.contains("segmentation")) {
    const Json& s = j["segmentation"];
    const std::string p = w + "segmentation.";
    check_keys(s, p, {"smoothing_window", "onset_speed", "offset_speed", "min_duration", "left_knee", "right_knee"});
    SegmentConfig& g = c.segmentation;
    if (s.contains("smoothing_window")) g.smoothing_window = get_int(s["smoothing_window"], p + "smoothing_window", 1);
    if (g.smoothing_window % 2 == 0) bad(p + "smoothing_window", "must be odd");
    if (s.contains("onset_speed")) g.onset_speed = get_number(s["onset_speed"], p + "onset_speed");
    if (s.contains("offset_speed")) g.offset_speed = get_number(s["offset_speed"], p + "offset_speed");
    if (!(g.offset_speed > 0 && g.offset_speed < g.onset_speed)) bad(p + "offset_speed", "needs 0 < offset_speed < onset_speed");
    if (s.contains("min_duration")) g.min_duration = get_int(s["min_duration"], p + "min_duration", 1);
    if (s.contains("left_knee")) g.left_knee = get<std::string>(s["left_knee"], p + "left_knee");
    if (s.contains("right_knee")) g.right_knee = get<std::string>(s["right_knee"], p + "right_knee");
  }
  if (j.contains("dtw")) {
    const Json& d = j["dtw"];
    check_keys(d, w + "dtw.", {"band"});
    if (d.contains("band")) {
      if (d["band"].is_null()) {
        c.dtw.band.reset();
      } else {
        c.dtw.band = get_int(d["band"], w + "dtw.band", 0);
      }
    }
  }
  if (j.contains("inner_folds")) c.inner_folds = get_int(j["inner_folds"], w + "inner_folds", 2);
  if (j.contains("reference")) {
    if (j["reference"].is_null()) {
      c.reference_id.reset();
    } else {
      c.reference_id = get<std::string>(j["reference"], w + "reference");
    }
  }
  if (j.contains("patterns")) c.patterns = get_patterns(j["patterns"], w + "patterns");
}

LadderConfig ladder_from_json(const Json& j) {
  check_keys(j, "", {"variant", "features", "kernel", "seed", "workers", "svm", "forest", "selection", "segmentation",
                     "dtw", "inner_folds", "reference", "patterns"});
  LadderConfig c;
  merge_ladder(c, j);
  return c;
}

}  // namespace detail

using detail::Json;

RunConfig parse_run_config(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  detail::check_keys(j, "", {"variant", "features", "kernel", "seed", "workers", "svm", "forest", "selection",
                             "segmentation", "dtw", "inner_folds", "reference", "patterns", "crossval", "corpus",
                             "bench"});
  RunConfig c;
  detail::merge_ladder(c.ladder, j);
  c.crossval.seed = c.ladder.seed;
  c.crossval.patterns = c.ladder.patterns;
  c.corpus.seed = c.ladder.seed;
  if (j.contains("crossval")) {
    const Json& v = j["crossval"];
    detail::check_keys(v, "crossval.", {"folds", "workers"});
    if (v.contains("folds")) c.crossval.folds = detail::get_int(v["folds"], "crossval.folds", 2);
    if (v.contains("workers")) c.crossval.workers = detail::get_int(v["workers"], "crossval.workers", 0);
  }
  if (j.contains("corpus")) {
    const Json& v = j["corpus"];
    detail::check_keys(v, "corpus.", {"subjects", "samples_per_subject", "single_sample_subjects", "rates", "intensity"});
    CorpusConfig& g = c.corpus;
    if (v.contains("subjects")) g.subjects = detail::get_int(v["subjects"], "corpus.subjects", 1);
    if (v.contains("samples_per_subject")) g.samples_per_subject = detail::get_int(v["samples_per_subject"], "corpus.samples_per_subject", 1);
    if (v.contains("single_sample_subjects")) g.single_sample_subjects = detail::get_int(v["single_sample_subjects"], "corpus.single_sample_subjects", 0);
    if (g.single_sample_subjects > g.subjects) detail::bad("corpus.single_sample_subjects", "exceeds corpus.subjects");
    if (v.contains("rates")) {
      const Json& r = v["rates"];
      if (!r.is_object()) detail::bad("corpus.rates", "expected an object keyed by pattern id");
      for (const auto& [k, e] : r.items()) {
        const std::string key = "corpus.rates." + k;
        ErrorPattern p;
        try {
          p = error_pattern_from_string(k);
        } catch (const InvalidInputError&) {
          detail::bad(key, "unknown pattern");
        }
        detail::check_keys(e, key + ".", {"error_rate", "labeled_fraction"});
        PatternRate& pr = g.rates[index_of(p)];
        if (e.contains("error_rate")) pr.error_rate = detail::get_number(e["error_rate"], key + ".error_rate");
        if (e.contains("labeled_fraction")) pr.labeled_fraction = detail::get_number(e["labeled_fraction"], key + ".labeled_fraction");
        if (pr.error_rate < 0 || pr.error_rate > 1 || pr.labeled_fraction < 0 || pr.labeled_fraction > 1) {
          detail::bad(key, "rates must lie in [0, 1]");
        }
      }
    }
    if (v.contains("intensity")) {
      const Json& r = v["intensity"];
      if (!r.is_object()) detail::bad("corpus.intensity", "expected an object keyed by pattern id");
      for (const auto& [k, e] : r.items()) {
        const std::string key = "corpus.intensity." + k;
        ErrorPattern p;
        try {
          p = error_pattern_from_string(k);
        } catch (const InvalidInputError&) {
          detail::bad(key, "unknown pattern");
        }
        if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) detail::bad(key, "expected [low, high]");
        const double lo = e[0].get<double>(), hi = e[1].get<double>();
        if (!(0 <= lo && lo <= hi && hi <= 1)) detail::bad(key, "needs 0 <= low <= high <= 1");
        g.intensity[index_of(p)] = std::pair{lo, hi};
      }
    }
  }
  if (j.contains("bench")) {
    const Json& v = j["bench"];
    detail::check_keys(v, "bench.", {"warmup", "repetitions"});
    if (v.contains("warmup")) c.bench.warmup = detail::get_int(v["warmup"], "bench.warmup", 0);
    if (v.contains("repetitions")) c.bench.repetitions = detail::get_int(v["repetitions"], "bench.repetitions", 1);
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string dump_run_config(const RunConfig& c, int indent) {
  Json j = detail::to_json(c.ladder);
  j["crossval"] = Json{{"folds", c.crossval.folds}, {"workers", c.crossval.workers}};
  Json rates = Json::object(), intensity = Json::object();
  for (ErrorPattern p : kErrorPatterns) {
    const PatternRate& r = c.corpus.rates[index_of(p)];
    rates[std::string(to_string(p))] = Json{{"error_rate", r.error_rate}, {"labeled_fraction", r.labeled_fraction}};
    const auto range = c.corpus.intensity[index_of(p)].value_or(default_intensity_range(p));
    intensity[std::string(to_string(p))] = Json::array({range.first, range.second});
  }
  j["corpus"] = Json{{"subjects", c.corpus.subjects},
                     {"samples_per_subject", c.corpus.samples_per_subject},
                     {"single_sample_subjects", c.corpus.single_sample_subjects},
                     {"rates", rates},
                     {"intensity", intensity}};
  j["bench"] = Json{{"warmup", c.bench.warmup}, {"repetitions", c.bench.repetitions}};
  return j.dump(indent) + "\n";
}

}  // namespace formcheck
