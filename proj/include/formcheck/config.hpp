#pragma once

// Run configuration read from JSON. Unknown keys and wrong types are a
// ConfigError naming the offending key.

#include <filesystem>
#include <string>
#include <string_view>

#include "formcheck/eval.hpp"
#include "formcheck/ladder.hpp"
#include "formcheck/synthgen.hpp"

namespace formcheck {

struct RunConfig {
  LadderConfig ladder;
  CrossvalConfig crossval;
  CorpusConfig corpus;
  BenchConfig bench;
};

/// Keys: variant, features, kernel, seed, workers, svm, forest, selection,
/// segmentation, dtw, inner_folds, reference, patterns, crossval, corpus, bench.
/// `seed` and `patterns` apply to every stage.
RunConfig parse_run_config(std::string_view json_text);
/// Throws NotFoundError for a missing file.
RunConfig load_run_config(const std::filesystem::path& path);
/// The resolved configuration, every default written out; indent < 0 gives one line.
std::string dump_run_config(const RunConfig& cfg, int indent = 2);

}  // namespace formcheck
