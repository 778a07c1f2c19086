#include "formcheck/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "formcheck/hash.hpp"
#include "formcheck/parallel.hpp"
#include "json_util.hpp"

namespace formcheck {
namespace {

using detail::Json;

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

double parse_double(std::string_view s, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ParseError(line, "not a number: '" + std::string(s) + "'");
  return v;
}

long long parse_int(std::string_view s, std::size_t line) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ParseError(line, "not an integer: '" + std::string(s) + "'");
  return v;
}

// Line reader that tracks 1-based line numbers.
class Lines {
 public:
  explicit Lines(std::istream& in) : in_(in) {}
  bool next(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++number_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }
  std::string require(const char* what) {
    std::string line;
    if (!next(line)) throw ParseError(number_ + 1, std::string("unexpected end of file, expected ") + what);
    return line;
  }
  std::size_t number() const { return number_; }

 private:
  std::istream& in_;
  std::size_t number_ = 0;
};

void write_header(std::ostream& out, std::string_view kind) { out << "# formcheck-" << kind << " v" << kFormatVersion << "\n"; }

void read_header(Lines& lines, std::string_view kind) {
  const std::string line = lines.require("a header");
  const std::string prefix = "# formcheck-" + std::string(kind) + " v";
  if (line.rfind(prefix, 0) != 0) throw ParseError(lines.number(), "expected header '" + prefix + "<major>'");
  const long long major = parse_int(std::string_view(line).substr(prefix.size()), lines.number());
  if (major != kFormatVersion) {
    throw FormatVersionError(std::string(kind) + " format v" + std::to_string(major) + " is not supported (expected v" +
                             std::to_string(kFormatVersion) + ")");
  }
}

// "key value" with a single value token.
std::string read_field(Lines& lines, std::string_view key) {
  const std::string line = lines.require(std::string(key).c_str());
  const auto tok = split_ws(line);
  if (tok.size() != 2 || tok[0] != key) throw ParseError(lines.number(), "expected '" + std::string(key) + " <value>'");
  return std::string(tok[1]);
}

Label parse_label_cell(std::string_view s, std::size_t line) {
  if (s == "present") return Label::present;
  if (s == "absent") return Label::absent;
  throw ParseError(line, "label must be 'present' or 'absent', got '" + std::string(s) + "'");
}

std::string hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t unhex(const std::string& s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ModelError("malformed hash '" + s + "'");
  return v;
}

Json vec_json(const Eigen::VectorXd& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd json_vec(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
}

Json label_row_json(const LabelRow& row) {
  Json a = Json::array();
  for (Label l : row) a.push_back(std::string(to_string(l)));
  return a;
}

LabelRow json_label_row(const Json& j) {
  if (!j.is_array() || j.size() != kPatternCount) throw ModelError("label row must hold one entry per pattern");
  LabelRow row{};
  for (std::size_t p = 0; p < kPatternCount; ++p) {
    const auto s = j[p].get<std::string>();
    row[p] = s == "unlabeled" ? Label::unlabeled : label_from_string(s);
  }
  return row;
}

Json segmentation_json(const Segmentation& s) {
  Json a = Json::array();
  for (const SegmentBoundary& b : s.boundaries) a.push_back(Json::array({std::string(to_string(b.label)), b.start, b.end}));
  return a;
}

Segmentation json_segmentation(const Json& j) {
  Segmentation s;
  for (const Json& b : j) {
    s.boundaries.push_back({segment_label_from_string(b.at(0).get<std::string>()), b.at(1).get<Index>(), b.at(2).get<Index>()});
  }
  return s;
}

Json model_json(const PatternModel& m) {
  Json j;
  j["pattern"] = std::string(to_string(m.pattern));
  j["segment"] = m.segment ? Json(std::string(to_string(*m.segment))) : Json(nullptr);
  j["segment_accuracy"] = m.segment_accuracy;
  j["layout"] = Json{{"frames", m.layout.frames()}, {"joints", m.layout.joints()}, {"set", std::string(to_string(m.layout.set()))}};
  j["mask"] = Json{{"indices", m.mask.indices}, {"fallback", m.mask.fallback}, {"threshold", m.mask.threshold}};
  j["scaler"] = m.scaler.size() == 0 ? Json(nullptr) : Json{{"mean", vec_json(m.scaler.mean())}, {"stddev", vec_json(m.scaler.stddev())}};
  j["linear"] = m.linear ? Json{{"weights", vec_json(m.linear->weights())}, {"bias", m.linear->bias()}, {"c", m.linear->c()}}
                         : Json(nullptr);
  if (m.rbf) {
    Json rows = Json::array();
    for (Index r = 0; r < m.rbf->support().rows(); ++r) rows.push_back(vec_json(m.rbf->support().row(r).transpose()));
    j["rbf"] = Json{{"support", rows}, {"coef", vec_json(m.rbf->coef())}, {"bias", m.rbf->bias()}, {"gamma", m.rbf->gamma()},
                    {"c", m.rbf->c()}, {"features", m.rbf->size()}};
  } else {
    j["rbf"] = nullptr;
  }
  if (m.forest) {
    Json trees = Json::array();
    for (const DecisionTree& t : m.forest->trees()) {
      Json nodes = Json::array();
      for (const TreeNode& n : t.nodes()) nodes.push_back(Json::array({n.feature, n.threshold, n.left, n.right, n.count0, n.count1}));
      trees.push_back(nodes);
    }
    j["forest"] = Json{{"features", m.forest->feature_count()}, {"importances", vec_json(m.forest->importances())}, {"trees", trees}};
  } else {
    j["forest"] = nullptr;
  }
  j["constant"] = m.constant ? Json(std::string(to_string(*m.constant))) : Json(nullptr);
  return j;
}

PatternModel json_model(const Json& j) {
  PatternModel m;
  m.pattern = error_pattern_from_string(j.at("pattern").get<std::string>());
  if (!j.at("segment").is_null()) m.segment = segment_label_from_string(j["segment"].get<std::string>());
  m.segment_accuracy = j.at("segment_accuracy").get<std::vector<double>>();
  const Json& l = j.at("layout");
  m.layout = FeatureLayout(l.at("frames").get<Index>(), l.at("joints").get<Index>(),
                           feature_set_from_string(l.at("set").get<std::string>()));
  const Json& k = j.at("mask");
  m.mask.indices = k.at("indices").get<std::vector<Index>>();
  m.mask.fallback = k.at("fallback").get<bool>();
  m.mask.threshold = k.at("threshold").is_null() ? 0.0 : k["threshold"].get<double>();
  for (Index i : m.mask.indices) {
    if (i < 0 || i >= m.layout.size()) throw ModelError("feature mask index outside the layout");
  }
  if (!j.at("scaler").is_null()) m.scaler = Scaler(json_vec(j["scaler"].at("mean")), json_vec(j["scaler"].at("stddev")));
  if (!j.at("linear").is_null()) {
    const Json& s = j["linear"];
    m.linear = LinearModel(json_vec(s.at("weights")), s.at("bias").get<double>(), s.at("c").get<double>());
  }
  if (!j.at("rbf").is_null()) {
    const Json& s = j["rbf"];
    const Json& rows = s.at("support");
    const Index d = s.at("features").get<Index>();
    Eigen::MatrixXd sup(static_cast<Index>(rows.size()), d);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const Eigen::VectorXd row = json_vec(rows[r]);
      if (row.size() != d) throw ModelError("support vector length mismatch");
      sup.row(static_cast<Index>(r)) = row.transpose();
    }
    m.rbf = RbfModel(std::move(sup), json_vec(s.at("coef")), s.at("bias").get<double>(), s.at("gamma").get<double>(),
                     s.at("c").get<double>());
  }
  if (!j.at("forest").is_null()) {
    const Json& s = j["forest"];
    std::vector<DecisionTree> trees;
    for (const Json& t : s.at("trees")) {
      std::vector<TreeNode> nodes;
      for (const Json& n : t) {
        nodes.push_back({n.at(0).get<Index>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                         n.at(4).get<double>(), n.at(5).get<double>()});
      }
      trees.emplace_back(std::move(nodes));
    }
    m.forest = RandomForest(std::move(trees), json_vec(s.at("importances")), s.at("features").get<Index>());
  }
  if (!j.at("constant").is_null()) m.constant = label_from_string(j["constant"].get<std::string>());
  const Index width = static_cast<Index>(m.mask.indices.size());
  if ((m.linear && m.linear->size() != width) || (m.rbf && m.rbf->size() != width) ||
      (m.forest && m.forest->feature_count() != width) || (m.scaler.size() != 0 && m.scaler.size() != width)) {
    throw ModelError("model for '" + std::string(to_string(m.pattern)) + "' does not match its feature mask");
  }
  return m;
}

std::string trajectory_text(const Trajectory& t) {
  std::ostringstream out;
  write_trajectory(out, t);
  return out.str();
}

Trajectory trajectory_from_text(const std::string& s) {
  std::istringstream in(s);
  return read_trajectory(in);
}

void mix(std::uint64_t& h, const void* data, std::size_t n) {
  h = fnv1a(std::string_view(static_cast<const char*>(data), n), h);
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void write_trajectory(std::ostream& out, const Trajectory& t) {
  write_header(out, "trajectory");
  out << "subject " << t.subject_id() << "\n";
  out << "sample " << t.sample_id() << "\n";
  out << "sample_rate " << format_double(t.sample_rate()) << "\n";
  out << "joints " << t.joint_count() << "\n";
  for (const Joint& j : t.skeleton()->joints()) {
    out << "joint " << j.name << " " << (j.parent ? *j.parent : -1) << " " << format_double(j.offset.x()) << " "
        << format_double(j.offset.y()) << " " << format_double(j.offset.z()) << "\n";
  }
  out << "frames " << t.size() << "\n";
  std::string row;
  for (const Frame& f : t.frames()) {
    row.clear();
    for (Index j = 0; j < f.joint_count(); ++j) {
      for (Index c = 0; c < 4; ++c) {
        if (!row.empty()) row += ' ';
        row += format_double(f.rotations()(c, j));
      }
    }
    for (Index j = 0; j < f.joint_count(); ++j) {
      for (Index c = 0; c < 3; ++c) {
        row += ' ';
        row += format_double(f.positions()(c, j));
      }
    }
    out << row << "\n";
  }
}

Trajectory read_trajectory(std::istream& in) {
  Lines lines(in);
  read_header(lines, "trajectory");
  const std::string subject = read_field(lines, "subject");
  const std::string sample = read_field(lines, "sample");
  const double rate = parse_double(read_field(lines, "sample_rate"), lines.number());
  const long long k = parse_int(read_field(lines, "joints"), lines.number());
  if (k <= 0 || k > 10000) throw ParseError(lines.number(), "joint count must be positive");
  std::vector<Joint> joints;
  for (long long i = 0; i < k; ++i) {
    const std::string line = lines.require("a joint line");
    const auto tok = split_ws(line);
    if (tok.size() != 6 || tok[0] != "joint") throw ParseError(lines.number(), "expected 'joint <name> <parent> <x> <y> <z>'");
    Joint j;
    j.index = static_cast<Index>(i);
    j.name = std::string(tok[1]);
    const long long parent = parse_int(tok[2], lines.number());
    if (parent >= 0) j.parent = static_cast<Index>(parent);
    j.offset = {parse_double(tok[3], lines.number()), parse_double(tok[4], lines.number()), parse_double(tok[5], lines.number())};
    joints.push_back(std::move(j));
  }
  std::shared_ptr<const Skeleton> skeleton;
  try {
    auto parsed = std::make_shared<const Skeleton>(std::move(joints));
    const auto standard = Skeleton::standard();
    skeleton = *parsed == *standard ? standard : parsed;
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(lines.number(), e.what());
  }
  const long long n = parse_int(read_field(lines, "frames"), lines.number());
  if (n < 0) throw ParseError(lines.number(), "frame count must not be negative");
  const auto fields = static_cast<std::size_t>(7 * k);
  std::vector<Frame> frames;
  frames.reserve(static_cast<std::size_t>(n));
  std::string line;
  while (lines.next(line)) {
    if (trim(line).empty()) continue;
    if (static_cast<long long>(frames.size()) == n) throw ParseError(lines.number(), "more rows than the declared frame count");
    const auto tok = split_ws(line);
    if (tok.size() != fields) {
      throw ParseError(lines.number(), "expected " + std::to_string(fields) + " fields, found " + std::to_string(tok.size()));
    }
    Eigen::Matrix4Xd rot(4, k);
    Eigen::Matrix3Xd pos(3, k);
    std::size_t f = 0;
    for (Index j = 0; j < k; ++j) {
      for (Index c = 0; c < 4; ++c) rot(c, j) = parse_double(tok[f++], lines.number());
    }
    for (Index j = 0; j < k; ++j) {
      for (Index c = 0; c < 3; ++c) pos(c, j) = parse_double(tok[f++], lines.number());
    }
    try {
      frames.emplace_back(std::move(rot), std::move(pos));
    } catch (const Error& e) {
      throw ParseError(lines.number(), e.what());
    }
  }
  if (static_cast<long long>(frames.size()) != n) {
    throw ParseError(lines.number(), "declared " + std::to_string(n) + " frames, found " + std::to_string(frames.size()));
  }
  try {
    return Trajectory(skeleton, std::move(frames), rate, subject, sample);
  } catch (const Error& e) {
    throw ParseError(0, e.what());
  }
}

void write_trajectory_file(const std::filesystem::path& path, const Trajectory& t) {
  std::ofstream out(path);
  if (!out) throw NotFoundError("cannot write " + path.string());
  write_trajectory(out, t);
}

Trajectory read_trajectory_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open " + path.string());
  try {
    return read_trajectory(in);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.what());
  }
}

void write_annotations(std::ostream& out, std::span<const LabeledSample> samples) {
  write_header(out, "annotations");
  out << "subject_id,sample_id,pattern,label\n";
  for (const LabeledSample& s : samples) {
    for (ErrorPattern p : kErrorPatterns) {
      if (!s.labeled(p)) continue;
      out << s.trajectory.subject_id() << "," << s.trajectory.sample_id() << "," << to_string(p) << ","
          << to_string(s.label(p)) << "\n";
    }
  }
}

std::vector<AnnotationRow> read_annotations(std::istream& in) {
  Lines lines(in);
  read_header(lines, "annotations");
  if (lines.require("the column header") != "subject_id,sample_id,pattern,label") {
    throw ParseError(lines.number(), "expected column header 'subject_id,sample_id,pattern,label'");
  }
  std::vector<AnnotationRow> rows;
  std::set<std::tuple<std::string, std::string, ErrorPattern>> keys;
  std::string line;
  while (lines.next(line)) {
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 4) throw ParseError(lines.number(), "expected 4 fields, found " + std::to_string(cells.size()));
    if (cells[0].empty() || cells[1].empty()) throw ParseError(lines.number(), "empty subject or sample id");
    AnnotationRow r;
    r.subject_id = std::string(cells[0]);
    r.sample_id = std::string(cells[1]);
    try {
      r.pattern = error_pattern_from_string(cells[2]);
    } catch (const InvalidInputError& e) {
      throw ParseError(lines.number(), e.what());
    }
    r.label = parse_label_cell(cells[3], lines.number());
    if (!keys.emplace(r.subject_id, r.sample_id, r.pattern).second) {
      throw ParseError(lines.number(), "duplicate annotation for " + r.sample_id + " / " + std::string(cells[2]));
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_segmentations(std::ostream& out, std::span<const std::string> ids, std::span<const Segmentation> segs) {
  if (ids.size() != segs.size()) throw StructuralError("write_segmentations: one id per segmentation");
  write_header(out, "segments");
  out << "sample_id,segment,start,end\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (const SegmentBoundary& b : segs[i].boundaries) {
      out << ids[i] << "," << to_string(b.label) << "," << b.start << "," << b.end << "\n";
    }
  }
}

std::vector<std::pair<std::string, Segmentation>> read_segmentations(std::istream& in) {
  Lines lines(in);
  read_header(lines, "segments");
  if (lines.require("the column header") != "sample_id,segment,start,end") {
    throw ParseError(lines.number(), "expected column header 'sample_id,segment,start,end'");
  }
  std::vector<std::pair<std::string, Segmentation>> out;
  std::map<std::string, std::size_t> where;
  std::string line;
  while (lines.next(line)) {
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 4) throw ParseError(lines.number(), "expected 4 fields, found " + std::to_string(cells.size()));
    SegmentBoundary b{};
    try {
      b.label = segment_label_from_string(cells[1]);
    } catch (const InvalidInputError& e) {
      throw ParseError(lines.number(), e.what());
    }
    b.start = parse_int(cells[2], lines.number());
    b.end = parse_int(cells[3], lines.number());
    if (b.end < b.start) throw ParseError(lines.number(), "segment ends before it starts");
    const std::string id(cells[0]);
    auto it = where.find(id);
    if (it == where.end()) {
      it = where.emplace(id, out.size()).first;
      out.emplace_back(id, Segmentation{});
    }
    out[it->second].second.boundaries.push_back(b);
  }
  for (const auto& [id, s] : out) {
    if (s.boundaries.empty()) continue;
    try {
      validate_segmentation(s, s.boundaries.back().end + 1);
    } catch (const InvalidInputError& e) {
      throw ParseError(0, "segments of " + id + ": " + e.what());
    }
  }
  return out;
}

void write_corpus(const std::filesystem::path& dir, std::span<const LabeledSample> samples,
                  std::span<const Segmentation> truth) {
  if (!truth.empty() && truth.size() != samples.size()) throw StructuralError("write_corpus: one segmentation per sample");
  std::filesystem::create_directories(dir / "trajectories");
  std::ofstream manifest(dir / "manifest.txt");
  if (!manifest) throw NotFoundError("cannot write " + (dir / "manifest.txt").string());
  write_header(manifest, "corpus");
  std::vector<std::string> ids;
  for (const LabeledSample& s : samples) {
    manifest << s.trajectory.sample_id() << "\n";
    ids.push_back(s.trajectory.sample_id());
  }
  parallel_for(samples.size(), [&](std::size_t i) {
    write_trajectory_file(dir / "trajectories" / (ids[i] + ".traj"), samples[i].trajectory);
  });
  std::ofstream ann(dir / "annotations.csv");
  write_annotations(ann, samples);
  if (!truth.empty()) {
    std::ofstream seg(dir / "segments.csv");
    write_segmentations(seg, ids, truth);
  }
}

CorpusFiles read_corpus(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.txt";
  std::ifstream manifest(manifest_path);
  if (!manifest) throw NotFoundError("no corpus manifest at " + manifest_path.string());
  Lines lines(manifest);
  read_header(lines, "corpus");
  std::vector<std::string> ids;
  std::set<std::string> unique;
  std::string line;
  while (lines.next(line)) {
    const std::string id(trim(line));
    if (id.empty()) continue;
    if (!unique.insert(id).second) throw ParseError(lines.number(), "duplicate sample id " + id);
    ids.push_back(id);
  }
  if (ids.empty()) throw InvalidInputError("corpus manifest lists no samples");

  std::vector<std::optional<Trajectory>> loaded(ids.size());
  parallel_for(ids.size(), [&](std::size_t i) {
    loaded[i] = read_trajectory_file(dir / "trajectories" / (ids[i] + ".traj"));
  });
  std::map<std::string, std::size_t> index;
  CorpusFiles out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (loaded[i]->sample_id() != ids[i]) {
      throw InvalidInputError("trajectory file for " + ids[i] + " declares sample " + loaded[i]->sample_id());
    }
    LabelRow row;
    row.fill(Label::unlabeled);
    out.samples.push_back({std::move(*loaded[i]), row});
    index[ids[i]] = i;
  }

  std::ifstream ann(dir / "annotations.csv");
  if (!ann) throw NotFoundError("no annotations.csv in " + dir.string());
  for (const AnnotationRow& r : read_annotations(ann)) {
    const auto it = index.find(r.sample_id);
    if (it == index.end()) throw InvalidInputError("annotation for unknown sample " + r.sample_id);
    LabeledSample& s = out.samples[it->second];
    if (s.trajectory.subject_id() != r.subject_id) {
      throw InvalidInputError("annotation subject " + r.subject_id + " does not match sample " + r.sample_id);
    }
    s.labels[index_of(r.pattern)] = r.label;
  }
  for (const LabeledSample& s : out.samples) validate_labels(s.labels, s.trajectory.sample_id());

  std::ifstream seg(dir / "segments.csv");
  if (seg) {
    const auto segs = read_segmentations(seg);
    std::map<std::string, Segmentation> by_id(segs.begin(), segs.end());
    for (const LabeledSample& s : out.samples) {
      const auto it = by_id.find(s.trajectory.sample_id());
      if (it == by_id.end()) throw InvalidInputError("segments.csv has no entry for " + s.trajectory.sample_id());
      validate_segmentation(it->second, s.trajectory.size());
      out.truth.push_back(it->second);
    }
  }
  return out;
}

std::string serialize_pattern_model(const PatternModel& m) { return model_json(m).dump(); }

std::uint64_t trajectory_hash(const Trajectory& t) {
  std::uint64_t h = fnv1a(t.subject_id());
  h = fnv1a(std::string_view("\0", 1), h);
  h = fnv1a(t.sample_id(), h);
  const double rate = t.sample_rate();
  mix(h, &rate, sizeof rate);
  for (const Joint& j : t.skeleton()->joints()) {
    h = fnv1a(j.name, h);
    const long long parent = j.parent ? *j.parent : -1;
    mix(h, &parent, sizeof parent);
    mix(h, j.offset.data(), 3 * sizeof(double));
  }
  for (const Frame& f : t.frames()) {
    mix(h, f.rotations().data(), static_cast<std::size_t>(f.rotations().size()) * sizeof(double));
    mix(h, f.positions().data(), static_cast<std::size_t>(f.positions().size()) * sizeof(double));
  }
  return h;
}

void write_model_bundle(const std::filesystem::path& path, const TrainedLadder& ladder) {
  Json j;
  j["format"] = "formcheck-model";
  j["version"] = kFormatVersion;
  j["config"] = detail::to_json(ladder.config);
  // A thread count is not part of the model.
  j["config"].erase("workers");
  if (ladder.reference) {
    j["reference"] = Json{{"sample", ladder.reference->sample_id()},
                          {"hash", hex(trajectory_hash(*ladder.reference))},
                          {"trajectory", trajectory_text(*ladder.reference)}};
  } else {
    j["reference"] = nullptr;
  }
  j["reference_segments"] = ladder.reference_segments ? segmentation_json(*ladder.reference_segments) : Json(nullptr);
  Json models = Json::array();
  for (const PatternModel& m : ladder.models) models.push_back(model_json(m));
  j["models"] = models;
  Json skipped = Json::array();
  for (const SkippedPattern& s : ladder.skipped) skipped.push_back(Json{{"pattern", std::string(to_string(s.pattern))}, {"reason", s.reason}});
  j["skipped"] = skipped;
  Json warnings = Json::array();
  for (const SkippedPattern& s : ladder.warnings) warnings.push_back(Json{{"pattern", std::string(to_string(s.pattern))}, {"reason", s.reason}});
  j["warnings"] = warnings;
  j["unsegmented"] = ladder.unsegmented;
  const auto neighbor_json = [](const NeighborSet& nb) {
    Json a = Json::array();
    for (std::size_t i = 0; i < nb.trajectories.size(); ++i) {
      a.push_back(Json{{"sample", nb.trajectories[i].sample_id()},
                       {"hash", hex(trajectory_hash(nb.trajectories[i]))},
                       {"labels", label_row_json(nb.labels[i])}});
    }
    return a;
  };
  j["neighbors"] = neighbor_json(ladder.neighbors);
  Json segs = Json::array();
  for (const NeighborSet& nb : ladder.segment_neighbors) segs.push_back(neighbor_json(nb));
  j["segment_neighbors"] = segs;
  std::ofstream out(path);
  if (!out) throw NotFoundError("cannot write model bundle " + path.string());
  out << j.dump() << "\n";
}

TrainedLadder read_model_bundle(const std::filesystem::path& path, std::span<const LabeledSample> corpus) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open model bundle " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(0, path.string() + ": not a model bundle: " + e.what());
  }
  if (!j.is_object() || j.value("format", "") != "formcheck-model") throw ParseError(0, path.string() + ": not a model bundle");
  if (j.value("version", 0) != kFormatVersion) {
    throw FormatVersionError("model bundle v" + std::to_string(j.value("version", 0)) + " is not supported");
  }
  TrainedLadder ladder;
  try {
    ladder.config = detail::ladder_from_json(j.at("config"));
    if (!j.at("reference").is_null()) {
      const Json& r = j["reference"];
      ladder.reference = trajectory_from_text(r.at("trajectory").get<std::string>());
      if (trajectory_hash(*ladder.reference) != unhex(r.at("hash").get<std::string>())) {
        throw ModelError("reference trajectory does not match its recorded hash");
      }
    }
    if (!j.at("reference_segments").is_null()) ladder.reference_segments = json_segmentation(j["reference_segments"]);
    for (const Json& m : j.at("models")) {
      ladder.models.push_back(json_model(m));
      const PatternModel& pm = ladder.models.back();
      if (!is_nearest_neighbor(ladder.config.variant) && !pm.constant && !pm.linear && !pm.rbf && !pm.forest) {
        throw ModelError("model for '" + std::string(to_string(pm.pattern)) + "' has no classifier");
      }
    }
    for (const Json& s : j.at("skipped")) {
      ladder.skipped.push_back({error_pattern_from_string(s.at("pattern").get<std::string>()), s.at("reason").get<std::string>()});
    }
    for (const Json& s : j.at("warnings")) {
      ladder.warnings.push_back({error_pattern_from_string(s.at("pattern").get<std::string>()), s.at("reason").get<std::string>()});
    }
    ladder.unsegmented = j.at("unsegmented").get<std::vector<std::string>>();

    const Variant v = ladder.config.variant;
    const Json& nb = j.at("neighbors");
    const Json& snb = j.at("segment_neighbors");
    const bool needs_corpus = !nb.empty() || std::any_of(snb.begin(), snb.end(), [](const Json& a) { return !a.empty(); });
    if (!needs_corpus) return ladder;
    if (corpus.empty()) throw ModelError("this model references its training samples; pass the training corpus");
    std::map<std::string, const LabeledSample*> by_id;
    for (const LabeledSample& s : corpus) by_id[s.trajectory.sample_id()] = &s;
    const auto lookup = [&](const Json& e) -> const Trajectory& {
      const auto id = e.at("sample").get<std::string>();
      const auto it = by_id.find(id);
      if (it == by_id.end()) throw ModelError("training sample " + id + " is not in the corpus");
      return it->second->trajectory;
    };
    const auto check = [](const Trajectory& t, const Json& e) {
      if (trajectory_hash(t) != unhex(e.at("hash").get<std::string>())) {
        throw ModelError("training sample " + t.sample_id() + " differs from the one the model was trained on");
      }
    };

    for (const Json& e : nb) {
      const Trajectory& raw = lookup(e);
      Trajectory t = v == Variant::nn_refdtw ? warp_to_reference(raw, *ladder.reference, ladder.config.dtw) : raw;
      check(t, e);
      ladder.neighbors.trajectories.push_back(std::move(t));
      ladder.neighbors.labels.push_back(json_label_row(e.at("labels")));
    }
    if (snb.size() != 5) throw ModelError("segment neighbors must list five segments");
    std::map<std::string, Segmentation> segs;
    for (std::size_t s = 0; s < 5; ++s) {
      for (const Json& e : snb[s]) {
        const Trajectory& raw = lookup(e);
        auto it = segs.find(raw.sample_id());
        if (it == segs.end()) it = segs.emplace(raw.sample_id(), segment(raw, ladder.config.segmentation)).first;
        Trajectory t = extract_segment(raw, it->second, kSegmentLabels[s]);
        check(t, e);
        ladder.segment_neighbors[s].trajectories.push_back(std::move(t));
        ladder.segment_neighbors[s].labels.push_back(json_label_row(e.at("labels")));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(path.string() + ": malformed model bundle: " + e.what());
  } catch (const ModelError&) {
    throw;
  } catch (const ParseError&) {
    throw;
  } catch (const SegmentationError& e) {
    throw ModelError(std::string("training sample no longer segments: ") + e.what());
  } catch (const ConfigError& e) {
    throw ModelError(std::string("model configuration: ") + e.what());
  } catch (const InvalidInputError& e) {
    throw ModelError(path.string() + ": malformed model bundle: " + e.what());
  }
  return ladder;
}

namespace {

Json counts_json(const ConfusionCounts& c) { return Json{{"tp", c.tp}, {"tn", c.tn}, {"fp", c.fp}, {"fn", c.fn}}; }
ConfusionCounts json_counts(const Json& j) {
  return {j.at("tp").get<long>(), j.at("tn").get<long>(), j.at("fp").get<long>(), j.at("fn").get<long>()};
}
Json mean_sd_json(const MeanSd& m) { return Json{{"mean", m.mean}, {"sd", m.sd}}; }
MeanSd json_mean_sd(const Json& j) { return {j.at("mean").get<double>(), j.at("sd").get<double>()}; }

}  // namespace

void write_report(std::ostream& out, const ScoreReport& r) {
  Json j;
  j["format"] = "formcheck-report";
  j["version"] = kFormatVersion;
  j["variant"] = r.variant;
  j["folds"] = r.folds;
  j["seed"] = r.seed;
  j["plan"] = r.plan.folds;
  Json ps = Json::array();
  for (const PatternScore& s : r.patterns) {
    Json p;
    p["pattern"] = std::string(to_string(s.pattern));
    p["accuracy"] = mean_sd_json(s.accuracy);
    p["f1"] = mean_sd_json(s.f1);
    p["roc_auc"] = s.roc_auc ? mean_sd_json(*s.roc_auc) : Json(nullptr);
    p["pooled"] = counts_json(s.pooled);
    Json folds = Json::array();
    for (const FoldScore& f : s.folds) {
      folds.push_back(Json{{"counts", counts_json(f.counts)},
                           {"roc_auc", f.roc_auc ? Json(*f.roc_auc) : Json(nullptr)},
                           {"model_hash", hex(f.model_hash)},
                           {"constant", f.constant}});
    }
    p["folds"] = folds;
    p["flags"] = s.flags;
    p["segments"] = s.segments;
    ps.push_back(p);
  }
  j["patterns"] = ps;
  out << j.dump(2) << "\n";
}

ScoreReport read_report(std::istream& in) {
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(0, std::string("not a report: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != "formcheck-report") throw ParseError(0, "not a report");
  if (j.value("version", 0) != kFormatVersion) throw FormatVersionError("report format is not supported");
  ScoreReport r;
  try {
    r.variant = j.at("variant").get<std::string>();
    r.folds = j.at("folds").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.plan.folds = j.at("plan").get<std::vector<std::vector<std::string>>>();
    for (const Json& p : j.at("patterns")) {
      PatternScore s;
      s.pattern = error_pattern_from_string(p.at("pattern").get<std::string>());
      s.accuracy = json_mean_sd(p.at("accuracy"));
      s.f1 = json_mean_sd(p.at("f1"));
      if (!p.at("roc_auc").is_null()) s.roc_auc = json_mean_sd(p["roc_auc"]);
      s.pooled = json_counts(p.at("pooled"));
      for (const Json& f : p.at("folds")) {
        FoldScore fs;
        fs.counts = json_counts(f.at("counts"));
        if (!f.at("roc_auc").is_null()) fs.roc_auc = f["roc_auc"].get<double>();
        fs.model_hash = unhex(f.at("model_hash").get<std::string>());
        fs.constant = f.at("constant").get<bool>();
        s.folds.push_back(fs);
      }
      s.flags = p.at("flags").get<std::vector<std::string>>();
      s.segments = p.at("segments").get<std::vector<std::string>>();
      r.patterns.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("malformed report: ") + e.what());
  } catch (const ModelError& e) {
    throw ParseError(0, std::string("malformed report: ") + e.what());
  }
  return r;
}

void write_report_table(std::ostream& out, const ScoreReport& r) {
  out << r.variant << ", " << r.folds << " folds, seed " << r.seed << "\n";
  out << std::left << std::setw(32) << "pattern" << std::right << std::setw(16) << "accuracy" << std::setw(16) << "f1"
      << std::setw(16) << "roc_auc" << "\n";
  const auto cell = [](const MeanSd& m) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f +- %.3f", m.mean, m.sd);
    return std::string(buf);
  };
  for (const PatternScore& s : r.patterns) {
    out << std::left << std::setw(32) << to_string(s.pattern) << std::right << std::setw(16) << cell(s.accuracy)
        << std::setw(16) << cell(s.f1) << std::setw(16) << (s.roc_auc ? cell(*s.roc_auc) : std::string("n/a")) << "\n";
  }
  for (const PatternScore& s : r.patterns) {
    for (const std::string& f : s.flags) out << "note: " << to_string(s.pattern) << ": " << f << "\n";
  }
}

void write_scores_csv(std::ostream& out, const ScoreReport& r) {
  out << "pattern,accuracy,accuracy_sd,f1,f1_sd,roc_auc,roc_auc_sd\n";
  for (const PatternScore& s : r.patterns) {
    out << to_string(s.pattern) << "," << format_double(s.accuracy.mean) << "," << format_double(s.accuracy.sd) << ","
        << format_double(s.f1.mean) << "," << format_double(s.f1.sd) << ","
        << (s.roc_auc ? format_double(s.roc_auc->mean) : "") << "," << (s.roc_auc ? format_double(s.roc_auc->sd) : "")
        << "\n";
  }
}

void write_latency(std::ostream& out, const std::string& variant, const LatencySummary& s,
                   const std::optional<LatencyStats>& single_dtw) {
  const auto stats = [](const LatencyStats& l) {
    return Json{{"median_ms", l.median_ms}, {"p95_ms", l.p95_ms}, {"mean_ms", l.mean_ms}, {"count", l.count}};
  };
  Json j;
  j["variant"] = variant;
  j["per_query"] = Json{{"segment", stats(s.segment)},
                        {"align", stats(s.align)},
                        {"feature", stats(s.feature)},
                        {"classify", stats(s.classify)},
                        {"total", stats(s.total)}};
  if (single_dtw) j["single_dtw"] = stats(*single_dtw);
  out << j.dump(2) << "\n";
}

}  // namespace formcheck
