#pragma once

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "datatrace/catalog.hpp"
#include "datatrace/csv.hpp"
#include "datatrace/detector.hpp"
#include "datatrace/digest.hpp"
#include "datatrace/error.hpp"
#include "datatrace/text.hpp"

namespace datatrace::annotation {

/// Location labels offered when a project does not bring its own.
inline const std::vector<std::string>& default_location_labels() {
  static const std::vector<std::string> labels = {"Abstract", "Body section", "Figure caption",
                                                  "Table caption", "Footnote", "Reference list"};
  return labels;
}

struct Project {
  std::string project_id;
  std::string name;
  std::vector<std::string> pdf_ids;
  std::vector<std::string> label_set_1;  // datasets; append-only
  std::vector<std::string> label_set_2;  // locations; frozen at creation
  std::map<std::string, std::vector<std::string>> groups;  // annotator -> pdf_ids

  friend bool operator==(const Project&, const Project&) = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(Project, project_id, name, pdf_ids, label_set_1, label_set_2, groups)

struct Annotation {
  std::string project_id;
  std::string annotator_id;
  std::string pdf_id;
  std::string label_1;
  std::string label_2;
  std::string created_at;

  auto identity() const { return std::tie(annotator_id, pdf_id, label_1, label_2); }
  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct PdfUpload {
  std::string filename;
  std::string content;
};

enum class LabelSet { datasets = 1, locations = 2 };

inline std::string utc_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// File-backed project store:
///   <root>/projects/<id>/project.json
///   <root>/projects/<id>/pdfs/<pdf_id>.pdf
///   <root>/projects/<id>/annotations/<annotator>.jsonl   (append-only log)
///   <root>/tokens.json
/// All mutations go through one mutex; annotators write disjoint logs.
class Store {
 public:
  using Clock = std::function<std::string()>;

  explicit Store(std::filesystem::path root, Clock clock = utc_now) : root_(std::move(root)), clock_(std::move(clock)) {
    std::filesystem::create_directories(root_ / "projects");
  }

  const std::filesystem::path& root() const { return root_; }

  Project create_project(const std::string& name, const std::vector<PdfUpload>& pdfs,
                         std::vector<std::string> label_set_1, std::vector<std::string> label_set_2) {
    std::lock_guard lock(mu_);
    if (text::trim(name).empty()) throw Error(ErrorCode::InvalidArgument, "project name is empty");
    if (pdfs.empty()) throw Error(ErrorCode::EmptyPdfSet, "a project needs at least one PDF");
    for (const auto& p : list_locked())
      if (p.name == name) throw Error(ErrorCode::DuplicateProjectName, name);

    Project p;
    p.name = name;
    p.project_id = unique_project_id(name);
    p.label_set_1 = clean_labels(std::move(label_set_1));
    p.label_set_2 = clean_labels(std::move(label_set_2));

    auto dir = project_dir(p.project_id);
    for (const auto& pdf : pdfs) {
      auto stem = text::slugify(std::filesystem::path(pdf.filename).stem().string());
      if (stem.empty()) stem = "pdf";
      auto id = stem;
      for (int n = 2; std::find(p.pdf_ids.begin(), p.pdf_ids.end(), id) != p.pdf_ids.end(); ++n)
        id = stem + "_" + std::to_string(n);
      fsio::write_file_atomic(dir / "pdfs" / (id + ".pdf"), pdf.content);
      p.pdf_ids.push_back(id);
    }
    save(p);
    return p;
  }

  std::vector<Project> list_projects() const {
    std::lock_guard lock(mu_);
    return list_locked();
  }

  Project project(const std::string& id) const {
    std::lock_guard lock(mu_);
    return load(id);
  }

  std::vector<std::string> add_label(const std::string& id, const std::string& value,
                                     LabelSet which = LabelSet::datasets) {
    std::lock_guard lock(mu_);
    auto p = load(id);
    if (which == LabelSet::locations) throw Error(ErrorCode::FrozenSet, "the location label set is fixed");
    auto label = text::collapse_whitespace(value);
    if (label.empty()) throw Error(ErrorCode::InvalidArgument, "label is empty");
    if (std::find(p.label_set_1.begin(), p.label_set_1.end(), label) != p.label_set_1.end())
      throw Error(ErrorCode::DuplicateLabel, label);
    p.label_set_1.push_back(label);
    save(p);
    return p.label_set_1;
  }

  /// Group file: header `annotator,pdf_id`, one assignment per row. Replaces
  /// the previous grouping; an empty file clears it.
  std::map<std::string, std::vector<std::string>> upload_groups(const std::string& id, std::string_view group_file) {
    std::lock_guard lock(mu_);
    auto p = load(id);
    std::map<std::string, std::vector<std::string>> groups;
    auto rows = csv::parse(group_file);
    if (!rows.empty()) {
      csv::Header header(rows.front());
      auto col_user = header.find({"annotator", "annotator_id", "user", "group"});
      auto col_pdf = header.find({"pdf_id", "pdf", "paper_id"});
      if (!col_user || !col_pdf) throw Error(ErrorCode::MalformedRow, "group file needs annotator and pdf_id columns");
      for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() <= std::max(*col_user, *col_pdf))
          throw Error(ErrorCode::MalformedRow, "group row " + std::to_string(i) + " is short");
        const auto& user = r[*col_user];
        const auto& pdf = r[*col_pdf];
        if (user.empty() || pdf.empty()) throw Error(ErrorCode::MalformedRow, "group row " + std::to_string(i));
        if (std::find(p.pdf_ids.begin(), p.pdf_ids.end(), pdf) == p.pdf_ids.end())
          throw Error(ErrorCode::UnknownPdfId, pdf);
        auto& list = groups[user];
        if (std::find(list.begin(), list.end(), pdf) == list.end()) list.push_back(pdf);
      }
    }
    p.groups = groups;
    save(p);
    return groups;
  }

  /// Stores the annotation; returns false when the identical tuple exists.
  bool record_annotation(Annotation a) {
    std::lock_guard lock(mu_);
    auto p = load(a.project_id);
    check_annotation(p, a);
    auto current = live_annotations(p.project_id, a.annotator_id);
    for (const auto& x : current)
      if (x.identity() == a.identity()) return false;
    if (a.created_at.empty()) a.created_at = clock_();
    append_event(a, "add");
    return true;
  }

  /// Appends a delete event; returns false if nothing matched.
  bool delete_annotation(const Annotation& a) {
    std::lock_guard lock(mu_);
    load(a.project_id);
    auto current = live_annotations(a.project_id, a.annotator_id);
    for (const auto& x : current)
      if (x.identity() == a.identity()) {
        auto ev = x;
        ev.created_at = clock_();
        append_event(ev, "delete");
        return true;
      }
    return false;
  }

  std::vector<Annotation> annotations(const std::string& id, std::optional<std::string> annotator = {}) const {
    std::lock_guard lock(mu_);
    load(id);
    std::vector<Annotation> out;
    for (const auto& user : annotators_locked(id)) {
      if (annotator && *annotator != user) continue;
      auto list = live_annotations(id, user);
      out.insert(out.end(), list.begin(), list.end());
    }
    return out;
  }

  /// One CSV per annotator (grouped annotators without annotations get a
  /// header-only file). Keys are annotator ids.
  std::map<std::string, std::string> export_annotations(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto p = load(id);
    std::set<std::string> users = annotators_locked(id);
    for (const auto& [user, _] : p.groups) users.insert(user);
    std::map<std::string, std::string> files;
    for (const auto& user : users) {
      auto list = live_annotations(id, user);
      std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) {
        return std::tie(a.pdf_id, a.label_1, a.label_2) < std::tie(b.pdf_id, b.label_1, b.label_2);
      });
      std::ostringstream os;
      csv::write_row(os, {"project_id", "annotator_id", "pdf_id", "label_1", "label_2", "created_at"});
      for (const auto& a : list)
        csv::write_row(os, {a.project_id, a.annotator_id, a.pdf_id, a.label_1, a.label_2, a.created_at});
      files[user] = os.str();
    }
    return files;
  }

  std::vector<std::filesystem::path> export_to_dir(const std::string& id, const std::filesystem::path& dir) const {
    std::vector<std::filesystem::path> written;
    for (const auto& [user, content] : export_annotations(id)) {
      auto path = dir / (text::slugify(user) + ".csv");
      fsio::write_file_atomic(path, content);
      written.push_back(path);
    }
    return written;
  }

  std::filesystem::path pdf_path(const std::string& id, const std::string& pdf_id) const {
    std::lock_guard lock(mu_);
    auto p = load(id);
    if (std::find(p.pdf_ids.begin(), p.pdf_ids.end(), pdf_id) == p.pdf_ids.end())
      throw Error(ErrorCode::UnknownPdf, pdf_id);
    return project_dir(id) / "pdfs" / (pdf_id + ".pdf");
  }

  // Lightweight per-user tokens: no passwords, one token per annotator.
  std::string issue_token(const std::string& annotator_id) {
    std::lock_guard lock(mu_);
    if (text::trim(annotator_id).empty()) throw Error(ErrorCode::InvalidArgument, "annotator id is empty");
    auto tokens = load_tokens();
    for (const auto& [tok, user] : tokens.items())
      if (user == annotator_id) return tok;
    std::random_device rd;
    std::string raw;
    for (int i = 0; i < 4; ++i) raw += std::to_string(rd());
    auto token = sha256_hex(raw + annotator_id).substr(0, 32);
    tokens[token] = annotator_id;
    fsio::write_file_atomic(root_ / "tokens.json", tokens.dump(1));
    return token;
  }

  std::optional<std::string> annotator_for_token(const std::string& token) const {
    std::lock_guard lock(mu_);
    auto tokens = load_tokens();
    if (auto it = tokens.find(token); it != tokens.end()) return it->get<std::string>();
    return std::nullopt;
  }

 private:
  std::filesystem::path project_dir(const std::string& id) const { return root_ / "projects" / id; }

  std::vector<Project> list_locked() const {
    std::vector<Project> out;
    for (const auto& entry : std::filesystem::directory_iterator(root_ / "projects"))
      if (std::filesystem::exists(entry.path() / "project.json"))
        out.push_back(load(entry.path().filename().string()));
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.project_id < b.project_id; });
    return out;
  }

  Project load(const std::string& id) const {
    if (id.empty() || text::slugify(id) != id) throw Error(ErrorCode::UnknownProject, id);
    auto path = project_dir(id) / "project.json";
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) throw Error(ErrorCode::UnknownProject, id);
    return nlohmann::json::parse(fsio::read_file(path)).get<Project>();
  }

  void save(const Project& p) const {
    fsio::write_file_atomic(project_dir(p.project_id) / "project.json", nlohmann::json(p).dump(2) + "\n");
  }

  std::string unique_project_id(const std::string& name) const {
    auto base = text::to_lower(text::slugify(name));
    if (base.empty()) base = "project";
    auto id = base;
    for (int n = 2; std::filesystem::exists(project_dir(id)); ++n) id = base + "-" + std::to_string(n);
    return id;
  }

  static std::vector<std::string> clean_labels(std::vector<std::string> labels) {
    std::vector<std::string> out;
    for (auto& l : labels) {
      auto t = text::collapse_whitespace(l);
      if (t.empty()) continue;
      if (std::find(out.begin(), out.end(), t) != out.end()) throw Error(ErrorCode::DuplicateLabel, t);
      out.push_back(std::move(t));
    }
    return out;
  }

  static void check_annotation(const Project& p, const Annotation& a) {
    if (text::trim(a.annotator_id).empty()) throw Error(ErrorCode::Unauthorized, "missing annotator");
    if (std::find(p.pdf_ids.begin(), p.pdf_ids.end(), a.pdf_id) == p.pdf_ids.end())
      throw Error(ErrorCode::UnknownPdf, a.pdf_id);
    if (std::find(p.label_set_1.begin(), p.label_set_1.end(), a.label_1) == p.label_set_1.end())
      throw Error(ErrorCode::UnknownLabel, a.label_1);
    if (std::find(p.label_set_2.begin(), p.label_set_2.end(), a.label_2) == p.label_set_2.end())
      throw Error(ErrorCode::UnknownLabel, a.label_2);
  }

  std::filesystem::path log_path(const std::string& id, const std::string& annotator) const {
    return project_dir(id) / "annotations" / (text::slugify(annotator) + ".jsonl");
  }

  std::set<std::string> annotators_locked(const std::string& id) const {
    std::set<std::string> users;
    auto dir = project_dir(id) / "annotations";
    std::error_code ec;
    if (!std::filesystem::exists(dir, ec)) return users;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      std::ifstream in(entry.path());
      std::string line;
      if (std::getline(in, line) && !line.empty())
        users.insert(nlohmann::json::parse(line).at("annotator_id").get<std::string>());
    }
    return users;
  }

  void append_event(const Annotation& a, std::string_view op) const {
    auto path = log_path(a.project_id, a.annotator_id);
    std::filesystem::create_directories(path.parent_path());
    nlohmann::json ev{{"op", op},           {"project_id", a.project_id}, {"annotator_id", a.annotator_id},
                      {"pdf_id", a.pdf_id}, {"label_1", a.label_1},       {"label_2", a.label_2},
                      {"at", a.created_at}};
    std::ofstream out(path, std::ios::app | std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot append to " + path.string());
    out << ev.dump() << '\n';
  }

  /// Replays the user's log: adds in order, deletes remove the match.
  std::vector<Annotation> live_annotations(const std::string& id, const std::string& annotator) const {
    std::vector<Annotation> live;
    std::ifstream in(log_path(id, annotator));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto ev = nlohmann::json::parse(line);
      Annotation a{ev.at("project_id"), ev.at("annotator_id"), ev.at("pdf_id"),
                   ev.at("label_1"),    ev.at("label_2"),      ev.value("at", "")};
      if (ev.at("op") == "delete") {
        live.erase(std::remove_if(live.begin(), live.end(), [&](const auto& x) { return x.identity() == a.identity(); }),
                   live.end());
      } else {
        live.push_back(std::move(a));
      }
    }
    return live;
  }

  nlohmann::json load_tokens() const {
    auto path = root_ / "tokens.json";
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return nlohmann::json::object();
    return nlohmann::json::parse(fsio::read_file(path));
  }

  std::filesystem::path root_;
  Clock clock_;
  mutable std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Agreement of the automated detector with human labels

using PairKey = std::pair<std::string, std::string>;  // (paper_id, dataset_id)

struct Tally {
  std::string dataset_id;  // empty for the overall tally
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;

  std::optional<double> precision() const {
    auto d = true_positives + false_positives;
    return d ? std::optional(static_cast<double>(true_positives) / static_cast<double>(d)) : std::nullopt;
  }
  std::optional<double> recall() const {
    auto d = true_positives + false_negatives;
    return d ? std::optional(static_cast<double>(true_positives) / static_cast<double>(d)) : std::nullopt;
  }

  friend bool operator==(const Tally&, const Tally&) = default;
};

struct AgreementReport {
  std::vector<Tally> per_dataset;  // sorted by dataset_id
  Tally overall;
  std::vector<PairKey> automated_only;  // false positives
  std::vector<PairKey> human_only;      // false negatives
  std::size_t papers_compared = 0;
};

/// Human presence pairs are ground truth. Both sides are restricted to the
/// papers in `joinable`; an empty join is NoOverlap.
inline AgreementReport compute_agreement(const std::set<PairKey>& human, const std::set<PairKey>& automated,
                                         const std::set<std::string>& joinable) {
  if (joinable.empty()) throw Error(ErrorCode::NoOverlap, "no annotated PDF joins an evaluated paper");
  std::map<std::string, Tally> tallies;
  AgreementReport report;
  report.papers_compared = joinable.size();
  auto tally = [&](const std::string& ds) -> Tally& {
    auto& t = tallies[ds];
    t.dataset_id = ds;
    return t;
  };
  for (const auto& pair : automated) {
    if (!joinable.count(pair.first)) continue;
    if (human.count(pair)) {
      ++tally(pair.second).true_positives;
    } else {
      ++tally(pair.second).false_positives;
      report.automated_only.push_back(pair);
    }
  }
  for (const auto& pair : human) {
    if (!joinable.count(pair.first) || automated.count(pair)) continue;
    ++tally(pair.second).false_negatives;
    report.human_only.push_back(pair);
  }
  for (auto& [ds, t] : tallies) {
    report.overall.true_positives += t.true_positives;
    report.overall.false_positives += t.false_positives;
    report.overall.false_negatives += t.false_negatives;
    report.per_dataset.push_back(t);
  }
  return report;
}

/// Maps a dataset label to a registry dataset_id (by id, canonical name or
/// alias, case-insensitively); unknown labels map to themselves.
inline std::function<std::string(const std::string&)> label_mapper(const std::vector<DatasetRecord>* registry) {
  return [registry](const std::string& label) {
    if (!registry) return label;
    auto want = text::to_lower(text::collapse_whitespace(label));
    for (const auto& ds : *registry) {
      if (text::to_lower(ds.dataset_id) == want) return ds.dataset_id;
      for (const auto& a : ds.aliases)
        if (text::to_lower(a.text) == want) return ds.dataset_id;
    }
    return label;
  };
}

/// Project-level agreement. Without an explicit evaluated-paper set, the
/// papers that appear in `detections` are taken as evaluated.
inline AgreementReport compute_agreement(const Project& project, const std::vector<Annotation>& annotations,
                                         const std::vector<Detection>& detections,
                                         const std::function<std::string(const std::string&)>& map_label,
                                         const std::optional<std::set<std::string>>& evaluated_papers = {}) {
  std::set<PairKey> human, automated;
  for (const auto& a : annotations) human.insert({a.pdf_id, map_label(a.label_1)});
  std::set<std::string> evaluated;
  for (const auto& d : detections) {
    automated.insert({d.paper_id, d.dataset_id});
    evaluated.insert(d.paper_id);
  }
  if (evaluated_papers) evaluated = *evaluated_papers;
  std::set<std::string> joinable;
  for (const auto& id : project.pdf_ids)
    if (evaluated.count(id)) joinable.insert(id);
  return compute_agreement(human, automated, joinable);
}

inline nlohmann::json to_json(const AgreementReport& r) {
  auto tally_json = [](const Tally& t) {
    nlohmann::json j{{"true_positives", t.true_positives},
                     {"false_positives", t.false_positives},
                     {"false_negatives", t.false_negatives},
                     {"precision", nullptr},
                     {"recall", nullptr}};
    if (!t.dataset_id.empty()) j["dataset_id"] = t.dataset_id;
    if (auto p = t.precision()) j["precision"] = *p;
    if (auto rc = t.recall()) j["recall"] = *rc;
    return j;
  };
  nlohmann::json j{{"papers_compared", r.papers_compared}, {"overall", tally_json(r.overall)}};
  j["per_dataset"] = nlohmann::json::array();
  for (const auto& t : r.per_dataset) j["per_dataset"].push_back(tally_json(t));
  j["automated_only"] = nlohmann::json::array();
  for (const auto& [paper, ds] : r.automated_only) j["automated_only"].push_back({{"paper_id", paper}, {"dataset_id", ds}});
  j["human_only"] = nlohmann::json::array();
  for (const auto& [paper, ds] : r.human_only) j["human_only"].push_back({{"paper_id", paper}, {"dataset_id", ds}});
  return j;
}

}  // namespace datatrace::annotation
