#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <json.hpp>

#include "datatrace/annotation.hpp"
#include "datatrace/catalog.hpp"
#include "datatrace/digest.hpp"
#include "datatrace/error.hpp"
#include "datatrace/harvester.hpp"
#include "datatrace/reporter.hpp"

namespace datatrace::annotation {

/// Where GET /projects/{id}/agreement finds the automated side.
struct AgreementSources {
  std::optional<std::filesystem::path> detections;  // detections.csv from a pipeline run
  std::optional<std::filesystem::path> papers;      // papers.json; evaluated-paper set
  std::optional<std::filesystem::path> registry;    // maps dataset labels to ids
};

inline int http_status(ErrorCode c) {
  switch (c) {
    case ErrorCode::UnknownProject:
    case ErrorCode::UnknownPdf:
    case ErrorCode::StageInputMissing: return 404;
    case ErrorCode::Unauthorized: return 401;
    case ErrorCode::DuplicateProjectName:
    case ErrorCode::DuplicateLabel:
    case ErrorCode::FrozenSet: return 409;
    case ErrorCode::NoOverlap: return 422;
    case ErrorCode::IoError: return 500;
    default: return 400;
  }
}

/// HTTP front end of the annotation store. Routes:
///   GET  /projects                     GET  /projects/{id}
///   POST /projects                     POST /projects/{id}/labels
///   POST /projects/{id}/groups         GET  /projects/{id}/pdfs/{pdf}
///   GET  /projects/{id}/annotations    GET  /projects/{id}/export
///   GET  /projects/{id}/agreement      POST /tokens
///   POST /annotations                  DELETE /annotations
class Service {
 public:
  Service(Store& store, AgreementSources sources = {}) : store_(store), sources_(std::move(sources)) {}

  void mount(httplib::Server& server) {
    using httplib::Request, httplib::Response;
    auto route = [this](auto fn) {
      return [this, fn](const Request& req, Response& res) {
        try {
          fn(req, res);
        } catch (const Error& e) {
          send_error(res, http_status(e.code()), std::string(to_string(e.code())), e.detail());
        } catch (const nlohmann::json::exception& e) {
          send_error(res, 400, "InvalidArgument", e.what());
        }
      };
    };

    server.Get("/projects", route([this](const Request&, Response& res) {
      auto list = nlohmann::json::array();
      for (const auto& p : store_.list_projects()) list.push_back(p);
      send_json(res, 200, list);
    }));

    server.Get("/projects/:id", route([this](const Request& req, Response& res) {
      send_json(res, 200, store_.project(req.path_params.at("id")));
    }));

    server.Post("/projects", route([this](const Request& req, Response& res) {
      auto p = create_from_request(req);
      send_json(res, 201, p);
    }));

    server.Post("/projects/:id/labels", route([this](const Request& req, Response& res) {
      auto body = nlohmann::json::parse(req.body);
      auto which = body.value("set", 1) == 2 ? LabelSet::locations : LabelSet::datasets;
      auto labels = store_.add_label(req.path_params.at("id"), body.at("value").get<std::string>(), which);
      send_json(res, 200, {{"label_set_1", labels}});
    }));

    server.Post("/projects/:id/groups", route([this](const Request& req, Response& res) {
      std::string file = req.body;
      if (req.is_multipart_form_data()) file = req.has_file("file") ? req.get_file_value("file").content : "";
      send_json(res, 200, {{"groups", store_.upload_groups(req.path_params.at("id"), file)}});
    }));

    server.Get("/projects/:id/pdfs/:pdf", route([this](const Request& req, Response& res) {
      auto path = store_.pdf_path(req.path_params.at("id"), req.path_params.at("pdf"));
      res.status = 200;
      res.set_content(fsio::read_file(path), "application/pdf");
    }));

    server.Get("/projects/:id/annotations", route([this](const Request& req, Response& res) {
      std::optional<std::string> who;
      if (req.has_param("annotator")) who = req.get_param_value("annotator");
      auto list = nlohmann::json::array();
      for (const auto& a : store_.annotations(req.path_params.at("id"), who)) list.push_back(annotation_json(a));
      send_json(res, 200, list);
    }));

    server.Get("/projects/:id/export", route([this](const Request& req, Response& res) {
      auto files = store_.export_annotations(req.path_params.at("id"));
      if (req.has_param("annotator")) {
        auto it = files.find(req.get_param_value("annotator"));
        if (it == files.end()) throw Error(ErrorCode::StageInputMissing, "no export for that annotator");
        res.status = 200;
        res.set_content(it->second, "text/csv");
        return;
      }
      send_json(res, 200, {{"files", files}});
    }));

    server.Get("/projects/:id/agreement", route([this](const Request& req, Response& res) {
      send_json(res, 200, to_json(agreement(req.path_params.at("id"))));
    }));

    server.Post("/tokens", route([this](const Request& req, Response& res) {
      auto body = nlohmann::json::parse(req.body);
      auto who = body.at("annotator_id").get<std::string>();
      send_json(res, 201, {{"annotator_id", who}, {"token", store_.issue_token(who)}});
    }));

    server.Post("/annotations", route([this](const Request& req, Response& res) {
      auto a = annotation_from(req);
      bool stored = store_.record_annotation(a);
      send_json(res, stored ? 201 : 200, {{"stored", stored}});
    }));

    server.Delete("/annotations", route([this](const Request& req, Response& res) {
      auto a = annotation_from(req);
      send_json(res, 200, {{"deleted", store_.delete_annotation(a)}});
    }));
  }

  AgreementReport agreement(const std::string& project_id) const {
    auto project = store_.project(project_id);
    if (!sources_.detections) throw Error(ErrorCode::StageInputMissing, "no detections file configured");
    auto detections = parse_detections_csv(fsio::read_file(*sources_.detections));
    std::optional<std::set<std::string>> evaluated;
    if (sources_.papers) {
      evaluated.emplace();
      auto papers = nlohmann::json::parse(fsio::read_file(*sources_.papers)).get<std::vector<PaperRecord>>();
      for (const auto& p : papers) evaluated->insert(p.paper_id);
    }
    std::optional<std::vector<DatasetRecord>> registry;
    if (sources_.registry) registry = load_dataset_registry(*sources_.registry);
    return compute_agreement(project, store_.annotations(project_id), detections,
                             label_mapper(registry ? &*registry : nullptr), evaluated);
  }

 private:
  static void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
    send_json(res, status, {{"error", code}, {"message", message}});
  }

  static nlohmann::json annotation_json(const Annotation& a) {
    return {{"project_id", a.project_id}, {"annotator_id", a.annotator_id}, {"pdf_id", a.pdf_id},
            {"label_1", a.label_1},       {"label_2", a.label_2},           {"created_at", a.created_at}};
  }

  std::string authenticate(const httplib::Request& req) const {
    std::string token = req.get_header_value("X-Annotator-Token");
    if (auto auth = req.get_header_value("Authorization"); token.empty() && auth.starts_with("Bearer "))
      token = auth.substr(7);
    if (token.empty()) throw Error(ErrorCode::Unauthorized, "missing annotator token");
    auto who = store_.annotator_for_token(token);
    if (!who) throw Error(ErrorCode::Unauthorized, "unknown annotator token");
    return *who;
  }

  Annotation annotation_from(const httplib::Request& req) const {
    auto who = authenticate(req);
    auto body = nlohmann::json::parse(req.body);
    Annotation a;
    a.project_id = body.at("project_id").get<std::string>();
    a.annotator_id = who;
    a.pdf_id = body.at("pdf_id").get<std::string>();
    a.label_1 = body.at("label_1").get<std::string>();
    a.label_2 = body.at("label_2").get<std::string>();
    return a;
  }

  /// JSON body {name, label_set_1, label_set_2, pdfs: [{filename, content_base64}]}
  /// or multipart with `name`, newline-separated label fields and `pdfs` files.
  /// label_set_2 defaults to the detector's location classes.
  Project create_from_request(const httplib::Request& req) {
    std::string name;
    std::vector<std::string> set1, set2;
    std::vector<PdfUpload> pdfs;
    bool have_set2 = false;
    if (req.is_multipart_form_data()) {
      auto field = [&](const char* key) { return req.has_file(key) ? req.get_file_value(key).content : std::string(); };
      name = field("name");
      set1 = text::split(field("label_set_1"), '\n');
      if (req.has_file("label_set_2")) {
        have_set2 = true;
        set2 = text::split(field("label_set_2"), '\n');
      }
      for (const auto& f : req.get_file_values("pdfs")) pdfs.push_back({f.filename, f.content});
    } else {
      auto body = nlohmann::json::parse(req.body);
      name = body.at("name").get<std::string>();
      set1 = body.value("label_set_1", std::vector<std::string>{});
      if (body.contains("label_set_2")) {
        have_set2 = true;
        set2 = body["label_set_2"].get<std::vector<std::string>>();
      }
      for (const auto& f : body.value("pdfs", nlohmann::json::array()))
        pdfs.push_back({f.at("filename").get<std::string>(), base64_decode(f.at("content_base64").get<std::string>())});
    }
    if (!have_set2) set2 = default_location_labels();
    return store_.create_project(name, pdfs, set1, set2);
  }

  Store& store_;
  AgreementSources sources_;
};

}  // namespace datatrace::annotation
