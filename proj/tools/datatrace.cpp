// datatrace command line: pipeline stages, citation-index comparison and
// the annotation service.

#include <csignal>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "datatrace/annotation_service.hpp"
#include "datatrace/http_transport.hpp"
#include "datatrace/pipeline.hpp"

namespace {

using namespace datatrace;

enum Exit { kOk = 0, kStageFailure = 1, kUsage = 2 };

int fail(int status, std::string_view code, const std::string& message, const std::string& stage = {}) {
  nlohmann::json j{{"error", code}, {"message", message}};
  if (!stage.empty()) j["stage"] = stage;
  std::cerr << j.dump() << '\n';
  return status;
}

bool is_usage_error(ErrorCode c) {
  return c == ErrorCode::ConfigMissing || c == ErrorCode::UnknownSubcommand || c == ErrorCode::InvalidArgument;
}

std::set<std::string> read_id_set(const std::string& path) {
  auto j = nlohmann::json::parse(fsio::read_file(path));
  if (j.is_object()) j = j.at("ids");
  std::set<std::string> ids;
  for (const auto& v : j) {
    auto s = v.get<std::string>();
    if (auto doi = text::normalize_doi(s)) ids.insert(*doi);
    else ids.insert(short_openalex_id(s));
  }
  return ids;
}

nlohmann::json ratio_json(const Containment& c) {
  if (auto r = c.ratio()) return *r;
  return nullptr;
}

httplib::Server* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"datatrace: dataset citations and mentions in scientific papers"};
  app.require_subcommand(1);

  std::string config_path, replay_dir, out_dir, grobid_url, mailto;
  std::size_t workers = 0;
  app.add_option("--config", config_path, "Run configuration file");
  app.add_option("--replay", replay_dir, "Cache directory to replay from; no network access");
  app.add_option("--workers", workers, "Parallel workers per stage (default: logical cores)");
  app.add_option("--out", out_dir, "Output directory (overrides config)");
  app.add_option("--grobid-url", grobid_url, "GROBID service base URL");
  app.add_option("--mailto", mailto, "Contact address for the OpenAlex polite pool");

  std::vector<std::string> stages = Pipeline::stage_names();
  std::vector<CLI::App*> stage_cmds;
  for (const auto& s : stages) stage_cmds.push_back(app.add_subcommand(s, "Run the " + s + " stage")->fallthrough());
  auto* all = app.add_subcommand("all", "Run every stage in order")->fallthrough();

  std::string index_a, index_b;
  auto* compare = app.add_subcommand("compare-index", "Containment of two citing-work ID sets")->fallthrough();
  compare->add_option("--a", index_a, "JSON array of IDs (or {\"ids\": [...]})")->required();
  compare->add_option("--b", index_b, "JSON array of IDs (or {\"ids\": [...]})")->required();

  std::string host = "127.0.0.1", store_root = "annotations", static_dir, detections, papers, registry;
  int port = 8000;
  auto* serve = app.add_subcommand("serve", "Start the annotation service")->fallthrough();
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--root", store_root, "Project storage directory");
  serve->add_option("--static", static_dir, "Directory of web UI assets to serve at /");
  serve->add_option("--detections", detections, "detections.csv used for agreement");
  serve->add_option("--papers", papers, "papers.json restricting the evaluated papers");
  serve->add_option("--registry", registry, "Dataset registry mapping labels to ids");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Error& e) {
    if (argc > 1 && argv[1][0] != '-' && !app.get_subcommand_no_throw(argv[1]))
      return fail(kUsage, to_string(ErrorCode::UnknownSubcommand), argv[1]);
    return fail(kUsage, "UsageError", e.what());
  }

  auto* cmd = app.get_subcommands().front();
  const std::string name = cmd->get_name();

  if (cmd == compare) {
    try {
      auto r = compare_citation_indexes(read_id_set(index_a), read_id_set(index_b));
      nlohmann::json j{{"containment_a_in_b", ratio_json(r.a_in_b)},
                       {"containment_b_in_a", ratio_json(r.b_in_a)},
                       {"shared", r.a_in_b.shared},
                       {"size_a", r.a_in_b.total},
                       {"size_b", r.b_in_a.total}};
      std::cout << j.dump() << '\n';
      return kOk;
    } catch (const Error& e) {
      return fail(kStageFailure, to_string(e.code()), e.detail(), name);
    } catch (const std::exception& e) {
      return fail(kStageFailure, "InvalidInput", e.what(), name);
    }
  }

  std::optional<RunConfig> config;
  try {
    if (!config_path.empty()) config = load_config(config_path);
  } catch (const Error& e) {
    return fail(kUsage, to_string(e.code()), e.detail());
  }

  if (cmd == serve) {
    annotation::AgreementSources sources;
    if (config) {
      sources.detections = config->out / "detections.csv";
      sources.papers = config->out / "papers.json";
      sources.registry = config->datasets;
    }
    if (!detections.empty()) sources.detections = detections;
    if (!papers.empty()) sources.papers = papers;
    if (!registry.empty()) sources.registry = registry;
    try {
      annotation::Store store(store_root);
      annotation::Service service(store, sources);
      httplib::Server server;
      service.mount(server);
      if (!static_dir.empty() && !server.set_mount_point("/", static_dir))
        return fail(kUsage, to_string(ErrorCode::InvalidArgument), "static directory not found: " + static_dir);
      g_server = &server;
      std::signal(SIGINT, [](int) { if (g_server) g_server->stop(); });
      std::signal(SIGTERM, [](int) { if (g_server) g_server->stop(); });
      std::cerr << "annotation service on http://" << host << ':' << port << '\n';
      if (!server.listen(host, port)) return fail(kStageFailure, "IoError", "cannot listen on port " + std::to_string(port));
      return kOk;
    } catch (const Error& e) {
      return fail(kStageFailure, to_string(e.code()), e.detail(), name);
    }
  }

  // Pipeline stages.
  if (!config) return fail(kUsage, to_string(ErrorCode::ConfigMissing), "--config is required for " + name);
  if (!replay_dir.empty()) {
    config->cache = replay_dir;
    config->replay = true;
  }
  if (!out_dir.empty()) config->out = out_dir;
  if (workers > 0) config->workers = workers;
  if (!grobid_url.empty()) config->grobid_url = grobid_url;
  if (!mailto.empty()) config->mailto = mailto;

  std::string stage = name;
  try {
    std::shared_ptr<Transport> transport;
    if (!config->replay) transport = std::make_shared<HttpTransport>();
    Pipeline pipeline(*config, transport);
    if (cmd == all) {
      for (const auto& s : Pipeline::stage_names()) {
        stage = s;
        pipeline.run_stage(s);
      }
    } else {
      pipeline.run_stage(name);
    }
    return kOk;
  } catch (const Error& e) {
    return fail(is_usage_error(e.code()) ? kUsage : kStageFailure, to_string(e.code()), e.detail(), stage);
  } catch (const std::exception& e) {
    return fail(kStageFailure, "InternalError", e.what(), stage);
  }
}
