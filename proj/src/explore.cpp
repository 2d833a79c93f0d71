#include "gift/explore.hpp"

#include <httplib.h>

#include <fstream>
#include <map>
#include <mutex>
#include <regex>
#include <sstream>

#include "gift/render.hpp"
#include "gift/rng.hpp"

namespace gift {
namespace fs = std::filesystem;

namespace {

struct ApiError : std::runtime_error {
  ApiError(int status, std::string code, const std::string& message, json detail = nullptr)
      : std::runtime_error(message), status(status), code(std::move(code)), detail(std::move(detail)) {}
  int status;
  std::string code;
  json detail;
};

struct Response {
  int status = 200;
  json body;
};

json error_body(const std::string& code, const std::string& message, const json& detail) {
  return json{{"code", code}, {"detail", detail}, {"message", message}};
}

// Line n (0-based) of a JSONL file, or nullopt.
std::optional<json> jsonl_row(const fs::path& file, std::size_t n) {
  std::ifstream in(file, std::ios::binary);
  if (!in) return std::nullopt;
  std::string line;
  for (std::size_t i = 0; std::getline(in, line); ++i) {
    if (i == n) {
      json j = json::parse(line, nullptr, false);
      if (j.is_discarded()) return std::nullopt;
      return j;
    }
  }
  return std::nullopt;
}

bool valid_session(const std::string& s) {
  static const std::regex re("^[A-Za-z0-9_-]{1,64}$");
  return std::regex_match(s, re);
}

struct Session {
  std::mutex mutex;  // serializes evaluations and ledger appends
  bool loaded = false;
  std::vector<json> ledger;
  std::map<std::string, std::size_t> by_concept;  // canonical -> ledger index
};

struct Run {
  fs::path dir;
  std::string id;
  json report;

  std::mutex load_mutex;
  std::optional<RunConfig> config;
  std::shared_ptr<const Model> model;
  std::optional<ValidationSet> vset;

  std::mutex sessions_mutex;
  std::map<std::string, std::unique_ptr<Session>> sessions;
};

}  // namespace

struct ExploreService::Impl {
  fs::path root;
  Services services;
  std::mutex runs_mutex;
  std::map<std::string, std::unique_ptr<Run>> runs;
  std::mutex jobs_mutex;
  std::map<std::string, json> jobs;
  httplib::Server server;

  Run& find_run(const std::string& id) {
    std::lock_guard lock(runs_mutex);
    auto it = runs.find(id);
    if (it == runs.end()) throw ApiError(404, "unknown_run", "no run with id '" + id + "'");
    return *it->second;
  }

  Run& default_run(const std::string& requested) {
    if (!requested.empty()) return find_run(requested);
    std::lock_guard lock(runs_mutex);
    if (runs.size() != 1) {
      throw ApiError(400, "run_required", "several runs are served; pass the run id", json{{"runs", runs.size()}});
    }
    return *runs.begin()->second;
  }

  void ensure_loaded(Run& run) {
    std::lock_guard lock(run.load_mutex);
    if (run.vset) return;
    RunDirectory dir(run.dir);
    run.config = dir.load_config();
    run.model = make_model(*run.config, services);
    run.vset = dir.load_validation();
  }

  Session& session(Run& run, const std::string& name) {
    Session* s;
    {
      std::lock_guard lock(run.sessions_mutex);
      auto& slot = run.sessions[name];
      if (!slot) slot = std::make_unique<Session>();
      s = slot.get();
    }
    return *s;
  }

  static fs::path ledger_path(const Run& run, const std::string& session) {
    return run.dir / "sessions" / (session + ".jsonl");
  }

  // Replays the append-only ledger; caller holds the session mutex.
  static void replay(const Run& run, const std::string& name, Session& s) {
    if (s.loaded) return;
    s.loaded = true;
    std::ifstream in(ledger_path(run, name), std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
      json entry = json::parse(line, nullptr, false);
      if (entry.is_discarded()) continue;
      s.by_concept.emplace(entry.at("concept").get<std::string>(), s.ledger.size());
      s.ledger.push_back(std::move(entry));
    }
  }

  Response runs_index() {
    json out = json::array();
    std::lock_guard lock(runs_mutex);
    for (const auto& [id, run] : runs) {
      const json& r = run->report;
      out.push_back({{"candidates", r.value("candidates", json::array()).size()},
                     {"classifier", r.value("classifier", "")},
                     {"directory", run->dir.filename().string()},
                     {"id", id},
                     {"ranking_key", r.value("ranking_key", "")},
                     {"summary", r.value("summary", json::object())}});
    }
    return {200, json{{"runs", std::move(out)}}};
  }

  Response candidates(Run& run) {
    return {200, json{{"candidates", run.report.value("candidates", json::array())},
                      {"di_threshold", run.report.value("di_threshold", kDefaultDiThreshold)},
                      {"ranking_key", run.report.value("ranking_key", "cace")},
                      {"run", run.id}}};
  }

  Response gallery(const std::string& id, const std::string& run_id) {
    static const std::regex re("^(cf|iv)-([0-9]{1,9})$");
    std::smatch m;
    if (!std::regex_match(id, m, re)) {
      throw ApiError(400, "malformed_pair_id", "pair ids look like cf-N or iv-N", json{{"id", id}});
    }
    Run& run = default_run(run_id);
    const std::size_t n = std::stoul(m[2].str());
    auto side = [](const Scene& s, int label) {
      return json{{"label", label}, {"scene", s.to_json()}, {"svg", render_svg(s)}};
    };
    if (m[1] == "cf") {
      auto row = jsonl_row(run.dir / "pairs.jsonl", n);
      if (!row) throw ApiError(404, "unknown_pair", "no counterfactual pair '" + id + "'");
      const CounterfactualPair p = CounterfactualPair::from_json(*row);
      json out{{"after", side(p.target, to_int(p.to_label))},
               {"before", side(p.source, to_int(p.from_label))},
               {"id", id},
               {"kind", "counterfactual"},
               {"run", run.id},
               {"trace", to_json(p.trace)}};
      if (auto cap = jsonl_row(run.dir / "captions.jsonl", n)) out["caption"] = (*cap)["text"];
      return {200, std::move(out)};
    }
    auto row = jsonl_row(run.dir / "interventions.jsonl", n);
    if (!row) throw ApiError(404, "unknown_pair", "no intervention '" + id + "'");
    const Intervention iv = Intervention::from_json(*row);
    const int ice_value = gift::ice(OutcomeRow{iv.presence, iv.y_base, iv.y_flipped});
    return {200, json{{"after", side(iv.edited, to_int(iv.y_flipped))},
                      {"before", side(iv.source, to_int(iv.y_base))},
                      {"concept", (*row)["concept"]},
                      {"ice", ice_value},
                      {"id", id},
                      {"kind", "intervention"},
                      {"presence", iv.presence},
                      {"run", run.id},
                      {"target_class", (*row)["target_class"]}}};
  }

  Response evaluate_concepts(const std::string& body) {
    const json req = json::parse(body, nullptr, false);
    if (req.is_discarded() || !req.is_object()) throw ApiError(400, "malformed_request", "body must be a JSON object");
    const json concepts = req.value("concepts", json());
    if (!concepts.is_array() || concepts.empty()) {
      throw ApiError(400, "malformed_request", "'concepts' must be a non-empty array of strings");
    }
    std::vector<std::string> phrases;
    for (const auto& c : concepts) {
      if (!c.is_string()) throw ApiError(400, "malformed_request", "'concepts' must hold strings");
      phrases.push_back(c.get<std::string>());
    }
    const std::string session_name = req.value("session", "default");
    if (!valid_session(session_name)) {
      throw ApiError(400, "malformed_request", "session names use letters, digits, '-' and '_'");
    }
    Run& run = default_run(req.value("run", ""));

    std::vector<Concept> parsed;
    for (const auto& p : phrases) {
      Concept c = parse_concept(p);
      if (c.is_opaque()) {
        throw ApiError(400, "malformed_concept", "'" + p + "' is outside the concept grammar", json{{"concept", p}});
      }
      parsed.push_back(std::move(c));
    }
    std::string canonical;
    try {
      canonical = combine(parsed).canonical();
    } catch (const ConceptError& e) {
      throw ApiError(400, "invalid_combination", e.what(), json{{"concepts", phrases}});
    }

    ensure_loaded(run);
    Session& s = session(run, session_name);
    std::lock_guard lock(s.mutex);
    replay(run, session_name, s);
    bool reused = true;
    std::size_t index;
    if (auto it = s.by_concept.find(canonical); it != s.by_concept.end()) {
      index = it->second;
    } else {
      reused = false;
      EvaluatedCandidate result;
      try {
        result = evaluate_user_concepts(*run.config, *run.model, *run.vset, phrases);
      } catch (const ConceptError& e) {
        throw ApiError(400, "invalid_combination", e.what(), json{{"concepts", phrases}});
      } catch (const EndpointError& e) {
        throw ApiError(502, "endpoint_failure", e.what());
      }
      if (result.status != EvalStatus::Evaluated) {
        throw ApiError(422, result.status == EvalStatus::Failed ? "editor_failure" : "unsupported_concept",
                       result.notice.empty() ? "evaluation did not complete" : result.notice,
                       json{{"concept", canonical}, {"status", to_string(result.status)}});
      }
      index = s.ledger.size();
      json entry{{"concept", canonical},
                 {"entry_id", "ev-" + hex64(fnv1a64(run.id + "\n" + canonical))},
                 {"inputs", phrases},
                 {"result", result.to_json()},
                 {"seq", index},
                 {"session", session_name}};
      write_line(ledger_path(run, session_name), entry);
      s.by_concept.emplace(canonical, index);
      s.ledger.push_back(std::move(entry));
    }
    const json& entry = s.ledger[index];
    const std::string job_id = "job-" + hex64(fnv1a64(run.id + "\n" + session_name + "\n" + canonical));
    json job{{"entry", entry}, {"id", job_id}, {"status", "done"}};
    {
      std::lock_guard jl(jobs_mutex);
      jobs[job_id] = job;
    }
    return {200, json{{"entry", entry}, {"job", job_id}, {"reused", reused}, {"run", run.id}}};
  }

  static void write_line(const fs::path& file, const json& entry) {
    fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::app | std::ios::binary);
    out << entry.dump() << '\n';
    if (!out) throw ApiError(500, "ledger_write_failed", "cannot append to " + file.string());
  }

  Response job(const std::string& id) {
    std::lock_guard lock(jobs_mutex);
    auto it = jobs.find(id);
    if (it == jobs.end()) throw ApiError(404, "unknown_job", "no job '" + id + "'");
    return {200, it->second};
  }

  Response route(const std::string& method, const std::string& path, const std::map<std::string, std::string>& query,
                 const std::string& body) {
    static const std::regex run_re("^/runs/([^/]+)$");
    static const std::regex cand_re("^/runs/([^/]+)/candidates$");
    static const std::regex gallery_re("^/pairs/([^/]+)/gallery$");
    static const std::regex job_re("^/jobs/([^/]+)$");
    std::smatch m;
    const auto q = [&](const char* k) {
      auto it = query.find(k);
      return it == query.end() ? std::string() : it->second;
    };
    if (method == "GET") {
      if (path == "/runs") return runs_index();
      if (std::regex_match(path, m, run_re)) return {200, find_run(m[1]).report};
      if (std::regex_match(path, m, cand_re)) return candidates(find_run(m[1]));
      if (std::regex_match(path, m, gallery_re)) return gallery(m[1], q("run"));
      if (std::regex_match(path, m, job_re)) return job(m[1]);
    } else if (method == "POST" && path == "/concepts/evaluate") {
      return evaluate_concepts(body);
    }
    throw ApiError(404, "not_found", "no route for " + method + " " + path);
  }

  Response dispatch(const std::string& method, const std::string& path,
                    const std::map<std::string, std::string>& query, const std::string& body) {
    try {
      return route(method, path, query, body);
    } catch (const ApiError& e) {
      return {e.status, error_body(e.code, e.what(), e.detail)};
    } catch (const std::exception& e) {
      return {500, error_body("internal_error", e.what(), nullptr)};
    }
  }
};

ExploreService::ExploreService(fs::path root, Services services) : impl_(std::make_unique<Impl>()) {
  impl_->root = std::move(root);
  impl_->services = std::move(services);
  auto& svr = impl_->server;
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> query(req.params.begin(), req.params.end());
    Response r = impl_->dispatch(req.method, req.path, query, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  svr.Get(".*", handler);
  svr.Post(".*", handler);
  svr.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  svr.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
}

ExploreService::~ExploreService() { stop(); }

std::size_t ExploreService::scan() {
  std::vector<fs::path> dirs;
  if (fs::exists(impl_->root / "report.json")) {
    dirs.push_back(impl_->root);
  } else if (fs::is_directory(impl_->root)) {
    for (const auto& e : fs::directory_iterator(impl_->root)) {
      if (e.is_directory() && fs::exists(e.path() / "report.json")) dirs.push_back(e.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  std::map<std::string, std::unique_ptr<Run>> found;
  for (const auto& d : dirs) {
    json report = json::parse(read_file(d / "report.json"), nullptr, false);
    if (report.is_discarded() || !report.contains("run_id")) {
      throw StageError("invalid report.json in " + d.string());
    }
    auto run = std::make_unique<Run>();
    run->dir = d;
    run->id = report["run_id"].get<std::string>();
    run->report = std::move(report);
    const std::string id = run->id;
    found.emplace(id, std::move(run));
  }
  if (found.empty()) throw StageError("no completed run (report.json) under " + impl_->root.string());
  std::lock_guard lock(impl_->runs_mutex);
  impl_->runs = std::move(found);
  return impl_->runs.size();
}

int ExploreService::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  if (!impl_->server.bind_to_port(host, port)) return -1;
  return port;
}

void ExploreService::serve() { impl_->server.listen_after_bind(); }

void ExploreService::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

std::pair<int, std::string> ExploreService::handle(const std::string& method, const std::string& target,
                                                   const std::string& body) {
  std::string path = target;
  std::map<std::string, std::string> query;
  if (auto q = target.find('?'); q != std::string::npos) {
    path = target.substr(0, q);
    std::istringstream in(target.substr(q + 1));
    std::string kv;
    while (std::getline(in, kv, '&')) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        query[kv] = "";
      } else {
        query[kv.substr(0, eq)] = httplib::detail::decode_url(kv.substr(eq + 1), true);
      }
    }
  }
  Response r = impl_->dispatch(method, path, query, body);
  return {r.status, r.body.dump()};
}

}  // namespace gift
