#pragma once

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace fixtures {

// httplib server on an ephemeral localhost port, serving on a background
// thread for the lifetime of the object.
class LocalServer {
 public:
  explicit LocalServer(const std::function<void(httplib::Server&)>& routes) {
    routes(server_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  LocalServer(const LocalServer&) = delete;
  LocalServer& operator=(const LocalServer&) = delete;

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int port() const { return port_; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

// Completions endpoint with echo scoring. Prompts split on single spaces;
// every token gets natural-log probability -ln 4, except the first, which is
// null. The "model" field selects failure modes.
class EchoServer {
 public:
  EchoServer()
      : server_([this](httplib::Server& s) {
          s.Post("/v1/completions", [this](const httplib::Request& req, httplib::Response& res) {
            handle(req, res);
          });
        }) {}

  std::string url() const { return server_.url(); }
  int requests() const { return requests_.load(); }
  std::string last_authorization() const {
    std::lock_guard lock(mu_);
    return auth_;
  }

 private:
  void handle(const httplib::Request& req, httplib::Response& res) {
    const int n = ++requests_;
    {
      std::lock_guard lock(mu_);
      auth_ = req.get_header_value("Authorization");
    }
    const auto body = nlohmann::json::parse(req.body);
    const std::string model = body.value("model", "");
    if (!body.value("echo", false) || body.value("max_tokens", -1) != 0 || body.value("logprobs", -1) != 1) {
      res.status = 400;
      res.set_content(R"({"error":{"message":"expected echo scoring request"}})", "application/json");
      return;
    }
    if (model == "rate-limit-once" && n == 1) {
      res.status = 429;
      res.set_header("Retry-After", "0");
      return;
    }
    if (model == "server-error") {
      res.status = 503;
      return;
    }
    if (model == "overflow") {
      res.status = 400;
      res.set_content(R"({"error":{"code":"context_length_exceeded","message":"maximum context length"}})",
                      "application/json");
      return;
    }
    if (model == "not-json") {
      res.set_content("<html>oops</html>", "text/html");
      return;
    }

    std::vector<std::string> tokens;
    std::istringstream in(body.at("prompt").get<std::string>());
    for (std::string t; in >> t;) tokens.push_back(t);
    nlohmann::json values = nlohmann::json::array();
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i == 0) {
        values.push_back(nullptr);
      } else {
        values.push_back(-std::log(4.0));
      }
    }
    nlohmann::json logprobs = {{"tokens", tokens}, {"token_logprobs", values}};
    if (model == "missing-logprobs") logprobs.erase("token_logprobs");
    if (model == "null-middle" && values.size() > 2) logprobs["token_logprobs"][1] = nullptr;
    if (model == "positive" && values.size() > 1) logprobs["token_logprobs"][1] = 0.5;
    if (model == "length-mismatch") logprobs["tokens"].push_back("extra");
    nlohmann::json choice = {{"text", body.at("prompt")}, {"index", 0}, {"logprobs", logprobs}};
    if (model == "no-choices") {
      res.set_content(nlohmann::json{{"choices", nlohmann::json::array()}}.dump(), "application/json");
      return;
    }
    res.set_content(nlohmann::json{{"object", "text_completion"}, {"choices", {choice}}}.dump(), "application/json");
  }

  std::atomic<int> requests_{0};
  mutable std::mutex mu_;
  std::string auth_;
  LocalServer server_;
};

struct WikiRevision {
  long long revid;
  std::string timestamp;  // ISO-8601, UTC
  std::string wikitext;
};

// MediaWiki api.php subset: prop=revisions (rvstart/rvdir=older, rvlimit=1)
// and list=recentchanges with rctype=new, paginated two entries per call.
class WikiServer {
 public:
  explicit WikiServer(std::map<std::string, std::vector<WikiRevision>> pages)
      : pages_(std::move(pages)), server_([this](httplib::Server& s) {
          s.Get("/w/api.php", [this](const httplib::Request& req, httplib::Response& res) { handle(req, res); });
        }) {}

  std::string url() const { return server_.url(); }
  int requests() const { return requests_.load(); }

 private:
  void handle(const httplib::Request& req, httplib::Response& res) {
    ++requests_;
    nlohmann::json out;
    if (req.get_param_value("prop") == "revisions") {
      const std::string title = req.get_param_value("titles");
      const std::string start = req.get_param_value("rvstart");
      const auto it = pages_.find(title);
      if (it == pages_.end()) {
        out["query"]["pages"]["-1"] = {{"ns", 0}, {"title", title}, {"missing", ""}};
      } else {
        nlohmann::json page = {{"pageid", page_id(title)}, {"ns", 0}, {"title", title}};
        const WikiRevision* best = nullptr;
        for (const auto& r : it->second) {
          if (r.timestamp <= start && (best == nullptr || r.timestamp > best->timestamp)) best = &r;
        }
        if (best != nullptr) {
          page["revisions"] = {{{"revid", best->revid},
                                {"timestamp", best->timestamp},
                                {"slots", {{"main", {{"contentmodel", "wikitext"}, {"*", best->wikitext}}}}}}};
        }
        out["query"]["pages"][std::to_string(page_id(title))] = page;
      }
    } else if (req.get_param_value("list") == "recentchanges") {
      // Creation events newest first between rcend and rcstart.
      std::vector<std::pair<std::string, std::string>> created;  // (timestamp, title)
      for (const auto& [title, revs] : pages_) {
        std::string first = revs.front().timestamp;
        for (const auto& r : revs) first = std::min(first, r.timestamp);
        if (first <= req.get_param_value("rcstart") && first >= req.get_param_value("rcend")) {
          created.emplace_back(first, title);
        }
      }
      std::sort(created.rbegin(), created.rend());
      const std::size_t offset =
          req.has_param("rccontinue") ? std::stoul(req.get_param_value("rccontinue")) : 0;
      nlohmann::json rc = nlohmann::json::array();
      for (std::size_t i = offset; i < created.size() && i < offset + 2; ++i) {
        rc.push_back({{"type", "new"},
                      {"ns", 0},
                      {"title", created[i].second},
                      {"pageid", page_id(created[i].second)},
                      {"timestamp", created[i].first}});
      }
      out["query"]["recentchanges"] = rc;
      if (offset + 2 < created.size()) out["continue"] = {{"rccontinue", std::to_string(offset + 2)}, {"continue", "-||"}};
    } else {
      res.status = 400;
      return;
    }
    res.set_content(out.dump(), "application/json");
  }

  long long page_id(const std::string& title) const {
    return 1000 + std::distance(pages_.begin(), pages_.find(title));
  }

  std::map<std::string, std::vector<WikiRevision>> pages_;
  std::atomic<int> requests_{0};
  LocalServer server_;
};

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  static std::atomic<int> counter{0};
  const auto dir = std::filesystem::temp_directory_path() /
                   ("contam-test-" + name + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures
