#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "contam/baselines.hpp"
#include "contam/date.hpp"
#include "contam/error.hpp"
#include "contam/io.hpp"
#include "contam/remote.hpp"
#include "contam/rng.hpp"
#include "contam/text.hpp"
#include "contam/version.hpp"

namespace contam {

// Strips the common wikitext constructs: templates, tables, refs, comments,
// file/category links, external link brackets, bold/italic quotes and
// heading markers. Link targets are replaced by their label.
inline std::string wikitext_to_plain(std::string_view src) {
  std::string s(src);
  const auto erase_between = [&](const std::string& open, const std::string& close) {
    for (;;) {
      const auto a = s.find(open);
      if (a == std::string::npos) return;
      const auto b = s.find(close, a + open.size());
      s.erase(a, b == std::string::npos ? std::string::npos : b + close.size() - a);
    }
  };
  erase_between("<!--", "-->");
  // Self-closing refs first so they do not swallow the next paired ref.
  for (;;) {
    const auto a = s.find("<ref");
    if (a == std::string::npos) break;
    const auto gt = s.find('>', a);
    if (gt == std::string::npos) {
      s.erase(a);
      break;
    }
    if (s[gt - 1] == '/') {
      s.erase(a, gt + 1 - a);
    } else {
      const auto end = s.find("</ref>", gt);
      s.erase(a, end == std::string::npos ? std::string::npos : end + 6 - a);
    }
  }
  // Nested {{templates}} and {| tables |}.
  const auto erase_nested = [&](const std::string& open, const std::string& close) {
    std::string out;
    int depth = 0;
    for (std::size_t i = 0; i < s.size();) {
      if (s.compare(i, open.size(), open) == 0) {
        ++depth;
        i += open.size();
      } else if (depth > 0 && s.compare(i, close.size(), close) == 0) {
        --depth;
        i += close.size();
      } else {
        if (depth == 0) out += s[i];
        ++i;
      }
    }
    s = std::move(out);
  };
  erase_nested("{{", "}}");
  erase_nested("{|", "|}");

  std::string out;
  for (std::size_t i = 0; i < s.size();) {
    if (s.compare(i, 2, "[[") == 0) {
      const auto end = s.find("]]", i + 2);
      if (end == std::string::npos) {
        i += 2;
        continue;
      }
      const std::string inner = s.substr(i + 2, end - i - 2);
      const std::string lower = text::to_lower(inner);
      if (lower.rfind("file:", 0) != 0 && lower.rfind("image:", 0) != 0 && lower.rfind("category:", 0) != 0) {
        const auto bar = inner.rfind('|');
        out += bar == std::string::npos ? inner : inner.substr(bar + 1);
      }
      i = end + 2;
    } else if (s[i] == '[' && (s.compare(i + 1, 4, "http") == 0 || s.compare(i + 1, 2, "//") == 0)) {
      const auto end = s.find(']', i);
      if (end == std::string::npos) {
        ++i;
        continue;
      }
      const std::string inner = s.substr(i + 1, end - i - 1);
      const auto space = inner.find(' ');
      if (space != std::string::npos) out += inner.substr(space + 1);
      i = end + 1;
    } else if (s.compare(i, 2, "''") == 0) {
      while (i < s.size() && s[i] == '\'') ++i;
    } else if (s[i] == '<') {
      const auto gt = s.find('>', i);
      if (gt == std::string::npos) {
        out += s[i++];
      } else {
        i = gt + 1;
      }
    } else {
      out += s[i++];
    }
  }
  // Heading markers at line starts/ends.
  std::string cleaned;
  std::size_t start = 0;
  while (start <= out.size()) {
    auto end = out.find('\n', start);
    std::string line = out.substr(start, end == std::string::npos ? std::string::npos : end - start);
    const auto first = line.find_first_not_of('=');
    const auto last = line.find_last_not_of('=');
    if (first != std::string::npos && first > 0 && last != std::string::npos) line = line.substr(first, last - first + 1);
    if (!line.empty() && (line[0] == '*' || line[0] == '#' || line[0] == ':' || line[0] == ';')) {
      const auto body = line.find_first_not_of("*#:;");
      line = body == std::string::npos ? std::string{} : line.substr(body);
    }
    cleaned += line;
    cleaned += '\n';
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return cleaned;
}

struct NewPage {
  std::string title;
  std::string page_id;
  std::string timestamp;  // creation time
};

// MediaWiki API client with an on-disk cache. Revisions are stored one file
// per (title, revision id); an index maps lookups to revision files so that
// reruns with a warm cache never touch the network.
class WikipediaClient {
 public:
  struct Options {
    std::string wiki = "https://en.wikipedia.org";
    std::filesystem::path cache_dir;  // empty disables caching
    bool offline = false;
    std::chrono::milliseconds politeness{200};
    RetryPolicy retry;
    std::string user_agent = "contam-probe/" CONTAM_VERSION;
  };

  explicit WikipediaClient(Options options) : opts_(std::move(options)) {
    if (!opts_.cache_dir.empty()) {
      root_ = opts_.cache_dir / "wikipedia" / text::hex64(text::fnv1a64(opts_.wiki));
      if (std::filesystem::exists(index_path())) index_ = io::read_json(index_path());
    }
    if (!index_.is_object()) index_ = nlohmann::json::object();
    if (!index_.contains("lookups")) index_["lookups"] = nlohmann::json::object();
    if (!index_.contains("new_pages")) index_["new_pages"] = nlohmann::json::object();
  }

  const Options& options() const { return opts_; }
  std::size_t network_requests() const { return requests_; }

  // Latest revision of `title` with timestamp <= end of `as_of`.
  Document fetch_revision(const std::string& title, const Date& as_of) {
    if (title.empty()) fail(Errc::InvalidArgument, "empty page title");
    const std::string lookup = title + "\x1f" + as_of.to_string();
    {
      std::lock_guard lock(mu_);
      if (index_["lookups"].contains(lookup)) return from_cache(title, as_of, index_["lookups"][lookup]);
    }
    const nlohmann::json doc = get({{"action", "query"},
                                    {"prop", "revisions"},
                                    {"titles", title},
                                    {"rvlimit", "1"},
                                    {"rvstart", as_of.end_of_day_iso()},
                                    {"rvdir", "older"},
                                    {"rvprop", "ids|timestamp|content"},
                                    {"rvslots", "main"},
                                    {"format", "json"}});
    nlohmann::json entry;
    std::optional<Document> result;
    const auto pages = doc.contains("query") ? doc["query"].value("pages", nlohmann::json::object())
                                             : nlohmann::json::object();
    if (pages.empty()) fail(Errc::ProtocolError, "MediaWiki response without query.pages");
    const auto& page = pages.begin().value();
    if (page.contains("missing") || page.contains("invalid")) {
      entry = {{"error", "PageMissing"}};
    } else if (!page.contains("revisions") || page["revisions"].empty()) {
      entry = {{"error", "NoRevisionBefore"}};
    } else {
      const auto& rev = page["revisions"][0];
      std::string wikitext;
      if (rev.contains("slots")) {
        const auto& main = rev["slots"]["main"];
        wikitext = main.contains("*") ? main["*"].get<std::string>() : main.value("content", "");
      } else {
        wikitext = rev.value("*", rev.value("content", ""));
      }
      Document d{wikitext_to_plain(wikitext),
                 Provenance{page.value("title", title), std::to_string(rev.at("revid").get<long long>()),
                            rev.at("timestamp").get<std::string>()}};
      entry = {{"revision", store_revision(d)}};
      result = std::move(d);
    }
    {
      std::lock_guard lock(mu_);
      index_["lookups"][lookup] = entry;
      flush_index();
    }
    if (result) return *result;
    return from_cache(title, as_of, entry);
  }

  // Pages created (namespace 0) inside `window`, sorted by (timestamp, title).
  std::vector<NewPage> list_new_pages(const TimeWindow& window) {
    const std::string key = window.to_string();
    {
      std::lock_guard lock(mu_);
      if (index_["new_pages"].contains(key)) return pages_from_json(index_["new_pages"][key]);
    }
    std::vector<NewPage> pages;
    httplib::Params params{{"action", "query"},
                           {"list", "recentchanges"},
                           {"rctype", "new"},
                           {"rcnamespace", "0"},
                           {"rcstart", window.end().end_of_day_iso()},
                           {"rcend", window.start().start_of_day_iso()},
                           {"rcdir", "older"},
                           {"rcprop", "title|ids|timestamp"},
                           {"rclimit", "500"},
                           {"format", "json"}};
    for (int guard = 0; guard < 10000; ++guard) {
      const auto doc = get(params);
      if (doc.contains("query") && doc["query"].contains("recentchanges")) {
        for (const auto& rc : doc["query"]["recentchanges"]) {
          NewPage p{rc.at("title").get<std::string>(), std::to_string(rc.value("pageid", 0LL)),
                    rc.at("timestamp").get<std::string>()};
          if (window.contains(Date::parse(p.timestamp))) pages.push_back(std::move(p));
        }
      }
      if (!doc.contains("continue")) break;
      for (const auto& [k, v] : doc["continue"].items()) {
        params.erase(k);
        params.emplace(k, v.is_string() ? v.get<std::string>() : v.dump());
      }
    }
    std::sort(pages.begin(), pages.end(), [](const NewPage& a, const NewPage& b) {
      return std::tie(a.timestamp, a.title) < std::tie(b.timestamp, b.title);
    });
    pages.erase(std::unique(pages.begin(), pages.end(),
                            [](const NewPage& a, const NewPage& b) { return a.title == b.title; }),
                pages.end());
    {
      std::lock_guard lock(mu_);
      index_["new_pages"][key] = pages_to_json(pages);
      flush_index();
    }
    return pages;
  }

  // Seeded sample of `count` pages created inside `window`, each fetched as
  // of the window end.
  std::vector<Document> sample_fresh_pages(const TimeWindow& window, std::size_t count, std::uint64_t seed) {
    if (count == 0) fail(Errc::InvalidArgument, "count must be >= 1");
    auto pages = list_new_pages(window);
    auto engine = rng::stream(seed, 0);
    rng::shuffle(pages, engine);
    std::vector<Document> out;
    for (const auto& p : pages) {
      if (out.size() == count) break;
      try {
        auto d = fetch_revision(p.title, window.end());
        d.provenance.timestamp = p.timestamp;
        out.push_back(std::move(d));
      } catch (const Error& e) {
        if (e.code() != Errc::PageMissing && e.code() != Errc::NoRevisionBefore) throw;
      }
    }
    if (out.size() < count) {
      fail(Errc::InsufficientPages, std::to_string(out.size()) + " of " + std::to_string(count) +
                                        " pages created in " + window.to_string());
    }
    return out;
  }

 private:
  static nlohmann::json pages_to_json(const std::vector<NewPage>& pages) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : pages) arr.push_back({{"title", p.title}, {"page_id", p.page_id}, {"timestamp", p.timestamp}});
    return arr;
  }
  static std::vector<NewPage> pages_from_json(const nlohmann::json& arr) {
    std::vector<NewPage> out;
    for (const auto& p : arr) {
      out.push_back({p.at("title").get<std::string>(), p.at("page_id").get<std::string>(),
                     p.at("timestamp").get<std::string>()});
    }
    return out;
  }

  std::filesystem::path index_path() const { return root_ / "index.json"; }

  void flush_index() {
    if (!root_.empty()) io::write_json(index_path(), index_);
  }

  std::string store_revision(const Document& d) {
    const std::string key = text::hex64(text::fnv1a64(d.provenance.source + "\x1f" + d.provenance.revision_id));
    std::lock_guard lock(mu_);
    if (root_.empty()) {
      memory_[key] = d;
    } else {
      io::write_json(root_ / "revisions" / (key + ".json"),
                     {{"title", d.provenance.source},
                      {"revision_id", d.provenance.revision_id},
                      {"timestamp", d.provenance.timestamp},
                      {"text", d.text}});
    }
    return key;
  }

  Document from_cache(const std::string& title, const Date& as_of, const nlohmann::json& entry) {
    if (entry.contains("error")) {
      const std::string err = entry["error"].get<std::string>();
      if (err == "PageMissing") fail(Errc::PageMissing, "no page titled '" + title + "'");
      fail(Errc::NoRevisionBefore, "'" + title + "' has no revision on or before " + as_of.to_string());
    }
    const std::string key = entry.at("revision").get<std::string>();
    if (root_.empty()) return memory_.at(key);
    const auto j = io::read_json(root_ / "revisions" / (key + ".json"));
    return Document{j.at("text").get<std::string>(),
                    Provenance{j.at("title").get<std::string>(), j.at("revision_id").get<std::string>(),
                               j.at("timestamp").get<std::string>()}};
  }

  nlohmann::json get(const httplib::Params& params) {
    if (opts_.offline) {
      fail(Errc::NetworkError, "cache miss for " + opts_.wiki + " while offline");
    }
    const Url url = Url::parse(opts_.wiki);
    httplib::Client client(url.origin);
    client.set_connection_timeout(std::chrono::seconds(30));
    client.set_read_timeout(std::chrono::seconds(60));
    const httplib::Headers headers{{"User-Agent", opts_.user_agent}};
    const std::string path = url.path + "/w/api.php";
    const int attempts = std::max(1, opts_.retry.max_attempts);
    for (int attempt = 0;; ++attempt) {
      {
        std::lock_guard lock(mu_);
        const auto now = std::chrono::steady_clock::now();
        if (now < next_allowed_) std::this_thread::sleep_until(next_allowed_);
        next_allowed_ = std::chrono::steady_clock::now() + opts_.politeness;
        ++requests_;
      }
      const bool last = attempt + 1 >= attempts;
      auto backoff = opts_.retry.base_delay * (1LL << std::min(attempt, 20));
      auto res = client.Get(path, params, headers);
      if (!res) {
        if (last) fail(Errc::NetworkError, opts_.wiki + " unreachable: " + httplib::to_string(res.error()));
      } else if (res->status >= 200 && res->status < 300) {
        try {
          return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception&) {
          fail(Errc::ProtocolError, "MediaWiki response is not JSON");
        }
      } else if (res->status == 429 || res->status >= 500) {
        if (last) fail(res->status == 429 ? Errc::RateLimited : Errc::HttpError,
                       "status " + std::to_string(res->status) + " from " + opts_.wiki);
        if (auto hint = detail::retry_after(res)) backoff = *hint;
      } else {
        fail(Errc::HttpError, "status " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
      }
      std::this_thread::sleep_for(std::min<std::chrono::milliseconds>(
          std::chrono::duration_cast<std::chrono::milliseconds>(backoff), opts_.retry.max_delay));
    }
  }

  Options opts_;
  std::filesystem::path root_;
  nlohmann::json index_;
  std::map<std::string, Document> memory_;
  std::mutex mu_;
  std::chrono::steady_clock::time_point next_allowed_{};
  std::size_t requests_ = 0;
};

// Historical revisions of a fixed title list, each taken as of the window
// end; used for memorised baselines.
class WikipediaRevisionSource final : public CandidateSource {
 public:
  WikipediaRevisionSource(WikipediaClient& client, std::vector<std::string> titles)
      : client_(client), titles_(std::move(titles)) {
    std::sort(titles_.begin(), titles_.end());
    titles_.erase(std::unique(titles_.begin(), titles_.end()), titles_.end());
  }

  SourceKind kind() const override { return SourceKind::WikipediaRevisions; }

  std::vector<Ref> list(const TimeWindow&) override {
    std::vector<Ref> out;
    for (const auto& t : titles_) out.push_back({t, std::nullopt});
    return out;
  }

  Document load(const Ref& ref, const TimeWindow& window) override {
    return client_.fetch_revision(ref.key, window.end());
  }

 private:
  WikipediaClient& client_;
  std::vector<std::string> titles_;
};

// Pages created inside the window; used for clean baselines. The provenance
// timestamp is the page creation time.
class WikipediaNewPageSource final : public CandidateSource {
 public:
  explicit WikipediaNewPageSource(WikipediaClient& client) : client_(client) {}

  SourceKind kind() const override { return SourceKind::WikipediaRevisions; }

  std::vector<Ref> list(const TimeWindow& window) override {
    std::vector<Ref> out;
    for (const auto& p : client_.list_new_pages(window)) out.push_back({p.title, Date::parse(p.timestamp)});
    return out;
  }

  Document load(const Ref& ref, const TimeWindow& window) override {
    auto doc = client_.fetch_revision(ref.key, window.end());
    if (ref.date) doc.provenance.timestamp = created_timestamp(ref.key, window);
    return doc;
  }

 private:
  std::string created_timestamp(const std::string& title, const TimeWindow& window) {
    for (const auto& p : client_.list_new_pages(window)) {
      if (p.title == title) return p.timestamp;
    }
    return window.start().start_of_day_iso();
  }

  WikipediaClient& client_;
};

}  // namespace contam
