#include "aesaudit/harness.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <openssl/sha.h>

namespace aesaudit {

using nlohmann::json;

// --- manifest ----------------------------------------------------------------

void RunManifest::validate() const {
    if (!(scale_r < scale_R))
        throw DataError("manifest: scale requires r < R");
    if (images.empty()) throw DataError("manifest: images is empty");
    std::set<std::string> ids;
    for (const ImageRecord& img : images)
        if (!ids.insert(img.image_id).second)
            throw DataError("manifest: duplicate image_id '" + img.image_id +
                            "'");
    if (tasks.empty()) throw DataError("manifest: tasks is empty");
    if (endpoint.max_parallel < 1)
        throw DataError("manifest: endpoint.max_parallel must be >= 1");
    if (endpoint.timeout_seconds <= 0)
        throw DataError("manifest: endpoint.timeout must be > 0");
    if (endpoint.max_retries < 0)
        throw DataError("manifest: endpoint.max_retries must be >= 0");
    if (endpoint.model_id.empty())
        throw DataError("manifest: endpoint.model_id is empty");
    if (endpoint.base_url.empty())
        throw DataError("manifest: endpoint.base_url is empty");
}

RunManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileNotFound("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
    RunManifest m;
    m.run_id = j.value("run_id", "run");
    if (j.contains("scale")) {
        m.scale_r = j["scale"].at("r").get<double>();
        m.scale_R = j["scale"].at("R").get<double>();
    }
    m.images = j.at("images").get<std::vector<ImageRecord>>();
    if (j.contains("tasks")) {
        for (const auto& t : j["tasks"]) {
            auto task = task_from_string(t.get<std::string>());
            if (!task) throw DataError("manifest: unknown task " + t.dump());
            m.tasks.push_back(*task);
        }
    } else {
        m.tasks.assign(std::begin(kAllTasks), std::end(kAllTasks));
    }
    std::string mode = j.value("identity_mode", "both");
    if (mode == "default_only")
        m.identity_mode = IdentityMode::DefaultOnly;
    else if (mode == "identity_only")
        m.identity_mode = IdentityMode::IdentityOnly;
    else if (mode == "both")
        m.identity_mode = IdentityMode::Both;
    else
        throw DataError("manifest: unknown identity_mode '" + mode + "'");
    const json& e = j.at("endpoint");
    m.endpoint.model_id = e.at("model_id").get<std::string>();
    m.endpoint.base_url = e.at("base_url").get<std::string>();
    m.endpoint.api_key_ref = e.value("api_key_ref", "");
    m.endpoint.max_parallel = e.value("max_parallel", 4);
    m.endpoint.timeout_seconds = e.value("timeout_seconds", 60);
    m.endpoint.max_retries = e.value("max_retries", 3);
    m.endpoint.temperature = e.value("temperature", 0.0);
    m.template_dir = j.value("template_dir", "");
    m.cache_path = j.value("cache_path", "responses.jsonl");
    m.validate();
    return m;
}

// --- image encoding ------------------------------------------------------------

namespace {

std::string base64_encode(const std::string& data) {
    static const char* alphabet =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    size_t i = 0;
    while (i + 2 < data.size()) {
        uint32_t v = (static_cast<uint8_t>(data[i]) << 16) |
                     (static_cast<uint8_t>(data[i + 1]) << 8) |
                     static_cast<uint8_t>(data[i + 2]);
        out += alphabet[(v >> 18) & 63];
        out += alphabet[(v >> 12) & 63];
        out += alphabet[(v >> 6) & 63];
        out += alphabet[v & 63];
        i += 3;
    }
    if (i + 1 == data.size()) {
        uint32_t v = static_cast<uint8_t>(data[i]) << 16;
        out += alphabet[(v >> 18) & 63];
        out += alphabet[(v >> 12) & 63];
        out += "==";
    } else if (i + 2 == data.size()) {
        uint32_t v = (static_cast<uint8_t>(data[i]) << 16) |
                     (static_cast<uint8_t>(data[i + 1]) << 8);
        out += alphabet[(v >> 18) & 63];
        out += alphabet[(v >> 12) & 63];
        out += alphabet[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

std::string sniff_mime(const std::string& bytes) {
    auto starts = [&](const char* magic, size_t n) {
        return bytes.size() >= n && bytes.compare(0, n, magic, n) == 0;
    };
    if (starts("\x89PNG\r\n\x1a\n", 8)) return "image/png";
    if (starts("\xff\xd8\xff", 3)) return "image/jpeg";
    if (starts("GIF87a", 6) || starts("GIF89a", 6)) return "image/gif";
    if (starts("BM", 2)) return "image/bmp";
    if (bytes.size() >= 12 && bytes.compare(0, 4, "RIFF", 4) == 0 &&
        bytes.compare(8, 4, "WEBP", 4) == 0)
        return "image/webp";
    return "";
}

}  // namespace

std::string encode_image(const ImageRecord& image) {
    std::ifstream in(image.path_or_uri, std::ios::binary);
    if (!in) throw FileNotFound("cannot open image " + image.path_or_uri);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string bytes = ss.str();
    std::string mime = sniff_mime(bytes);
    if (mime.empty())
        throw UndecodableImage(image.path_or_uri +
                               " is not a recognized raster image");
    return "data:" + mime + ";base64," + base64_encode(bytes);
}

std::string cache_key(const std::string& model_id, const std::string& image_id,
                      Task task, const std::optional<Identity>& identity,
                      const std::string& template_version) {
    std::string material = model_id + "\x1f" + image_id + "\x1f" +
                           to_string(task) + "\x1f" +
                           (identity ? identity->key() : "default") + "\x1f" +
                           template_version;
    unsigned char digest[SHA256_DIGEST_LENGTH];
    SHA256(reinterpret_cast<const unsigned char*>(material.data()),
           material.size(), digest);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * SHA256_DIGEST_LENGTH);
    for (unsigned char b : digest) {
        out += hex[b >> 4];
        out += hex[b & 15];
    }
    return out;
}

// --- response parsing ----------------------------------------------------------

std::pair<std::optional<OutputLabel>, ParseStatus> parse_response(
    const std::string& raw_text, Task task) {
    const auto& labels = label_set(task);

    // strict: "<taskword>: <label>", nothing else
    static thread_local std::map<Task, std::regex> strict_cache;
    auto it = strict_cache.find(task);
    if (it == strict_cache.end()) {
        std::string pat = "\\s*" + response_keyword(task) +
                          "\\s*:\\s*([a-zA-Z]+)\\s*";
        it = strict_cache
                 .emplace(task, std::regex(pat, std::regex::icase))
                 .first;
    }
    std::smatch m;
    if (std::regex_match(raw_text, m, it->second)) {
        auto label = label_from_string(m[1].str());
        if (label && label_in_task(task, *label))
            return {*label, ParseStatus::Ok};
    }

    // fuzzy: exactly one of the task's labels as a whole word anywhere
    std::string low = lowercase(raw_text);
    std::set<OutputLabel> found;
    size_t i = 0;
    while (i < low.size()) {
        if (!std::isalpha(static_cast<unsigned char>(low[i]))) {
            ++i;
            continue;
        }
        size_t j = i;
        while (j < low.size() &&
               std::isalpha(static_cast<unsigned char>(low[j])))
            ++j;
        std::string word = low.substr(i, j - i);
        for (OutputLabel l : labels)
            if (word == to_string(l)) found.insert(l);
        i = j;
    }
    if (found.size() == 1) return {*found.begin(), ParseStatus::Fuzzy};
    return {std::nullopt, ParseStatus::Unparseable};
}

// --- cache -----------------------------------------------------------------------

ResponseCache::ResponseCache(std::string path, std::string template_version)
    : path_(std::move(path)), template_version_(std::move(template_version)) {
    std::ifstream in(path_);
    if (!in) return;  // fresh cache
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ResponseRecord r = json::parse(line).get<ResponseRecord>();
        index_[cache_key(r.model_id, r.image_id, r.task, r.identity,
                         template_version_)] = std::move(r);
    }
}

std::optional<ResponseRecord> ResponseCache::lookup(
    const std::string& key) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

void ResponseCache::store(const std::string& key,
                          const ResponseRecord& record) {
    std::lock_guard<std::mutex> lock(mutex_);
    std::ofstream out(path_, std::ios::app);
    if (!out) throw DataError("cannot append to cache " + path_);
    out << json(record).dump() << "\n";
    index_[key] = record;
}

size_t ResponseCache::size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return index_.size();
}

// --- dispatch ----------------------------------------------------------------------

namespace {

// "http://host:port/prefix" -> origin + path prefix
std::pair<std::string, std::string> split_base_url(const std::string& url) {
    size_t scheme = url.find("://");
    if (scheme == std::string::npos)
        throw DataError("base_url missing scheme: " + url);
    size_t path = url.find('/', scheme + 3);
    if (path == std::string::npos) return {url, ""};
    std::string prefix = url.substr(path);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {url.substr(0, path), prefix};
}

}  // namespace

ResponseRecord dispatch_query(const QueryJob& job, ResponseCache& cache) {
    if (auto cached = cache.lookup(job.key)) return *cached;

    json body = {
        {"model", job.endpoint.model_id},
        {"temperature", job.endpoint.temperature},
        {"messages",
         json::array(
             {{{"role", "user"},
               {"content",
                json::array(
                    {{{"type", "text"}, {"text", job.prompt.text}},
                     {{"type", "image_url"},
                      {"image_url",
                       {{"url", encode_image(job.image)}}}}})}}})}};

    auto [origin, prefix] = split_base_url(job.endpoint.base_url);
    httplib::Client client(origin);
    client.set_connection_timeout(job.endpoint.timeout_seconds, 0);
    client.set_read_timeout(job.endpoint.timeout_seconds, 0);
    httplib::Headers headers;
    if (!job.endpoint.api_key_ref.empty()) {
        const char* key = std::getenv(job.endpoint.api_key_ref.c_str());
        if (key) headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    std::string payload = body.dump();
    int attempts = job.endpoint.max_retries + 1;
    bool rate_limited = false;
    std::string last_error;
    for (int attempt = 0; attempt < attempts; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(
                std::chrono::milliseconds(100LL << (attempt - 1)));
        auto res = client.Post(prefix + "/chat/completions", headers, payload,
                               "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status == 401 || res->status == 403)
            throw AuthFailure("HTTP " + std::to_string(res->status) +
                              " from " + job.endpoint.base_url);
        if (res->status == 429) {
            rate_limited = true;
            last_error = "HTTP 429";
            continue;
        }
        if (res->status >= 500) {
            rate_limited = false;
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw EndpointUnreachable("HTTP " + std::to_string(res->status) +
                                      " from " + job.endpoint.base_url);

        std::string content;
        try {
            json reply = json::parse(res->body);
            content = reply.at("choices").at(0).at("message").at("content")
                          .get<std::string>();
        } catch (const json::exception& e) {
            throw EndpointUnreachable(std::string("malformed reply: ") +
                                      e.what());
        }
        auto [label, status] = parse_response(content, job.prompt.task);
        ResponseRecord record;
        record.model_id = job.endpoint.model_id;
        record.image_id = job.image.image_id;
        record.task = job.prompt.task;
        record.identity = job.prompt.identity;
        record.raw_text = content;
        record.parsed_label = label;
        record.parse_status = status;
        record.timestamp = utc_now_iso8601();
        validate_response(record);
        cache.store(job.key, record);
        return record;
    }
    if (rate_limited)
        throw RateLimited("rate limited by " + job.endpoint.base_url +
                          " after " + std::to_string(attempts) + " attempts");
    throw EndpointUnreachable(job.endpoint.base_url + " unreachable after " +
                              std::to_string(attempts) + " attempts (" +
                              last_error + ")");
}

std::vector<ResponseRecord> run_evaluation(const RunManifest& manifest,
                                           const PromptLibrary& prompts,
                                           RunStats* stats) {
    manifest.validate();
    std::string version = prompts.get(manifest.tasks.front()).template_version;
    ResponseCache cache(manifest.cache_path, version);

    std::vector<std::optional<Identity>> conditions;
    if (manifest.identity_mode != IdentityMode::IdentityOnly)
        conditions.push_back(std::nullopt);
    if (manifest.identity_mode != IdentityMode::DefaultOnly)
        for (const Identity& g : identity_grid()) conditions.push_back(g);

    std::vector<QueryJob> jobs;
    for (const ImageRecord& img : manifest.images)
        for (Task t : manifest.tasks)
            for (const auto& cond : conditions) {
                QueryJob job;
                job.image = img;
                job.prompt = prompts.build_prompt(t, cond);
                job.endpoint = manifest.endpoint;
                job.key = cache_key(manifest.endpoint.model_id, img.image_id, t,
                                    cond, job.prompt.template_version);
                jobs.push_back(std::move(job));
            }

    RunStats local;
    std::vector<ResponseRecord> records(jobs.size());
    std::vector<char> ok_flags(jobs.size(), 0);
    std::atomic<size_t> next{0};
    std::atomic<int64_t> cache_hits{0}, dispatched{0}, failed{0};
    std::mutex error_mutex;
    std::string first_error;

    auto worker = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            bool hit = cache.lookup(jobs[i].key).has_value();
            try {
                records[i] = dispatch_query(jobs[i], cache);
                ok_flags[i] = 1;
                if (hit)
                    ++cache_hits;
                else
                    ++dispatched;
            } catch (const Error& e) {
                ++failed;
                std::lock_guard<std::mutex> lock(error_mutex);
                if (first_error.empty()) first_error = e.what();
            }
        }
    };

    size_t n_threads = std::min<size_t>(
        static_cast<size_t>(manifest.endpoint.max_parallel), jobs.size());
    std::vector<std::thread> pool;
    for (size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    std::vector<ResponseRecord> out;
    for (size_t i = 0; i < jobs.size(); ++i) {
        if (!ok_flags[i]) continue;
        out.push_back(records[i]);
        switch (records[i].parse_status) {
            case ParseStatus::Ok: ++local.ok; break;
            case ParseStatus::Fuzzy: ++local.fuzzy; break;
            case ParseStatus::Unparseable: ++local.unparseable; break;
        }
    }
    local.cache_hits = cache_hits;
    local.dispatched = dispatched;
    local.failed = failed;
    if (stats) *stats = local;
    if (failed == static_cast<int64_t>(jobs.size()) && !jobs.empty())
        throw EndpointUnreachable("every job failed; first error: " +
                                  first_error);
    return out;
}

}  // namespace aesaudit
