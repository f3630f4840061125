#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "aesaudit/core.hpp"
#include "aesaudit/prompts.hpp"

namespace aesaudit {

struct ModelEndpoint {
    std::string model_id;
    std::string base_url;        // e.g. http://localhost:8089/v1
    std::string api_key_ref;     // environment variable holding the key
    int max_parallel = 4;
    int timeout_seconds = 60;
    int max_retries = 3;
    double temperature = 0.0;
};

enum class IdentityMode { DefaultOnly, IdentityOnly, Both };

struct RunManifest {
    std::string run_id;
    double scale_r = 1.0;
    double scale_R = 5.0;
    std::vector<ImageRecord> images;
    std::vector<Task> tasks;
    IdentityMode identity_mode = IdentityMode::Both;
    ModelEndpoint endpoint;
    std::string template_dir;  // empty = built-in templates
    std::string cache_path;    // responses.jsonl

    void validate() const;
};

RunManifest load_manifest(const std::string& path);

// base64 data-URL for a chat-completions image part. Throws FileNotFound
// or UndecodableImage (magic-byte sniff: png/jpeg/gif/webp/bmp).
std::string encode_image(const ImageRecord& image);

// SHA-256 hex digest over (model_id, image_id, task, identity-or-default,
// template_version); the identity key of one grid cell.
std::string cache_key(const std::string& model_id, const std::string& image_id,
                      Task task, const std::optional<Identity>& identity,
                      const std::string& template_version);

struct QueryJob {
    ImageRecord image;
    RenderedPrompt prompt;
    ModelEndpoint endpoint;
    std::string key;
};

// Strict pass: "<taskword>: <label>" (case-insensitive, whitespace
// tolerated). Fuzzy pass: exactly one of the task's labels appears as a
// whole word. Never throws; unparseable is a status.
std::pair<std::optional<OutputLabel>, ParseStatus> parse_response(
    const std::string& raw_text, Task task);

// Append-only JSONL record store with an in-memory index keyed by
// cache_key. Loading tolerates a missing file (fresh run).
class ResponseCache {
public:
    explicit ResponseCache(std::string path, std::string template_version);

    std::optional<ResponseRecord> lookup(const std::string& key) const;
    void store(const std::string& key, const ResponseRecord& record);
    size_t size() const;

private:
    std::string path_;
    std::string template_version_;
    std::map<std::string, ResponseRecord> index_;
    mutable std::mutex mutex_;
};

struct RunStats {
    int64_t dispatched = 0;
    int64_t cache_hits = 0;
    int64_t ok = 0;
    int64_t fuzzy = 0;
    int64_t unparseable = 0;
    int64_t failed = 0;
};

// One HTTP call (or cache hit) for one grid cell. Retries transient
// failures (5xx, 429, transport errors) with exponential backoff.
ResponseRecord dispatch_query(const QueryJob& job, ResponseCache& cache);

// Runs the full image x task x condition grid with bounded concurrency.
// Completed cells are served from the cache, so reruns only dispatch the
// missing ones.
std::vector<ResponseRecord> run_evaluation(const RunManifest& manifest,
                                           const PromptLibrary& prompts,
                                           RunStats* stats = nullptr);

}  // namespace aesaudit
