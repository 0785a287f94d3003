#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "slidewatch/broker.hpp"
#include "slidewatch/model.hpp"
#include "slidewatch/storage.hpp"

namespace slidewatch {

// Ingestion side of the pipeline: the Tweet Collector (keyword-filtered
// stream intake) and the Image Collector (URL-level dedup via a linked hash
// map, fetching, and dispatch to the image pipeline).

// ---------------------------------------------------------------------------
// Keyword filtering
// ---------------------------------------------------------------------------

struct Keyword {
    std::string keyword;
    std::string language;
    std::string folded; // case-folded form used for matching
};

class KeywordList {
public:
    explicit KeywordList(std::vector<std::pair<std::string, std::string>> entries);

    /// Loads a `keyword,language` CSV (header optional).
    static KeywordList load(const std::filesystem::path& csv);

    const std::vector<Keyword>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    std::vector<std::string> languages() const;

private:
    std::vector<Keyword> entries_;
};

/// Case-folded substring match: true iff any keyword occurs in the text.
bool matches_keywords(const std::string& text, const KeywordList& keywords);

// ---------------------------------------------------------------------------
// URL-level dedup
// ---------------------------------------------------------------------------

/// Strips the fragment and lowercases scheme+host; the path and query are
/// preserved verbatim.
std::string normalize_url(const std::string& url);

/// 32-hex-char id of an image, derived from its normalized URL. Also the stem
/// of the saved filename and the join key in the image pipeline.
std::string image_content_id(const std::string& url);

/// Saved filename: content id plus the URL's original extension (when it has
/// a plausible one).
std::string image_filename(const std::string& url);

/// Linked hash map over normalized URLs: O(1) membership and insert with
/// insertion order preserved. Optionally bounded; when full, the oldest
/// insertion is evicted (re-seeing a URL does not refresh its slot).
/// check_and_record is atomic, so parallel fetch workers can share one map.
class UrlDedupMap {
public:
    explicit UrlDedupMap(std::optional<std::size_t> capacity = std::nullopt);

    struct CheckResult {
        bool first_seen = false;
        std::uint64_t seq = 0; // first-seen sequence number
    };

    CheckResult check_and_record(const std::string& url);

    std::size_t size() const;
    std::optional<std::size_t> capacity() const { return capacity_; }

private:
    mutable std::mutex mu_;
    std::optional<std::size_t> capacity_;
    std::list<std::string> order_; // insertion order, oldest first
    std::unordered_map<std::string, std::pair<std::uint64_t, std::list<std::string>::iterator>>
        seen_;
    std::uint64_t next_seq_ = 0;
};

// ---------------------------------------------------------------------------
// Stream sources and image fetchers
// ---------------------------------------------------------------------------

class StreamSource {
public:
    virtual ~StreamSource() = default;

    /// Next raw post document, or nullopt when the stream ends.
    virtual std::optional<std::string> next() = 0;
};

/// Replays a newline-delimited JSON corpus, optionally throttled to
/// `rate_per_second` posts/sec (0 = unthrottled).
class ReplaySource : public StreamSource {
public:
    explicit ReplaySource(const std::filesystem::path& corpus, double rate_per_second = 0.0);

    std::optional<std::string> next() override;

private:
    std::ifstream in_;
    double interval_s_;
    std::chrono::steady_clock::time_point next_emit_;
};

/// In-memory source for tests and bench runs.
class VectorSource : public StreamSource {
public:
    explicit VectorSource(std::vector<std::string> docs) : docs_(std::move(docs)) {}

    std::optional<std::string> next() override {
        if (pos_ >= docs_.size()) return std::nullopt;
        return docs_[pos_++];
    }

private:
    std::vector<std::string> docs_;
    std::size_t pos_ = 0;
};

struct FetchResult {
    bool ok = false;
    std::string bytes;
    std::string error;
};

class Fetcher {
public:
    virtual ~Fetcher() = default;

    virtual FetchResult fetch(const std::string& url) = 0;

    /// Offline fetchers skip the retry backoff so error tests stay fast and
    /// deterministic.
    virtual bool offline() const { return true; }
};

/// Serves bytes from a fixture directory keyed by URL (file name =
/// image_filename(url)).
class DirectoryFetcher : public Fetcher {
public:
    explicit DirectoryFetcher(std::filesystem::path dir) : dir_(std::move(dir)) {}

    FetchResult fetch(const std::string& url) override;

private:
    std::filesystem::path dir_;
};

/// Serves bytes from an in-memory url -> bytes map.
class MapFetcher : public Fetcher {
public:
    explicit MapFetcher(std::unordered_map<std::string, std::string> by_url)
        : by_url_(std::move(by_url)) {}

    FetchResult fetch(const std::string& url) override;

private:
    std::unordered_map<std::string, std::string> by_url_;
};

// ---------------------------------------------------------------------------
// Collector workers
// ---------------------------------------------------------------------------

struct TweetCollectorSummary {
    std::uint64_t seen = 0;
    std::uint64_t matched = 0;
    std::uint64_t parse_errors = 0;
    std::uint64_t refs_pushed = 0;
};

/// Drains the source: matching tweets are persisted to the tweet index and
/// their image refs pushed downstream. Parse/schema failures are counted and
/// skipped. Does not close `out_refs`.
TweetCollectorSummary run_tweet_collector(StreamSource& source, const KeywordList& keywords,
                                          DocStore& tweet_index, Queue<ImageRef>& out_refs);

/// Message flowing from the Image Collector to the image processors: the
/// persisted record plus the fetched bytes (shared, transient).
struct ImageItem {
    ImageRecord record;
    std::shared_ptr<const std::string> bytes;
};

struct ImageCollectorOptions {
    int retries = 2; // additional attempts after the first failure
    std::chrono::milliseconds backoff{100};
};

struct ImageCollectorSummary {
    std::uint64_t refs_in = 0;
    std::uint64_t fetched = 0;
    std::uint64_t skipped_duplicate = 0;
    std::uint64_t fetch_failures = 0;
    std::uint64_t write_failures = 0;
};

/// Drains `in_refs`: first-seen URLs are fetched once (with retries), saved
/// under out_dir/images/<content-id><ext>, and pushed downstream. Repeats are
/// counted and never fetched again. Several workers may run concurrently over
/// the same queues and dedup map; does not close `out_images`.
ImageCollectorSummary run_image_collector(Queue<ImageRef>& in_refs, Fetcher& fetcher,
                                          UrlDedupMap& dedup, const std::filesystem::path& out_dir,
                                          Queue<ImageItem>& out_images,
                                          const ImageCollectorOptions& options = {});

} // namespace slidewatch
