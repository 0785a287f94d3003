#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "slidewatch/broker.hpp"
#include "slidewatch/classifiers.hpp"
#include "slidewatch/collectors.hpp"
#include "slidewatch/dedup.hpp"
#include "slidewatch/geo_text.hpp"
#include "slidewatch/model.hpp"
#include "slidewatch/storage.hpp"

namespace slidewatch {

// Wires the collectors, the Image Manager fan-out/fan-in over the three image
// processors (Junk Filter, Duplicate Filter, Landslide Detector) and the
// tweet-side taggers into one pipeline run over a replay source.
//
// Every fetched image is dispatched to all three processors unconditionally;
// their verdicts are joined per image id, merged with the tweet's geotag and
// user type, and persisted as one Image Index document.

struct ClassifierConfig {
    std::string kind = "stub"; // "stub" | "lookup"
    std::filesystem::path scores;
    std::uint64_t seed = 1;
    double threshold = 0.5;
};

struct PipelineConfig {
    std::filesystem::path keyword_file;
    std::filesystem::path corpus;
    std::filesystem::path out_dir;
    std::filesystem::path gazetteer;
    std::filesystem::path ner_dir;
    std::filesystem::path fixture_dir; // DirectoryFetcher root
    std::optional<std::filesystem::path> feature_index_path;

    double replay_rate = 0.0; // posts/sec, 0 = unthrottled
    std::size_t queue_capacity = kDefaultQueueCapacity;

    double duplicate_threshold = kDefaultDuplicateThreshold;
    std::size_t feature_dim = kDefaultFeatureDim;
    double feature_scale = 1.0;
    std::uint64_t feature_seed = 0;

    ClassifierConfig junk;
    ClassifierConfig landslide;

    std::size_t geocode_cache_capacity = 4096;
    std::size_t ner_cache_capacity = 4096;
    std::size_t tweet_tag_cache_capacity = 4096;

    std::size_t fetch_workers = 1;
    std::size_t junk_workers = 1;
    std::size_t landslide_workers = 1;
    // Duplicate-filter workers stay at 1: the feature index is serialized.

    // Synthetic per-item stage costs (bench and reorder tests).
    double junk_delay_ms = 0.0;
    double landslide_delay_ms = 0.0;
    double duplicate_delay_ms = 0.0;
    double delay_jitter_ms = 0.0; // uniform extra, seeded per item
    std::uint64_t delay_seed = 0;

    static PipelineConfig from_json(const nlohmann::json& j);
    static PipelineConfig from_file(const std::filesystem::path& path);
    nlohmann::json to_json() const;
    void validate() const;
};

/// Optional component overrides; anything unset is built from the config.
struct PipelineHooks {
    std::shared_ptr<Fetcher> fetcher;
    std::shared_ptr<const BinaryClassifier> junk;
    std::shared_ptr<const BinaryClassifier> landslide;
    std::shared_ptr<Geocoder> geocoder;
    std::shared_ptr<const NerTagger> ner;
    std::shared_ptr<const FeatureExtractor> extractor;
};

enum class VerdictKind { junk, duplicate, landslide };

const char* to_string(VerdictKind k);

struct ProcessorVerdict {
    std::string image_id;
    VerdictKind kind = VerdictKind::junk;
    Classification classification; // junk / landslide payloads
    DuplicateVerdict duplicate;    // duplicate payload
};

/// Fan-in state: per image id, the verdicts received so far. Completed
/// entries are removed; each verdict kind may arrive exactly once per image.
class JoinState {
public:
    /// Registers a dispatched image. Throws on a repeated id.
    void add_image(const ImageItem& item);

    enum class AddOutcome { pending, completed, unknown_id };

    /// Files one verdict. On completion fills `completed` with the merged
    /// record (all three verdicts set) and removes the entry. Throws on a
    /// repeated verdict kind for an id.
    AddOutcome add_verdict(const ProcessorVerdict& v, ImageRecord& completed);

    std::size_t pending() const { return pending_.size(); }

private:
    struct Slot {
        ImageRecord record;
        bool has_junk = false;
        bool has_duplicate = false;
        bool has_landslide = false;
    };

    std::unordered_map<std::string, Slot> pending_;
};

struct TweetTags {
    GeoTag geo;
    UserKind user = UserKind::organization;
};

/// Everything the Image Manager needs at merge time: the stores plus the
/// tweet-side taggers (run on tweets that produced images, when their first
/// image completes; memoized per tweet).
struct MergeContext {
    DocStore* tweet_index = nullptr;
    DocStore* image_index = nullptr;
    Geocoder* geocoder = nullptr;
    const NerTagger* ner = nullptr;
    GeocodeCache* geo_cache = nullptr;
    NerCache* ner_cache = nullptr;
    LruCache<std::string, TweetTags>* tweet_tag_cache = nullptr;
};

struct ManagerTallies {
    std::uint64_t dispatched = 0;
    std::uint64_t merged = 0;
    std::uint64_t dropped_verdicts = 0; // verdicts for unknown ids
    std::uint64_t junk_positive = 0;    // relevant
    std::uint64_t junk_negative = 0;
    std::uint64_t duplicates = 0;
    std::uint64_t non_duplicates = 0;
    std::uint64_t landslide_positive = 0;
    std::uint64_t landslide_negative = 0;
    // Funnel buckets over merged records.
    std::uint64_t funnel_junk_rejected = 0;          // junk negative
    std::uint64_t funnel_additional_duplicates = 0;  // relevant && duplicate
    std::uint64_t funnel_remaining = 0;              // relevant && !duplicate
    std::uint64_t funnel_landslide_reports = 0;      // remaining && landslide
    std::map<std::string, std::uint64_t> geotag_sources;
    std::uint64_t user_person = 0;
    std::uint64_t user_organization = 0;
};

/// The Image Manager worker loop: pops records from `in`, dispatches each to
/// all three processor queues, joins the processors' verdicts and persists
/// one merged document per image. Returns once `in` and all three output
/// queues are closed and drained. Closes the processor input queues after the
/// last dispatch. Throws on join-contract violations.
void run_image_manager(Queue<ImageItem>& in, const std::array<Queue<ImageItem>*, 3>& proc_inputs,
                       const std::array<Queue<ProcessorVerdict>*, 3>& proc_outputs,
                       JoinState& join, const MergeContext& ctx, ManagerTallies& tallies);

struct PipelineEvent {
    std::string stage;
    std::string message;
    std::uint64_t count = 0;
};

struct RunReport {
    // Tweet collector
    std::uint64_t tweets_seen = 0;
    std::uint64_t tweets_matched = 0;
    std::uint64_t parse_errors = 0;
    std::uint64_t refs_pushed = 0;
    // Image collector
    std::uint64_t refs_in = 0;
    std::uint64_t images_fetched = 0;
    std::uint64_t urls_skipped_duplicate = 0;
    std::uint64_t fetch_failures = 0;
    std::uint64_t write_failures = 0;
    // Manager / processors
    ManagerTallies manager;
    std::size_t join_pending = 0;
    std::size_t feature_index_size = 0;
    // Outcome
    bool failed = false;
    std::vector<std::string> errors;
    std::vector<QueueStats> queues;
    double wall_seconds = 0.0;

    struct Funnel {
        std::uint64_t images = 0;
        std::uint64_t junk_rejected = 0;
        std::uint64_t additional_duplicates = 0;
        std::uint64_t remaining = 0;
        std::uint64_t landslide_reports = 0;
        double junk_pct = 0.0;
        double additional_duplicates_pct = 0.0;
        double remaining_pct = 0.0;
        double landslide_pct_of_remaining = 0.0;
    };

    Funnel funnel() const;
    nlohmann::json to_json() const;
};

class Pipeline {
public:
    explicit Pipeline(PipelineConfig cfg, PipelineHooks hooks = {});

    /// Processes the whole replay source to quiescence. Single use.
    RunReport run();

    /// Progress broadcast; subscribe before run().
    Channel<PipelineEvent>& events() { return events_; }

private:
    PipelineConfig cfg_;
    PipelineHooks hooks_;
    Channel<PipelineEvent> events_{"pipeline-events"};
    bool used_ = false;
};

RunReport run_pipeline(const PipelineConfig& cfg, const PipelineHooks& hooks = {});

} // namespace slidewatch
