#include "slidewatch/orchestrator.hpp"

#include <chrono>
#include <thread>

#include "slidewatch/errors.hpp"
#include "slidewatch/util.hpp"

namespace slidewatch {

using nlohmann::json;
using namespace std::chrono_literals;

const char* to_string(VerdictKind k) {
    switch (k) {
    case VerdictKind::junk: return "junk";
    case VerdictKind::duplicate: return "duplicate";
    case VerdictKind::landslide: return "landslide";
    }
    return "junk";
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

namespace {

ClassifierConfig classifier_from_json(const json& j) {
    ClassifierConfig c;
    c.kind = j.value("kind", std::string("stub"));
    c.scores = j.value("scores", std::string());
    c.seed = j.value("seed", std::uint64_t{1});
    c.threshold = j.value("threshold", 0.5);
    return c;
}

json classifier_to_json(const ClassifierConfig& c) {
    return json{{"kind", c.kind},
                {"scores", c.scores.string()},
                {"seed", c.seed},
                {"threshold", c.threshold}};
}

} // namespace

PipelineConfig PipelineConfig::from_json(const json& j) {
    PipelineConfig cfg;
    cfg.keyword_file = j.value("keyword_file", std::string());
    cfg.corpus = j.value("corpus", std::string());
    cfg.out_dir = j.value("out_dir", std::string());
    cfg.gazetteer = j.value("gazetteer", std::string());
    cfg.ner_dir = j.value("ner_dir", std::string());
    cfg.fixture_dir = j.value("fixture_dir", std::string());
    if (j.contains("feature_index_path"))
        cfg.feature_index_path = std::filesystem::path(j["feature_index_path"].get<std::string>());
    cfg.replay_rate = j.value("replay_rate", 0.0);
    cfg.queue_capacity = j.value("queue_capacity", kDefaultQueueCapacity);
    cfg.duplicate_threshold = j.value("duplicate_threshold", kDefaultDuplicateThreshold);
    cfg.feature_dim = j.value("feature_dim", kDefaultFeatureDim);
    cfg.feature_scale = j.value("feature_scale", 1.0);
    cfg.feature_seed = j.value("feature_seed", std::uint64_t{0});
    if (j.contains("junk")) cfg.junk = classifier_from_json(j["junk"]);
    if (j.contains("landslide")) cfg.landslide = classifier_from_json(j["landslide"]);
    cfg.geocode_cache_capacity = j.value("geocode_cache_capacity", std::size_t{4096});
    cfg.ner_cache_capacity = j.value("ner_cache_capacity", std::size_t{4096});
    cfg.tweet_tag_cache_capacity = j.value("tweet_tag_cache_capacity", std::size_t{4096});
    cfg.fetch_workers = j.value("fetch_workers", std::size_t{1});
    cfg.junk_workers = j.value("junk_workers", std::size_t{1});
    cfg.landslide_workers = j.value("landslide_workers", std::size_t{1});
    cfg.junk_delay_ms = j.value("junk_delay_ms", 0.0);
    cfg.landslide_delay_ms = j.value("landslide_delay_ms", 0.0);
    cfg.duplicate_delay_ms = j.value("duplicate_delay_ms", 0.0);
    cfg.delay_jitter_ms = j.value("delay_jitter_ms", 0.0);
    cfg.delay_seed = j.value("delay_seed", std::uint64_t{0});
    return cfg;
}

PipelineConfig PipelineConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ParseError("config " + path.string() + ": " + e.what(), e.byte);
    }
    return from_json(j);
}

json PipelineConfig::to_json() const {
    json j;
    j["keyword_file"] = keyword_file.string();
    j["corpus"] = corpus.string();
    j["out_dir"] = out_dir.string();
    j["gazetteer"] = gazetteer.string();
    j["ner_dir"] = ner_dir.string();
    j["fixture_dir"] = fixture_dir.string();
    if (feature_index_path) j["feature_index_path"] = feature_index_path->string();
    j["replay_rate"] = replay_rate;
    j["queue_capacity"] = queue_capacity;
    j["duplicate_threshold"] = duplicate_threshold;
    j["feature_dim"] = feature_dim;
    j["feature_scale"] = feature_scale;
    j["feature_seed"] = feature_seed;
    j["junk"] = classifier_to_json(junk);
    j["landslide"] = classifier_to_json(landslide);
    j["geocode_cache_capacity"] = geocode_cache_capacity;
    j["ner_cache_capacity"] = ner_cache_capacity;
    j["tweet_tag_cache_capacity"] = tweet_tag_cache_capacity;
    j["fetch_workers"] = fetch_workers;
    j["junk_workers"] = junk_workers;
    j["landslide_workers"] = landslide_workers;
    j["junk_delay_ms"] = junk_delay_ms;
    j["landslide_delay_ms"] = landslide_delay_ms;
    j["duplicate_delay_ms"] = duplicate_delay_ms;
    j["delay_jitter_ms"] = delay_jitter_ms;
    j["delay_seed"] = delay_seed;
    return j;
}

void PipelineConfig::validate() const {
    if (duplicate_threshold < 0.0) throw Error("duplicate_threshold must be >= 0");
    if (feature_dim == 0) throw Error("feature_dim must be >= 1");
    if (fetch_workers < 1 || junk_workers < 1 || landslide_workers < 1)
        throw Error("worker counts must be >= 1");
    if (queue_capacity < 1) throw Error("queue_capacity must be >= 1");
    if (junk.kind != "stub" && junk.kind != "lookup")
        throw Error("junk classifier kind must be 'stub' or 'lookup'");
    if (landslide.kind != "stub" && landslide.kind != "lookup")
        throw Error("landslide classifier kind must be 'stub' or 'lookup'");
}

// ---------------------------------------------------------------------------
// Join state
// ---------------------------------------------------------------------------

void JoinState::add_image(const ImageItem& item) {
    const std::string id = image_content_id(item.record.url);
    if (!pending_.emplace(id, Slot{item.record, false, false, false}).second)
        throw Error("join state already tracks image id '" + id + "'");
}

JoinState::AddOutcome JoinState::add_verdict(const ProcessorVerdict& v, ImageRecord& completed) {
    const auto it = pending_.find(v.image_id);
    if (it == pending_.end()) return AddOutcome::unknown_id;
    Slot& slot = it->second;
    switch (v.kind) {
    case VerdictKind::junk:
        if (slot.has_junk)
            throw Error("duplicate junk verdict for image '" + v.image_id + "'");
        slot.has_junk = true;
        slot.record.junk = v.classification;
        break;
    case VerdictKind::duplicate:
        if (slot.has_duplicate)
            throw Error("duplicate duplicate-filter verdict for image '" + v.image_id + "'");
        slot.has_duplicate = true;
        slot.record.duplicate = v.duplicate;
        break;
    case VerdictKind::landslide:
        if (slot.has_landslide)
            throw Error("duplicate landslide verdict for image '" + v.image_id + "'");
        slot.has_landslide = true;
        slot.record.landslide = v.classification;
        break;
    }
    if (slot.has_junk && slot.has_duplicate && slot.has_landslide) {
        completed = std::move(slot.record);
        pending_.erase(it);
        return AddOutcome::completed;
    }
    return AddOutcome::pending;
}

// ---------------------------------------------------------------------------
// Image manager
// ---------------------------------------------------------------------------

namespace {

TweetTags tags_for_tweet(const std::string& tweet_id, const MergeContext& ctx) {
    auto compute = [&]() -> TweetTags {
        TweetTags tags;
        const auto doc = ctx.tweet_index->get_raw(tweet_id);
        if (!doc) return tags; // tweet missing: tag as unknown/organization
        const Tweet t = parse_tweet(*doc);
        tags.geo = geotag(t, *ctx.geocoder, *ctx.ner, *ctx.geo_cache, *ctx.ner_cache);
        tags.user = classify_user_type(t.author_name, *ctx.ner);
        return tags;
    };
    if (ctx.tweet_tag_cache == nullptr) return compute();
    return ctx.tweet_tag_cache->get_or_compute(tweet_id, compute).first;
}

void tally_merged(const ImageRecord& rec, ManagerTallies& tallies) {
    ++tallies.merged;
    const bool relevant = rec.junk && rec.junk->label == Label::positive;
    const bool duplicate = rec.duplicate && rec.duplicate->is_duplicate;
    const bool landslide = rec.landslide && rec.landslide->label == Label::positive;
    if (rec.junk) (relevant ? tallies.junk_positive : tallies.junk_negative)++;
    if (rec.duplicate) (duplicate ? tallies.duplicates : tallies.non_duplicates)++;
    if (rec.landslide) (landslide ? tallies.landslide_positive : tallies.landslide_negative)++;
    if (!relevant) {
        ++tallies.funnel_junk_rejected;
    } else if (duplicate) {
        ++tallies.funnel_additional_duplicates;
    } else {
        ++tallies.funnel_remaining;
        if (landslide) ++tallies.funnel_landslide_reports;
    }
    if (rec.geo) ++tallies.geotag_sources[to_string(rec.geo->source)];
    if (rec.user_type)
        (*rec.user_type == UserKind::person ? tallies.user_person : tallies.user_organization)++;
}

} // namespace

void run_image_manager(Queue<ImageItem>& in, const std::array<Queue<ImageItem>*, 3>& proc_inputs,
                       const std::array<Queue<ProcessorVerdict>*, 3>& proc_outputs,
                       JoinState& join, const MergeContext& ctx, ManagerTallies& tallies) {
    bool in_open = true;
    std::array<bool, 3> out_open{true, true, true};

    auto handle_verdict = [&](const ProcessorVerdict& v) {
        ImageRecord completed;
        switch (join.add_verdict(v, completed)) {
        case JoinState::AddOutcome::unknown_id:
            ++tallies.dropped_verdicts;
            break;
        case JoinState::AddOutcome::completed: {
            const TweetTags tags = tags_for_tweet(completed.tweet_id, ctx);
            completed.geo = tags.geo;
            completed.user_type = tags.user;
            ctx.image_index->put(image_content_id(completed.url),
                                 record_to_json(completed).dump());
            tally_merged(completed, tallies);
            break;
        }
        case JoinState::AddOutcome::pending:
            break;
        }
    };

    // Empties everything currently queued on one processor output.
    auto drain_queue = [&](std::size_t i, std::chrono::milliseconds first_wait) {
        std::size_t got = 0;
        if (!out_open[i]) return got;
        ProcessorVerdict v;
        auto wait = first_wait;
        for (;;) {
            const PopStatus st = proc_outputs[i]->pop(v, wait);
            if (st == PopStatus::closed) {
                out_open[i] = false;
                break;
            }
            if (st == PopStatus::timed_out) break;
            handle_verdict(v);
            ++got;
            wait = 0ms;
        }
        return got;
    };

    auto drain_all = [&] {
        std::size_t got = 0;
        for (std::size_t i = 0; i < proc_outputs.size(); ++i) got += drain_queue(i, 0ms);
        return got;
    };

    while (in_open || out_open[0] || out_open[1] || out_open[2]) {
        std::size_t progress = 0;

        // Move everything currently waiting in `in` to the processors,
        // draining their outputs along the way so a full queue can never
        // wedge the dispatch.
        while (in_open) {
            ImageItem item;
            const PopStatus st = in.pop(item, 0ms);
            if (st == PopStatus::closed) {
                in_open = false;
                for (Queue<ImageItem>* q : proc_inputs) q->close();
                break;
            }
            if (st == PopStatus::timed_out) break;
            ++progress;
            join.add_image(item);
            ++tallies.dispatched;
            for (Queue<ImageItem>* q : proc_inputs) {
                while (!q->try_push_for(item, 1ms)) drain_all();
            }
            if ((tallies.dispatched & 0x3F) == 0) progress += drain_all();
        }

        progress += drain_all();

        if (progress == 0) {
            // Idle: block briefly on whichever side can still produce work.
            if (in_open) {
                ImageItem item;
                const PopStatus st = in.pop(item, 1ms);
                if (st == PopStatus::ok) {
                    join.add_image(item);
                    ++tallies.dispatched;
                    for (Queue<ImageItem>* q : proc_inputs) {
                        while (!q->try_push_for(item, 1ms)) drain_all();
                    }
                } else if (st == PopStatus::closed) {
                    in_open = false;
                    for (Queue<ImageItem>* q : proc_inputs) q->close();
                }
            } else {
                for (std::size_t i = 0; i < proc_outputs.size(); ++i) {
                    if (out_open[i]) {
                        drain_queue(i, 1ms);
                        break;
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Run report
// ---------------------------------------------------------------------------

RunReport::Funnel RunReport::funnel() const {
    Funnel f;
    f.images = manager.merged;
    f.junk_rejected = manager.funnel_junk_rejected;
    f.additional_duplicates = manager.funnel_additional_duplicates;
    f.remaining = manager.funnel_remaining;
    f.landslide_reports = manager.funnel_landslide_reports;
    if (f.images > 0) {
        f.junk_pct = 100.0 * static_cast<double>(f.junk_rejected) / f.images;
        f.additional_duplicates_pct =
            100.0 * static_cast<double>(f.additional_duplicates) / f.images;
        f.remaining_pct = 100.0 * static_cast<double>(f.remaining) / f.images;
    }
    if (f.remaining > 0)
        f.landslide_pct_of_remaining =
            100.0 * static_cast<double>(f.landslide_reports) / f.remaining;
    return f;
}

json RunReport::to_json() const {
    json j;
    j["tweets"] = {{"seen", tweets_seen},
                   {"matched", tweets_matched},
                   {"parse_errors", parse_errors},
                   {"refs_pushed", refs_pushed}};
    j["images"] = {{"refs_in", refs_in},
                   {"fetched", images_fetched},
                   {"skipped_duplicate_urls", urls_skipped_duplicate},
                   {"fetch_failures", fetch_failures},
                   {"write_failures", write_failures}};
    j["verdicts"] = {{"junk_positive", manager.junk_positive},
                     {"junk_negative", manager.junk_negative},
                     {"duplicates", manager.duplicates},
                     {"non_duplicates", manager.non_duplicates},
                     {"landslide_positive", manager.landslide_positive},
                     {"landslide_negative", manager.landslide_negative}};
    const Funnel f = funnel();
    j["funnel"] = {{"images", f.images},
                   {"junk_rejected", f.junk_rejected},
                   {"additional_duplicates", f.additional_duplicates},
                   {"remaining", f.remaining},
                   {"landslide_reports", f.landslide_reports},
                   {"junk_pct", f.junk_pct},
                   {"additional_duplicates_pct", f.additional_duplicates_pct},
                   {"remaining_pct", f.remaining_pct},
                   {"landslide_pct_of_remaining", f.landslide_pct_of_remaining}};
    j["geotag_sources"] = manager.geotag_sources;
    j["user_types"] = {{"person", manager.user_person},
                       {"organization", manager.user_organization}};
    j["merged_docs"] = manager.merged;
    j["dropped_verdicts"] = manager.dropped_verdicts;
    j["join_pending"] = join_pending;
    j["feature_index_size"] = feature_index_size;
    j["failed"] = failed;
    j["errors"] = errors;
    j["wall_seconds"] = wall_seconds;
    json queues_json = json::array();
    for (const QueueStats& q : queues)
        queues_json.push_back(json{{"name", q.name},
                                   {"capacity", q.capacity},
                                   {"depth", q.depth},
                                   {"pushed", q.pushed},
                                   {"popped", q.popped}});
    j["queues"] = queues_json;
    return j;
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

namespace {

// Deterministic per-item synthetic stage cost used by the bench module and
// the reorder tests.
void synthetic_stage_delay(double base_ms, double jitter_ms, std::uint64_t seed,
                           std::string_view stage, const std::string& image_id) {
    if (base_ms <= 0.0 && jitter_ms <= 0.0) return;
    double ms = base_ms;
    if (jitter_ms > 0.0) {
        std::uint64_t state = seed ^ fnv1a64(image_id) ^ fnv1a64(stage);
        ms += splitmix_unit(state) * jitter_ms;
    }
    if (ms > 0.0)
        std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
}

struct ErrorSink {
    std::mutex mu;
    std::vector<std::string> errors;
    bool failed = false;

    void record(const std::string& where, const std::exception& e) {
        std::lock_guard lock(mu);
        failed = true;
        errors.push_back(where + ": " + e.what());
    }
};

} // namespace

Pipeline::Pipeline(PipelineConfig cfg, PipelineHooks hooks)
    : cfg_(std::move(cfg)), hooks_(std::move(hooks)) {
    cfg_.validate();
}

RunReport Pipeline::run() {
    if (used_) throw Error("pipeline object already ran");
    used_ = true;

    const auto t_start = std::chrono::steady_clock::now();
    RunReport report;
    ErrorSink errors;

    std::filesystem::create_directories(cfg_.out_dir);

    // Components (hooks override config-built defaults).
    const KeywordList keywords = KeywordList::load(cfg_.keyword_file);
    DocStore tweet_index("tweet-index", cfg_.out_dir / "tweet_index.log");
    DocStore image_index("image-index", cfg_.out_dir / "image_index.log");

    std::shared_ptr<Fetcher> fetcher = hooks_.fetcher;
    if (!fetcher) fetcher = std::make_shared<DirectoryFetcher>(cfg_.fixture_dir);

    std::shared_ptr<const FeatureExtractor> extractor = hooks_.extractor;
    if (!extractor)
        extractor = std::make_shared<StubFeatureExtractor>(cfg_.feature_dim, cfg_.feature_scale,
                                                           cfg_.feature_seed);

    auto make_classifier = [&](TaskKind task, const ClassifierConfig& cc)
        -> std::shared_ptr<const BinaryClassifier> {
        if (cc.kind == "lookup")
            return std::make_shared<LookupClassifier>(
                LookupClassifier::load(task, cc.scores, cc.threshold));
        return std::make_shared<StubClassifier>(
            StubClassifier::seeded(task, extractor, cc.seed, cc.threshold));
    };
    std::shared_ptr<const BinaryClassifier> junk = hooks_.junk;
    if (!junk) junk = make_classifier(TaskKind::junk, cfg_.junk);
    std::shared_ptr<const BinaryClassifier> landslide = hooks_.landslide;
    if (!landslide) landslide = make_classifier(TaskKind::landslide, cfg_.landslide);

    std::shared_ptr<Geocoder> geocoder = hooks_.geocoder;
    if (!geocoder)
        geocoder = std::make_shared<GazetteerGeocoder>(GazetteerGeocoder::load(cfg_.gazetteer));
    std::shared_ptr<const NerTagger> ner = hooks_.ner;
    if (!ner)
        ner = std::make_shared<DictionaryNerTagger>(DictionaryNerTagger::load_dir(cfg_.ner_dir));

    FeatureIndex feature_index =
        cfg_.feature_index_path
            ? FeatureIndex::open(*cfg_.feature_index_path, extractor->dim())
            : FeatureIndex(extractor->dim());

    GeocodeCache geo_cache(cfg_.geocode_cache_capacity);
    NerCache ner_cache(cfg_.ner_cache_capacity);
    LruCache<std::string, TweetTags> tweet_tag_cache(cfg_.tweet_tag_cache_capacity);

    // Wiring: queues for every worker input, one events channel.
    Queue<ImageRef> refs_queue("image-refs", cfg_.queue_capacity);
    Queue<ImageItem> images_queue("fetched-images", cfg_.queue_capacity);
    Queue<ImageItem> junk_in("junk-in", cfg_.queue_capacity);
    Queue<ImageItem> dup_in("duplicate-in", cfg_.queue_capacity);
    Queue<ImageItem> land_in("landslide-in", cfg_.queue_capacity);
    Queue<ProcessorVerdict> junk_out("junk-out", cfg_.queue_capacity);
    Queue<ProcessorVerdict> dup_out("duplicate-out", cfg_.queue_capacity);
    Queue<ProcessorVerdict> land_out("landslide-out", cfg_.queue_capacity);
    UrlDedupMap url_dedup;

    auto publish = [&](const std::string& stage, const std::string& message,
                       std::uint64_t count) {
        events_.publish(PipelineEvent{stage, message, count});
    };
    publish("pipeline", "start", 0);

    // Tweet collector.
    TweetCollectorSummary tweet_summary;
    std::thread tweet_thread([&] {
        try {
            ReplaySource source(cfg_.corpus, cfg_.replay_rate);
            tweet_summary = run_tweet_collector(source, keywords, tweet_index, refs_queue);
        } catch (const std::exception& e) {
            errors.record("tweet-collector", e);
        }
    });

    // Image collector workers.
    std::vector<ImageCollectorSummary> image_summaries(cfg_.fetch_workers);
    std::vector<std::thread> fetch_threads;
    for (std::size_t w = 0; w < cfg_.fetch_workers; ++w) {
        fetch_threads.emplace_back([&, w] {
            try {
                image_summaries[w] = run_image_collector(refs_queue, *fetcher, url_dedup,
                                                         cfg_.out_dir, images_queue);
            } catch (const std::exception& e) {
                errors.record("image-collector", e);
            }
        });
    }

    // Classifier worker loop, shared by junk and landslide stages.
    auto classifier_worker = [&](Queue<ImageItem>& in, Queue<ProcessorVerdict>& out,
                                 const BinaryClassifier& model, VerdictKind kind,
                                 double delay_ms) {
        while (auto item = in.pop_wait()) {
            const std::string id = image_content_id(item->record.url);
            try {
                synthetic_stage_delay(delay_ms, cfg_.delay_jitter_ms, cfg_.delay_seed,
                                      to_string(kind), id);
                ProcessorVerdict v;
                v.image_id = id;
                v.kind = kind;
                v.classification = model.classify(item->record, *item->bytes);
                out.push(v);
            } catch (const QueueClosed&) {
                return;
            } catch (const std::exception& e) {
                errors.record(to_string(kind), e);
            }
        }
    };

    std::vector<std::thread> junk_threads;
    for (std::size_t w = 0; w < cfg_.junk_workers; ++w)
        junk_threads.emplace_back([&] {
            classifier_worker(junk_in, junk_out, *junk, VerdictKind::junk, cfg_.junk_delay_ms);
        });
    std::vector<std::thread> land_threads;
    for (std::size_t w = 0; w < cfg_.landslide_workers; ++w)
        land_threads.emplace_back([&] {
            classifier_worker(land_in, land_out, *landslide, VerdictKind::landslide,
                              cfg_.landslide_delay_ms);
        });

    // Duplicate filter: single worker, serialized index.
    std::thread dup_thread([&] {
        while (auto item = dup_in.pop_wait()) {
            const std::string id = image_content_id(item->record.url);
            try {
                synthetic_stage_delay(cfg_.duplicate_delay_ms, cfg_.delay_jitter_ms,
                                      cfg_.delay_seed, "duplicate", id);
                ProcessorVerdict v;
                v.image_id = id;
                v.kind = VerdictKind::duplicate;
                const FeatureVector fv = extractor->extract(*item->bytes, id);
                v.duplicate = feature_index.find_duplicate(fv, cfg_.duplicate_threshold);
                if (!v.duplicate.is_duplicate) feature_index.insert(id, fv);
                dup_out.push(v);
            } catch (const QueueClosed&) {
                return;
            } catch (const std::exception& e) {
                errors.record("duplicate-filter", e);
            }
        }
    });

    // Image manager (fan-out, join, merge, persist).
    JoinState join;
    MergeContext merge_ctx{&tweet_index, &image_index,  geocoder.get(), ner.get(),
                           &geo_cache,   &ner_cache,    &tweet_tag_cache};
    std::thread manager_thread([&] {
        try {
            run_image_manager(images_queue, {&junk_in, &dup_in, &land_in},
                              {&junk_out, &dup_out, &land_out}, join, merge_ctx, report.manager);
        } catch (const std::exception& e) {
            errors.record("image-manager", e);
            // Keep draining so the workers can finish and the run terminates.
            while (images_queue.pop_wait()) {
            }
            junk_in.close();
            dup_in.close();
            land_in.close();
            ProcessorVerdict v;
            for (Queue<ProcessorVerdict>* q : {&junk_out, &dup_out, &land_out}) {
                while (q->pop(v, 10ms) != PopStatus::closed) {
                }
            }
        }
    });

    // Shutdown cascade: each stage closes once its producers are done.
    tweet_thread.join();
    publish("tweet-collector", "done", tweet_summary.matched);
    refs_queue.close();
    for (std::thread& t : fetch_threads) t.join();
    images_queue.close();
    std::uint64_t fetched_total = 0;
    for (const ImageCollectorSummary& s : image_summaries) fetched_total += s.fetched;
    publish("image-collector", "done", fetched_total);
    for (std::thread& t : junk_threads) t.join();
    junk_out.close();
    for (std::thread& t : land_threads) t.join();
    land_out.close();
    dup_thread.join();
    dup_out.close();
    manager_thread.join();
    publish("image-manager", "done", report.manager.merged);

    // Assemble the report.
    report.tweets_seen = tweet_summary.seen;
    report.tweets_matched = tweet_summary.matched;
    report.parse_errors = tweet_summary.parse_errors;
    report.refs_pushed = tweet_summary.refs_pushed;
    for (const ImageCollectorSummary& s : image_summaries) {
        report.refs_in += s.refs_in;
        report.images_fetched += s.fetched;
        report.urls_skipped_duplicate += s.skipped_duplicate;
        report.fetch_failures += s.fetch_failures;
        report.write_failures += s.write_failures;
    }
    report.join_pending = join.pending();
    report.feature_index_size = feature_index.size();
    {
        std::lock_guard lock(errors.mu);
        report.failed = errors.failed;
        report.errors = errors.errors;
    }
    for (const QueueStats& s :
         {refs_queue.stats(), images_queue.stats(), junk_in.stats(), dup_in.stats(),
          land_in.stats(), junk_out.stats(), dup_out.stats(), land_out.stats()})
        report.queues.push_back(s);
    if (report.join_pending > 0) report.failed = true;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    publish("pipeline", report.failed ? "failed" : "done", report.manager.merged);
    events_.close();
    return report;
}

RunReport run_pipeline(const PipelineConfig& cfg, const PipelineHooks& hooks) {
    Pipeline p(cfg, hooks);
    return p.run();
}

} // namespace slidewatch
