#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <thread>

#include "slidewatch/orchestrator.hpp"
#include "slidewatch/synth.hpp"

#include "../support/oracles.hpp"
#include "../support/temp_dir.hpp"

using namespace slidewatch;
using namespace std::chrono_literals;
using testsupport::TempDir;
using testsupport::TestRng;

namespace {

ImageItem make_item(const std::string& tweet_id, const std::string& url,
                    const std::string& bytes) {
    ImageItem item;
    item.record.tweet_id = tweet_id;
    item.record.url = url;
    item.record.local_path = "images/" + image_filename(url);
    item.record.bytes_len = bytes.size();
    item.bytes = std::make_shared<const std::string>(bytes);
    return item;
}

ProcessorVerdict junk_verdict(const std::string& id, bool relevant) {
    ProcessorVerdict v;
    v.image_id = id;
    v.kind = VerdictKind::junk;
    v.classification = Classification{relevant ? Label::positive : Label::negative,
                                      relevant ? 0.9 : 0.1};
    return v;
}

ProcessorVerdict dup_verdict(const std::string& id, bool dup) {
    ProcessorVerdict v;
    v.image_id = id;
    v.kind = VerdictKind::duplicate;
    v.duplicate.is_duplicate = dup;
    if (dup) {
        v.duplicate.ref_id = "ref";
        v.duplicate.distance = 1.0;
    }
    return v;
}

ProcessorVerdict land_verdict(const std::string& id, bool positive) {
    ProcessorVerdict v;
    v.image_id = id;
    v.kind = VerdictKind::landslide;
    v.classification = Classification{positive ? Label::positive : Label::negative,
                                      positive ? 0.95 : 0.05};
    return v;
}

} // namespace

TEST_CASE("join state completes after all three verdicts, any order") {
    const ImageItem item = make_item("t1", "http://i/a.jpg", "bytes");
    const std::string id = image_content_id(item.record.url);

    std::vector<ProcessorVerdict> verdicts = {junk_verdict(id, true), dup_verdict(id, false),
                                              land_verdict(id, true)};
    std::sort(verdicts.begin(), verdicts.end(),
              [](const ProcessorVerdict& a, const ProcessorVerdict& b) {
                  return static_cast<int>(a.kind) < static_cast<int>(b.kind);
              });

    std::vector<ImageRecord> merged_per_order;
    do {
        JoinState join;
        join.add_image(item);
        ImageRecord completed;
        CHECK(join.add_verdict(verdicts[0], completed) == JoinState::AddOutcome::pending);
        CHECK(join.add_verdict(verdicts[1], completed) == JoinState::AddOutcome::pending);
        REQUIRE(join.add_verdict(verdicts[2], completed) == JoinState::AddOutcome::completed);
        CHECK(join.pending() == 0);
        merged_per_order.push_back(completed);
    } while (std::next_permutation(
        verdicts.begin(), verdicts.end(),
        [](const ProcessorVerdict& a, const ProcessorVerdict& b) {
            return static_cast<int>(a.kind) < static_cast<int>(b.kind);
        }));

    REQUIRE(merged_per_order.size() == 6); // all verdict arrival orders
    for (const ImageRecord& r : merged_per_order) {
        CHECK(record_to_json(r).dump() == record_to_json(merged_per_order[0]).dump());
    }
}

TEST_CASE("join state contracts: unknown ids and repeated kinds") {
    JoinState join;
    const ImageItem item = make_item("t1", "http://i/a.jpg", "bytes");
    const std::string id = image_content_id(item.record.url);
    join.add_image(item);
    CHECK_THROWS_AS(join.add_image(item), Error); // repeated id

    ImageRecord completed;
    CHECK(join.add_verdict(junk_verdict("nope", true), completed) ==
          JoinState::AddOutcome::unknown_id);
    CHECK(join.add_verdict(junk_verdict(id, true), completed) == JoinState::AddOutcome::pending);
    CHECK_THROWS_AS(join.add_verdict(junk_verdict(id, false), completed), Error);
}

namespace {

struct ManagerHarness {
    TempDir dir{"manager"};
    DocStore tweet_index{"tweets", dir / "tweets.log"};
    DocStore image_index{"images", dir / "images.log"};
    GazetteerGeocoder geocoder;
    DictionaryNerTagger ner;
    GeocodeCache geo_cache{64};
    NerCache ner_cache{64};
    LruCache<std::string, TweetTags> tag_cache{64};

    Queue<ImageItem> in{"in", 64};
    Queue<ImageItem> junk_in{"junk-in", 64};
    Queue<ImageItem> dup_in{"dup-in", 64};
    Queue<ImageItem> land_in{"land-in", 64};
    Queue<ProcessorVerdict> junk_out{"junk-out", 64};
    Queue<ProcessorVerdict> dup_out{"dup-out", 64};
    Queue<ProcessorVerdict> land_out{"land-out", 64};
    JoinState join;
    ManagerTallies tallies;

    ManagerHarness()
        : geocoder(([&] {
              write_default_fixtures(dir.path());
              return GazetteerGeocoder::load(dir / "gazetteer.csv");
          })()),
          ner(DictionaryNerTagger::load_dir(dir / "ner")) {}

    MergeContext ctx() {
        return MergeContext{&tweet_index, &image_index, &geocoder,  &ner,
                            &geo_cache,   &ner_cache,   &tag_cache};
    }

    void run() {
        run_image_manager(in, {&junk_in, &dup_in, &land_in}, {&junk_out, &dup_out, &land_out},
                          join, ctx(), tallies);
    }
};

} // namespace

TEST_CASE("image manager: one image in, three dispatches out, one merged doc") {
    ManagerHarness h;
    Tweet t;
    t.id = "t1";
    t.text = "landslide near Quito";
    t.lang = "en";
    t.author_name = "John Smith";
    h.tweet_index.put(t.id, serialize_tweet(t));

    const ImageItem item = make_item("t1", "http://i/a.jpg", "bytes");
    const std::string id = image_content_id(item.record.url);

    std::thread manager([&] { h.run(); });
    h.in.push(item);
    h.in.close();

    // The three processors see one dispatch each.
    CHECK(h.junk_in.pop_wait().has_value());
    CHECK(h.dup_in.pop_wait().has_value());
    CHECK(h.land_in.pop_wait().has_value());

    h.junk_out.push(junk_verdict(id, true));
    h.dup_out.push(dup_verdict(id, false));
    h.land_out.push(land_verdict(id, true));
    h.junk_out.close();
    h.dup_out.close();
    h.land_out.close();
    manager.join();

    CHECK(h.tallies.dispatched == 1);
    CHECK(h.tallies.merged == 1);
    CHECK(h.join.pending() == 0);
    const auto doc = h.image_index.get(id);
    REQUIRE(doc.has_value());
    const ImageRecord merged = record_from_json(*doc);
    CHECK(merged.junk->label == Label::positive);
    CHECK(merged.landslide->label == Label::positive);
    CHECK_FALSE(merged.duplicate->is_duplicate);
    REQUIRE(merged.geo.has_value());
    CHECK(merged.geo->source == GeoSource::text);
    CHECK(merged.geo->country == "Ecuador");
    CHECK(merged.user_type == UserKind::person);
}

TEST_CASE("image manager: unknown-id verdicts are dropped, not fatal") {
    ManagerHarness h;
    std::thread manager([&] { h.run(); });
    h.in.close();
    h.junk_out.push(junk_verdict("ghost", true));
    h.junk_out.close();
    h.dup_out.close();
    h.land_out.close();
    manager.join();
    CHECK(h.tallies.dropped_verdicts == 1);
    CHECK(h.tallies.merged == 0);
}

TEST_CASE("image manager: duplicate verdict kind is a contract violation") {
    ManagerHarness h;
    const ImageItem item = make_item("t1", "http://i/a.jpg", "bytes");
    const std::string id = image_content_id(item.record.url);

    std::thread manager([&] { CHECK_THROWS_AS(h.run(), Error); });
    h.in.push(item);
    h.in.close();
    h.junk_out.push(junk_verdict(id, true));
    h.junk_out.push(junk_verdict(id, true)); // second junk verdict for the same id
    h.junk_out.close();
    h.dup_out.close();
    h.land_out.close();
    manager.join();
}

// ---------------------------------------------------------------------------
// Whole pipeline runs
// ---------------------------------------------------------------------------

namespace {

struct PipelineFixture {
    TempDir dir{"pipeline"};

    PipelineConfig config(const SynthCorpus& corpus, const std::string& out_name) {
        PipelineConfig cfg;
        cfg.keyword_file = corpus.keywords;
        cfg.corpus = corpus.corpus;
        cfg.out_dir = dir / out_name;
        cfg.gazetteer = corpus.gazetteer;
        cfg.ner_dir = corpus.ner_dir;
        cfg.feature_dim = 64;
        cfg.feature_scale = 20.0;
        cfg.junk = ClassifierConfig{"lookup", corpus.junk_scores, 1, 0.5};
        cfg.landslide = ClassifierConfig{"lookup", corpus.landslide_scores, 1, 0.5};
        return cfg;
    }
};

} // namespace

TEST_CASE("pipeline: empty corpus exits cleanly with zero counts") {
    TempDir dir("pipeline");
    write_default_fixtures(dir.path());
    {
        std::ofstream corpus(dir / "empty.ndjson");
    }
    PipelineConfig cfg;
    cfg.keyword_file = dir / "keywords.csv";
    cfg.corpus = dir / "empty.ndjson";
    cfg.out_dir = dir / "out";
    cfg.gazetteer = dir / "gazetteer.csv";
    cfg.ner_dir = dir / "ner";

    const RunReport report = run_pipeline(cfg);
    CHECK_FALSE(report.failed);
    CHECK(report.tweets_seen == 0);
    CHECK(report.images_fetched == 0);
    CHECK(report.manager.merged == 0);
    CHECK(report.join_pending == 0);
    for (const QueueStats& q : report.queues) CHECK(q.depth == 0);
}

TEST_CASE("pipeline: a tweet with three images yields three merged docs sharing its geotag") {
    TempDir dir("pipeline");
    write_default_fixtures(dir.path());

    Tweet t;
    t.id = "t1";
    t.text = "landslide near Ooty";
    t.lang = "en";
    t.author_name = "John Smith";
    t.image_urls = {"http://i/1.jpg", "http://i/2.jpg", "http://i/3.jpg"};
    {
        std::ofstream corpus(dir / "one.ndjson");
        corpus << serialize_tweet(t) << '\n';
    }

    PipelineConfig cfg;
    cfg.keyword_file = dir / "keywords.csv";
    cfg.corpus = dir / "one.ndjson";
    cfg.out_dir = dir / "out";
    cfg.gazetteer = dir / "gazetteer.csv";
    cfg.ner_dir = dir / "ner";
    cfg.feature_dim = 64;
    cfg.feature_scale = 20.0;

    PipelineHooks hooks;
    hooks.fetcher = std::make_shared<MapFetcher>(std::unordered_map<std::string, std::string>{
        {"http://i/1.jpg", "one"}, {"http://i/2.jpg", "two"}, {"http://i/3.jpg", "three"}});

    const RunReport report = run_pipeline(cfg, hooks);
    CHECK_FALSE(report.failed);
    CHECK(report.images_fetched == 3);
    CHECK(report.manager.merged == 3);

    DocStore index("images", std::filesystem::path(cfg.out_dir) / "image_index.log");
    REQUIRE(index.count() == 3);
    std::vector<GeoTag> tags;
    for (const std::string& url : t.image_urls) {
        const auto doc = index.get(image_content_id(url));
        REQUIRE(doc.has_value());
        const ImageRecord rec = record_from_json(*doc);
        REQUIRE(rec.geo.has_value());
        tags.push_back(*rec.geo);
    }
    CHECK(tags[0] == tags[1]);
    CHECK(tags[1] == tags[2]);
    CHECK(tags[0].source == GeoSource::text);
    CHECK(tags[0].country == "India");
}

TEST_CASE("pipeline: verdict contents are deterministic across runs") {
    PipelineFixture fx;
    const SynthCorpus corpus =
        generate_funnel_corpus(fx.dir / "corpus", FunnelPlan{300, 0.76, 0.09, 0.0084, 11});
    PipelineHooks hooks;
    hooks.fetcher = std::make_shared<MapFetcher>(corpus.image_bytes);

    const RunReport r1 = run_pipeline(fx.config(corpus, "out1"), hooks);
    const RunReport r2 = run_pipeline(fx.config(corpus, "out2"), hooks);
    REQUIRE_FALSE(r1.failed);
    REQUIRE_FALSE(r2.failed);
    CHECK(r1.manager.merged == r2.manager.merged);

    DocStore a("images", fx.dir / "out1" / "image_index.log");
    DocStore b("images", fx.dir / "out2" / "image_index.log");
    REQUIRE(a.count() == b.count());
    for (const std::string& id : a.ids()) {
        const auto doc_a = a.get_raw(id);
        const auto doc_b = b.get_raw(id);
        REQUIRE(doc_b.has_value());
        CHECK(*doc_a == *doc_b);
    }
}

TEST_CASE("pipeline: conservation fetched == merged and queues drain") {
    PipelineFixture fx;
    const SynthCorpus corpus =
        generate_funnel_corpus(fx.dir / "corpus", FunnelPlan{250, 0.5, 0.2, 0.01, 3});
    PipelineHooks hooks;
    hooks.fetcher = std::make_shared<MapFetcher>(corpus.image_bytes);

    const RunReport report = run_pipeline(fx.config(corpus, "out"), hooks);
    REQUIRE_FALSE(report.failed);
    CHECK(report.images_fetched == corpus.images);
    CHECK(report.manager.merged == report.images_fetched);
    CHECK(report.join_pending == 0);
    for (const QueueStats& q : report.queues) {
        CHECK(q.depth == 0);
        CHECK(q.pushed == q.popped);
    }
    // duplicates get junk and landslide verdicts too (unconditional fan-out)
    CHECK(report.manager.junk_positive + report.manager.junk_negative ==
          report.manager.merged);
    CHECK(report.manager.landslide_positive + report.manager.landslide_negative ==
          report.manager.merged);
}

TEST_CASE("pipeline: lookup classifier missing an id flags the run as failed") {
    PipelineFixture fx;
    const SynthCorpus corpus =
        generate_funnel_corpus(fx.dir / "corpus", FunnelPlan{20, 0.5, 0.0, 0.0, 5});
    PipelineConfig cfg = fx.config(corpus, "out");
    // Point the junk classifier at the landslide sidecar of a DIFFERENT
    // corpus: ids will not resolve.
    const SynthCorpus other =
        generate_funnel_corpus(fx.dir / "corpus2", FunnelPlan{5, 0.5, 0.0, 0.0, 6});
    PipelineHooks hooks;
    hooks.fetcher = std::make_shared<MapFetcher>(corpus.image_bytes);
    hooks.junk = std::make_shared<LookupClassifier>(
        LookupClassifier::load(TaskKind::junk, other.junk_scores));

    const RunReport report = run_pipeline(cfg, hooks);
    CHECK(report.failed);
    CHECK(report.join_pending > 0);
    CHECK_FALSE(report.errors.empty());
}

TEST_CASE("pipeline events are published to subscribers") {
    TempDir dir("pipeline");
    write_default_fixtures(dir.path());
    {
        std::ofstream corpus(dir / "empty.ndjson");
    }
    PipelineConfig cfg;
    cfg.keyword_file = dir / "keywords.csv";
    cfg.corpus = dir / "empty.ndjson";
    cfg.out_dir = dir / "out";
    cfg.gazetteer = dir / "gazetteer.csv";
    cfg.ner_dir = dir / "ner";

    Pipeline pipeline(cfg);
    auto sub = pipeline.events().subscribe();
    const RunReport report = pipeline.run();
    CHECK_FALSE(report.failed);

    std::vector<std::string> stages;
    while (auto event = sub.receive_wait()) stages.push_back(event->stage);
    CHECK(std::count(stages.begin(), stages.end(), "pipeline") == 2); // start + done
    CHECK(std::find(stages.begin(), stages.end(), "image-manager") != stages.end());
}
