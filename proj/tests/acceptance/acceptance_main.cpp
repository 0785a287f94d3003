// Acceptance suite: one criterion per check, one PASS/FAIL line each, with
// the stated tolerances and runtime budgets pinned in code.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "slidewatch/bench.hpp"
#include "slidewatch/classifiers.hpp"
#include "slidewatch/collectors.hpp"
#include "slidewatch/dedup.hpp"
#include "slidewatch/geo_text.hpp"
#include "slidewatch/orchestrator.hpp"
#include "slidewatch/storage.hpp"
#include "slidewatch/synth.hpp"

#include "../support/oracles.hpp"
#include "../support/temp_dir.hpp"

using namespace slidewatch;
using testsupport::TempDir;
using testsupport::TestRng;

namespace {

struct Check {
    std::vector<std::string> failures;

    void require(bool ok, const std::string& msg) {
        if (!ok) failures.push_back(msg);
    }

    template <typename A, typename B>
    void equal(const A& got, const B& expect, const std::string& what) {
        if (!(got == expect)) {
            std::ostringstream os;
            os << what << ": got " << got << ", expected " << expect;
            failures.push_back(os.str());
        }
    }

    void close(double got, double expect, double tol, const std::string& what) {
        if (!(std::abs(got - expect) <= tol)) {
            std::ostringstream os;
            os.precision(10);
            os << what << ": got " << got << ", expected " << expect << " +/- " << tol;
            failures.push_back(os.str());
        }
    }
};

// ---------------------------------------------------------------------------
// 1. Metrics oracle: the real-world validation row, +/- 0.01 percent.
// ---------------------------------------------------------------------------
void criterion_metrics_oracle(Check& check) {
    const MetricsReport m = metrics_from_confusion(ConfusionMatrix{123, 39, 43, 3395});
    check.close(m.accuracy, 97.72, 0.01, "accuracy");
    check.close(m.precision_positive, 75.93, 0.01, "precision");
    check.close(m.recall_positive, 74.10, 0.01, "recall");
    check.close(m.f1_positive, 75.00, 0.01, "f1");
    check.close(m.mcc, 73.81, 0.01, "mcc");
}

// ---------------------------------------------------------------------------
// 2. Threshold tuner vs the exhaustive oracle on 1000 randomized pair sets.
// ---------------------------------------------------------------------------
void criterion_tuner_oracle(Check& check) {
    TestRng rng(20240201);
    for (int set = 0; set < 1000; ++set) {
        std::vector<LabeledPair> pairs;
        // Mimic the 460/140 composition with varying separation and noise.
        const double dup_hi = rng.uniform(2.0, 10.0);
        const double non_lo = rng.uniform(1.0, dup_hi + 2.0);
        const double flip = rng.uniform(0.0, 0.25);
        for (int i = 0; i < 460; ++i) {
            const bool noisy = rng.unit() < flip;
            pairs.push_back({rng.uniform(0.0, noisy ? 12.5 : dup_hi), true});
        }
        for (int i = 0; i < 140; ++i) {
            const bool noisy = rng.unit() < flip;
            pairs.push_back({rng.uniform(noisy ? 0.0 : non_lo, 12.5), false});
        }
        const ThresholdTuneResult got = tune_threshold(pairs);
        const auto expect = testsupport::exhaustive_tuner_oracle(pairs);
        if (got.best_threshold != expect.best_threshold ||
            got.best_mcc != mcc(expect.best_confusion)) {
            std::ostringstream os;
            os.precision(17);
            os << "set " << set << ": tuner (" << got.best_threshold << ", " << got.best_mcc
               << ") vs oracle (" << expect.best_threshold << ", "
               << mcc(expect.best_confusion) << ")";
            check.failures.push_back(os.str());
            return;
        }
    }
}

// ---------------------------------------------------------------------------
// 3. Duplicate-filter geometry against brute force and planted distances.
// ---------------------------------------------------------------------------
void criterion_duplicate_geometry(Check& check) {
    TestRng rng(333);
    const std::size_t dim = 32;
    const double inf = std::numeric_limits<double>::infinity();

    // (a) d = inf equals the brute-force nearest neighbour on planted sets.
    for (int round = 0; round < 5; ++round) {
        const std::size_t n = 200 + rng.below(801); // up to ~1000
        FeatureIndex index(dim);
        std::vector<FeatureVector> entries;
        for (std::size_t i = 0; i < n; ++i) {
            FeatureVector fv;
            fv.values.resize(dim);
            for (float& v : fv.values) v = static_cast<float>(rng.uniform(0.0, 50.0));
            index.insert("e" + std::to_string(i), fv);
            entries.push_back(fv);
        }
        for (int q = 0; q < 50; ++q) {
            FeatureVector probe;
            probe.values.resize(dim);
            for (float& v : probe.values) v = static_cast<float>(rng.uniform(0.0, 50.0));
            const DuplicateVerdict got = index.find_duplicate(probe, inf);
            const auto expect = testsupport::brute_force_nearest(entries, probe);
            check.require(got.is_duplicate, "d=inf must return the nearest entry");
            if (got.ref_id != "e" + std::to_string(*expect.index)) {
                check.failures.push_back("nearest-neighbour mismatch vs brute force");
                return;
            }
            check.close(*got.distance, expect.distance, 1e-9, "nearest distance");
        }
    }

    // (b) exact byte duplicates are always flagged at distance 0 under d=7.1.
    const StubFeatureExtractor extractor(dim, 50.0, 1);
    FeatureIndex stream_index(dim);
    for (int i = 0; i < 500; ++i) {
        const std::string bytes = "image-payload-" + std::to_string(i);
        const std::string id = "img-" + std::to_string(i);
        const FeatureVector fv = extractor.extract(bytes, id);
        const DuplicateVerdict before = stream_index.find_duplicate(fv, 7.1);
        check.require(!before.is_duplicate, "fresh bytes must not be flagged");
        stream_index.insert(id, fv);
        const DuplicateVerdict after =
            stream_index.find_duplicate(extractor.extract(bytes, id + "-copy"), 7.1);
        check.require(after.is_duplicate && after.distance == 0.0 && after.ref_id == id,
                      "byte duplicate must be flagged at distance 0");
        if (!check.failures.empty()) return;
    }

    // (c) vectors planted farther than 7.1 from everything are never flagged.
    FeatureIndex planted(dim);
    FeatureVector anchor;
    anchor.values.assign(dim, 0.0f);
    planted.insert("anchor", anchor);
    for (int i = 0; i < 200; ++i) {
        const double offset = 7.1001 + rng.uniform(0.0, 40.0);
        const auto dir = testsupport::random_unit_direction(rng, dim);
        FeatureVector probe;
        probe.values.resize(dim);
        for (std::size_t k = 0; k < dim; ++k)
            probe.values[k] = static_cast<float>(offset * static_cast<double>(dir[k]));
        if (l2_distance(probe, anchor) > 7.1) {
            const DuplicateVerdict v = planted.find_duplicate(probe, 7.1);
            check.require(!v.is_duplicate, "far vector must never be flagged");
        }
    }
}

// ---------------------------------------------------------------------------
// 4. URL dedup conservation over randomized streams.
// ---------------------------------------------------------------------------
class TalliedFetcher : public Fetcher {
public:
    FetchResult fetch(const std::string& url) override {
        ++calls;
        return FetchResult{true, "bytes:" + url, ""};
    }
    std::uint64_t calls = 0;
};

void criterion_url_dedup_conservation(Check& check) {
    TempDir dir("accept-dedup");
    TestRng rng(444);
    for (int stream = 0; stream < 100; ++stream) {
        const std::size_t m = 1 + rng.below(40);
        std::vector<ImageRef> refs;
        for (std::size_t u = 0; u < m; ++u) {
            const std::string url =
                "http://s" + std::to_string(stream) + "/img" + std::to_string(u) + ".png";
            const std::size_t repeats = 1 + rng.below(6);
            for (std::size_t r = 0; r < repeats; ++r) refs.push_back(ImageRef{"t", url});
        }
        for (std::size_t i = refs.size(); i > 1; --i) std::swap(refs[i - 1], refs[rng.below(i)]);

        Queue<ImageRef> in("refs", refs.size() + 1);
        Queue<ImageItem> out("images", refs.size() + 1);
        UrlDedupMap dedup;
        TalliedFetcher fetcher;
        for (const ImageRef& r : refs) in.push(r);
        in.close();
        const auto out_dir = dir / ("stream" + std::to_string(stream));
        const ImageCollectorSummary s = run_image_collector(in, fetcher, dedup, out_dir, out);

        check.equal(fetcher.calls, static_cast<std::uint64_t>(m), "fetch calls");
        check.equal(s.fetched, static_cast<std::uint64_t>(m), "fetched count");
        std::size_t files = 0;
        for (const auto& entry : std::filesystem::directory_iterator(out_dir / "images"))
            files += entry.is_regular_file() ? 1 : 0;
        check.equal(files, m, "stored files");
        if (!check.failures.empty()) return;
    }
}

// ---------------------------------------------------------------------------
// 5. Funnel reproduction on a 50k-post corpus with planted labels.
// ---------------------------------------------------------------------------
void criterion_funnel(Check& check) {
    TempDir dir("accept-funnel");
    FunnelPlan plan;
    plan.posts = 50000;
    plan.seed = 20240202;
    const SynthCorpus corpus = generate_funnel_corpus(dir / "corpus", plan);
    check.equal(corpus.junk, std::uint64_t{38000}, "planted junk");
    check.equal(corpus.duplicates, std::uint64_t{4500}, "planted duplicates");
    check.equal(corpus.remaining, std::uint64_t{7500}, "planted remaining");
    check.equal(corpus.landslides, std::uint64_t{63}, "planted landslides");

    PipelineConfig cfg;
    cfg.keyword_file = corpus.keywords;
    cfg.corpus = corpus.corpus;
    cfg.out_dir = dir / "out";
    cfg.gazetteer = corpus.gazetteer;
    cfg.ner_dir = corpus.ner_dir;
    cfg.feature_dim = 64;
    cfg.feature_scale = 20.0;
    cfg.junk = ClassifierConfig{"lookup", corpus.junk_scores, 1, 0.5};
    cfg.landslide = ClassifierConfig{"lookup", corpus.landslide_scores, 1, 0.5};

    PipelineHooks hooks;
    hooks.fetcher = std::make_shared<MapFetcher>(corpus.image_bytes);
    const RunReport report = run_pipeline(cfg, hooks);

    check.require(!report.failed, "pipeline run must not fail");
    check.equal(report.tweets_matched, corpus.images, "matched tweets");
    check.equal(report.images_fetched, corpus.images, "fetched images");
    check.equal(report.manager.merged, report.images_fetched,
                "every fetched image yields exactly one merged document");
    check.equal(report.join_pending, std::size_t{0}, "join pending at quiescence");

    const RunReport::Funnel f = report.funnel();
    check.equal(f.junk_rejected, corpus.junk, "junk rejected");
    check.equal(f.additional_duplicates, corpus.duplicates, "additional duplicates");
    check.equal(f.remaining, corpus.remaining, "remaining");
    check.equal(f.landslide_reports, corpus.landslides, "landslide reports");

    // Percentages must match the planted proportions exactly (same formula,
    // same integers).
    const auto pct = [](std::uint64_t num, std::uint64_t den) {
        return 100.0 * static_cast<double>(num) / static_cast<double>(den);
    };
    check.equal(f.junk_pct, pct(corpus.junk, corpus.images), "junk pct");
    check.equal(f.additional_duplicates_pct, pct(corpus.duplicates, corpus.images), "dup pct");
    check.equal(f.landslide_pct_of_remaining, pct(corpus.landslides, corpus.remaining),
                "landslide pct of remaining");

    // And the store agrees with the report.
    DocStore index("images", std::filesystem::path(cfg.out_dir) / "image_index.log");
    check.equal(index.count(), static_cast<std::size_t>(corpus.images), "image index count");
}

// ---------------------------------------------------------------------------
// 6. Geotag cascade priority under adjacent-source conflicts.
// ---------------------------------------------------------------------------
void criterion_geotag_cascade(Check& check) {
    TempDir dir("accept-geo");
    write_default_fixtures(dir.path());
    GazetteerGeocoder geocoder = GazetteerGeocoder::load(dir / "gazetteer.csv");
    const DictionaryNerTagger ner = DictionaryNerTagger::load_dir(dir / "ner");

    struct ConflictCase {
        const char* name;
        Tweet tweet;
        GeoSource expect_source;
        const char* expect_country;
    };
    std::vector<ConflictCase> cases;
    {
        Tweet t; // gps (Ecuador) vs text (India)
        t.id = "c1";
        t.text = "mudslide near Ooty";
        t.lang = "en";
        t.gps = GeoPoint{-0.2202, -78.5123};
        cases.push_back({"gps vs text", t, GeoSource::gps, "Ecuador"});
    }
    {
        Tweet t; // text (India) vs place (United Kingdom)
        t.id = "c2";
        t.text = "mudslide near Ooty";
        t.lang = "en";
        t.place_name = "London";
        cases.push_back({"text vs place", t, GeoSource::text, "India"});
    }
    {
        Tweet t; // place (United Kingdom) vs user location (Ecuador)
        t.id = "c3";
        t.text = "no geo words";
        t.lang = "en";
        t.place_name = "London";
        t.author_location = "Quito";
        cases.push_back({"place vs user_location", t, GeoSource::place, "United Kingdom"});
    }
    {
        Tweet t; // user location (Ecuador) vs profile description (Norway)
        t.id = "c4";
        t.text = "no geo words";
        t.lang = "en";
        t.author_location = "Quito";
        t.author_description = "reporting near Bergen";
        cases.push_back({"user_location vs profile", t, GeoSource::user_location, "Ecuador"});
    }
    {
        Tweet t; // profile description only
        t.id = "c5";
        t.text = "no geo words";
        t.lang = "en";
        t.author_description = "reporting near Bergen";
        cases.push_back({"profile only", t, GeoSource::profile_description, "Norway"});
    }
    {
        Tweet t; // nothing resolvable
        t.id = "c6";
        t.text = "no geo words";
        t.lang = "en";
        cases.push_back({"none", t, GeoSource::none, ""});
    }

    // Big caches, tiny always-evicting caches, and per-call fresh caches must
    // all produce identical tags.
    GeocodeCache big_geo(1024);
    NerCache big_ner(1024);
    GeocodeCache tiny_geo(1);
    NerCache tiny_ner(1);
    for (const ConflictCase& c : cases) {
        const GeoTag with_big = geotag(c.tweet, geocoder, ner, big_geo, big_ner);
        const GeoTag with_tiny = geotag(c.tweet, geocoder, ner, tiny_geo, tiny_ner);
        GeocodeCache fresh_geo(64);
        NerCache fresh_ner(64);
        const GeoTag with_fresh = geotag(c.tweet, geocoder, ner, fresh_geo, fresh_ner);

        check.require(with_big.source == c.expect_source,
                      std::string(c.name) + ": wrong winning source");
        if (c.expect_source != GeoSource::none)
            check.equal(with_big.country.value_or(""), std::string(c.expect_country),
                        std::string(c.name) + ": country");
        check.require(with_big == with_tiny && with_big == with_fresh,
                      std::string(c.name) + ": cache state changed the output");
    }
}

// ---------------------------------------------------------------------------
// 7. Cache efficiency: warm pass at most half the cold pass.
// ---------------------------------------------------------------------------
void criterion_cache_efficiency(Check& check) {
    BenchTargetConfig target;
    target.kind = BenchTargetKind::geolocation_tagger;
    target.unique_keys = 16;
    target.geocode_delay_ms = 10.0;
    BenchOptions options;
    options.loads = {256};
    options.repeats = 1;
    options.seed = 7;

    const auto points = run_bench(target, options);
    const LoadPoint* cold = nullptr;
    const LoadPoint* warm = nullptr;
    for (const LoadPoint& p : points) {
        if (p.target == "geolocation_tagger_cold") cold = &p;
        if (p.target == "geolocation_tagger_warm") warm = &p;
    }
    check.require(cold != nullptr && warm != nullptr, "missing cold/warm series");
    if (cold == nullptr || warm == nullptr) return;
    check.require(cold->samples[0].ok && warm->samples[0].ok, "bench passes must complete");
    const double cold_s = cold->samples[0].latency_s;
    const double warm_s = warm->samples[0].latency_s;
    check.require(cold_s >= 0.16, "cold pass must pay 16 misses x 10ms");
    check.require(warm_s <= 0.5 * cold_s,
                  "warm-cache latency must be at most half the cold-cache latency (got " +
                      std::to_string(warm_s) + "s vs " + std::to_string(cold_s) + "s)");
}

// ---------------------------------------------------------------------------
// 8. Duplicate-filter throughput decays as the index grows.
// ---------------------------------------------------------------------------
void criterion_index_growth_decay(Check& check) {
    const std::size_t sizes[] = {0, 10000, 50000};
    std::vector<double> throughputs;
    for (const std::size_t prefill : sizes) {
        BenchTargetConfig target;
        target.kind = BenchTargetKind::duplicate_filter;
        target.feature_dim = 256;
        target.feature_scale = 8.0;
        target.index_prefill = prefill;
        BenchOptions options;
        options.loads = {256};
        options.repeats = 2;
        options.seed = 99;
        const auto points = run_bench(target, options);
        if (points.size() != 1 || points[0].failed_count() != 0) {
            check.failures.push_back("bench run failed at prefill " + std::to_string(prefill));
            return;
        }
        throughputs.push_back(points[0].mean_throughput());
    }
    check.require(throughputs[0] > throughputs[1],
                  "throughput at index size 0 must exceed size 10k (got " +
                      std::to_string(throughputs[0]) + " vs " + std::to_string(throughputs[1]) +
                      ")");
    check.require(throughputs[1] > throughputs[2],
                  "throughput at index size 10k must exceed size 50k (got " +
                      std::to_string(throughputs[1]) + " vs " + std::to_string(throughputs[2]) +
                      ")");
}

// ---------------------------------------------------------------------------
// 9. Join correctness under processor reordering.
// ---------------------------------------------------------------------------
void criterion_join_reordering(Check& check) {
    TempDir dir("accept-join");
    FunnelPlan plan;
    plan.posts = 1000;
    plan.seed = 555;
    const SynthCorpus corpus = generate_funnel_corpus(dir / "corpus", plan);

    auto config_for = [&](const std::string& out, double jitter_ms, std::uint64_t delay_seed) {
        PipelineConfig cfg;
        cfg.keyword_file = corpus.keywords;
        cfg.corpus = corpus.corpus;
        cfg.out_dir = dir / out;
        cfg.gazetteer = corpus.gazetteer;
        cfg.ner_dir = corpus.ner_dir;
        cfg.feature_dim = 64;
        cfg.feature_scale = 20.0;
        cfg.junk = ClassifierConfig{"lookup", corpus.junk_scores, 1, 0.5};
        cfg.landslide = ClassifierConfig{"lookup", corpus.landslide_scores, 1, 0.5};
        cfg.delay_jitter_ms = jitter_ms;
        cfg.delay_seed = delay_seed;
        return cfg;
    };
    PipelineHooks hooks;
    hooks.fetcher = std::make_shared<MapFetcher>(corpus.image_bytes);

    // Sequential reference: no synthetic delays.
    const RunReport reference = run_pipeline(config_for("ref", 0.0, 0), hooks);
    check.require(!reference.failed, "reference run must not fail");
    check.equal(reference.join_pending, std::size_t{0}, "reference join pending");

    DocStore ref_index("images", dir / "ref" / "image_index.log");
    for (const std::uint64_t delay_seed : {1ull, 2ull}) {
        const std::string out = "jitter" + std::to_string(delay_seed);
        const RunReport delayed = run_pipeline(config_for(out, 2.0, delay_seed), hooks);
        check.require(!delayed.failed, "delayed run must not fail");
        check.equal(delayed.join_pending, std::size_t{0}, "delayed join pending");
        check.equal(delayed.manager.merged, reference.manager.merged, "merged count");

        DocStore delayed_index("images", dir / out / "image_index.log");
        check.equal(delayed_index.count(), ref_index.count(), "document count");
        for (const std::string& id : ref_index.ids()) {
            const auto ref_doc = ref_index.get_raw(id);
            const auto delayed_doc = delayed_index.get_raw(id);
            if (!delayed_doc.has_value()) {
                check.failures.push_back("document missing under reordering: " + id);
                return;
            }
            if (*ref_doc != *delayed_doc) {
                check.failures.push_back("document bytes differ under reordering: " + id);
                return;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// 10. Perfect separation of a 460/140 pair set tunes to MCC 1.0.
// ---------------------------------------------------------------------------
void criterion_perfect_separation(Check& check) {
    TestRng rng(1010);
    std::vector<LabeledPair> pairs;
    double max_dup = 0.0;
    for (int i = 0; i < 460; ++i) {
        const double d = rng.uniform(0.5, 6.8);
        max_dup = std::max(max_dup, d);
        pairs.push_back({d, true});
    }
    for (int i = 0; i < 140; ++i) pairs.push_back({rng.uniform(7.3, 12.4), false});

    const ThresholdTuneResult r = tune_threshold(pairs);
    check.equal(r.best_mcc, 1.0, "best mcc");
    // The reported threshold is the smallest grid point separating the sets:
    // the snap-up of the largest duplicate distance.
    const double expected_threshold = std::ceil(max_dup * 10.0 - 1e-9) / 10.0;
    check.close(r.best_threshold, expected_threshold, 1e-12, "best threshold");
    // And the curve at that threshold agrees.
    for (const auto& [t, value] : r.curve) {
        if (t == r.best_threshold) check.equal(value, 1.0, "curve at best threshold");
    }
}

struct Criterion {
    int number;
    const char* name;
    double budget_seconds;
    std::function<void(Check&)> fn;
};

} // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "metrics oracle reproduces the validation row", 1.0, criterion_metrics_oracle},
        {2, "threshold tuner equals the exhaustive oracle on 1000 sets", 30.0,
         criterion_tuner_oracle},
        {3, "duplicate filter matches brute-force geometry", 10.0, criterion_duplicate_geometry},
        {4, "url dedup conservation over 100 randomized streams", 10.0,
         criterion_url_dedup_conservation},
        {5, "funnel reproduction on a 50k-post planted corpus", 60.0, criterion_funnel},
        {6, "geotag cascade resolves adjacent-source conflicts in order", 5.0,
         criterion_geotag_cascade},
        {7, "warm geocode cache halves the cold-pass latency", 30.0, criterion_cache_efficiency},
        {8, "duplicate-filter throughput decays with index growth", 120.0,
         criterion_index_growth_decay},
        {9, "join state is order-independent and empty at quiescence", 60.0,
         criterion_join_reordering},
        {10, "separable 460/140 pair set tunes to MCC 1.0", 1.0, criterion_perfect_separation},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        Check check;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.fn(check);
        } catch (const std::exception& e) {
            check.failures.push_back(std::string("exception: ") + e.what());
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (seconds > c.budget_seconds) {
            std::ostringstream os;
            os << "runtime " << seconds << "s exceeded the " << c.budget_seconds << "s budget";
            check.failures.push_back(os.str());
        }
        const bool pass = check.failures.empty();
        failures += pass ? 0 : 1;
        std::printf("%s  criterion %2d  [%7.2fs]  %s\n", pass ? "PASS" : "FAIL", c.number,
                    seconds, c.name);
        for (const std::string& f : check.failures) std::printf("      - %s\n", f.c_str());
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
                criteria.size());
    return failures == 0 ? 0 : 1;
}
