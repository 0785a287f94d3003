#include "slidewatch/bench.hpp"

#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "slidewatch/broker.hpp"
#include "slidewatch/classifiers.hpp"
#include "slidewatch/collectors.hpp"
#include "slidewatch/errors.hpp"
#include "slidewatch/geo_text.hpp"
#include "slidewatch/model.hpp"
#include "slidewatch/util.hpp"

namespace slidewatch {

using nlohmann::json;

BenchTargetKind bench_target_from_string(const std::string& name) {
    if (name == "duplicate_filter") return BenchTargetKind::duplicate_filter;
    if (name == "junk_filter") return BenchTargetKind::junk_filter;
    if (name == "landslide_detector") return BenchTargetKind::landslide_detector;
    if (name == "geolocation_tagger") return BenchTargetKind::geolocation_tagger;
    if (name == "geolocation_tagger_nocache") return BenchTargetKind::geolocation_tagger_nocache;
    throw Error("unknown bench target '" + name + "'");
}

const char* to_string(BenchTargetKind k) {
    switch (k) {
    case BenchTargetKind::duplicate_filter: return "duplicate_filter";
    case BenchTargetKind::junk_filter: return "junk_filter";
    case BenchTargetKind::landslide_detector: return "landslide_detector";
    case BenchTargetKind::geolocation_tagger: return "geolocation_tagger";
    case BenchTargetKind::geolocation_tagger_nocache: return "geolocation_tagger_nocache";
    }
    return "junk_filter";
}

double LoadPoint::mean_latency() const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const BenchSample& s : samples) {
        if (!s.ok) continue;
        sum += s.latency_s;
        ++n;
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

double LoadPoint::std_latency() const {
    const double mean = mean_latency();
    double sum = 0.0;
    std::size_t n = 0;
    for (const BenchSample& s : samples) {
        if (!s.ok) continue;
        sum += (s.latency_s - mean) * (s.latency_s - mean);
        ++n;
    }
    return n == 0 ? 0.0 : std::sqrt(sum / static_cast<double>(n));
}

double LoadPoint::mean_throughput() const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const BenchSample& s : samples) {
        if (!s.ok || s.latency_s <= 0.0) continue;
        sum += static_cast<double>(load) / s.latency_s;
        ++n;
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

std::size_t LoadPoint::failed_count() const {
    std::size_t n = 0;
    for (const BenchSample& s : samples)
        if (!s.ok) ++n;
    return n;
}

std::vector<std::size_t> default_loads() {
    std::vector<std::size_t> loads;
    for (int n = 0; n <= 12; ++n) loads.push_back(std::size_t{1} << n);
    return loads;
}

std::vector<std::size_t> parse_loads(const std::string& spec) {
    // "2^a..2^b" exponent sweep, or a comma list of counts.
    if (spec.rfind("2^", 0) == 0) {
        const auto dots = spec.find("..");
        if (dots == std::string::npos || spec.compare(dots + 2, 2, "2^") != 0)
            throw Error("load spec must look like '2^0..2^12' or '1,2,4'");
        const int lo = std::stoi(spec.substr(2, dots - 2));
        const int hi = std::stoi(spec.substr(dots + 4));
        if (lo < 0 || hi < lo || hi > 30) throw Error("load exponents out of range");
        std::vector<std::size_t> loads;
        for (int n = lo; n <= hi; ++n) loads.push_back(std::size_t{1} << n);
        return loads;
    }
    std::vector<std::size_t> loads;
    std::stringstream ss(spec);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (part.empty()) continue;
        loads.push_back(static_cast<std::size_t>(std::stoull(part)));
    }
    if (loads.empty()) throw Error("empty load spec");
    return loads;
}

namespace {

std::chrono::milliseconds effective_timeout(const BenchOptions& options) {
    if (options.timeout.count() > 0) return options.timeout;
    if (const char* env = std::getenv("SLIDEWATCH_BENCH_TIMEOUT_MS")) {
        const long ms = std::strtol(env, nullptr, 10);
        if (ms > 0) return std::chrono::milliseconds(ms);
    }
    return std::chrono::milliseconds(60000);
}

// Submits one load through a queue into `workers` consumer threads running
// `process`, and waits for the last output (or the timeout). Burst mode
// enqueues everything at once; a positive rate paces the submission. The
// measuring thread only watches the completion latch.
template <typename In, typename Fn>
BenchSample run_burst(std::vector<In> items, std::size_t workers, Fn&& process,
                      std::chrono::milliseconds timeout, double rate_per_second = 0.0) {
    const std::size_t n = items.size();
    Queue<In> in("bench-in", std::max<std::size_t>(n, 16));

    std::atomic<std::size_t> done{0};
    std::mutex mu;
    std::condition_variable cv;

    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            while (auto item = in.pop_wait()) {
                process(*item);
                if (done.fetch_add(1) + 1 == n) {
                    std::lock_guard lock(mu);
                    cv.notify_all();
                }
            }
        });
    }

    BenchSample sample;
    const auto t0 = std::chrono::steady_clock::now();
    if (rate_per_second > 0.0) {
        const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(1.0 / rate_per_second));
        auto next = t0;
        for (In& item : items) {
            std::this_thread::sleep_until(next);
            in.push(std::move(item));
            next += interval;
        }
    } else {
        for (In& item : items) in.push(std::move(item));
    }
    {
        std::unique_lock lock(mu);
        sample.ok = cv.wait_for(lock, timeout, [&] { return done.load() >= n; });
    }
    const auto t1 = std::chrono::steady_clock::now();
    in.close();
    for (std::thread& t : threads) t.join();
    sample.latency_s = std::chrono::duration<double>(t1 - t0).count();
    return sample;
}

} // namespace

std::vector<ImageItem> bench_image_stream(std::size_t load, std::uint64_t seed,
                                          std::size_t repeat) {
    const std::uint64_t stream_seed = seed ^ (load * 0x9E3779B97F4A7C15ull) ^ (repeat + 1);
    std::vector<ImageItem> items;
    items.reserve(load);
    for (std::size_t i = 0; i < load; ++i) {
        ImageItem item;
        item.record.tweet_id = "bench";
        item.record.url =
            "http://bench.invalid/" + std::to_string(stream_seed) + "/" + std::to_string(i);
        std::string bytes;
        if (i % 8 == 7) {
            bytes = *items[i - 3].bytes; // planted byte-duplicate
        } else {
            std::uint64_t state = stream_seed ^ (i * 0x9E3779B97F4A7C15ull);
            bytes.resize(24);
            for (char& c : bytes) c = static_cast<char>(splitmix64(state) & 0xFF);
        }
        item.record.bytes_len = bytes.size();
        item.bytes = std::make_shared<const std::string>(std::move(bytes));
        items.push_back(std::move(item));
    }
    return items;
}

namespace {

void apply_item_cost(double cost_ms) {
    if (cost_ms > 0.0)
        std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(cost_ms));
}

// Geocoder decorator that charges a fixed delay per actual lookup, standing
// in for the remote service's latency.
class DelayingGeocoder : public Geocoder {
public:
    DelayingGeocoder(Geocoder& inner, double delay_ms) : inner_(inner), delay_ms_(delay_ms) {}

    std::vector<Place> forward(const std::string& query) override {
        apply_item_cost(delay_ms_);
        return inner_.forward(query);
    }

    std::optional<Place> reverse(double latitude, double longitude) override {
        apply_item_cost(delay_ms_);
        return inner_.reverse(latitude, longitude);
    }

private:
    Geocoder& inner_;
    double delay_ms_;
};

GazetteerGeocoder bench_gazetteer(std::size_t unique_keys) {
    std::vector<Place> rows;
    for (std::size_t i = 0; i < unique_keys; ++i) {
        Place p;
        p.name = "benchville " + std::to_string(i);
        p.kind = PlaceKind::city;
        p.country = "Benchland";
        p.state = "State " + std::to_string(i % 7);
        p.city = p.name;
        p.latitude = -60.0 + static_cast<double>(i % 120);
        p.longitude = -150.0 + static_cast<double>((i * 3) % 300);
        rows.push_back(std::move(p));
    }
    return GazetteerGeocoder(std::move(rows));
}

std::vector<Tweet> synth_geo_tweets(std::size_t n, std::size_t unique_keys,
                                    std::uint64_t stream_seed) {
    std::vector<Tweet> tweets;
    tweets.reserve(n);
    std::uint64_t state = stream_seed;
    for (std::size_t i = 0; i < n; ++i) {
        Tweet t;
        t.id = "bench-" + std::to_string(i);
        t.text = "report " + std::to_string(i);
        t.lang = "en";
        t.author_name = "bench";
        t.author_location =
            "benchville " + std::to_string(splitmix64(state) % std::max<std::size_t>(unique_keys, 1));
        tweets.push_back(std::move(t));
    }
    return tweets;
}

} // namespace

std::vector<LoadPoint> run_bench(const BenchTargetConfig& target, const BenchOptions& options) {
    const std::vector<std::size_t> loads = options.loads.empty() ? default_loads() : options.loads;
    const auto timeout = effective_timeout(options);
    const std::size_t repeats = std::max<std::size_t>(options.repeats, 1);

    std::vector<LoadPoint> points;

    auto point_for = [&](const std::string& name, std::size_t load) -> LoadPoint& {
        for (LoadPoint& p : points)
            if (p.target == name && p.load == load) return p;
        points.push_back(LoadPoint{name, load, {}});
        return points.back();
    };

    for (const std::size_t load : loads) {
        for (std::size_t repeat = 0; repeat < repeats; ++repeat) {
            const std::uint64_t stream_seed =
                options.seed ^ (load * 0x9E3779B97F4A7C15ull) ^ (repeat + 1);

            std::atomic<std::uint64_t> positives{0};

            switch (target.kind) {
            case BenchTargetKind::duplicate_filter: {
                // Fresh index per repeat, optionally pre-filled.
                StubFeatureExtractor extractor(target.feature_dim, target.feature_scale,
                                               options.seed);
                FeatureIndex index(target.feature_dim);
                std::uint64_t fill_state = options.seed ^ 0xABCDEFull;
                for (std::size_t i = 0; i < target.index_prefill; ++i) {
                    FeatureVector fv;
                    fv.values.resize(target.feature_dim);
                    for (float& v : fv.values)
                        v = static_cast<float>(splitmix_unit(fill_state) * target.feature_scale);
                    index.insert("prefill-" + std::to_string(i), fv);
                }
                BenchSample s = run_burst(
                    bench_image_stream(load, options.seed, repeat), 1,
                    [&](const ImageItem& item) {
                        const std::string id = image_content_id(item.record.url);
                        const FeatureVector fv = extractor.extract(*item.bytes, id);
                        const DuplicateVerdict v =
                            index.find_duplicate(fv, target.duplicate_threshold);
                        if (v.is_duplicate) positives.fetch_add(1);
                        else index.insert(id, fv);
                    },
                    timeout, options.rate_per_second);
                s.repeat = repeat;
                s.positive_outputs = positives.load();
                point_for("duplicate_filter", load).samples.push_back(s);
                break;
            }
            case BenchTargetKind::junk_filter:
            case BenchTargetKind::landslide_detector: {
                const bool is_junk = target.kind == BenchTargetKind::junk_filter;
                const TaskKind task = is_junk ? TaskKind::junk : TaskKind::landslide;
                auto extractor = std::make_shared<StubFeatureExtractor>(64, 1.0, options.seed);
                const StubClassifier model =
                    StubClassifier::seeded(task, extractor, options.seed + 7);
                BenchSample s = run_burst(
                    bench_image_stream(load, options.seed, repeat), 1,
                    [&](const ImageItem& item) {
                        apply_item_cost(target.item_cost_ms);
                        if (model.classify(item.record, *item.bytes).label == Label::positive)
                            positives.fetch_add(1);
                    },
                    timeout, options.rate_per_second);
                s.repeat = repeat;
                s.positive_outputs = positives.load();
                point_for(is_junk ? "junk_filter" : "landslide_detector", load)
                    .samples.push_back(s);
                break;
            }
            case BenchTargetKind::geolocation_tagger: {
                GazetteerGeocoder gazetteer = bench_gazetteer(target.unique_keys);
                DelayingGeocoder geocoder(gazetteer, target.geocode_delay_ms);
                DictionaryNerTagger ner;
                GeocodeCache geo_cache(target.cache_capacity);
                NerCache ner_cache(target.cache_capacity);
                auto worker = [&](const Tweet& t) {
                    if (geotag(t, geocoder, ner, geo_cache, ner_cache).source != GeoSource::none)
                        positives.fetch_add(1);
                };
                // Cold pass: empty cache. Warm pass: same keys, primed cache.
                BenchSample cold = run_burst(
                    synth_geo_tweets(load, target.unique_keys, stream_seed), 1, worker, timeout,
                    options.rate_per_second);
                cold.repeat = repeat;
                cold.positive_outputs = positives.exchange(0);
                point_for("geolocation_tagger_cold", load).samples.push_back(cold);
                BenchSample warm = run_burst(
                    synth_geo_tweets(load, target.unique_keys, stream_seed), 1, worker, timeout,
                    options.rate_per_second);
                warm.repeat = repeat;
                warm.positive_outputs = positives.load();
                point_for("geolocation_tagger_warm", load).samples.push_back(warm);
                break;
            }
            case BenchTargetKind::geolocation_tagger_nocache: {
                GazetteerGeocoder gazetteer = bench_gazetteer(target.unique_keys);
                DelayingGeocoder geocoder(gazetteer, target.geocode_delay_ms);
                DictionaryNerTagger ner;
                NerCache ner_cache(target.cache_capacity);
                BenchSample s = run_burst(
                    synth_geo_tweets(load, target.unique_keys, stream_seed), 1,
                    [&](const Tweet& t) {
                        GeocodeCache fresh(1); // every request pays the lookup
                        if (geotag(t, geocoder, ner, fresh, ner_cache).source != GeoSource::none)
                            positives.fetch_add(1);
                    },
                    timeout, options.rate_per_second);
                s.repeat = repeat;
                s.positive_outputs = positives.load();
                point_for("geolocation_tagger_nocache", load).samples.push_back(s);
                break;
            }
            }
        }
    }
    return points;
}

std::string bench_csv(std::span<const LoadPoint> points) {
    std::ostringstream out;
    out << "target,load,repeat,latency_s,throughput_ips,status\n";
    char buf[64];
    for (const LoadPoint& p : points) {
        for (const BenchSample& s : p.samples) {
            out << p.target << ',' << p.load << ',' << s.repeat << ',';
            if (s.ok) {
                std::snprintf(buf, sizeof buf, "%.9f", s.latency_s);
                out << buf << ',';
                std::snprintf(buf, sizeof buf, "%.9f",
                              s.latency_s > 0.0 ? static_cast<double>(p.load) / s.latency_s : 0.0);
                out << buf << ",ok\n";
            } else {
                out << ",,timeout\n";
            }
        }
    }
    return out.str();
}

std::string bench_json(std::span<const LoadPoint> points) {
    json doc = json::array();
    for (const LoadPoint& p : points) {
        doc.push_back(json{{"target", p.target},
                           {"load", p.load},
                           {"repeats", p.samples.size()},
                           {"failed", p.failed_count()},
                           {"mean_latency_s", p.mean_latency()},
                           {"std_latency_s", p.std_latency()},
                           {"mean_throughput_ips", p.mean_throughput()}});
    }
    return doc.dump(2);
}

void emit_report(std::span<const LoadPoint> points, const std::filesystem::path& out_dir) {
    if (points.empty()) throw Error("emit_report needs at least one load point");
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream csv(out_dir / "bench.csv", std::ios::trunc);
        if (!csv) throw IoError("cannot write bench.csv under " + out_dir.string());
        csv << bench_csv(points);
    }
    {
        std::ofstream js(out_dir / "bench.json", std::ios::trunc);
        if (!js) throw IoError("cannot write bench.json under " + out_dir.string());
        js << bench_json(points) << '\n';
    }
}

} // namespace slidewatch
