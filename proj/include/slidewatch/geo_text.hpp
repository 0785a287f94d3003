#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "slidewatch/errors.hpp"
#include "slidewatch/model.hpp"

namespace slidewatch {

// Tweet-side analysis: dictionary NER with per-language routing, the
// geolocation priority cascade (gps > text > place > user location > profile
// description), user-type identification, and the LRU caches that make
// recurring geocode/NER requests cheap.

// ---------------------------------------------------------------------------
// LRU cache
// ---------------------------------------------------------------------------

/// Thread-safe LRU cache. get_or_compute runs the producer at most once per
/// key per miss window: concurrent misses on the same key wait for the first
/// producer instead of recomputing.
template <typename K, typename V>
class LruCache {
public:
    explicit LruCache(std::size_t capacity) : capacity_(capacity == 0 ? 1 : capacity) {}

    std::optional<V> get(const K& key) {
        std::lock_guard lock(mu_);
        const auto it = slots_.find(key);
        if (it == slots_.end()) {
            ++misses_;
            return std::nullopt;
        }
        touch(it);
        ++hits_;
        return it->second.value;
    }

    void put(const K& key, V value) {
        std::lock_guard lock(mu_);
        store(key, std::move(value));
    }

    /// Returns (value, hit). The producer's exception propagates and nothing
    /// is cached for the key.
    template <typename F>
    std::pair<V, bool> get_or_compute(const K& key, F&& producer) {
        std::shared_ptr<Pending> pending;
        {
            std::unique_lock lock(mu_);
            for (;;) {
                const auto it = slots_.find(key);
                if (it != slots_.end()) {
                    touch(it);
                    ++hits_;
                    return {it->second.value, true};
                }
                const auto pit = pending_.find(key);
                if (pit == pending_.end()) break;
                // Someone else is computing this key; wait for the outcome.
                auto p = pit->second;
                p->cv.wait(lock, [&] { return p->done; });
                if (p->ok) {
                    ++hits_;
                    return {p->value, true};
                }
                // The producer failed; retry as a fresh miss.
            }
            ++misses_;
            pending = std::make_shared<Pending>();
            pending_.emplace(key, pending);
        }

        try {
            V value = producer();
            std::lock_guard lock(mu_);
            store(key, value);
            pending->value = std::move(value);
            pending->ok = true;
            pending->done = true;
            pending_.erase(key);
            pending->cv.notify_all();
            return {pending->value, false};
        } catch (...) {
            std::lock_guard lock(mu_);
            pending->ok = false;
            pending->done = true;
            pending_.erase(key);
            pending->cv.notify_all();
            throw;
        }
    }

    std::size_t size() const {
        std::lock_guard lock(mu_);
        return slots_.size();
    }

    std::size_t capacity() const { return capacity_; }

    std::uint64_t hits() const {
        std::lock_guard lock(mu_);
        return hits_;
    }

    std::uint64_t misses() const {
        std::lock_guard lock(mu_);
        return misses_;
    }

    void clear() {
        std::lock_guard lock(mu_);
        slots_.clear();
        order_.clear();
    }

private:
    struct Slot {
        V value;
        typename std::list<K>::iterator pos;
    };

    struct Pending {
        std::condition_variable_any cv;
        V value{};
        bool done = false;
        bool ok = false;
    };

    using SlotMap = std::unordered_map<K, Slot>;

    void touch(typename SlotMap::iterator it) {
        order_.splice(order_.begin(), order_, it->second.pos);
    }

    void store(const K& key, V value) {
        const auto it = slots_.find(key);
        if (it != slots_.end()) {
            it->second.value = std::move(value);
            touch(it);
            return;
        }
        if (slots_.size() >= capacity_) {
            slots_.erase(order_.back());
            order_.pop_back();
        }
        order_.push_front(key);
        slots_.emplace(key, Slot{std::move(value), order_.begin()});
    }

    mutable std::mutex mu_;
    std::size_t capacity_;
    SlotMap slots_;
    std::list<K> order_; // front = most recent
    std::unordered_map<K, std::shared_ptr<Pending>> pending_;
    std::uint64_t hits_ = 0;
    std::uint64_t misses_ = 0;
};

// ---------------------------------------------------------------------------
// Named-entity recognition
// ---------------------------------------------------------------------------

class NerTagger {
public:
    virtual ~NerTagger() = default;

    /// Deterministic per (text, lang). Unknown languages fall back to the
    /// multilingual dictionary.
    virtual std::vector<NamedEntity> tag(const std::string& text,
                                         const std::string& lang) const = 0;
};

/// Dictionary/gazetteer tagger. One phrase list per routed language
/// ({en, fr, es, pt, it}) plus a multilingual fallback ("ml"); matching is
/// case-folded, longest-phrase-first, on token boundaries. Spans are byte
/// offsets into the original text.
class DictionaryNerTagger : public NerTagger {
public:
    DictionaryNerTagger() = default;

    /// Loads `<lang>.tsv` files (lines `phrase<TAB>KIND`) from a directory.
    /// If no ml.tsv exists the fallback is the union of all loaded lists.
    static DictionaryNerTagger load_dir(const std::filesystem::path& dir);

    void add_phrase(const std::string& lang, const std::string& phrase, EntityKind kind);

    std::vector<NamedEntity> tag(const std::string& text, const std::string& lang) const override;

    /// The dictionary actually used for `lang` ("en", ... or "ml").
    std::string route(const std::string& lang) const;

private:
    struct Dict {
        std::unordered_map<std::string, EntityKind> phrases; // folded, space-joined tokens
        std::size_t max_tokens = 1;
    };

    const Dict* dict_for(const std::string& lang) const;

    std::map<std::string, Dict> dicts_;
    Dict fallback_;
    bool explicit_fallback_ = false;
};

using NerCache = LruCache<std::string, std::vector<NamedEntity>>;

/// Routed + cached tagging; the cache key is (dictionary, folded text).
std::vector<NamedEntity> ner_tag(const NerTagger& tagger, const std::string& text,
                                 const std::string& lang, NerCache& cache);

// ---------------------------------------------------------------------------
// Geocoding
// ---------------------------------------------------------------------------

enum class PlaceKind { country, state, county, city };

PlaceKind place_kind_from_string(const std::string& s);
const char* to_string(PlaceKind k);

struct Place {
    std::string name;
    PlaceKind kind = PlaceKind::city;
    std::string country;
    std::string state;
    std::string county;
    std::string city;
    double latitude = 0.0;
    double longitude = 0.0;

    bool operator==(const Place&) const = default;
};

class Geocoder {
public:
    virtual ~Geocoder() = default;

    /// Candidates for a place name, best first.
    virtual std::vector<Place> forward(const std::string& query) = 0;

    /// Enclosing place for coordinates, if any.
    virtual std::optional<Place> reverse(double latitude, double longitude) = 0;
};

/// Offline geocoder over a CSV gazetteer
/// (`name,kind,country,state,county,city,lat,lon`). Homonyms resolve most
/// specific kind first: city, then county, state, country. Reverse picks the
/// nearest row within `max_degrees`.
class GazetteerGeocoder : public Geocoder {
public:
    explicit GazetteerGeocoder(std::vector<Place> rows, double max_degrees = 5.0);

    static GazetteerGeocoder load(const std::filesystem::path& csv, double max_degrees = 5.0);

    std::vector<Place> forward(const std::string& query) override;
    std::optional<Place> reverse(double latitude, double longitude) override;

    std::size_t size() const { return rows_.size(); }

private:
    std::vector<Place> rows_;
    std::unordered_map<std::string, std::vector<std::size_t>> by_name_;
    double max_degrees_;
};

/// Remote geocoding client behind the same interface, with a polite request
/// rate limit (default 1 req/s). Expects JSON arrays of place objects from
/// GET <base>/search?q=... and <base>/reverse?lat=...&lon=...
class RemoteGeocoder : public Geocoder {
public:
    RemoteGeocoder(std::string host, int port, double requests_per_second = 1.0);

    std::vector<Place> forward(const std::string& query) override;
    std::optional<Place> reverse(double latitude, double longitude) override;

private:
    void rate_limit();
    std::string get_body(const std::string& path);

    std::string host_;
    int port_;
    std::chrono::steady_clock::duration min_interval_;
    std::chrono::steady_clock::time_point next_slot_;
    std::mutex mu_;
};

using GeocodeCache = LruCache<std::string, std::optional<Place>>;

/// Forward geocode through the cache; definitive no-results are cached,
/// geocoder exceptions are not.
std::optional<Place> cached_forward(Geocoder& g, GeocodeCache& cache, const std::string& query);

/// Reverse geocode through the cache; the key rounds coordinates to 4
/// decimals (~11 m).
std::optional<Place> cached_reverse(Geocoder& g, GeocodeCache& cache, double latitude,
                                    double longitude);

// ---------------------------------------------------------------------------
// Geolocation cascade and user typing
// ---------------------------------------------------------------------------

/// Resolves the tweet's location from the highest-priority source that yields
/// at least a country: gps, then LOCATION entities in the text, the tagged
/// place, the author's profile location, and finally LOCATION entities in the
/// profile description. Cache state never changes the result, only its cost.
GeoTag geotag(const Tweet& t, Geocoder& geocoder, const NerTagger& ner, GeocodeCache& geo_cache,
              NerCache& ner_cache);

/// Person iff one PERSON entity of the English tagger covers at least half of
/// the name's non-space characters; empty names are organizations.
UserKind classify_user_type(const std::string& author_name, const NerTagger& ner);

} // namespace slidewatch
