#include "slidewatch/geo_text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "slidewatch/util.hpp"

namespace slidewatch {

// ---------------------------------------------------------------------------
// Dictionary NER
// ---------------------------------------------------------------------------

namespace {

struct Token {
    std::string folded;
    std::size_t begin = 0; // byte offsets into the original text
    std::size_t end = 0;
};

bool is_token_byte(unsigned char c) {
    // ASCII letters/digits; any non-ASCII byte is treated as word material so
    // accented and non-Latin scripts stay inside tokens.
    return std::isalnum(c) != 0 || c >= 0x80;
}

std::vector<Token> tokenize(const std::string& text) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_token_byte(static_cast<unsigned char>(text[i]))) {
            ++i;
            continue;
        }
        const std::size_t start = i;
        while (i < text.size() && is_token_byte(static_cast<unsigned char>(text[i]))) ++i;
        tokens.push_back(Token{fold_case_utf8({text.data() + start, i - start}), start, i});
    }
    return tokens;
}

std::string join_tokens(const std::vector<Token>& tokens, std::size_t first, std::size_t count) {
    std::string key;
    for (std::size_t k = 0; k < count; ++k) {
        if (k) key.push_back(' ');
        key += tokens[first + k].folded;
    }
    return key;
}

std::string phrase_key(const std::string& phrase) {
    const auto tokens = tokenize(phrase);
    return join_tokens(tokens, 0, tokens.size());
}

} // namespace

DictionaryNerTagger DictionaryNerTagger::load_dir(const std::filesystem::path& dir) {
    DictionaryNerTagger tagger;
    if (!std::filesystem::is_directory(dir))
        throw IoError("NER dictionary directory not found: " + dir.string());
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".tsv") continue;
        const std::string lang = entry.path().stem().string();
        std::ifstream in(entry.path());
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            const auto tab = line.find('\t');
            if (tab == std::string::npos) continue;
            std::string kind = line.substr(tab + 1);
            if (!kind.empty() && kind.back() == '\r') kind.pop_back();
            tagger.add_phrase(lang, line.substr(0, tab), entity_kind_from_string(kind));
        }
    }
    return tagger;
}

void DictionaryNerTagger::add_phrase(const std::string& lang, const std::string& phrase,
                                     EntityKind kind) {
    const std::string key = phrase_key(phrase);
    if (key.empty()) return;
    const auto tokens = static_cast<std::size_t>(std::count(key.begin(), key.end(), ' ')) + 1;
    Dict& dict = lang == "ml" ? fallback_ : dicts_[lang];
    if (lang == "ml") explicit_fallback_ = true;
    dict.phrases[key] = kind;
    dict.max_tokens = std::max(dict.max_tokens, tokens);
    if (lang != "ml" && !explicit_fallback_) {
        // keep the implicit fallback (union of all languages) in sync
        fallback_.phrases[key] = kind;
        fallback_.max_tokens = std::max(fallback_.max_tokens, tokens);
    }
}

std::string DictionaryNerTagger::route(const std::string& lang) const {
    std::string primary = lang.substr(0, lang.find('-'));
    for (char& c : primary)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    static const char* routed[] = {"en", "fr", "es", "pt", "it"};
    for (const char* r : routed) {
        if (primary == r && dicts_.contains(primary)) return primary;
    }
    return "ml";
}

const DictionaryNerTagger::Dict* DictionaryNerTagger::dict_for(const std::string& lang) const {
    const std::string r = route(lang);
    if (r == "ml") return &fallback_;
    return &dicts_.at(r);
}

std::vector<NamedEntity> DictionaryNerTagger::tag(const std::string& text,
                                                  const std::string& lang) const {
    const Dict* dict = dict_for(lang);
    std::vector<NamedEntity> entities;
    if (dict->phrases.empty()) return entities;

    const auto tokens = tokenize(text);
    std::size_t i = 0;
    while (i < tokens.size()) {
        const std::size_t longest = std::min(dict->max_tokens, tokens.size() - i);
        bool matched = false;
        for (std::size_t len = longest; len >= 1; --len) {
            const auto it = dict->phrases.find(join_tokens(tokens, i, len));
            if (it == dict->phrases.end()) continue;
            NamedEntity e;
            e.begin = tokens[i].begin;
            e.end = tokens[i + len - 1].end;
            e.text = text.substr(e.begin, e.end - e.begin);
            e.kind = it->second;
            entities.push_back(std::move(e));
            i += len;
            matched = true;
            break;
        }
        if (!matched) ++i;
    }
    return entities;
}

std::vector<NamedEntity> ner_tag(const NerTagger& tagger, const std::string& text,
                                 const std::string& lang, NerCache& cache) {
    const auto* dict_tagger = dynamic_cast<const DictionaryNerTagger*>(&tagger);
    const std::string routed = dict_tagger ? dict_tagger->route(lang) : lang;
    const std::string key = routed + "\x1f" + fold_case_utf8(text);
    auto [entities, hit] =
        cache.get_or_compute(key, [&] { return tagger.tag(text, lang); });
    (void)hit;
    return entities;
}

// ---------------------------------------------------------------------------
// Geocoding
// ---------------------------------------------------------------------------

PlaceKind place_kind_from_string(const std::string& s) {
    if (s == "country") return PlaceKind::country;
    if (s == "state") return PlaceKind::state;
    if (s == "county") return PlaceKind::county;
    return PlaceKind::city;
}

const char* to_string(PlaceKind k) {
    switch (k) {
    case PlaceKind::country: return "country";
    case PlaceKind::state: return "state";
    case PlaceKind::county: return "county";
    case PlaceKind::city: return "city";
    }
    return "city";
}

GazetteerGeocoder::GazetteerGeocoder(std::vector<Place> rows, double max_degrees)
    : rows_(std::move(rows)), max_degrees_(max_degrees) {
    for (std::size_t i = 0; i < rows_.size(); ++i)
        by_name_[normalize_query(rows_[i].name)].push_back(i);
}

GazetteerGeocoder GazetteerGeocoder::load(const std::filesystem::path& csv, double max_degrees) {
    std::ifstream in(csv);
    if (!in) throw IoError("cannot open gazetteer " + csv.string());
    std::vector<Place> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r" || line[0] == '#') continue;
        const auto f = split_csv_line(line);
        if (f.size() != 8)
            throw Error("gazetteer line " + std::to_string(lineno) +
                        " must be 'name,kind,country,state,county,city,lat,lon'");
        if (lineno == 1 && f[0] == "name") continue;
        Place p;
        p.name = f[0];
        p.kind = place_kind_from_string(f[1]);
        p.country = f[2];
        p.state = f[3];
        p.county = f[4];
        p.city = f[5];
        try {
            p.latitude = std::stod(f[6]);
            p.longitude = std::stod(f[7]);
        } catch (const std::exception&) {
            throw Error("bad coordinates on gazetteer line " + std::to_string(lineno));
        }
        if (p.latitude < -90.0 || p.latitude > 90.0 || p.longitude < -180.0 ||
            p.longitude > 180.0)
            throw Error("gazetteer coordinates out of range on line " + std::to_string(lineno));
        rows.push_back(std::move(p));
    }
    return GazetteerGeocoder(std::move(rows), max_degrees);
}

std::vector<Place> GazetteerGeocoder::forward(const std::string& query) {
    std::vector<Place> out;
    const auto it = by_name_.find(normalize_query(query));
    if (it == by_name_.end()) return out;
    for (const std::size_t i : it->second) out.push_back(rows_[i]);
    // Most specific kind wins for homonym names: city, county, state, country.
    std::stable_sort(out.begin(), out.end(), [](const Place& a, const Place& b) {
        return static_cast<int>(a.kind) > static_cast<int>(b.kind);
    });
    return out;
}

std::optional<Place> GazetteerGeocoder::reverse(double latitude, double longitude) {
    const Place* best = nullptr;
    double best_sq = max_degrees_ * max_degrees_;
    for (const Place& p : rows_) {
        const double dlat = p.latitude - latitude;
        const double dlon = p.longitude - longitude;
        const double sq = dlat * dlat + dlon * dlon;
        if (sq <= best_sq && (best == nullptr || sq < best_sq)) {
            best = &p;
            best_sq = sq;
        }
    }
    if (best == nullptr) return std::nullopt;
    return *best;
}

RemoteGeocoder::RemoteGeocoder(std::string host, int port, double requests_per_second)
    : host_(std::move(host)), port_(port),
      min_interval_(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
          std::chrono::duration<double>(requests_per_second <= 0.0
                                            ? 0.0
                                            : 1.0 / requests_per_second))),
      next_slot_(std::chrono::steady_clock::now()) {}

void RemoteGeocoder::rate_limit() {
    std::chrono::steady_clock::time_point slot;
    {
        std::lock_guard lock(mu_);
        const auto now = std::chrono::steady_clock::now();
        slot = std::max(next_slot_, now);
        next_slot_ = slot + min_interval_;
    }
    std::this_thread::sleep_until(slot);
}

std::string RemoteGeocoder::get_body(const std::string& path) {
    rate_limit();
    httplib::Client client(host_, port_);
    const auto res = client.Get(path);
    if (!res || res->status != 200)
        throw IoError("remote geocoder request failed: " + path);
    return res->body;
}

namespace {

std::vector<Place> places_from_json(const std::string& body) {
    std::vector<Place> out;
    const auto doc = nlohmann::json::parse(body);
    for (const auto& item : doc) {
        Place p;
        p.name = item.value("name", "");
        p.kind = place_kind_from_string(item.value("kind", "city"));
        p.country = item.value("country", "");
        p.state = item.value("state", "");
        p.county = item.value("county", "");
        p.city = item.value("city", "");
        p.latitude = item.value("lat", 0.0);
        p.longitude = item.value("lon", 0.0);
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace

namespace {

std::string url_encode(const std::string& s) {
    static const char* hex = "0123456789ABCDEF";
    std::string out;
    for (const char c : s) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u) || c == '-' || c == '_' || c == '.' || c == '~') {
            out.push_back(c);
        } else {
            out.push_back('%');
            out.push_back(hex[u >> 4]);
            out.push_back(hex[u & 0xF]);
        }
    }
    return out;
}

} // namespace

std::vector<Place> RemoteGeocoder::forward(const std::string& query) {
    return places_from_json(get_body("/search?q=" + url_encode(query)));
}

std::optional<Place> RemoteGeocoder::reverse(double latitude, double longitude) {
    std::ostringstream path;
    path << "/reverse?lat=" << latitude << "&lon=" << longitude;
    const auto places = places_from_json(get_body(path.str()));
    if (places.empty()) return std::nullopt;
    return places.front();
}

// ---------------------------------------------------------------------------
// Cached lookups and the cascade
// ---------------------------------------------------------------------------

namespace {

std::string round4(double v) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(4);
    out << v;
    return out.str();
}

} // namespace

std::optional<Place> cached_forward(Geocoder& g, GeocodeCache& cache, const std::string& query) {
    const std::string key = "fwd:" + normalize_query(query);
    auto [place, hit] = cache.get_or_compute(key, [&]() -> std::optional<Place> {
        auto candidates = g.forward(query);
        if (candidates.empty()) return std::nullopt;
        return candidates.front();
    });
    (void)hit;
    return place;
}

std::optional<Place> cached_reverse(Geocoder& g, GeocodeCache& cache, double latitude,
                                    double longitude) {
    const std::string key = "rev:" + round4(latitude) + "," + round4(longitude);
    auto [place, hit] =
        cache.get_or_compute(key, [&] { return g.reverse(latitude, longitude); });
    (void)hit;
    return place;
}

namespace {

std::optional<GeoTag> tag_from_place(const std::optional<Place>& place, GeoSource source) {
    if (!place || place->country.empty()) return std::nullopt; // a level wins with a country
    GeoTag tag;
    tag.country = place->country;
    if (!place->state.empty()) tag.state = place->state;
    if (!place->county.empty()) tag.county = place->county;
    if (!place->city.empty()) tag.city = place->city;
    tag.source = source;
    return tag;
}

// One cascade level; geocoder failures count as no result so the cascade
// continues.
std::optional<GeoTag> try_forward(Geocoder& g, GeocodeCache& cache, const std::string& query,
                                  GeoSource source) {
    if (collapse_whitespace(query).empty()) return std::nullopt;
    try {
        return tag_from_place(cached_forward(g, cache, query), source);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

std::optional<GeoTag> try_entities(Geocoder& g, const NerTagger& ner, GeocodeCache& geo_cache,
                                   NerCache& ner_cache, const std::string& text,
                                   const std::string& lang, GeoSource source) {
    if (text.empty()) return std::nullopt;
    std::vector<NamedEntity> entities;
    try {
        entities = ner_tag(ner, text, lang, ner_cache);
    } catch (const std::exception&) {
        return std::nullopt;
    }
    for (const NamedEntity& e : entities) {
        if (e.kind != EntityKind::location) continue;
        if (auto tag = try_forward(g, geo_cache, e.text, source)) return tag;
    }
    return std::nullopt;
}

} // namespace

GeoTag geotag(const Tweet& t, Geocoder& geocoder, const NerTagger& ner, GeocodeCache& geo_cache,
              NerCache& ner_cache) {
    // 1. GPS coordinates
    if (t.gps) {
        try {
            const auto place =
                cached_reverse(geocoder, geo_cache, t.gps->latitude, t.gps->longitude);
            if (auto tag = tag_from_place(place, GeoSource::gps)) return *tag;
        } catch (const std::exception&) {
            // fall through to the next source
        }
    }
    // 2. Location names mentioned in the text
    if (auto tag = try_entities(geocoder, ner, geo_cache, ner_cache, t.text, t.lang,
                                GeoSource::text))
        return *tag;
    // 3. Tagged place
    if (t.place_name) {
        if (auto tag = try_forward(geocoder, geo_cache, *t.place_name, GeoSource::place))
            return *tag;
    }
    // 4. Author profile location
    if (t.author_location) {
        if (auto tag =
                try_forward(geocoder, geo_cache, *t.author_location, GeoSource::user_location))
            return *tag;
    }
    // 5. Location names in the profile description
    if (t.author_description) {
        if (auto tag = try_entities(geocoder, ner, geo_cache, ner_cache, *t.author_description,
                                    t.lang, GeoSource::profile_description))
            return *tag;
    }
    return GeoTag{};
}

UserKind classify_user_type(const std::string& author_name, const NerTagger& ner) {
    if (author_name.empty()) return UserKind::organization;
    const std::size_t total = count_nonspace_codepoints(author_name);
    if (total == 0) return UserKind::organization;
    for (const NamedEntity& e : ner.tag(author_name, "en")) {
        if (e.kind != EntityKind::person) continue;
        const std::size_t covered = count_nonspace_codepoints(e.text);
        if (2 * covered >= total) return UserKind::person;
    }
    return UserKind::organization;
}

} // namespace slidewatch
