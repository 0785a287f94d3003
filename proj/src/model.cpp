#include "slidewatch/model.hpp"

#include "slidewatch/errors.hpp"

namespace slidewatch {

using nlohmann::json;

const char* to_string(GeoSource s) {
    switch (s) {
    case GeoSource::gps: return "gps";
    case GeoSource::text: return "text";
    case GeoSource::place: return "place";
    case GeoSource::user_location: return "user_location";
    case GeoSource::profile_description: return "profile_description";
    case GeoSource::none: return "none";
    }
    return "none";
}

const char* to_string(UserKind k) {
    return k == UserKind::person ? "person" : "organization";
}

const char* to_string(EntityKind k) {
    switch (k) {
    case EntityKind::person: return "PERSON";
    case EntityKind::location: return "LOCATION";
    case EntityKind::organization: return "ORGANIZATION";
    case EntityKind::other: return "OTHER";
    }
    return "OTHER";
}

EntityKind entity_kind_from_string(const std::string& s) {
    if (s == "PERSON") return EntityKind::person;
    if (s == "LOCATION") return EntityKind::location;
    if (s == "ORGANIZATION") return EntityKind::organization;
    return EntityKind::other;
}

namespace {

GeoSource geo_source_from_string(const std::string& s) {
    if (s == "gps") return GeoSource::gps;
    if (s == "text") return GeoSource::text;
    if (s == "place") return GeoSource::place;
    if (s == "user_location") return GeoSource::user_location;
    if (s == "profile_description") return GeoSource::profile_description;
    return GeoSource::none;
}

std::string id_to_string(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
    throw SchemaError("post id must be a string or integer", "id");
}

} // namespace

Tweet parse_tweet(const std::string& raw) {
    json doc;
    try {
        doc = json::parse(raw);
    } catch (const json::parse_error& e) {
        throw ParseError(e.what(), e.byte);
    }
    if (!doc.is_object()) throw SchemaError("post document must be a JSON object", "");

    Tweet t;
    if (!doc.contains("id")) throw SchemaError("missing post id", "id");
    t.id = id_to_string(doc["id"]);
    if (t.id.empty()) throw SchemaError("post id must be non-empty", "id");

    if (!doc.contains("text") || !doc["text"].is_string())
        throw SchemaError("missing post text", "text");
    t.text = doc["text"].get<std::string>();

    if (doc.contains("lang") && doc["lang"].is_string()) t.lang = doc["lang"].get<std::string>();
    if (doc.contains("created_at") && doc["created_at"].is_number())
        t.created_at_ms = doc["created_at"].get<std::int64_t>();

    if (doc.contains("coordinates") && !doc["coordinates"].is_null()) {
        const json& c = doc["coordinates"];
        if (!c.is_array() || c.size() != 2 || !c[0].is_number() || !c[1].is_number())
            throw SchemaError("coordinates must be [latitude, longitude]", "coordinates");
        GeoPoint p{c[0].get<double>(), c[1].get<double>()};
        if (p.latitude < -90.0 || p.latitude > 90.0 || p.longitude < -180.0 || p.longitude > 180.0)
            throw SchemaError("coordinates out of range", "coordinates");
        t.gps = p;
    }

    if (doc.contains("place") && doc["place"].is_object()) {
        const json& p = doc["place"];
        if (p.contains("full_name") && p["full_name"].is_string())
            t.place_name = p["full_name"].get<std::string>();
    }

    if (doc.contains("user") && doc["user"].is_object()) {
        const json& u = doc["user"];
        if (u.contains("name") && u["name"].is_string())
            t.author_name = u["name"].get<std::string>();
        if (u.contains("location") && u["location"].is_string())
            t.author_location = u["location"].get<std::string>();
        if (u.contains("description") && u["description"].is_string())
            t.author_description = u["description"].get<std::string>();
    }

    if (doc.contains("entities") && doc["entities"].is_object()) {
        const json& e = doc["entities"];
        if (e.contains("media") && e["media"].is_array()) {
            for (const json& m : e["media"]) {
                if (!m.is_object() || !m.contains("media_url") || !m["media_url"].is_string())
                    throw SchemaError("media entry must carry media_url", "entities.media.media_url");
                std::string url = m["media_url"].get<std::string>();
                if (url.empty())
                    throw SchemaError("media_url must be non-empty", "entities.media.media_url");
                t.image_urls.push_back(std::move(url));
            }
        }
    }
    return t;
}

std::string serialize_tweet(const Tweet& t) {
    return tweet_to_json(t).dump();
}

nlohmann::json tweet_to_json(const Tweet& t) {
    json doc;
    doc["id"] = t.id;
    doc["text"] = t.text;
    doc["lang"] = t.lang;
    doc["created_at"] = t.created_at_ms;
    if (t.gps) doc["coordinates"] = json::array({t.gps->latitude, t.gps->longitude});
    if (t.place_name) doc["place"] = json{{"full_name", *t.place_name}};
    json user;
    user["name"] = t.author_name;
    if (t.author_location) user["location"] = *t.author_location;
    if (t.author_description) user["description"] = *t.author_description;
    doc["user"] = std::move(user);
    if (!t.image_urls.empty()) {
        json media = json::array();
        for (const std::string& u : t.image_urls) media.push_back(json{{"media_url", u}});
        doc["entities"] = json{{"media", std::move(media)}};
    }
    return doc;
}

Tweet tweet_from_json(const nlohmann::json& j) {
    return parse_tweet(j.dump());
}

std::vector<ImageRef> extract_image_refs(const Tweet& t) {
    std::vector<ImageRef> refs;
    refs.reserve(t.image_urls.size());
    for (const std::string& url : t.image_urls) refs.push_back(ImageRef{t.id, url});
    return refs;
}

nlohmann::json classification_to_json(const Classification& c) {
    return json{{"label", c.label == Label::positive ? "positive" : "negative"},
                {"confidence", c.confidence}};
}

nlohmann::json geotag_to_json(const GeoTag& g) {
    json j;
    if (g.country) j["country"] = *g.country;
    if (g.state) j["state"] = *g.state;
    if (g.county) j["county"] = *g.county;
    if (g.city) j["city"] = *g.city;
    j["source"] = to_string(g.source);
    return j;
}

namespace {

Classification classification_from_json(const json& j) {
    Classification c;
    c.label = j.at("label").get<std::string>() == "positive" ? Label::positive : Label::negative;
    c.confidence = j.at("confidence").get<double>();
    return c;
}

GeoTag geotag_from_json(const json& j) {
    GeoTag g;
    if (j.contains("country")) g.country = j["country"].get<std::string>();
    if (j.contains("state")) g.state = j["state"].get<std::string>();
    if (j.contains("county")) g.county = j["county"].get<std::string>();
    if (j.contains("city")) g.city = j["city"].get<std::string>();
    g.source = geo_source_from_string(j.at("source").get<std::string>());
    return g;
}

} // namespace

nlohmann::json record_to_json(const ImageRecord& r) {
    json j;
    j["tweet_id"] = r.tweet_id;
    j["url"] = r.url;
    j["local_path"] = r.local_path;
    j["bytes_len"] = r.bytes_len;
    if (r.duplicate) {
        json d;
        d["is_duplicate"] = r.duplicate->is_duplicate;
        if (r.duplicate->ref_id) d["ref_id"] = *r.duplicate->ref_id;
        if (r.duplicate->distance) d["distance"] = *r.duplicate->distance;
        j["duplicate"] = std::move(d);
    }
    if (r.junk) j["junk"] = classification_to_json(*r.junk);
    if (r.landslide) j["landslide"] = classification_to_json(*r.landslide);
    if (r.geo) j["geo"] = geotag_to_json(*r.geo);
    if (r.user_type) j["user_type"] = to_string(*r.user_type);
    return j;
}

ImageRecord record_from_json(const nlohmann::json& j) {
    ImageRecord r;
    r.tweet_id = j.at("tweet_id").get<std::string>();
    r.url = j.at("url").get<std::string>();
    r.local_path = j.at("local_path").get<std::string>();
    r.bytes_len = j.at("bytes_len").get<std::uint64_t>();
    if (j.contains("duplicate")) {
        const json& d = j["duplicate"];
        DuplicateVerdict v;
        v.is_duplicate = d.at("is_duplicate").get<bool>();
        if (d.contains("ref_id")) v.ref_id = d["ref_id"].get<std::string>();
        if (d.contains("distance")) v.distance = d["distance"].get<double>();
        r.duplicate = std::move(v);
    }
    if (j.contains("junk")) r.junk = classification_from_json(j["junk"]);
    if (j.contains("landslide")) r.landslide = classification_from_json(j["landslide"]);
    if (j.contains("geo")) r.geo = geotag_from_json(j["geo"]);
    if (j.contains("user_type"))
        r.user_type = j["user_type"].get<std::string>() == "person" ? UserKind::person
                                                                    : UserKind::organization;
    return r;
}

} // namespace slidewatch
