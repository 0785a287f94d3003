#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace slidewatch {

// ---------------------------------------------------------------------------
// Domain types flowing through the pipeline.
//
// All of them are immutable-by-convention value objects: construct, then send
// across queues. Posts enter as newline-delimited JSON documents with this
// fixture schema (a subset of the classic v1.1 post schema):
//
//   {
//     "id": "123",                     // string or integer, required
//     "text": "...",                   // required
//     "lang": "en",                    // optional, default "und"
//     "created_at": 1700000000000,     // optional, UTC milliseconds
//     "coordinates": [lat, lon],       // optional, [latitude, longitude]
//     "place": {"full_name": "..."},
//     "user": {"name": "...", "location": "...", "description": "..."},
//     "entities": {"media": [{"media_url": "http://..."}]}
//   }
// ---------------------------------------------------------------------------

struct GeoPoint {
    double latitude = 0.0;  // degrees, [-90, 90]
    double longitude = 0.0; // degrees, [-180, 180]

    bool operator==(const GeoPoint&) const = default;
};

struct Tweet {
    std::string id;
    std::string text;
    std::string lang = "und";
    std::int64_t created_at_ms = 0;
    std::optional<GeoPoint> gps;
    std::optional<std::string> place_name;
    std::string author_name;
    std::optional<std::string> author_location;
    std::optional<std::string> author_description;
    std::vector<std::string> image_urls;

    bool operator==(const Tweet&) const = default;
};

struct ImageRef {
    std::string tweet_id;
    std::string url;

    bool operator==(const ImageRef&) const = default;
};

enum class Label { negative = 0, positive = 1 };

struct Classification {
    Label label = Label::negative;
    double confidence = 0.0; // probability of the positive class, [0, 1]

    bool operator==(const Classification&) const = default;
};

struct DuplicateVerdict {
    bool is_duplicate = false;
    std::optional<std::string> ref_id; // reference image id when duplicate
    std::optional<double> distance;    // distance to the reference

    bool operator==(const DuplicateVerdict&) const = default;
};

enum class GeoSource { gps, text, place, user_location, profile_description, none };

const char* to_string(GeoSource s);

struct GeoTag {
    std::optional<std::string> country;
    std::optional<std::string> state;
    std::optional<std::string> county;
    std::optional<std::string> city;
    GeoSource source = GeoSource::none;

    bool operator==(const GeoTag&) const = default;
};

enum class UserKind { person, organization };

const char* to_string(UserKind k);

enum class EntityKind { person, location, organization, other };

const char* to_string(EntityKind k);
EntityKind entity_kind_from_string(const std::string& s);

struct NamedEntity {
    std::string text;
    EntityKind kind = EntityKind::other;
    std::size_t begin = 0; // byte offsets into the tagged text
    std::size_t end = 0;

    bool operator==(const NamedEntity&) const = default;
};

/// One fetched image plus every verdict attached to it along the pipeline.
struct ImageRecord {
    std::string tweet_id;
    std::string url;
    std::string local_path; // relative to the run's output directory
    std::uint64_t bytes_len = 0;
    std::optional<DuplicateVerdict> duplicate;
    std::optional<Classification> junk;      // positive = relevant
    std::optional<Classification> landslide; // positive = landslide
    std::optional<GeoTag> geo;
    std::optional<UserKind> user_type;

    bool operator==(const ImageRecord&) const = default;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Parses one raw post document (fixture schema above).
/// Throws ParseError (with byte offset) on malformed JSON and SchemaError
/// (naming the field) on missing id/text or invalid coordinates/urls.
Tweet parse_tweet(const std::string& raw);

/// Serializes a Tweet back to the fixture schema; parse_tweet round-trips it.
std::string serialize_tweet(const Tweet& t);

/// One ImageRef per entry of t.image_urls, order preserved.
std::vector<ImageRef> extract_image_refs(const Tweet& t);

// JSON forms used by the stores and the run report.
nlohmann::json tweet_to_json(const Tweet& t);
Tweet tweet_from_json(const nlohmann::json& j);
nlohmann::json record_to_json(const ImageRecord& r);
ImageRecord record_from_json(const nlohmann::json& j);
nlohmann::json classification_to_json(const Classification& c);
nlohmann::json geotag_to_json(const GeoTag& g);

} // namespace slidewatch
