#include "slidewatch/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <vector>

#include <json.hpp>

#include "slidewatch/collectors.hpp"
#include "slidewatch/errors.hpp"
#include "slidewatch/model.hpp"
#include "slidewatch/util.hpp"

namespace slidewatch {

using nlohmann::json;

namespace {

const char* kKeywordsCsv = "keyword,language\n"
                           "landslide,en\n"
                           "landslip,en\n"
                           "mudslide,en\n"
                           "rockfall,en\n"
                           "debris flow,en\n"
                           "derrumbe,es\n"
                           "deslizamiento,es\n"
                           "glissement de terrain,fr\n"
                           "éboulement,fr\n"
                           "frana,it\n"
                           "deslizamento,pt\n"
                           "erdrutsch,de\n"
                           "heyelan,tr\n"
                           "jordskred,sv\n";

const char* kGazetteerCsv =
    "name,kind,country,state,county,city,lat,lon\n"
    "Quito,city,Ecuador,Pichincha,Quito Canton,Quito,-0.2202,-78.5123\n"
    "Ooty,city,India,Tamil Nadu,Nilgiris,Ooty,11.4102,76.6950\n"
    "London,city,United Kingdom,England,Greater London,London,51.5072,-0.1276\n"
    "Nagaland,state,India,Nagaland,,,26.1584,94.5624\n"
    "Kerala,state,India,Kerala,,,10.8505,76.2711\n"
    "Ecuador,country,Ecuador,,,,-1.8312,-78.1834\n"
    "India,country,India,,,,20.5937,78.9629\n"
    "Bergen,city,Norway,Vestland,Bergen,Bergen,60.3913,5.3221\n"
    "Cusco,city,Peru,Cusco Region,Cusco Province,Cusco,-13.5320,-71.9675\n"
    "Shimla,city,India,Himachal Pradesh,Shimla,Shimla,31.1048,77.1734\n"
    "Itogon,city,Philippines,Benguet,Itogon,Itogon,16.3633,120.6772\n"
    "Norway,country,Norway,,,,60.4720,8.4689\n";

const char* kNerEn = "quito\tLOCATION\n"
                     "ooty\tLOCATION\n"
                     "london\tLOCATION\n"
                     "nagaland\tLOCATION\n"
                     "kerala\tLOCATION\n"
                     "bergen\tLOCATION\n"
                     "cusco\tLOCATION\n"
                     "shimla\tLOCATION\n"
                     "itogon\tLOCATION\n"
                     "john\tPERSON\n"
                     "maria\tPERSON\n"
                     "smith\tPERSON\n"
                     "garcia\tPERSON\n"
                     "priya\tPERSON\n"
                     "sharma\tPERSON\n"
                     "ana\tPERSON\n"
                     "lopez\tPERSON\n"
                     "british geological survey\tORGANIZATION\n"
                     "geological survey\tORGANIZATION\n"
                     "highway authority\tORGANIZATION\n"
                     "disaster agency\tORGANIZATION\n"
                     "news network\tORGANIZATION\n";

const char* kNerEs = "quito\tLOCATION\n"
                     "cusco\tLOCATION\n"
                     "maria\tPERSON\n"
                     "garcia\tPERSON\n"
                     "ana\tPERSON\n"
                     "lopez\tPERSON\n";

const char* kNerFr = "bergen\tLOCATION\n"
                     "londres\tLOCATION\n";

const char* kNerPt = "quito\tLOCATION\n"
                     "ana\tPERSON\n";

const char* kNerIt = "londra\tLOCATION\n";

const char* kNerMl = "quito\tLOCATION\n"
                     "ooty\tLOCATION\n"
                     "london\tLOCATION\n"
                     "nagaland\tLOCATION\n"
                     "kerala\tLOCATION\n"
                     "bergen\tLOCATION\n"
                     "cusco\tLOCATION\n"
                     "shimla\tLOCATION\n"
                     "itogon\tLOCATION\n";

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
}

struct Persona {
    const char* name;
    const char* location;
    const char* description;
};

constexpr Persona kPeople[] = {
    {"John Smith", "Quito", "hiker, photos of the andes"},
    {"Maria Garcia", "Cusco", "reporting from cusco"},
    {"Priya Sharma", "Ooty", "tea country life near ooty"},
    {"Ana Lopez", "London", "geography teacher"},
};

constexpr Persona kOrgs[] = {
    {"British Geological Survey", "London", "official survey updates"},
    {"Highway Authority", "Shimla", "road status bulletins"},
    {"Disaster Agency", "Itogon", "emergency response"},
    {"News Network", "Bergen", "breaking news desk"},
};

constexpr const char* kTextPlaces[] = {"Quito", "Ooty", "Kerala", "Bergen",
                                       "Cusco", "Shimla", "Itogon"};

} // namespace

void write_default_fixtures(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "ner");
    write_file(dir / "keywords.csv", kKeywordsCsv);
    write_file(dir / "gazetteer.csv", kGazetteerCsv);
    write_file(dir / "ner" / "en.tsv", kNerEn);
    write_file(dir / "ner" / "es.tsv", kNerEs);
    write_file(dir / "ner" / "fr.tsv", kNerFr);
    write_file(dir / "ner" / "pt.tsv", kNerPt);
    write_file(dir / "ner" / "it.tsv", kNerIt);
    write_file(dir / "ner" / "ml.tsv", kNerMl);
}

SynthCorpus generate_funnel_corpus(const std::filesystem::path& dir, const FunnelPlan& plan,
                                   bool write_fixture_images) {
    if (plan.posts == 0) throw Error("funnel corpus needs at least one post");

    SynthCorpus out;
    out.dir = dir;
    std::filesystem::create_directories(dir);
    write_default_fixtures(dir);
    out.keywords = dir / "keywords.csv";
    out.gazetteer = dir / "gazetteer.csv";
    out.ner_dir = dir / "ner";
    out.corpus = dir / "corpus.ndjson";
    out.junk_scores = dir / "junk_scores.csv";
    out.landslide_scores = dir / "landslide_scores.csv";

    const std::size_t n = plan.posts;
    const auto n_junk = static_cast<std::size_t>(
        std::llround(plan.junk_fraction * static_cast<double>(n)));
    const auto n_dup = static_cast<std::size_t>(
        std::llround(plan.duplicate_fraction * static_cast<double>(n)));
    if (n_junk + n_dup > n) throw Error("funnel fractions exceed the corpus size");
    const std::size_t n_remaining = n - n_junk - n_dup;
    if (n_dup > 0 && n_remaining == 0)
        throw Error("duplicates need at least one relevant base image");
    const auto n_landslide = static_cast<std::size_t>(std::llround(
        plan.landslide_fraction_of_remaining * static_cast<double>(n_remaining)));

    // Category per post: 0 junk, 1 duplicate, 2 remaining; deterministic
    // shuffle.
    enum : unsigned char { kJunk = 0, kDup = 1, kRemaining = 2 };
    std::vector<unsigned char> category(n, kRemaining);
    std::fill_n(category.begin(), n_junk, kJunk);
    std::fill_n(category.begin() + static_cast<std::ptrdiff_t>(n_junk), n_dup, kDup);
    std::uint64_t rng = plan.seed;
    for (std::size_t i = n; i > 1; --i)
        std::swap(category[i - 1], category[splitmix64(rng) % i]);

    // Landslide labels over the remaining (relevant, non-duplicate) images.
    std::vector<std::size_t> remaining_ids;
    remaining_ids.reserve(n_remaining);
    for (std::size_t i = 0; i < n; ++i)
        if (category[i] == kRemaining) remaining_ids.push_back(i);
    for (std::size_t i = remaining_ids.size(); i > 1; --i)
        std::swap(remaining_ids[i - 1], remaining_ids[splitmix64(rng) % i]);
    std::vector<bool> is_landslide(n, false);
    for (std::size_t k = 0; k < n_landslide; ++k) is_landslide[remaining_ids[k]] = true;

    std::ofstream corpus(out.corpus, std::ios::trunc | std::ios::binary);
    if (!corpus) throw IoError("cannot write " + out.corpus.string());
    std::ofstream junk_csv(out.junk_scores, std::ios::trunc);
    std::ofstream land_csv(out.landslide_scores, std::ios::trunc);
    junk_csv << "id,score\n";
    land_csv << "id,score\n";

    std::filesystem::path fixture_dir;
    if (write_fixture_images) {
        fixture_dir = dir / "fixture_images";
        std::filesystem::create_directories(fixture_dir);
    }

    std::size_t dup_cursor = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string url = "http://img.test/p" + std::to_string(i) + ".jpg";

        // Byte class: junk and remaining images carry unique bytes; each
        // duplicate copies the bytes (and landslide label) of a remaining
        // base image.
        std::string bytes;
        bool landslide_label = is_landslide[i];
        switch (category[i]) {
        case kJunk:
            bytes = "junk-image-" + std::to_string(i);
            break;
        case kRemaining:
            bytes = "scene-image-" + std::to_string(i) + "-base";
            break;
        case kDup: {
            const std::size_t base = remaining_ids[dup_cursor % remaining_ids.size()];
            ++dup_cursor;
            bytes = "scene-image-" + std::to_string(base) + "-base";
            landslide_label = is_landslide[base];
            break;
        }
        }

        const std::string image_id = image_content_id(url);
        junk_csv << image_id << ',' << (category[i] == kJunk ? "0.10" : "0.90") << '\n';
        land_csv << image_id << ',' << (landslide_label ? "0.95" : "0.05") << '\n';
        out.image_bytes.emplace(url, bytes);
        if (write_fixture_images) write_file(fixture_dir / image_filename(url), bytes);

        // The post document.
        Tweet t;
        t.id = "t" + std::to_string(i);
        t.lang = "en";
        t.created_at_ms = 1580515200000 + static_cast<std::int64_t>(i) * 1000;
        const bool person = (splitmix64(rng) & 1) == 0;
        const Persona& who = person ? kPeople[i % std::size(kPeople)] : kOrgs[i % std::size(kOrgs)];
        t.author_name = who.name;
        const std::uint64_t geo_pick = splitmix64(rng) % 5;
        const char* place = kTextPlaces[i % std::size(kTextPlaces)];
        switch (geo_pick) {
        case 0:
            t.text = "Massive landslide near " + std::string(place) + " blocks the road";
            break;
        case 1:
            t.text = "landslide reported after heavy rain";
            t.gps = GeoPoint{-0.2202 + 0.001 * static_cast<double>(i % 3), -78.5123};
            break;
        case 2:
            t.text = "landslide photos coming in";
            t.place_name = place;
            break;
        case 3:
            t.text = "another landslide today";
            t.author_location = who.location;
            break;
        default:
            t.text = "mudslide caught on camera";
            t.author_description = who.description;
            break;
        }
        t.image_urls.push_back(url);
        corpus << serialize_tweet(t) << '\n';
    }

    out.images = n;
    out.junk = n_junk;
    out.duplicates = n_dup;
    out.remaining = n_remaining;
    out.landslides = n_landslide;
    return out;
}

} // namespace slidewatch
