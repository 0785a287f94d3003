#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>

namespace slidewatch {

// Synthetic corpus generator: plants a deduplication/classification funnel
// with exact per-category counts so end-to-end runs have a known ground
// truth. One image per post; duplicate images are byte-identical copies of
// relevant non-duplicate images under fresh URLs (the retweet-with-reupload
// case URL dedup cannot catch).

struct FunnelPlan {
    std::size_t posts = 50000;
    double junk_fraction = 0.76;        // planted not-relevant
    double duplicate_fraction = 0.09;   // planted relevant duplicates
    double landslide_fraction_of_remaining = 0.0084;
    std::uint64_t seed = 42;
};

struct SynthCorpus {
    std::filesystem::path dir;
    std::filesystem::path corpus;           // corpus.ndjson
    std::filesystem::path keywords;         // keywords.csv
    std::filesystem::path gazetteer;        // gazetteer.csv
    std::filesystem::path ner_dir;          // ner/<lang>.tsv
    std::filesystem::path junk_scores;      // junk_scores.csv (id,score)
    std::filesystem::path landslide_scores; // landslide_scores.csv

    /// url -> bytes for in-memory fetching at scale.
    std::unordered_map<std::string, std::string> image_bytes;

    // Planted ground truth.
    std::uint64_t images = 0;
    std::uint64_t junk = 0;       // not-relevant
    std::uint64_t duplicates = 0; // relevant byte-duplicates
    std::uint64_t remaining = 0;  // relevant, non-duplicate
    std::uint64_t landslides = 0; // landslide positives among remaining
};

/// Writes corpus.ndjson, the score sidecars and the config data files into
/// `dir`. With `write_fixture_images` the image bytes are also materialized
/// under dir/fixture_images for the DirectoryFetcher path.
SynthCorpus generate_funnel_corpus(const std::filesystem::path& dir, const FunnelPlan& plan,
                                   bool write_fixture_images = false);

/// Writes the small built-in keyword list, gazetteer and NER dictionaries
/// into `dir` (keywords.csv, gazetteer.csv, ner/).
void write_default_fixtures(const std::filesystem::path& dir);

} // namespace slidewatch
