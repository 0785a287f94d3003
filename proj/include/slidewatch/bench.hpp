#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "slidewatch/collectors.hpp"
#include "slidewatch/dedup.hpp"

namespace slidewatch {

// Load-generation benchmarks for the four critical stages: bursts of 2^n
// synthetic inputs are pushed through a queue into a fresh instance of the
// stage; latency is burst-submission to last output, throughput is
// load/latency. The geolocation target runs a cold-cache and a warm-cache
// pass. Absolute numbers are hardware-bound; the suites assert shapes and
// orderings, not figures.

enum class BenchTargetKind {
    duplicate_filter,
    junk_filter,
    landslide_detector,
    geolocation_tagger,        // cold + warm cache passes
    geolocation_tagger_nocache // fresh cache per request
};

BenchTargetKind bench_target_from_string(const std::string& name);
const char* to_string(BenchTargetKind k);

struct BenchTargetConfig {
    BenchTargetKind kind = BenchTargetKind::junk_filter;

    // duplicate_filter
    std::size_t feature_dim = 256;
    double feature_scale = 8.0;
    std::size_t index_prefill = 0;
    double duplicate_threshold = kDefaultDuplicateThreshold;

    // junk_filter / landslide_detector
    double item_cost_ms = 0.0; // synthetic per-item cost

    // geolocation_tagger
    std::size_t unique_keys = 16;
    double geocode_delay_ms = 10.0;
    std::size_t cache_capacity = 4096;
};

struct BenchSample {
    std::size_t repeat = 0;
    double latency_s = 0.0;
    bool ok = false;
    // Stage-positive outputs in the burst (duplicate verdicts, positive
    // classifications, resolved geotags); lets tests pin bench outputs
    // against a sequential reference run.
    std::uint64_t positive_outputs = 0;
};

struct LoadPoint {
    std::string target;
    std::size_t load = 0;
    std::vector<BenchSample> samples;

    double mean_latency() const;
    double std_latency() const; // population standard deviation
    double mean_throughput() const;
    std::size_t failed_count() const;
};

struct BenchOptions {
    std::vector<std::size_t> loads; // empty = default_loads()
    std::size_t repeats = 5;
    std::uint64_t seed = 42;
    std::chrono::milliseconds timeout{0}; // 0 = env SLIDEWATCH_BENCH_TIMEOUT_MS or 60s
    // 0 = burst mode (the whole load at once); > 0 paces the submission at
    // this many items/sec. Latency stays submission-start to last output.
    double rate_per_second = 0.0;
};

/// 2^0 .. 2^12.
std::vector<std::size_t> default_loads();

/// The deterministic synthetic input stream the image-stage benches consume:
/// unique byte strings, except every 8th item repeats an earlier payload so
/// duplicate detection has real work. Exposed so tests can replay the exact
/// stream through a sequential reference.
std::vector<ImageItem> bench_image_stream(std::size_t load, std::uint64_t seed,
                                          std::size_t repeat);

/// Parses "2^a..2^b" or a comma list of counts.
std::vector<std::size_t> parse_loads(const std::string& spec);

std::vector<LoadPoint> run_bench(const BenchTargetConfig& target, const BenchOptions& options);

/// Writes bench.csv (`target,load,repeat,latency_s,throughput_ips,status`)
/// and bench.json (per-point mean/std summary) into `out_dir`.
void emit_report(std::span<const LoadPoint> points, const std::filesystem::path& out_dir);

std::string bench_csv(std::span<const LoadPoint> points);
std::string bench_json(std::span<const LoadPoint> points);

} // namespace slidewatch
