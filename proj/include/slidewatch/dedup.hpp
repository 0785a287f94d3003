#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "slidewatch/classifiers.hpp"
#include "slidewatch/model.hpp"

namespace slidewatch {

// Near-or-exact duplicate detection: L2 distance of image feature vectors
// against a linear-scan feature index, plus the offline MCC grid search that
// picks the serving threshold. The default threshold is 7.1.

inline constexpr double kDefaultDuplicateThreshold = 7.1;
inline constexpr std::size_t kDefaultFeatureDim = 2048;

struct FeatureVector {
    std::vector<float> values;
    std::string owner_id; // id of the image the vector was extracted from

    std::size_t dim() const { return values.size(); }
};

/// Euclidean (L2) distance. Throws DimensionMismatch on unequal dims.
double l2_distance(const FeatureVector& a, const FeatureVector& b);

/// Append-only collection of the feature vectors of all unique images.
/// Searches scan linearly, so cost grows with the number of unique images
/// seen; the bench module measures that decay. Optionally attached to a
/// binary log so a restart does not re-ingest:
///
///   header:  "SWFI" magic, u32 version, u32 dim (all little-endian)
///   records: u32 id length + id bytes + dim float32 values (little-endian)
class FeatureIndex {
public:
    explicit FeatureIndex(std::size_t dim);
    ~FeatureIndex();

    FeatureIndex(FeatureIndex&&) noexcept;
    FeatureIndex& operator=(FeatureIndex&&) noexcept;
    FeatureIndex(const FeatureIndex&) = delete;
    FeatureIndex& operator=(const FeatureIndex&) = delete;

    /// Opens (or creates) a persistent index; later inserts append to it.
    static FeatureIndex open(const std::filesystem::path& path, std::size_t dim);

    /// Nearest entry within `threshold` (ties go to the earliest-inserted
    /// entry). Does not insert. An empty index is a valid not-duplicate.
    DuplicateVerdict find_duplicate(const FeatureVector& fv, double threshold) const;

    /// Registers a unique image's features. Throws on duplicate id or
    /// dimension mismatch.
    void insert(const std::string& id, const FeatureVector& fv);

    std::size_t size() const { return entries_.size(); }
    std::size_t dim() const { return dim_; }

    /// Writes the whole index to `path` in the format above.
    void save(const std::filesystem::path& path) const;

private:
    struct Entry {
        std::string id;
        std::vector<float> values;
    };

    void append_record(const Entry& e);

    std::size_t dim_;
    std::vector<Entry> entries_;
    std::unordered_set<std::string> ids_;
    int fd_ = -1; // append log, -1 when in-memory only
};

// ---------------------------------------------------------------------------
// Feature extraction (the CNN itself is a pluggable backend)
// ---------------------------------------------------------------------------

class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;

    /// Same bytes always yield the same vector.
    virtual FeatureVector extract(std::string_view bytes, const std::string& owner_id) const = 0;

    virtual std::size_t dim() const = 0;
};

/// Deterministic stand-in: the byte digest seeds a pseudo-random vector with
/// components uniform in [0, scale). Exact byte duplicates land at distance 0;
/// unrelated byte strings land far apart.
class StubFeatureExtractor : public FeatureExtractor {
public:
    explicit StubFeatureExtractor(std::size_t dim = kDefaultFeatureDim, double scale = 1.0,
                                  std::uint64_t seed = 0);

    FeatureVector extract(std::string_view bytes, const std::string& owner_id) const override;
    std::size_t dim() const override { return dim_; }

private:
    std::size_t dim_;
    double scale_;
    std::uint64_t seed_;
};

/// Looks up externally computed embeddings from a sidecar file keyed by id
/// (the sidecar uses the FeatureIndex file format). Throws LookupError for
/// unknown ids.
class PrecomputedFeatureExtractor : public FeatureExtractor {
public:
    PrecomputedFeatureExtractor(const std::filesystem::path& sidecar, std::size_t dim);

    FeatureVector extract(std::string_view bytes, const std::string& owner_id) const override;
    std::size_t dim() const override { return dim_; }

private:
    std::size_t dim_;
    std::unordered_map<std::string, std::vector<float>> vectors_;
};

// ---------------------------------------------------------------------------
// Threshold tuning
// ---------------------------------------------------------------------------

struct LabeledPair {
    double distance = 0.0;
    bool is_duplicate = false; // ground truth
};

struct ThresholdTuneResult {
    double best_threshold = 0.0;
    double best_mcc = 0.0;
    std::vector<std::pair<double, double>> curve; // (threshold, mcc)
};

/// Matthews Correlation Coefficient in [-1, 1]; 0 when any factor of the
/// denominator vanishes.
double mcc(const ConfusionMatrix& cm);

/// Grid search over [t_min, t_max] with `step`: a pair is predicted duplicate
/// iff distance <= t. Returns the argmax (exact comparison, so equal-MCC ties
/// resolve to the smallest threshold) plus the full curve.
ThresholdTuneResult tune_threshold(std::span<const LabeledPair> pairs, double t_min = 0.0,
                                   double t_max = 12.0, double step = 0.1);

/// Loads a `distance,is_duplicate` CSV (header optional, is_duplicate in
/// {0,1,true,false}).
std::vector<LabeledPair> load_labeled_pairs(const std::filesystem::path& path);

} // namespace slidewatch
