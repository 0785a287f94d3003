#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "slidewatch/model.hpp"

namespace slidewatch {

// Pluggable binary image classifiers (Junk Filter, Landslide Detector) and
// the evaluation harness that turns predictions into confusion matrices and
// report scores.

enum class TaskKind { junk, landslide };

struct TaskLabels {
    std::string positive;
    std::string negative;
};

/// Per-task label names: junk -> relevant / not-relevant,
/// landslide -> landslide / not-landslide.
TaskLabels labels_for(TaskKind task);

class FeatureExtractor; // dedup.hpp

class BinaryClassifier {
public:
    explicit BinaryClassifier(TaskKind task, double threshold = 0.5)
        : task_(task), threshold_(threshold) {}
    virtual ~BinaryClassifier() = default;

    /// Deterministic: label is positive iff confidence >= threshold
    /// (default 0.5, inclusive).
    Classification classify(const ImageRecord& rec, std::string_view bytes) const;

    TaskKind task() const { return task_; }
    double threshold() const { return threshold_; }
    TaskLabels labels() const { return labels_for(task_); }

protected:
    /// Probability of the positive class in [0, 1].
    virtual double score(const ImageRecord& rec, std::string_view bytes) const = 0;

private:
    TaskKind task_;
    double threshold_;
};

/// score = logistic(w . features + bias) over the image's feature vector.
class StubClassifier : public BinaryClassifier {
public:
    StubClassifier(TaskKind task, std::shared_ptr<const FeatureExtractor> extractor,
                   std::vector<double> weights, double bias = 0.0, double threshold = 0.5);

    /// Convenience: pseudo-random weights from a seed.
    static StubClassifier seeded(TaskKind task, std::shared_ptr<const FeatureExtractor> extractor,
                                 std::uint64_t seed, double threshold = 0.5);

protected:
    double score(const ImageRecord& rec, std::string_view bytes) const override;

private:
    std::shared_ptr<const FeatureExtractor> extractor_;
    std::vector<double> weights_;
    double bias_;
};

/// Reads precomputed scores from a `id,score` CSV sidecar. Unknown ids are an
/// error, never a silent default.
class LookupClassifier : public BinaryClassifier {
public:
    LookupClassifier(TaskKind task, std::unordered_map<std::string, double> scores,
                     double threshold = 0.5);

    static LookupClassifier load(TaskKind task, const std::filesystem::path& csv,
                                 double threshold = 0.5);

protected:
    double score(const ImageRecord& rec, std::string_view bytes) const override;

private:
    std::unordered_map<std::string, double> scores_;
};

// ---------------------------------------------------------------------------
// Evaluation harness
// ---------------------------------------------------------------------------

struct ConfusionMatrix {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    std::uint64_t total() const { return tp + fp + fn + tn; }

    bool operator==(const ConfusionMatrix&) const = default;
};

/// Strict join of predictions against gold labels: every id must appear in
/// both lists exactly once; offenders are listed in the error.
ConfusionMatrix evaluate(const std::vector<std::pair<std::string, Label>>& preds,
                         const std::vector<std::pair<std::string, Label>>& gold);

/// All values on the percent scale (mcc in [-100, 100]).
struct MetricsReport {
    double accuracy = 0.0;
    double precision_positive = 0.0;
    double recall_positive = 0.0;
    double f1_positive = 0.0;
    double precision_negative = 0.0;
    double recall_negative = 0.0;
    double f1_negative = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    double mcc = 0.0;
};

/// Derives every reported score from the confusion matrix. Components with a
/// zero denominator are defined as 0. Throws on an empty matrix.
MetricsReport metrics_from_confusion(const ConfusionMatrix& cm);

/// Round-half-up (toward +inf on ties) to `decimals` places, e.g. "97.72".
std::string format_percent(double value, int decimals = 2);

nlohmann::json metrics_to_json(const MetricsReport& m, const ConfusionMatrix& cm,
                               const TaskLabels& labels);

/// Aligned per-class / macro-average table, percent scale, 2 decimals.
std::string metrics_table(const MetricsReport& m, const TaskLabels& labels);

/// Loads an `id,label` CSV; `positive` names the positive label string.
std::vector<std::pair<std::string, Label>> load_labels(const std::filesystem::path& csv,
                                                       const std::string& positive);

} // namespace slidewatch
