#include "slidewatch/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "slidewatch/collectors.hpp"
#include "slidewatch/dedup.hpp"
#include "slidewatch/errors.hpp"
#include "slidewatch/util.hpp"

namespace slidewatch {

using nlohmann::json;

TaskLabels labels_for(TaskKind task) {
    if (task == TaskKind::junk) return TaskLabels{"relevant", "not-relevant"};
    return TaskLabels{"landslide", "not-landslide"};
}

Classification BinaryClassifier::classify(const ImageRecord& rec, std::string_view bytes) const {
    Classification c;
    c.confidence = score(rec, bytes);
    if (c.confidence < 0.0 || c.confidence > 1.0)
        throw Error("classifier score out of [0,1]: " + std::to_string(c.confidence));
    c.label = c.confidence >= threshold_ ? Label::positive : Label::negative;
    return c;
}

StubClassifier::StubClassifier(TaskKind task, std::shared_ptr<const FeatureExtractor> extractor,
                               std::vector<double> weights, double bias, double threshold)
    : BinaryClassifier(task, threshold), extractor_(std::move(extractor)),
      weights_(std::move(weights)), bias_(bias) {
    if (!extractor_) throw Error("stub classifier needs a feature extractor");
    if (weights_.size() != extractor_->dim())
        throw DimensionMismatch(weights_.size(), extractor_->dim());
}

StubClassifier StubClassifier::seeded(TaskKind task,
                                      std::shared_ptr<const FeatureExtractor> extractor,
                                      std::uint64_t seed, double threshold) {
    std::vector<double> weights(extractor->dim());
    std::uint64_t state = seed;
    for (double& w : weights) w = splitmix_unit(state) * 2.0 - 1.0;
    return StubClassifier(task, std::move(extractor), std::move(weights), 0.0, threshold);
}

double StubClassifier::score(const ImageRecord& rec, std::string_view bytes) const {
    std::string file_bytes;
    if (bytes.empty() && !rec.local_path.empty()) {
        std::ifstream in(rec.local_path, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        file_bytes = buf.str();
        bytes = file_bytes;
    }
    const FeatureVector fv = extractor_->extract(bytes, image_content_id(rec.url));
    double z = bias_;
    for (std::size_t i = 0; i < weights_.size(); ++i)
        z += weights_[i] * static_cast<double>(fv.values[i]);
    return 1.0 / (1.0 + std::exp(-z));
}

LookupClassifier::LookupClassifier(TaskKind task, std::unordered_map<std::string, double> scores,
                                   double threshold)
    : BinaryClassifier(task, threshold), scores_(std::move(scores)) {}

LookupClassifier LookupClassifier::load(TaskKind task, const std::filesystem::path& csv,
                                        double threshold) {
    std::ifstream in(csv);
    if (!in) throw IoError("cannot open score sidecar " + csv.string());
    std::unordered_map<std::string, double> scores;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 2)
            throw Error("score sidecar line " + std::to_string(lineno) + " must be 'id,score'");
        if (lineno == 1 && fields[0] == "id") continue;
        try {
            scores[fields[0]] = std::stod(fields[1]);
        } catch (const std::exception&) {
            throw Error("bad score on sidecar line " + std::to_string(lineno));
        }
    }
    return LookupClassifier(task, std::move(scores), threshold);
}

double LookupClassifier::score(const ImageRecord& rec, std::string_view /*bytes*/) const {
    const std::string id = image_content_id(rec.url);
    const auto it = scores_.find(id);
    if (it == scores_.end()) throw LookupError("no precomputed score", id);
    return it->second;
}

// ---------------------------------------------------------------------------
// Evaluation harness
// ---------------------------------------------------------------------------

ConfusionMatrix evaluate(const std::vector<std::pair<std::string, Label>>& preds,
                         const std::vector<std::pair<std::string, Label>>& gold) {
    std::unordered_map<std::string, Label> gold_map;
    std::vector<std::string> offenders;
    for (const auto& [id, label] : gold) {
        if (!gold_map.emplace(id, label).second) offenders.push_back("duplicate gold id " + id);
    }

    ConfusionMatrix cm;
    std::set<std::string> seen;
    for (const auto& [id, label] : preds) {
        if (!seen.insert(id).second) {
            offenders.push_back("duplicate predicted id " + id);
            continue;
        }
        const auto it = gold_map.find(id);
        if (it == gold_map.end()) {
            offenders.push_back("prediction without gold label " + id);
            continue;
        }
        const bool pred_pos = label == Label::positive;
        const bool gold_pos = it->second == Label::positive;
        if (pred_pos && gold_pos) ++cm.tp;
        else if (pred_pos && !gold_pos) ++cm.fp;
        else if (!pred_pos && gold_pos) ++cm.fn;
        else ++cm.tn;
    }
    for (const auto& [id, label] : gold) {
        (void)label;
        if (!seen.contains(id)) offenders.push_back("gold label without prediction " + id);
    }

    if (!offenders.empty()) {
        std::string msg = "evaluate: strict join failed: ";
        const std::size_t shown = std::min<std::size_t>(offenders.size(), 10);
        for (std::size_t i = 0; i < shown; ++i) {
            if (i) msg += "; ";
            msg += offenders[i];
        }
        if (offenders.size() > shown)
            msg += "; and " + std::to_string(offenders.size() - shown) + " more";
        throw Error(msg);
    }
    return cm;
}

namespace {

double ratio_or_zero(double num, double den) {
    return den == 0.0 ? 0.0 : num / den;
}

double f1_of(double precision, double recall) {
    const double s = precision + recall;
    return s == 0.0 ? 0.0 : 2.0 * precision * recall / s;
}

} // namespace

MetricsReport metrics_from_confusion(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw Error("metrics_from_confusion: empty confusion matrix");
    const double tp = static_cast<double>(cm.tp);
    const double fp = static_cast<double>(cm.fp);
    const double fn = static_cast<double>(cm.fn);
    const double tn = static_cast<double>(cm.tn);

    MetricsReport m;
    m.accuracy = (tp + tn) / (tp + fp + fn + tn) * 100.0;
    const double p_pos = ratio_or_zero(tp, tp + fp);
    const double r_pos = ratio_or_zero(tp, tp + fn);
    const double p_neg = ratio_or_zero(tn, tn + fn);
    const double r_neg = ratio_or_zero(tn, tn + fp);
    m.precision_positive = p_pos * 100.0;
    m.recall_positive = r_pos * 100.0;
    m.f1_positive = f1_of(p_pos, r_pos) * 100.0;
    m.precision_negative = p_neg * 100.0;
    m.recall_negative = r_neg * 100.0;
    m.f1_negative = f1_of(p_neg, r_neg) * 100.0;
    m.macro_precision = (m.precision_positive + m.precision_negative) / 2.0;
    m.macro_recall = (m.recall_positive + m.recall_negative) / 2.0;
    m.macro_f1 = (m.f1_positive + m.f1_negative) / 2.0;
    m.mcc = mcc(cm) * 100.0;
    return m;
}

std::string format_percent(double value, int decimals) {
    double scale = 1.0;
    for (int i = 0; i < decimals; ++i) scale *= 10.0;
    const double rounded = std::floor(value * scale + 0.5) / scale;
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(decimals);
    out << rounded;
    return out.str();
}

nlohmann::json metrics_to_json(const MetricsReport& m, const ConfusionMatrix& cm,
                               const TaskLabels& labels) {
    json j;
    j["confusion"] = {{"tp", cm.tp}, {"fp", cm.fp}, {"fn", cm.fn}, {"tn", cm.tn},
                      {"total", cm.total()}};
    j["accuracy"] = m.accuracy;
    j["classes"] = {
        {labels.positive,
         {{"precision", m.precision_positive}, {"recall", m.recall_positive},
          {"f1", m.f1_positive}}},
        {labels.negative,
         {{"precision", m.precision_negative}, {"recall", m.recall_negative},
          {"f1", m.f1_negative}}}};
    j["macro"] = {{"precision", m.macro_precision}, {"recall", m.macro_recall},
                  {"f1", m.macro_f1}};
    j["mcc"] = m.mcc;
    return j;
}

std::string metrics_table(const MetricsReport& m, const TaskLabels& labels) {
    const std::size_t width =
        std::max<std::size_t>(10, std::max(labels.positive.size(), labels.negative.size()) + 2);
    std::ostringstream out;
    auto row = [&](const std::string& name, double p, double r, double f1) {
        out << name;
        for (std::size_t i = name.size(); i < width; ++i) out << ' ';
        out << format_percent(p) << "  " << format_percent(r) << "  " << format_percent(f1)
            << '\n';
    };
    out << "Accuracy: " << format_percent(m.accuracy) << "  MCC: " << format_percent(m.mcc)
        << '\n';
    out << "Class";
    for (std::size_t i = 5; i < width; ++i) out << ' ';
    out << "Prec.  Recall F1\n";
    row(labels.positive, m.precision_positive, m.recall_positive, m.f1_positive);
    row(labels.negative, m.precision_negative, m.recall_negative, m.f1_negative);
    row("Macro avg.", m.macro_precision, m.macro_recall, m.macro_f1);
    return out.str();
}

std::vector<std::pair<std::string, Label>> load_labels(const std::filesystem::path& csv,
                                                       const std::string& positive) {
    std::ifstream in(csv);
    if (!in) throw IoError("cannot open labels file " + csv.string());
    std::vector<std::pair<std::string, Label>> labels;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 2)
            throw Error("labels line " + std::to_string(lineno) + " must be 'id,label'");
        if (lineno == 1 && fields[0] == "id") continue;
        labels.emplace_back(fields[0],
                            fields[1] == positive ? Label::positive : Label::negative);
    }
    return labels;
}

} // namespace slidewatch
