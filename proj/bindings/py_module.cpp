// Python bindings for the main slidewatch operations: post parsing, keyword
// matching, the duplicate filter, threshold tuning, the evaluation harness,
// and whole pipeline runs.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <json.hpp>

#include "slidewatch/bench.hpp"
#include "slidewatch/classifiers.hpp"
#include "slidewatch/collectors.hpp"
#include "slidewatch/dedup.hpp"
#include "slidewatch/geo_text.hpp"
#include "slidewatch/orchestrator.hpp"
#include "slidewatch/synth.hpp"

namespace py = pybind11;
using namespace slidewatch;

namespace {

py::object json_to_py(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

FeatureVector vector_from_list(const std::vector<float>& values) {
    FeatureVector fv;
    fv.values = values;
    return fv;
}

} // namespace

PYBIND11_MODULE(slidewatch, m) {
    m.doc() = "Stream triage pipeline for landslide reports on social media";

    py::enum_<Label>(m, "Label")
        .value("negative", Label::negative)
        .value("positive", Label::positive);

    py::enum_<GeoSource>(m, "GeoSource")
        .value("gps", GeoSource::gps)
        .value("text", GeoSource::text)
        .value("place", GeoSource::place)
        .value("user_location", GeoSource::user_location)
        .value("profile_description", GeoSource::profile_description)
        .value("none", GeoSource::none);

    py::class_<Tweet>(m, "Tweet")
        .def_readonly("id", &Tweet::id)
        .def_readonly("text", &Tweet::text)
        .def_readonly("lang", &Tweet::lang)
        .def_readonly("created_at_ms", &Tweet::created_at_ms)
        .def_readonly("place_name", &Tweet::place_name)
        .def_readonly("author_name", &Tweet::author_name)
        .def_readonly("author_location", &Tweet::author_location)
        .def_readonly("author_description", &Tweet::author_description)
        .def_readonly("image_urls", &Tweet::image_urls)
        .def_property_readonly("gps",
                               [](const Tweet& t) -> py::object {
                                   if (!t.gps) return py::none();
                                   return py::make_tuple(t.gps->latitude, t.gps->longitude);
                               })
        .def("__repr__", [](const Tweet& t) { return "<Tweet id='" + t.id + "'>"; });

    py::class_<ImageRef>(m, "ImageRef")
        .def_readonly("tweet_id", &ImageRef::tweet_id)
        .def_readonly("url", &ImageRef::url);

    py::class_<DuplicateVerdict>(m, "DuplicateVerdict")
        .def_readonly("is_duplicate", &DuplicateVerdict::is_duplicate)
        .def_readonly("ref_id", &DuplicateVerdict::ref_id)
        .def_readonly("distance", &DuplicateVerdict::distance);

    py::class_<ConfusionMatrix>(m, "ConfusionMatrix")
        .def(py::init([](std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn) {
                 return ConfusionMatrix{tp, fp, fn, tn};
             }),
             py::arg("tp"), py::arg("fp"), py::arg("fn"), py::arg("tn"))
        .def_readwrite("tp", &ConfusionMatrix::tp)
        .def_readwrite("fp", &ConfusionMatrix::fp)
        .def_readwrite("fn", &ConfusionMatrix::fn)
        .def_readwrite("tn", &ConfusionMatrix::tn)
        .def("total", &ConfusionMatrix::total);

    py::class_<MetricsReport>(m, "MetricsReport")
        .def_readonly("accuracy", &MetricsReport::accuracy)
        .def_readonly("precision_positive", &MetricsReport::precision_positive)
        .def_readonly("recall_positive", &MetricsReport::recall_positive)
        .def_readonly("f1_positive", &MetricsReport::f1_positive)
        .def_readonly("precision_negative", &MetricsReport::precision_negative)
        .def_readonly("recall_negative", &MetricsReport::recall_negative)
        .def_readonly("f1_negative", &MetricsReport::f1_negative)
        .def_readonly("macro_precision", &MetricsReport::macro_precision)
        .def_readonly("macro_recall", &MetricsReport::macro_recall)
        .def_readonly("macro_f1", &MetricsReport::macro_f1)
        .def_readonly("mcc", &MetricsReport::mcc);

    py::class_<ThresholdTuneResult>(m, "ThresholdTuneResult")
        .def_readonly("best_threshold", &ThresholdTuneResult::best_threshold)
        .def_readonly("best_mcc", &ThresholdTuneResult::best_mcc)
        .def_readonly("curve", &ThresholdTuneResult::curve);

    py::class_<FeatureIndex>(m, "FeatureIndex")
        .def(py::init<std::size_t>(), py::arg("dim"))
        .def_static("open", &FeatureIndex::open, py::arg("path"), py::arg("dim"))
        .def("insert",
             [](FeatureIndex& idx, const std::string& id, const std::vector<float>& values) {
                 idx.insert(id, vector_from_list(values));
             })
        .def("find_duplicate",
             [](const FeatureIndex& idx, const std::vector<float>& values, double threshold) {
                 return idx.find_duplicate(vector_from_list(values), threshold);
             },
             py::arg("values"), py::arg("threshold") = kDefaultDuplicateThreshold)
        .def("save", &FeatureIndex::save)
        .def("__len__", &FeatureIndex::size)
        .def_property_readonly("dim", &FeatureIndex::dim);

    m.def("parse_tweet", &parse_tweet, py::arg("raw"));
    m.def("serialize_tweet", &serialize_tweet, py::arg("tweet"));
    m.def("extract_image_refs", &extract_image_refs, py::arg("tweet"));
    m.def(
        "matches_keywords",
        [](const std::string& text, const std::vector<std::string>& keywords) {
            std::vector<std::pair<std::string, std::string>> entries;
            entries.reserve(keywords.size());
            for (const std::string& k : keywords) entries.emplace_back(k, "und");
            return matches_keywords(text, KeywordList(std::move(entries)));
        },
        py::arg("text"), py::arg("keywords"));
    m.def("image_content_id", &image_content_id, py::arg("url"));
    m.def("normalize_url", &normalize_url, py::arg("url"));

    m.def(
        "l2_distance",
        [](const std::vector<float>& a, const std::vector<float>& b) {
            return l2_distance(vector_from_list(a), vector_from_list(b));
        },
        py::arg("a"), py::arg("b"));

    m.def("mcc", [](const ConfusionMatrix& cm) { return mcc(cm); }, py::arg("confusion"));
    m.def(
        "mcc",
        [](std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn) {
            return mcc(ConfusionMatrix{tp, fp, fn, tn});
        },
        py::arg("tp"), py::arg("fp"), py::arg("fn"), py::arg("tn"));

    m.def(
        "tune_threshold",
        [](const std::vector<std::pair<double, bool>>& pairs, double t_min, double t_max,
           double step) {
            std::vector<LabeledPair> labeled;
            labeled.reserve(pairs.size());
            for (const auto& [distance, is_duplicate] : pairs)
                labeled.push_back(LabeledPair{distance, is_duplicate});
            return tune_threshold(labeled, t_min, t_max, step);
        },
        py::arg("pairs"), py::arg("t_min") = 0.0, py::arg("t_max") = 12.0, py::arg("step") = 0.1);

    m.def(
        "evaluate",
        [](const std::vector<std::pair<std::string, bool>>& preds,
           const std::vector<std::pair<std::string, bool>>& gold) {
            auto to_labels = [](const std::vector<std::pair<std::string, bool>>& rows) {
                std::vector<std::pair<std::string, Label>> out;
                out.reserve(rows.size());
                for (const auto& [id, positive] : rows)
                    out.emplace_back(id, positive ? Label::positive : Label::negative);
                return out;
            };
            return evaluate(to_labels(preds), to_labels(gold));
        },
        py::arg("preds"), py::arg("gold"));

    m.def("metrics_from_confusion", &metrics_from_confusion, py::arg("confusion"));
    m.def("format_percent", &format_percent, py::arg("value"), py::arg("decimals") = 2);

    m.def(
        "run_pipeline",
        [](const std::filesystem::path& config_path) {
            const RunReport report = run_pipeline(PipelineConfig::from_file(config_path));
            return json_to_py(report.to_json());
        },
        py::arg("config_path"));
    m.def(
        "run_pipeline_config",
        [](const py::dict& config) {
            const std::string dumped =
                py::module_::import("json").attr("dumps")(config).cast<std::string>();
            const RunReport report =
                run_pipeline(PipelineConfig::from_json(nlohmann::json::parse(dumped)));
            return json_to_py(report.to_json());
        },
        py::arg("config"));

    m.def(
        "generate_funnel_corpus",
        [](const std::filesystem::path& dir, std::size_t posts, std::uint64_t seed,
           bool write_fixture_images) {
            FunnelPlan plan;
            plan.posts = posts;
            plan.seed = seed;
            const SynthCorpus corpus = generate_funnel_corpus(dir, plan, write_fixture_images);
            py::dict out;
            out["dir"] = corpus.dir.string();
            out["corpus"] = corpus.corpus.string();
            out["keywords"] = corpus.keywords.string();
            out["gazetteer"] = corpus.gazetteer.string();
            out["ner_dir"] = corpus.ner_dir.string();
            out["junk_scores"] = corpus.junk_scores.string();
            out["landslide_scores"] = corpus.landslide_scores.string();
            out["images"] = corpus.images;
            out["junk"] = corpus.junk;
            out["duplicates"] = corpus.duplicates;
            out["remaining"] = corpus.remaining;
            out["landslides"] = corpus.landslides;
            return out;
        },
        py::arg("dir"), py::arg("posts") = 2000, py::arg("seed") = 42,
        py::arg("write_fixture_images") = true);

    py::register_exception<Error>(m, "SlidewatchError");
}
