// slidewatch CLI: run the pipeline over a replay corpus, tune the duplicate
// threshold, evaluate predictions, benchmark stages, and generate synthetic
// corpora.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "slidewatch/bench.hpp"
#include "slidewatch/classifiers.hpp"
#include "slidewatch/dedup.hpp"
#include "slidewatch/orchestrator.hpp"
#include "slidewatch/synth.hpp"

namespace {

using namespace slidewatch;

int cmd_run(const std::string& config_path, const std::string& corpus_override,
            const std::string& out_override, const std::string& report_path, bool verbose) {
    PipelineConfig cfg = PipelineConfig::from_file(config_path);
    if (!corpus_override.empty()) cfg.corpus = corpus_override;
    if (!out_override.empty()) cfg.out_dir = out_override;

    Pipeline pipeline(cfg);
    std::thread printer;
    if (verbose) {
        auto sub = pipeline.events().subscribe();
        printer = std::thread([sub]() mutable {
            while (auto event = sub.receive_wait())
                std::cerr << "[" << event->stage << "] " << event->message << " ("
                          << event->count << ")\n";
        });
    }
    const RunReport report = pipeline.run();
    if (printer.joinable()) printer.join();

    const std::string dump = report.to_json().dump(2);
    if (report_path.empty() || report_path == "-") {
        std::cout << dump << '\n';
    } else {
        std::ofstream out(report_path, std::ios::trunc);
        out << dump << '\n';
        std::cout << "report written to " << report_path << '\n';
    }
    return report.failed ? 1 : 0;
}

int cmd_tune(const std::string& pairs_path, double t_min, double t_max, double step) {
    const auto pairs = load_labeled_pairs(pairs_path);
    const ThresholdTuneResult result = tune_threshold(pairs, t_min, t_max, step);
    std::cout << "threshold,mcc\n";
    char buf[64];
    for (const auto& [t, value] : result.curve) {
        std::snprintf(buf, sizeof buf, "%.1f,%.6f", t, value);
        std::cout << buf << '\n';
    }
    std::snprintf(buf, sizeof buf, "best %.1f mcc %.6f", result.best_threshold, result.best_mcc);
    std::cout << buf << '\n';
    return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& gold_path,
             const std::string& positive, const std::string& task_name,
             const std::string& json_path) {
    const auto preds = load_labels(pred_path, positive);
    const auto gold = load_labels(gold_path, positive);
    const ConfusionMatrix cm = evaluate(preds, gold);
    const MetricsReport metrics = metrics_from_confusion(cm);
    const TaskLabels labels = task_name == "junk" ? labels_for(TaskKind::junk)
                              : task_name == "landslide"
                                  ? labels_for(TaskKind::landslide)
                                  : TaskLabels{positive, "not-" + positive};

    const std::string dump = metrics_to_json(metrics, cm, labels).dump(2);
    if (json_path.empty()) {
        std::cout << dump << '\n' << '\n';
    } else {
        std::ofstream out(json_path, std::ios::trunc);
        out << dump << '\n';
    }
    std::cout << metrics_table(metrics, labels);
    return 0;
}

int cmd_bench(const std::string& target_name, const std::string& loads_spec, std::size_t repeats,
              std::uint64_t seed, const std::string& out_dir, std::size_t prefill,
              double item_cost_ms, double geocode_delay_ms, std::size_t unique_keys,
              std::size_t feature_dim, double rate) {
    BenchTargetConfig target;
    target.kind = bench_target_from_string(target_name);
    target.index_prefill = prefill;
    target.item_cost_ms = item_cost_ms;
    target.geocode_delay_ms = geocode_delay_ms;
    target.unique_keys = unique_keys;
    target.feature_dim = feature_dim;

    BenchOptions options;
    options.loads = loads_spec.empty() ? default_loads() : parse_loads(loads_spec);
    options.repeats = repeats;
    options.seed = seed;
    options.rate_per_second = rate;

    const auto points = run_bench(target, options);
    emit_report(points, out_dir);
    std::cout << bench_csv(points);
    std::cout << "report written to " << out_dir << "/bench.{csv,json}\n";
    return 0;
}

int cmd_gen(const std::string& out_dir, std::size_t posts, std::uint64_t seed, double junk_pct,
            double dup_pct, double landslide_pct) {
    FunnelPlan plan;
    plan.posts = posts;
    plan.seed = seed;
    plan.junk_fraction = junk_pct / 100.0;
    plan.duplicate_fraction = dup_pct / 100.0;
    plan.landslide_fraction_of_remaining = landslide_pct / 100.0;

    const SynthCorpus corpus = generate_funnel_corpus(out_dir, plan, /*write_fixture_images=*/true);

    PipelineConfig cfg;
    cfg.keyword_file = corpus.keywords;
    cfg.corpus = corpus.corpus;
    cfg.out_dir = std::filesystem::path(out_dir) / "out";
    cfg.gazetteer = corpus.gazetteer;
    cfg.ner_dir = corpus.ner_dir;
    cfg.fixture_dir = corpus.dir / "fixture_images";
    cfg.feature_dim = 64;
    cfg.feature_scale = 20.0;
    cfg.junk = ClassifierConfig{"lookup", corpus.junk_scores, 1, 0.5};
    cfg.landslide = ClassifierConfig{"lookup", corpus.landslide_scores, 1, 0.5};
    {
        std::ofstream out(std::filesystem::path(out_dir) / "config.json", std::ios::trunc);
        out << cfg.to_json().dump(2) << '\n';
    }

    std::cout << "generated " << corpus.images << " posts (" << corpus.junk << " junk, "
              << corpus.duplicates << " duplicates, " << corpus.remaining << " remaining, "
              << corpus.landslides << " landslides)\n"
              << "corpus: " << corpus.corpus << "\nconfig: " << out_dir << "/config.json\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"slidewatch: stream triage pipeline for landslide reports"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "run the pipeline over a replay corpus");
    std::string config_path, corpus_override, out_override, report_path;
    bool verbose = false;
    run->add_option("--config", config_path, "pipeline config JSON")->required();
    run->add_option("--corpus", corpus_override, "override the corpus path");
    run->add_option("--out", out_override, "override the output directory");
    run->add_option("--report", report_path, "write the run report here instead of stdout");
    run->add_flag("--verbose", verbose, "print stage events");

    // tune
    auto* tune = app.add_subcommand("tune", "grid-search the duplicate distance threshold");
    std::string pairs_path;
    double t_min = 0.0, t_max = 12.0, step = 0.1;
    tune->add_option("--pairs", pairs_path, "CSV distance,is_duplicate")->required();
    tune->add_option("--t-min", t_min, "grid start");
    tune->add_option("--t-max", t_max, "grid end");
    tune->add_option("--step", step, "grid step");

    // eval
    auto* eval = app.add_subcommand("eval", "score predictions against gold labels");
    std::string pred_path, gold_path, positive = "positive", task_name, eval_json;
    eval->add_option("--pred", pred_path, "CSV id,label")->required();
    eval->add_option("--gold", gold_path, "CSV id,label")->required();
    eval->add_option("--positive", positive, "positive label string");
    eval->add_option("--task", task_name, "junk|landslide (sets class names)");
    eval->add_option("--json", eval_json, "write the JSON report here");

    // bench
    auto* bench = app.add_subcommand("bench", "latency/throughput sweep for one stage");
    std::string target_name, loads_spec, bench_out = "bench-out";
    std::size_t repeats = 5, prefill = 0, unique_keys = 16, feature_dim = 256;
    std::uint64_t seed = 42;
    double item_cost_ms = 0.0, geocode_delay_ms = 10.0, rate = 0.0;
    bench
        ->add_option("--target", target_name,
                     "duplicate_filter|junk_filter|landslide_detector|geolocation_tagger|"
                     "geolocation_tagger_nocache")
        ->required();
    bench->add_option("--loads", loads_spec, "e.g. 2^0..2^12 or 1,8,64");
    bench->add_option("--repeats", repeats, "repeats per load");
    bench->add_option("--seed", seed, "input generator seed");
    bench->add_option("--out", bench_out, "output directory");
    bench->add_option("--prefill", prefill, "duplicate filter: pre-filled index size");
    bench->add_option("--item-cost-ms", item_cost_ms, "classifier targets: synthetic cost");
    bench->add_option("--geocode-delay-ms", geocode_delay_ms, "geolocation: lookup delay");
    bench->add_option("--unique-keys", unique_keys, "geolocation: distinct request keys");
    bench->add_option("--feature-dim", feature_dim, "duplicate filter: vector dimension");
    bench->add_option("--rate", rate, "steady-rate submission (items/sec, 0 = burst)");

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic corpus with a planted funnel");
    std::string gen_out = "corpus-out";
    std::size_t posts = 2000;
    std::uint64_t gen_seed = 42;
    double junk_pct = 76.0, dup_pct = 9.0, landslide_pct = 0.84;
    gen->add_option("--out", gen_out, "output directory");
    gen->add_option("--posts", posts, "number of posts (one image each)");
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--junk-pct", junk_pct, "planted junk percentage");
    gen->add_option("--dup-pct", dup_pct, "planted duplicate percentage");
    gen->add_option("--landslide-pct", landslide_pct, "landslide % of the remaining");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return cmd_run(config_path, corpus_override, out_override, report_path, verbose);
        if (tune->parsed()) return cmd_tune(pairs_path, t_min, t_max, step);
        if (eval->parsed()) return cmd_eval(pred_path, gold_path, positive, task_name, eval_json);
        if (bench->parsed())
            return cmd_bench(target_name, loads_spec, repeats, seed, bench_out, prefill,
                             item_cost_ms, geocode_delay_ms, unique_keys, feature_dim, rate);
        if (gen->parsed())
            return cmd_gen(gen_out, posts, gen_seed, junk_pct, dup_pct, landslide_pct);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
