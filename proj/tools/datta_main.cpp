#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "datta/harness.hpp"
#include "datta/io.hpp"
#include "datta/kernels.hpp"

namespace fs = std::filesystem;
using namespace datta;

namespace {

// Raw capture layout for `preprocess`: one text file per sample named
// <id>_a<activity>_d<domain>.txt, one packet per line, 30 amplitudes each.
bool parse_capture_name(const std::string &stem, std::string &id, int &activity, int &domain) {
    const size_t a_pos = stem.rfind("_a");
    if (a_pos == std::string::npos) return false;
    const size_t d_pos = stem.rfind("_d");
    if (d_pos == std::string::npos || d_pos < a_pos) return false;
    try {
        id = stem.substr(0, a_pos);
        activity = std::stoi(stem.substr(a_pos + 2, d_pos - a_pos - 2));
        domain = std::stoi(stem.substr(d_pos + 2));
    } catch (const std::exception &) {
        return false;
    }
    return !id.empty();
}

int cmd_preprocess(const std::string &in_dir, const std::string &out_file, int rate) {
    std::vector<fs::path> files;
    for (const auto &entry : fs::directory_iterator(in_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".txt")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    std::vector<CsiSample> accepted;
    int too_short = 0, too_long = 0, degenerate = 0, unparsed = 0;
    for (const fs::path &p : files) {
        std::string id;
        int activity = 0, domain = 0;
        if (!parse_capture_name(p.stem().string(), id, activity, domain)) {
            std::cerr << "skipping " << p << " (name must be <id>_a<act>_d<dom>.txt)\n";
            ++unparsed;
            continue;
        }
        std::ifstream in(p);
        std::vector<std::vector<float>> packets;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::istringstream ss(line);
            std::vector<float> packet;
            float v;
            while (ss >> v) packet.push_back(v);
            packets.push_back(std::move(packet));
        }
        PreprocessResult r = preprocess_stream(packets, rate, activity, domain, id);
        switch (r.status) {
            case PreprocessStatus::RejectTooShort: ++too_short; break;
            case PreprocessStatus::RejectTooLong: ++too_long; break;
            case PreprocessStatus::DegenerateRange: ++degenerate; [[fallthrough]];
            case PreprocessStatus::Ok: accepted.push_back(std::move(*r.sample)); break;
        }
    }
    write_dataset(accepted, out_file);
    std::cout << "accepted " << accepted.size() << " samples (" << degenerate << " degenerate), "
              << "rejected " << too_short << " too short, " << too_long << " too long";
    if (unparsed) std::cout << ", " << unparsed << " unparsed";
    std::cout << " -> " << out_file << "\n";
    return 0;
}

int cmd_synth(const std::string &spec_file, int64_t n, const std::string &out_file) {
    Config cfg = Config::from_file(spec_file);
    const auto specs = synth_specs_from(cfg);
    if (specs.empty()) {
        std::cerr << "spec file defines no synth.domain<k> sections\n";
        return 1;
    }
    const int activities = static_cast<int>(cfg.get_int("synth.activities", kNumActivities));
    const auto generator = default_activity_template();
    std::vector<CsiSample> all;
    for (const auto &spec : specs) {
        auto split = synthesize_domain(spec, n, generator, SplitName::Train, activities);
        for (CsiSample &s : split.samples) all.push_back(std::move(s));
    }
    write_dataset(all, out_file);
    std::cout << "wrote " << all.size() << " samples across " << specs.size() << " domains -> "
              << out_file << "\n";
    return 0;
}

std::map<SplitName, DatasetSplit> splits_from_config(const Config &cfg,
                                                     std::vector<CsiSample> samples) {
    std::vector<std::pair<int, SplitName>> assignment;
    const auto src = cfg.get_list("split.source_domains");
    const auto tgt = cfg.get_list("split.target_domains");
    if (src.empty() && tgt.empty()) {
        // Everything is source data: train/val split within each domain.
        std::set<int> domains;
        for (const CsiSample &s : samples) domains.insert(s.domain);
        for (int d : domains) {
            assignment.emplace_back(d, SplitName::Train);
            assignment.emplace_back(d, SplitName::Val);
        }
    } else {
        for (const std::string &d : src) {
            assignment.emplace_back(std::stoi(d), SplitName::Train);
            assignment.emplace_back(std::stoi(d), SplitName::Val);
        }
        for (const std::string &d : tgt) {
            assignment.emplace_back(std::stoi(d), SplitName::ValTta);
            assignment.emplace_back(std::stoi(d), SplitName::Test);
        }
    }
    SplitOptions opts;
    opts.val_fraction = cfg.get_double("split.val_fraction", opts.val_fraction);
    opts.val_tta_fraction = cfg.get_double("split.val_tta_fraction", opts.val_tta_fraction);
    opts.rng_seed = static_cast<uint64_t>(cfg.get_int("split.rng_seed", 0));
    return build_splits(samples, assignment, opts);
}

int cmd_train(const std::string &data_file, const std::string &config_file,
              const std::string &out_dir) {
    Config cfg = config_file.empty() ? Config{} : Config::from_file(config_file);
    auto splits = splits_from_config(cfg, read_dataset(data_file));

    ModelConfig model_cfg = ModelConfig::from_config(cfg);
    DatConfig dat_cfg = dat_config_from(cfg);
    AugmentConfig aug_cfg = augment_config_from(cfg);

    TrainResult result = train_dat(splits[SplitName::Train], splits[SplitName::Val], model_cfg,
                                   dat_cfg, aug_cfg);

    fs::create_directories(out_dir);
    write_archive(result.model.to_archive(), out_dir + "/model.ntar");
    write_archive(result.stats.to_archive(result.model.config().hash()),
                  out_dir + "/source_stats.ntar");

    // Effective model config so the checkpoint can be reloaded stand-alone.
    Config saved = cfg;
    for (const auto &[k, v] : result.model.config().to_config().entries()) saved.set(k, v);
    std::ofstream(out_dir + "/config.cfg") << saved.canonical();

    std::ofstream log(out_dir + "/train_log.txt");
    log << "# config_hash=" << std::hex << cfg.hash() << std::dec << "\n";
    log << "# step L L_a L_d L_c lambda val_f1\n";
    for (const TrainLogEntry &e : result.log)
        log << e.step << ' ' << e.total << ' ' << e.l_a << ' ' << e.l_d << ' ' << e.l_c << ' '
            << e.lambda << ' ' << e.val_f1 << "\n";

    nlohmann::json manifest;
    manifest["config_hash"] = cfg.hash();
    manifest["model_config_hash"] = result.model.config().hash();
    manifest["train_samples"] = splits[SplitName::Train].samples.size();
    manifest["val_samples"] = splits[SplitName::Val].samples.size();
    manifest["best_val_f1"] = result.best_val_f1;
    manifest["domains"] = result.domain_remap.size();
    std::ofstream(out_dir + "/manifest.json") << manifest.dump(2) << "\n";

    std::cout << "trained on " << splits[SplitName::Train].samples.size() << " samples, best val F1 "
              << result.best_val_f1 << " -> " << out_dir << "\n";
    return 0;
}

ModelGraph load_checkpoint(const std::string &ckpt_dir) {
    Config cfg = Config::from_file(ckpt_dir + "/config.cfg");
    ModelConfig mc = ModelConfig::from_config(cfg);
    // n_domains was re-derived during training; the stored config has it.
    return ModelGraph::from_archive(mc, read_archive(ckpt_dir + "/model.ntar"));
}

int cmd_adapt(const std::string &ckpt_dir, const std::string &stats_file,
              const std::string &stream_file, const std::string &config_file,
              const std::string &out_file) {
    ModelGraph model = load_checkpoint(ckpt_dir);
    SourceStatistics stats = SourceStatistics::from_archive(read_archive(stats_file));
    Config cfg = config_file.empty() ? Config{} : Config::from_file(config_file);
    AdaptationConfig adapt_cfg = adaptation_config_from(cfg);

    std::vector<CsiSample> stream = read_dataset(stream_file);
    TtaAdaptor adaptor(model, stats, adapt_cfg);

    std::ofstream out(out_file);
    out << "# config_hash=" << std::hex << cfg.hash() << std::dec << "\n";
    out << "# sample_id prediction latency_ms tta_loss drift_norm\n";
    int correct = 0;
    for (const CsiSample &s : stream) {
        const auto t0 = std::chrono::steady_clock::now();
        AdaptOutcome o = adaptor.step(s);
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        out << s.sample_id << ' ' << o.prediction << ' ' << ms << ' ' << o.tta_loss << ' '
            << o.drift_norm << "\n";
        if (o.prediction == s.activity) ++correct;
    }
    std::cout << "adapted over " << stream.size() << " samples, stream accuracy "
              << (stream.empty() ? 0.0
                                 : static_cast<double>(correct) / static_cast<double>(stream.size()))
              << " -> " << out_file << "\n";
    return 0;
}

int cmd_eval(const std::string &ckpt_dir, const std::string &data_file, const std::string &mode,
             bool adapt, const std::string &stats_file, const std::string &config_file,
             const std::string &out_file) {
    ModelGraph model = load_checkpoint(ckpt_dir);
    Config cfg = config_file.empty() ? Config{} : Config::from_file(config_file);

    DatasetSplit split;
    split.name = SplitName::Test;
    split.samples = read_dataset(data_file);
    SequenceSpec spec = sequence_spec_from(cfg, mode);

    std::unique_ptr<Predictor> predictor;
    if (adapt) {
        if (stats_file.empty()) {
            std::cerr << "--adapt requires --stats\n";
            return 1;
        }
        SourceStatistics stats = SourceStatistics::from_archive(read_archive(stats_file));
        predictor = std::make_unique<AdaptingPredictor>(model, stats,
                                                        adaptation_config_from(cfg));
    } else {
        predictor = std::make_unique<FrozenPredictor>(model);
    }

    RunMetrics m = evaluate(*predictor, split, spec);
    if (!out_file.empty()) {
        std::ofstream out(out_file);
        out << "# config_hash=" << std::hex << cfg.hash() << std::dec << "\n";
        out << "# sample_id prediction truth domain latency_ms tta_loss drift_norm\n";
        for (const SampleRecord &r : m.records)
            out << r.sample_id << ' ' << r.prediction << ' ' << r.truth << ' ' << r.domain << ' '
                << r.latency_ms << ' ' << r.tta_loss << ' ' << r.drift_norm << "\n";
    }
    std::cout << "samples " << m.records.size() << "  accuracy " << m.accuracy << "  macro-F1 "
              << m.macro_f1 << "\n";
    return 0;
}

int cmd_bench(const std::string &ckpt_dir, const std::string &stats_file,
              const std::string &data_file, const std::string &config_file, int64_t iters,
              int64_t warmup) {
    ModelGraph model = load_checkpoint(ckpt_dir);
    SourceStatistics stats = SourceStatistics::from_archive(read_archive(stats_file));
    Config cfg = config_file.empty() ? Config{} : Config::from_file(config_file);
    std::vector<CsiSample> samples = read_dataset(data_file);

    auto results = bench_inference(model, stats, adaptation_config_from(cfg), samples, iters,
                                   warmup);
    std::cout << std::fixed << std::setprecision(3);
    for (const char *v : {"frozen", "tta", "tta_reset"})
        std::cout << std::setw(10) << v << "  " << results[v].mean_ms << " ms  (+/- "
                  << results[v].std_ms << ", n=" << results[v].iters << ")\n";
    std::cout << "tta_reset/frozen ratio: "
              << results["tta_reset"].mean_ms / results["frozen"].mean_ms << "\n";
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"DATTA: domain-adversarial test-time adaptation for WiFi CSI HAR"};
    app.require_subcommand(1);

    std::string kernel_mode = "parallel";
    app.add_option("--kernel-mode", kernel_mode, "compute kernels: serial or parallel")
        ->check(CLI::IsMember({"serial", "parallel"}));

    std::string in_dir, out_path, spec_file, config_file, ckpt_dir, stats_file, data_file, mode;
    int rate = 100;
    int64_t count = 100, iters = 1000, warmup = 100;
    bool adapt = false;

    auto *prep = app.add_subcommand("preprocess", "preprocess raw capture files into a dataset");
    prep->add_option("--in", in_dir, "directory of capture .txt files")->required();
    prep->add_option("--out", out_path, "output dataset file")->required();
    prep->add_option("--rate", rate, "capture packet rate in Hz")->required();

    auto *synth = app.add_subcommand("synth", "synthesize domain-shifted samples");
    synth->add_option("--spec", spec_file, "synth spec config file")->required();
    synth->add_option("--n", count, "samples per domain")->required();
    synth->add_option("--out", out_path, "output dataset file")->required();

    auto *train = app.add_subcommand("train", "domain-adversarial training");
    train->add_option("--data", data_file, "dataset file")->required();
    train->add_option("--config", config_file, "run config file");
    train->add_option("--out", ckpt_dir, "checkpoint directory")->required();

    auto *adaptc = app.add_subcommand("adapt", "online test-time adaptation over a stream");
    adaptc->add_option("--ckpt", ckpt_dir, "checkpoint directory")->required();
    adaptc->add_option("--stats", stats_file, "source statistics file")->required();
    adaptc->add_option("--stream", data_file, "stream dataset file")->required();
    adaptc->add_option("--config", config_file, "run config file");
    adaptc->add_option("--out", out_path, "metrics output file")->required();

    auto *evalc = app.add_subcommand("eval", "evaluate a model or adaptor on a split");
    evalc->add_option("--ckpt", ckpt_dir, "checkpoint directory")->required();
    evalc->add_option("--data", data_file, "dataset file")->required();
    evalc->add_option("--mode", mode, "ascending|descending|alternating|shuffled")
        ->default_val("shuffled");
    evalc->add_flag("--adapt", adapt, "adapt online while evaluating");
    evalc->add_option("--stats", stats_file, "source statistics (with --adapt)");
    evalc->add_option("--config", config_file, "run config file");
    evalc->add_option("--out", out_path, "metrics output file");

    auto *bench = app.add_subcommand("bench", "inference-latency benchmark (batch size 1)");
    bench->add_option("--ckpt", ckpt_dir, "checkpoint directory")->required();
    bench->add_option("--stats", stats_file, "source statistics file")->required();
    bench->add_option("--data", data_file, "dataset file")->required();
    bench->add_option("--config", config_file, "run config file");
    bench->add_option("--iters", iters, "measured iterations");
    bench->add_option("--warmup", warmup, "warm-up iterations");

    auto *exp = app.add_subcommand("exp", "run a declarative experiment");
    exp->add_option("--config", config_file, "experiment config file")->required();
    exp->add_option("--out", out_path, "artifact directory")->default_val("exp_out");

    CLI11_PARSE(app, argc, argv);
    kernels::set_mode(kernel_mode == "serial" ? kernels::Mode::Serial : kernels::Mode::Parallel);

    try {
        if (prep->parsed()) return cmd_preprocess(in_dir, out_path, rate);
        if (synth->parsed()) return cmd_synth(spec_file, count, out_path);
        if (train->parsed()) return cmd_train(data_file, config_file, ckpt_dir);
        if (adaptc->parsed()) return cmd_adapt(ckpt_dir, stats_file, data_file, config_file, out_path);
        if (evalc->parsed())
            return cmd_eval(ckpt_dir, data_file, mode, adapt, stats_file, config_file, out_path);
        if (bench->parsed())
            return cmd_bench(ckpt_dir, stats_file, data_file, config_file, iters, warmup);
        if (exp->parsed()) {
            const std::string dir = run_experiment(Config::from_file(config_file), out_path);
            std::cout << "experiment artifacts in " << dir << "\n";
            return 0;
        }
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
