#include "datta/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "datta/errors.hpp"
#include "datta/io.hpp"
#include "datta/kernels.hpp"

namespace datta {

namespace {
using clock_type = std::chrono::steady_clock;

double ms_since(clock_type::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock_type::now() - t0).count();
}
} // namespace

SequenceSpec::Mode sequence_mode_from(const std::string &name) {
    if (name == "ascending") return SequenceSpec::Mode::Ascending;
    if (name == "descending") return SequenceSpec::Mode::Descending;
    if (name == "alternating") return SequenceSpec::Mode::Alternating;
    if (name == "shuffled") return SequenceSpec::Mode::Shuffled;
    throw std::invalid_argument("unknown sequence mode: " + name);
}

std::vector<int64_t> sequence_order(const DatasetSplit &split, const SequenceSpec &spec) {
    std::set<int> present;
    for (const CsiSample &s : split.samples) present.insert(s.domain);
    for (int d : spec.domain_order)
        if (!present.count(d))
            throw UnknownDomain("domain " + std::to_string(d) + " not in split");

    if (spec.mode == SequenceSpec::Mode::Shuffled) {
        std::vector<int64_t> order(split.samples.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int64_t>(i);
        std::mt19937_64 rng(spec.rng_seed);
        std::shuffle(order.begin(), order.end(), rng);
        return order;
    }

    std::vector<int> domains(spec.domain_order);
    if (domains.empty()) domains.assign(present.begin(), present.end());
    if (spec.mode == SequenceSpec::Mode::Descending)
        std::reverse(domains.begin(), domains.end());

    std::map<int, std::vector<int64_t>> pools;
    for (size_t i = 0; i < split.samples.size(); ++i)
        pools[split.samples[i].domain].push_back(static_cast<int64_t>(i));

    std::vector<int64_t> order;
    order.reserve(split.samples.size());
    if (spec.mode != SequenceSpec::Mode::Alternating) {
        for (int d : domains) {
            auto it = pools.find(d);
            if (it == pools.end()) continue;
            order.insert(order.end(), it->second.begin(), it->second.end());
        }
        // Domains outside an explicit order are not emitted; with no explicit
        // order every domain is covered.
        return order;
    }

    // Alternating: blocks of `repeats` samples per domain in cyclic order
    // until every listed domain's pool is consumed.
    std::map<int, size_t> cursor;
    const size_t block = spec.repeats > 0 ? static_cast<size_t>(spec.repeats) : 0;
    bool advanced = true;
    while (advanced) {
        advanced = false;
        for (int d : domains) {
            auto &pool = pools[d];
            size_t &c = cursor[d];
            if (c >= pool.size()) continue;
            const size_t take = block == 0 ? pool.size() - c : std::min(block, pool.size() - c);
            for (size_t i = 0; i < take; ++i) order.push_back(pool[c + i]);
            c += take;
            advanced = true;
        }
    }
    return order;
}

std::vector<int> RunMetrics::truths() const {
    std::vector<int> out;
    out.reserve(records.size());
    for (const SampleRecord &r : records) out.push_back(r.truth);
    return out;
}

std::vector<int> RunMetrics::predictions() const {
    std::vector<int> out;
    out.reserve(records.size());
    for (const SampleRecord &r : records) out.push_back(r.prediction);
    return out;
}

PredictionRecord FrozenPredictor::predict(const CsiSample &sample) {
    PredictionRecord r;
    r.prediction = model_.predict(sample);
    return r;
}

PredictionRecord AdaptingPredictor::predict(const CsiSample &sample) {
    AdaptOutcome o = adaptor_.step(sample);
    return PredictionRecord{o.prediction, o.tta_loss, o.drift_norm};
}

RunMetrics evaluate(Predictor &predictor, const DatasetSplit &split, const SequenceSpec &spec) {
    RunMetrics metrics;
    const std::vector<int64_t> order = sequence_order(split, spec);
    metrics.records.reserve(order.size());
    for (int64_t idx : order) {
        const CsiSample &s = split.samples[static_cast<size_t>(idx)];
        const auto t0 = clock_type::now();
        PredictionRecord p = predictor.predict(s);
        SampleRecord rec;
        rec.latency_ms = ms_since(t0);
        rec.sample_id = s.sample_id;
        rec.truth = s.activity;
        rec.prediction = p.prediction;
        rec.domain = s.domain;
        rec.tta_loss = p.tta_loss;
        rec.drift_norm = p.drift_norm;
        metrics.records.push_back(std::move(rec));
    }
    metrics.accuracy = accuracy(metrics.truths(), metrics.predictions());
    metrics.macro_f1 = datta::macro_f1(metrics.truths(), metrics.predictions());
    metrics.rolling = rolling_f1(metrics.truths(), metrics.predictions(), 100);
    return metrics;
}

std::map<std::string, LatencyStats> bench_inference(const ModelGraph &model,
                                                    const SourceStatistics &stats,
                                                    const AdaptationConfig &cfg,
                                                    const std::vector<CsiSample> &samples,
                                                    int64_t n_iters, int64_t warmup) {
    if (samples.empty()) throw EmptyDataset("bench_inference: no samples");
    // Single worker: parallel kernels stay off so timings are not contaminated.
    const kernels::Mode saved = kernels::mode();
    kernels::set_mode(kernels::Mode::Serial);

    std::map<std::string, LatencyStats> out;
    for (const char *variant_name : {"frozen", "tta", "tta_reset"}) {
        const std::string variant(variant_name);
        std::unique_ptr<Predictor> predictor;
        if (variant == "frozen") {
            predictor = std::make_unique<FrozenPredictor>(model);
        } else {
            AdaptationConfig c = cfg;
            c.reset_rate = variant == "tta_reset"
                               ? (cfg.reset_rate > 0.0f ? cfg.reset_rate : 1e-4f)
                               : 0.0f;
            predictor = std::make_unique<AdaptingPredictor>(model, stats, c);
        }
        std::vector<double> times;
        times.reserve(static_cast<size_t>(n_iters));
        for (int64_t i = 0; i < warmup + n_iters; ++i) {
            const CsiSample &s = samples[static_cast<size_t>(i % samples.size())];
            const auto t0 = clock_type::now();
            predictor->predict(s);
            const double dt = ms_since(t0);
            if (i >= warmup) times.push_back(dt);
        }
        double mean = 0.0;
        for (double t : times) mean += t;
        mean /= static_cast<double>(times.size());
        double var = 0.0;
        for (double t : times) var += (t - mean) * (t - mean);
        var /= static_cast<double>(times.size());
        out[variant] = LatencyStats{mean, std::sqrt(var), static_cast<int64_t>(times.size())};
    }
    kernels::set_mode(saved);
    return out;
}

DatConfig dat_config_from(const Config &c) {
    DatConfig d;
    d.alpha = static_cast<float>(c.get_double("train.alpha", d.alpha));
    d.beta = static_cast<float>(c.get_double("train.beta", d.beta));
    d.gamma = static_cast<float>(c.get_double("train.gamma", d.gamma));
    d.epochs = c.get_int("train.epochs", d.epochs);
    d.batch_size = c.get_int("train.batch_size", d.batch_size);
    d.learning_rate = static_cast<float>(c.get_double("train.learning_rate", d.learning_rate));
    d.prob_clamp_eps = static_cast<float>(c.get_double("train.prob_clamp_eps", d.prob_clamp_eps));
    d.rng_seed = static_cast<uint64_t>(c.get_int("train.rng_seed", 0));
    d.use_domain_branch = c.get_bool("train.use_domain_branch", d.use_domain_branch);
    const auto layers = c.get_list("train.stats_layer_ids");
    if (!layers.empty()) {
        d.stats_layer_ids.clear();
        for (const std::string &l : layers) d.stats_layer_ids.push_back(std::stoi(l));
    }
    return d;
}

AugmentConfig augment_config_from(const Config &c) {
    AugmentConfig a;
    a.amplitude_jitter_sigma =
        static_cast<float>(c.get_double("augment.amplitude_jitter_sigma", a.amplitude_jitter_sigma));
    a.max_rotation_fraction =
        static_cast<float>(c.get_double("augment.max_rotation_fraction", a.max_rotation_fraction));
    a.pixel_dropout_rate =
        static_cast<float>(c.get_double("augment.pixel_dropout_rate", a.pixel_dropout_rate));
    a.row_dropout_rate =
        static_cast<float>(c.get_double("augment.row_dropout_rate", a.row_dropout_rate));
    a.apply_probability =
        static_cast<float>(c.get_double("augment.apply_probability", a.apply_probability));
    a.rng_seed = static_cast<uint64_t>(c.get_int("augment.rng_seed", 0));
    return a;
}

AdaptationConfig adaptation_config_from(const Config &c) {
    AdaptationConfig a;
    const auto layers = c.get_list("tta.layer_ids");
    if (!layers.empty()) {
        a.layer_ids.clear();
        for (const std::string &l : layers) a.layer_ids.push_back(std::stoi(l));
    }
    a.ema_alpha = static_cast<float>(c.get_double("tta.ema_alpha", a.ema_alpha));
    a.tta_learning_rate =
        static_cast<float>(c.get_double("tta.learning_rate", a.tta_learning_rate));
    a.reset_rate = static_cast<float>(c.get_double("tta.reset_rate", a.reset_rate));
    a.steps_per_sample = static_cast<int>(c.get_int("tta.steps_per_sample", a.steps_per_sample));
    a.include_stem = c.get_bool("tta.include_stem", a.include_stem);
    a.use_l1 = c.get_bool("tta.use_l1", a.use_l1);
    a.rng_seed = static_cast<uint64_t>(c.get_int("tta.rng_seed", 0));
    return a;
}

SequenceSpec sequence_spec_from(const Config &c, const std::string &mode_name) {
    SequenceSpec s;
    s.mode = sequence_mode_from(mode_name);
    for (const std::string &d : c.get_list("eval.domain_order")) s.domain_order.push_back(std::stoi(d));
    s.repeats = static_cast<int>(c.get_int("eval.repeats", 0));
    s.rng_seed = static_cast<uint64_t>(c.get_int("eval.rng_seed", 0));
    return s;
}

std::vector<SyntheticDomainSpec> synth_specs_from(const Config &c) {
    std::vector<SyntheticDomainSpec> specs;
    const int64_t n = c.get_int("synth.n_domains", 0);
    for (int64_t k = 0; k < n; ++k) {
        const std::string p = "synth.domain" + std::to_string(k) + ".";
        SyntheticDomainSpec s;
        s.domain_id = static_cast<int>(c.get_int(p + "id", k));
        s.amplitude_offset = static_cast<float>(c.get_double(p + "offset", 0.0));
        s.amplitude_scale = static_cast<float>(c.get_double(p + "scale", 1.0));
        s.noise_sigma = static_cast<float>(c.get_double(p + "noise", 0.0));
        s.rng_seed = static_cast<uint64_t>(c.get_int(p + "seed", 1000 + k));
        const double slope = c.get_double(p + "gain_slope", 0.0);
        s.subcarrier_response.resize(static_cast<size_t>(kSubcarriers));
        for (int64_t f = 0; f < kSubcarriers; ++f) {
            const double x = static_cast<double>(f) / static_cast<double>(kSubcarriers - 1) - 0.5;
            s.subcarrier_response[static_cast<size_t>(f)] =
                static_cast<float>(std::exp(slope * x));
        }
        specs.push_back(std::move(s));
    }
    return specs;
}

namespace {

// Wall-clock latency deliberately stays out of experiment artifacts so that
// identical configs reproduce identical files; `datta adapt` reports it.
void write_metrics_file(const std::string &path, const RunMetrics &m, uint64_t config_hash) {
    std::ofstream out(path);
    out << "# config_hash=" << std::hex << config_hash << std::dec << "\n";
    out << "# sample_id prediction truth domain tta_loss drift_norm\n";
    for (const SampleRecord &r : m.records)
        out << r.sample_id << ' ' << r.prediction << ' ' << r.truth << ' ' << r.domain << ' '
            << r.tta_loss << ' ' << r.drift_norm << "\n";
}

void write_series_file(const std::string &path, const std::vector<double> &series,
                       uint64_t config_hash) {
    std::ofstream out(path);
    out << "# config_hash=" << std::hex << config_hash << std::dec << "\n";
    for (double v : series) out << v << "\n";
}

} // namespace

std::string run_experiment(const Config &config, const std::string &out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const uint64_t chash = config.hash();

    // --- data ------------------------------------------------------------
    std::vector<CsiSample> all;
    if (config.has("data.file")) {
        all = read_dataset(config.get("data.file", ""));
    } else {
        const auto specs = synth_specs_from(config);
        if (specs.empty()) throw EmptyDataset("run_experiment: no data.file and no synth domains");
        const int64_t per_domain = config.get_int("synth.per_domain", 200);
        const int activities =
            static_cast<int>(config.get_int("synth.activities", kNumActivities));
        const auto generator = default_activity_template();
        for (const auto &spec : specs) {
            auto split = synthesize_domain(spec, per_domain, generator, SplitName::Train,
                                           activities);
            for (CsiSample &s : split.samples) all.push_back(std::move(s));
        }
    }

    std::vector<std::pair<int, SplitName>> assignment;
    for (const std::string &d : config.get_list("split.source_domains")) {
        assignment.emplace_back(std::stoi(d), SplitName::Train);
        assignment.emplace_back(std::stoi(d), SplitName::Val);
    }
    for (const std::string &d : config.get_list("split.target_domains")) {
        assignment.emplace_back(std::stoi(d), SplitName::ValTta);
        assignment.emplace_back(std::stoi(d), SplitName::Test);
    }
    SplitOptions opts;
    opts.val_fraction = config.get_double("split.val_fraction", opts.val_fraction);
    opts.val_tta_fraction = config.get_double("split.val_tta_fraction", opts.val_tta_fraction);
    opts.rng_seed = static_cast<uint64_t>(config.get_int("split.rng_seed", 0));
    auto splits = build_splits(all, assignment, opts);

    // --- ablation grid ---------------------------------------------------
    const auto grid_axes = config.get_list("exp.grid");
    bool grid_augment = false, grid_reset = false;
    for (const std::string &axis : grid_axes) {
        if (axis == "augment") grid_augment = true;
        else if (axis == "reset") grid_reset = true;
        else throw std::invalid_argument("exp.grid: unknown axis " + axis);
    }
    const std::vector<bool> augment_values = grid_augment ? std::vector<bool>{false, true}
                                                          : std::vector<bool>{true};
    const std::vector<bool> reset_values = grid_reset ? std::vector<bool>{false, true}
                                                      : std::vector<bool>{true};

    ModelConfig model_cfg = ModelConfig::from_config(config);
    DatConfig dat_cfg = dat_config_from(config);
    AugmentConfig aug_cfg = augment_config_from(config);
    AdaptationConfig adapt_cfg = adaptation_config_from(config);
    const bool adapt = config.get_bool("eval.adapt", true);
    auto modes = config.get_list("eval.modes");
    if (modes.empty()) modes.push_back("shuffled");

    nlohmann::json manifest;
    manifest["config_hash"] = chash;
    manifest["seeds"] = {{"train", dat_cfg.rng_seed},
                         {"augment", aug_cfg.rng_seed},
                         {"tta", adapt_cfg.rng_seed},
                         {"split", opts.rng_seed},
                         {"eval", config.get_int("eval.rng_seed", 0)}};
    manifest["artifacts"] = nlohmann::json::array();

    std::ofstream results(out_dir + "/results.tsv");
    results << "augment\treset\tmode\tsamples\taccuracy\tmacro_f1\n";

    for (bool use_augment : augment_values) {
        AugmentConfig aug = aug_cfg;
        if (!use_augment) aug.apply_probability = 0.0f;
        TrainResult trained = train_dat(splits[SplitName::Train], splits[SplitName::Val],
                                        model_cfg, dat_cfg, aug);

        const std::string ck = out_dir + "/model_aug" + (use_augment ? "1" : "0") + ".ntar";
        write_archive(trained.model.to_archive(), ck);
        write_archive(trained.stats.to_archive(trained.model.config().hash()),
                      out_dir + "/stats_aug" + (use_augment ? "1" : "0") + ".ntar");

        for (bool use_reset : reset_values) {
            for (const std::string &mode : modes) {
                SequenceSpec spec = sequence_spec_from(config, mode);
                std::unique_ptr<Predictor> predictor;
                if (adapt) {
                    AdaptationConfig a = adapt_cfg;
                    if (!use_reset) a.reset_rate = 0.0f;
                    predictor = std::make_unique<AdaptingPredictor>(trained.model, trained.stats,
                                                                    a);
                } else {
                    predictor = std::make_unique<FrozenPredictor>(trained.model);
                }
                RunMetrics m = evaluate(*predictor, splits[SplitName::Test], spec);

                std::string tag = mode;
                tag += use_augment ? "_aug1" : "_aug0";
                tag += use_reset ? "_reset1" : "_reset0";
                write_metrics_file(out_dir + "/metrics_" + tag + ".txt", m, chash);
                write_series_file(out_dir + "/rolling_" + tag + ".txt", m.rolling, chash);
                manifest["artifacts"].push_back("metrics_" + tag + ".txt");
                manifest["artifacts"].push_back("rolling_" + tag + ".txt");
                results << (use_augment ? 1 : 0) << '\t' << (use_reset ? 1 : 0) << '\t' << mode
                        << '\t' << m.records.size() << '\t' << m.accuracy << '\t' << m.macro_f1
                        << "\n";
                if (!adapt) break;  // reset axis is meaningless for a frozen model
            }
            if (!adapt) break;
        }
    }

    std::ofstream(out_dir + "/manifest.json") << manifest.dump(2) << "\n";
    return out_dir;
}

} // namespace datta
