#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "datta/config.hpp"
#include "datta/data.hpp"
#include "datta/metrics.hpp"
#include "datta/model.hpp"
#include "datta/train.hpp"
#include "datta/tta.hpp"

namespace datta {

// Domain-sequence protocol for streaming evaluation.
struct SequenceSpec {
    enum class Mode { Ascending, Descending, Alternating, Shuffled };
    Mode mode = Mode::Shuffled;
    std::vector<int> domain_order;  // optional explicit order; must exist in the split
    int repeats = 0;                // per-domain block size for Alternating; 0 = whole domain
    uint64_t rng_seed = 0;          // Shuffled permutation seed
};

SequenceSpec::Mode sequence_mode_from(const std::string &name);

// Indices into split.samples in protocol order; every sample appears exactly once.
std::vector<int64_t> sequence_order(const DatasetSplit &split, const SequenceSpec &spec);

struct SampleRecord {
    std::string sample_id;
    int truth = -1;
    int prediction = -1;
    int domain = -1;
    double latency_ms = 0.0;
    double tta_loss = 0.0;
    double drift_norm = 0.0;
};

struct RunMetrics {
    std::vector<SampleRecord> records;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    std::vector<double> rolling;  // window-100 macro-F1 series

    std::vector<int> truths() const;
    std::vector<int> predictions() const;
};

struct PredictionRecord {
    int prediction = -1;
    double tta_loss = 0.0;
    double drift_norm = 0.0;
};

// A model or adaptor consuming samples strictly in stream order.
class Predictor {
public:
    virtual ~Predictor() = default;
    virtual PredictionRecord predict(const CsiSample &sample) = 0;
};

class FrozenPredictor : public Predictor {
public:
    explicit FrozenPredictor(const ModelGraph &model) : model_(model.clone()) {}
    PredictionRecord predict(const CsiSample &sample) override;

private:
    ModelGraph model_;
};

class AdaptingPredictor : public Predictor {
public:
    AdaptingPredictor(const ModelGraph &model, const SourceStatistics &stats,
                      AdaptationConfig cfg)
        : adaptor_(model, stats, std::move(cfg)) {}
    PredictionRecord predict(const CsiSample &sample) override;
    TtaAdaptor &adaptor() { return adaptor_; }

private:
    TtaAdaptor adaptor_;
};

RunMetrics evaluate(Predictor &predictor, const DatasetSplit &split, const SequenceSpec &spec);

struct LatencyStats {
    double mean_ms = 0.0;
    double std_ms = 0.0;
    int64_t iters = 0;
};

// Per-variant mean/std wall-clock per sample over n_iters measured iterations
// after warmup unmeasured ones, batch size 1. Variants: frozen, tta,
// tta_reset. Runs single-threaded to keep timings clean.
std::map<std::string, LatencyStats> bench_inference(const ModelGraph &model,
                                                    const SourceStatistics &stats,
                                                    const AdaptationConfig &cfg,
                                                    const std::vector<CsiSample> &samples,
                                                    int64_t n_iters = 1000, int64_t warmup = 100);

// Config section parsers shared by the experiment runner and the CLI.
DatConfig dat_config_from(const Config &c);
AugmentConfig augment_config_from(const Config &c);
AdaptationConfig adaptation_config_from(const Config &c);
SequenceSpec sequence_spec_from(const Config &c, const std::string &mode_name);
std::vector<SyntheticDomainSpec> synth_specs_from(const Config &c);

// Declarative experiment: data (file or synthetic) -> splits -> train ->
// evaluate per mode (frozen or adapted) with optional {augment, reset}
// ablation grid -> metrics/series files plus a manifest with seeds and the
// config hash. Returns the artifact directory.
std::string run_experiment(const Config &config, const std::string &out_dir);

} // namespace datta
