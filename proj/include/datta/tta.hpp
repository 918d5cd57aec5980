#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include "datta/model.hpp"
#include "datta/train.hpp"

namespace datta {

struct AdaptationConfig {
    std::vector<int> layer_ids{1};   // encoder layers whose statistics are aligned
    float ema_alpha = 0.1f;          // weight on the newest sample; momentum = 1 - ema_alpha
    float tta_learning_rate = 1e-6f;
    float reset_rate = 1e-4f;
    int steps_per_sample = 1;
    bool include_stem = true;        // stem/pos/class-token belong to the adapted prefix
    bool use_l1 = false;             // L1 instead of L2 statistic distances
    uint64_t rng_seed = 0;

    int max_layer() const;
    void validate() const;
};

// Per-layer sample statistics: mean/variance over the token axis, length embed_dim.
struct LayerStats {
    Tensor mean;
    Tensor var;
};

// Online adaptation state: EMA statistic estimates seeded from the source
// statistics, plus the frozen source parameter snapshot.
struct AdaptationState {
    std::map<int, Tensor> ema_mean;
    std::map<int, Tensor> ema_var;
    std::vector<std::string> source_names;
    std::vector<Tensor> source_values;
    int64_t step = 0;
    std::mt19937_64 rng;

    static AdaptationState init(ModelGraph &model, const SourceStatistics &stats,
                                const AdaptationConfig &cfg);
};

// mu_hat = a*mu(s) + (1-a)*mu_hat_prev, same recursion for the variance.
void ema_update(AdaptationState &state, const std::map<int, LayerStats> &sample_stats,
                float ema_alpha);

// Per-layer token mean/variance of the feature maps for one sample.
std::map<int, LayerStats> compute_sample_stats(ModelGraph &model, const CsiSample &sample,
                                               const std::vector<int> &layer_ids);

// L_TTA from explicit estimates: sum over layers of ||mean diff|| + ||var diff||.
double alignment_loss_from_estimates(const std::map<int, Tensor> &est_mean,
                                     const std::map<int, Tensor> &est_var,
                                     const SourceStatistics &source, bool use_l1 = false);

// L_TTA for sample s with the EMA estimates after incorporating s (the state
// itself is not modified).
double alignment_loss(ModelGraph &model, const CsiSample &sample, const AdaptationState &state,
                      const SourceStatistics &source, const AdaptationConfig &cfg);

// Bernoulli(p) mask over one tensor: masked entries take the snapshot value
// theta = m.theta_bar + (1-m).theta. Returns the number of reset entries.
size_t bernoulli_reset(Tensor &theta, const Tensor &theta_bar, float reset_rate,
                       std::mt19937_64 &rng);

// Bernoulli(p) per scalar weight: reset to the source snapshot value. Applies
// to the adapt-scope parameters; returns the number of reset weights.
size_t weight_reset(ModelGraph &model, const AdaptationState &state, float reset_rate,
                    std::mt19937_64 &rng, const AdaptationConfig &cfg);

struct AdaptOutcome {
    int prediction = -1;
    double tta_loss = 0.0;
    double drift_norm = 0.0;   // ||theta - theta_bar|| over the adapt scope
    bool skipped = false;      // non-finite loss: update skipped for this sample
    size_t reset_count = 0;
};

// One online step: forward + stats, EMA update, gradient step(s) on the
// adapted prefix, weight reset, then the prediction forward. Label-free.
AdaptOutcome adapt_step(ModelGraph &model, const CsiSample &sample, AdaptationState &state,
                        const SourceStatistics &source, const AdaptationConfig &cfg);

// Convenience wrapper owning a model copy and its state for one stream.
class TtaAdaptor {
public:
    TtaAdaptor(const ModelGraph &source_model, const SourceStatistics &stats,
               AdaptationConfig cfg);

    AdaptOutcome step(const CsiSample &sample);
    ModelGraph &model() { return model_; }
    const AdaptationState &state() const { return state_; }

private:
    ModelGraph model_;
    SourceStatistics stats_;
    AdaptationConfig cfg_;
    AdaptationState state_;
};

} // namespace datta
