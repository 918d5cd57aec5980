#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "datta/augment.hpp"
#include "datta/data.hpp"
#include "datta/io.hpp"
#include "datta/model.hpp"

namespace datta {

// Domain-adversarial training configuration.
struct DatConfig {
    float alpha = 0.3f;              // domain-loss weight
    float beta = 0.2f;               // confidence-control weight
    float gamma = 8.0f;              // gradient-reversal scale
    int64_t epochs = 10;
    int64_t batch_size = 16;
    float learning_rate = 1e-3f;
    float prob_clamp_eps = 1e-7f;
    uint64_t rng_seed = 0;
    bool use_domain_branch = true;   // off for the plain (non-adversarial) baseline
    bool zero_init_heads = false;    // heads start at exactly uniform probabilities
    std::vector<int> stats_layer_ids{1, 2, 3, 4};
};

// Per-selected-layer feature means and variances over the training set.
struct SourceStatistics {
    std::vector<int> layer_ids;
    std::map<int, Tensor> mean;  // (embed_dim)
    std::map<int, Tensor> var;   // (embed_dim), population variance

    TensorArchive to_archive(uint64_t config_hash = 0) const;
    static SourceStatistics from_archive(const TensorArchive &archive);
};

// Closed-form per-sample losses on probability vectors (already softmaxed);
// probabilities are clamped to [eps, 1-eps] before any log.
double activity_loss(const std::vector<double> &probs, const std::vector<double> &onehot,
                     double eps = 1e-7);
double domain_loss(const std::vector<double> &probs, const std::vector<double> &onehot,
                   double eps = 1e-7);
// -sum_k [log p_k + log(1 - p_k)]: penalizes probabilities near 0 or 1.
double ccc_loss(const std::vector<double> &probs, double eps = 1e-7);
// (2 / (1 + e^(-10 p)) - 1) * gamma for training progress p in [0,1].
double lambda_schedule(double p, double gamma);
double total_loss(double l_a, double l_d, double l_c, double alpha, double beta);

// Graph-path batch losses (means over the batch). labels are class indices.
VarId cross_entropy_graph(Tape &tape, VarId probs, const std::vector<int> &labels, float eps);
VarId ccc_graph(Tape &tape, VarId probs, float eps);

struct TrainLogEntry {
    int64_t step = 0;
    float total = 0, l_a = 0, l_d = 0, l_c = 0, lambda = 0;
    float val_f1 = -1;  // most recent validation macro-F1, -1 before the first eval
};

struct TrainResult {
    ModelGraph model;
    SourceStatistics stats;
    std::vector<TrainLogEntry> log;
    std::map<int, int> domain_remap;  // original domain id -> dense 0..|D|-1
    float best_val_f1 = 0.0f;
};

// Full DAT loop: augment -> forward -> Eq.-style combined loss with the GRL on
// the domain branch -> Adam update; keeps the best-val-F1 checkpoint and ends
// by computing source statistics over the unaugmented training set.
TrainResult train_dat(const DatasetSplit &train_split, const DatasetSplit &val_split,
                      const ModelConfig &model_cfg, const DatConfig &dat_cfg,
                      const AugmentConfig &augment_cfg);

// Two-pass population mean/variance of per-layer feature rows over all
// samples and time steps. Throws EmptyDataset.
SourceStatistics compute_source_statistics(ModelGraph &model, const std::vector<CsiSample> &data,
                                           const std::vector<int> &layer_ids);

} // namespace datta
