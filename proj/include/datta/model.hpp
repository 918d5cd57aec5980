#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "datta/autodiff.hpp"
#include "datta/config.hpp"
#include "datta/data.hpp"
#include "datta/io.hpp"
#include "datta/tensor.hpp"

namespace datta {

struct ModelConfig {
    int64_t embed_dim = 32;
    int64_t n_encoder_layers = 4;
    int64_t n_heads = 4;
    int64_t mlp_hidden = 64;
    int64_t n_activities = kNumActivities;
    int64_t n_domains = 7;
    int64_t stem_kernel = 8;
    int64_t stem_stride = 4;
    int64_t target_param_count = 40800;
    bool include_class_token_in_stats = true;

    int64_t token_count() const { return (kTimeSteps - stem_kernel) / stem_stride + 1 + 1; }
    void validate() const;
    Config to_config() const;
    static ModelConfig from_config(const Config &c);
    uint64_t hash() const { return to_config().hash(); }
};

struct HeadOutputs {
    Tensor activity_logits;  // (B, |A|)
    Tensor activity_probs;   // (B, |A|)
    Tensor domain_probs;     // (B, |D|)
};

// Feature extractor (conv stem + Gaussian positional encoding + class token +
// 4 transformer encoder layers) plus activity and domain heads. Parameters
// are a flat named collection; forward passes run on a Tape.
class ModelGraph {
public:
    static ModelGraph create(const ModelConfig &cfg, uint64_t seed, bool zero_init_heads = false);

    const ModelConfig &config() const { return cfg_; }

    Param &param(const std::string &name);
    const Param &param(const std::string &name) const;
    std::vector<Param *> all_params();
    // Trained parameter subsets. Encoder layers are numbered 1..4.
    std::vector<Param *> adapt_scope(int max_layer, bool include_stem);
    size_t param_count(bool include_domain_head) const;

    struct Features {
        VarId cls = -1;                 // (B, E) class-token embedding of the last layer
        std::vector<VarId> layer_maps;  // per encoder layer, (B, tokens, E)
    };

    // Input batch (B, kSubcarriers, kTimeSteps); throws ShapeError otherwise.
    Features forward_features(Tape &tape, const Tensor &batch);
    VarId activity_logits(Tape &tape, VarId cls);
    // Consumes the class token only; activity logits are not concatenated.
    VarId domain_logits(Tape &tape, VarId cls);

    // Eval-mode conveniences (fresh tape per call, no gradients kept).
    HeadOutputs heads(const Tensor &batch);
    Tensor activity_probs(const Tensor &batch);
    int predict(const CsiSample &sample);

    TensorArchive to_archive() const;
    static ModelGraph from_archive(const ModelConfig &cfg, const TensorArchive &archive);

    // Deep copy of all parameter values (moments reset).
    ModelGraph clone() const;

private:
    ModelConfig cfg_;
    std::vector<Param> params_;

    explicit ModelGraph(ModelConfig cfg) : cfg_(std::move(cfg)) {}
    Param &add_param(const std::string &name, Tensor init);
    VarId encoder_layer(Tape &tape, VarId x, int layer);
};

// Stacks sample amplitudes into a (B, kSubcarriers, kTimeSteps) batch.
Tensor stack_batch(const std::vector<const CsiSample *> &samples);

} // namespace datta
