#include "datta/model.hpp"

#include <cmath>
#include <random>

#include "datta/errors.hpp"
#include "datta/kernels.hpp"

namespace datta {

void ModelConfig::validate() const {
    if (n_encoder_layers != 4) throw ShapeError("ModelConfig: n_encoder_layers must be 4");
    if (embed_dim <= 0 || n_heads <= 0 || embed_dim % n_heads != 0)
        throw ShapeError("ModelConfig: embed_dim must be divisible by n_heads");
    if (stem_kernel <= 0 || stem_stride <= 0 || stem_kernel > kTimeSteps)
        throw ShapeError("ModelConfig: bad stem geometry");
    if (n_activities <= 0 || n_domains <= 0 || mlp_hidden <= 0)
        throw ShapeError("ModelConfig: bad head dims");
}

Config ModelConfig::to_config() const {
    Config c;
    c.set("model.embed_dim", std::to_string(embed_dim));
    c.set("model.n_encoder_layers", std::to_string(n_encoder_layers));
    c.set("model.n_heads", std::to_string(n_heads));
    c.set("model.mlp_hidden", std::to_string(mlp_hidden));
    c.set("model.n_activities", std::to_string(n_activities));
    c.set("model.n_domains", std::to_string(n_domains));
    c.set("model.stem_kernel", std::to_string(stem_kernel));
    c.set("model.stem_stride", std::to_string(stem_stride));
    c.set("model.include_class_token_in_stats",
          include_class_token_in_stats ? "true" : "false");
    return c;
}

ModelConfig ModelConfig::from_config(const Config &c) {
    ModelConfig m;
    m.embed_dim = c.get_int("model.embed_dim", m.embed_dim);
    m.n_encoder_layers = c.get_int("model.n_encoder_layers", m.n_encoder_layers);
    m.n_heads = c.get_int("model.n_heads", m.n_heads);
    m.mlp_hidden = c.get_int("model.mlp_hidden", m.mlp_hidden);
    m.n_activities = c.get_int("model.n_activities", m.n_activities);
    m.n_domains = c.get_int("model.n_domains", m.n_domains);
    m.stem_kernel = c.get_int("model.stem_kernel", m.stem_kernel);
    m.stem_stride = c.get_int("model.stem_stride", m.stem_stride);
    m.include_class_token_in_stats =
        c.get_bool("model.include_class_token_in_stats", m.include_class_token_in_stats);
    m.target_param_count = c.get_int("model.target_param_count", m.target_param_count);
    return m;
}

Param &ModelGraph::add_param(const std::string &name, Tensor init) {
    params_.emplace_back(name, std::move(init));
    return params_.back();
}

namespace {

Tensor xavier(std::mt19937_64 &rng, std::vector<int64_t> shape, int64_t fan_in, int64_t fan_out) {
    const float limit = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
    std::uniform_real_distribution<float> dist(-limit, limit);
    Tensor t(std::move(shape));
    for (float &v : t.data) v = dist(rng);
    return t;
}

Tensor small_normal(std::mt19937_64 &rng, std::vector<int64_t> shape, float sigma) {
    std::normal_distribution<float> dist(0.0f, sigma);
    Tensor t(std::move(shape));
    for (float &v : t.data) v = dist(rng);
    return t;
}

} // namespace

ModelGraph ModelGraph::create(const ModelConfig &cfg, uint64_t seed, bool zero_init_heads) {
    cfg.validate();
    ModelGraph m(cfg);
    const int64_t e = cfg.embed_dim;
    std::mt19937_64 rng(hash_combine(seed, 0x6d6f64656cull));

    m.add_param("stem.weight",
                xavier(rng, {e, kSubcarriers, cfg.stem_kernel}, kSubcarriers * cfg.stem_kernel, e));
    m.add_param("stem.bias", Tensor({e}));

    // Gaussian positional bumps: centers spread over the token axis,
    // widths start wide enough to overlap neighbours.
    const int64_t stem_tokens = (kTimeSteps - cfg.stem_kernel) / cfg.stem_stride + 1;
    Tensor centers({e});
    for (int64_t j = 0; j < e; ++j)
        centers.data[j] = (static_cast<float>(j) + 0.5f) / static_cast<float>(e) *
                          static_cast<float>(stem_tokens - 1);
    Tensor widths({e}, static_cast<float>(stem_tokens) / 8.0f);
    m.add_param("pos.centers", std::move(centers));
    m.add_param("pos.widths", std::move(widths));
    m.add_param("cls_token", small_normal(rng, {e}, 0.02f));

    for (int l = 1; l <= static_cast<int>(cfg.n_encoder_layers); ++l) {
        const std::string p = "enc" + std::to_string(l) + ".";
        for (const char *proj : {"attn.q", "attn.k", "attn.v", "attn.out"}) {
            m.add_param(p + proj + ".weight", xavier(rng, {e, e}, e, e));
            m.add_param(p + proj + ".bias", Tensor({e}));
        }
        m.add_param(p + "ln1.gain", Tensor({e}, 1.0f));
        m.add_param(p + "ln1.bias", Tensor({e}));
        m.add_param(p + "ff.fc1.weight", xavier(rng, {e, cfg.mlp_hidden}, e, cfg.mlp_hidden));
        m.add_param(p + "ff.fc1.bias", Tensor({cfg.mlp_hidden}));
        m.add_param(p + "ff.fc2.weight", xavier(rng, {cfg.mlp_hidden, e}, cfg.mlp_hidden, e));
        m.add_param(p + "ff.fc2.bias", Tensor({e}));
        m.add_param(p + "ln2.gain", Tensor({e}, 1.0f));
        m.add_param(p + "ln2.bias", Tensor({e}));
    }

    auto head = [&](const std::string &name, int64_t out_dim) {
        if (zero_init_heads) {
            m.add_param(name + ".fc1.weight", Tensor({e, e}));
            m.add_param(name + ".fc1.bias", Tensor({e}));
            m.add_param(name + ".fc2.weight", Tensor({e, out_dim}));
            m.add_param(name + ".fc2.bias", Tensor({out_dim}));
        } else {
            m.add_param(name + ".fc1.weight", xavier(rng, {e, e}, e, e));
            m.add_param(name + ".fc1.bias", Tensor({e}));
            m.add_param(name + ".fc2.weight", xavier(rng, {e, out_dim}, e, out_dim));
            m.add_param(name + ".fc2.bias", Tensor({out_dim}));
        }
    };
    head("act_head", cfg.n_activities);
    head("dom_head", cfg.n_domains);
    return m;
}

Param &ModelGraph::param(const std::string &name) {
    for (Param &p : params_)
        if (p.name == name) return p;
    throw ShapeError("unknown parameter: " + name);
}

const Param &ModelGraph::param(const std::string &name) const {
    for (const Param &p : params_)
        if (p.name == name) return p;
    throw ShapeError("unknown parameter: " + name);
}

std::vector<Param *> ModelGraph::all_params() {
    std::vector<Param *> out;
    out.reserve(params_.size());
    for (Param &p : params_) out.push_back(&p);
    return out;
}

std::vector<Param *> ModelGraph::adapt_scope(int max_layer, bool include_stem) {
    std::vector<Param *> out;
    for (Param &p : params_) {
        const std::string &n = p.name;
        const bool stem_like = n.rfind("stem.", 0) == 0 || n.rfind("pos.", 0) == 0 ||
                               n.rfind("cls_token", 0) == 0;
        if (stem_like) {
            if (include_stem) out.push_back(&p);
            continue;
        }
        if (n.rfind("enc", 0) == 0) {
            const int layer = n[3] - '0';
            if (layer <= max_layer) out.push_back(&p);
        }
    }
    return out;
}

size_t ModelGraph::param_count(bool include_domain_head) const {
    size_t count = 0;
    for (const Param &p : params_) {
        if (!include_domain_head && p.name.rfind("dom_head.", 0) == 0) continue;
        count += static_cast<size_t>(p.value.numel());
    }
    return count;
}

VarId ModelGraph::encoder_layer(Tape &tape, VarId x, int layer) {
    const std::string p = "enc" + std::to_string(layer) + ".";
    const int64_t e = cfg_.embed_dim;
    const int64_t hd = e / cfg_.n_heads;

    VarId q = tape.linear(x, tape.param(param(p + "attn.q.weight")),
                          tape.param(param(p + "attn.q.bias")));
    VarId k = tape.linear(x, tape.param(param(p + "attn.k.weight")),
                          tape.param(param(p + "attn.k.bias")));
    VarId v = tape.linear(x, tape.param(param(p + "attn.v.weight")),
                          tape.param(param(p + "attn.v.bias")));

    std::vector<VarId> head_ctx;
    const float scale = 1.0f / std::sqrt(static_cast<float>(hd));
    for (int64_t h = 0; h < cfg_.n_heads; ++h) {
        VarId qh = tape.slice_lastdim(q, h * hd, hd);
        VarId kh = tape.slice_lastdim(k, h * hd, hd);
        VarId vh = tape.slice_lastdim(v, h * hd, hd);
        VarId scores = tape.affine(tape.bmm(qh, kh, false, true), scale, 0.0f);
        VarId attn = tape.softmax_lastdim(scores);
        head_ctx.push_back(tape.bmm(attn, vh, false, false));
    }
    VarId ctx = cfg_.n_heads == 1 ? head_ctx[0] : tape.concat_lastdim(head_ctx);
    VarId proj = tape.linear(ctx, tape.param(param(p + "attn.out.weight")),
                             tape.param(param(p + "attn.out.bias")));
    VarId x1 = tape.layernorm(tape.add(x, proj), tape.param(param(p + "ln1.gain")),
                              tape.param(param(p + "ln1.bias")));

    VarId h1 = tape.relu(tape.linear(x1, tape.param(param(p + "ff.fc1.weight")),
                                     tape.param(param(p + "ff.fc1.bias"))));
    VarId h2 = tape.linear(h1, tape.param(param(p + "ff.fc2.weight")),
                           tape.param(param(p + "ff.fc2.bias")));
    return tape.layernorm(tape.add(x1, h2), tape.param(param(p + "ln2.gain")),
                          tape.param(param(p + "ln2.bias")));
}

ModelGraph::Features ModelGraph::forward_features(Tape &tape, const Tensor &batch) {
    if (batch.rank() != 3 || batch.dim(1) != kSubcarriers || batch.dim(2) != kTimeSteps)
        throw ShapeError("forward_features: expected (B," + std::to_string(kSubcarriers) + "," +
                         std::to_string(kTimeSteps) + "), got " + batch.shape_str());
    VarId x = tape.leaf(batch);
    VarId tokens = tape.conv1d(x, tape.param(param("stem.weight")),
                               tape.param(param("stem.bias")), cfg_.stem_stride);
    tokens = tape.gaussian_pos_encoding(tokens, tape.param(param("pos.centers")),
                                        tape.param(param("pos.widths")));
    tokens = tape.prepend_token(tokens, tape.param(param("cls_token")));

    Features feats;
    for (int l = 1; l <= static_cast<int>(cfg_.n_encoder_layers); ++l) {
        tokens = encoder_layer(tape, tokens, l);
        feats.layer_maps.push_back(tokens);
    }
    feats.cls = tape.row(tokens, 0);
    return feats;
}

VarId ModelGraph::activity_logits(Tape &tape, VarId cls) {
    VarId h = tape.relu(tape.linear(cls, tape.param(param("act_head.fc1.weight")),
                                    tape.param(param("act_head.fc1.bias"))));
    return tape.linear(h, tape.param(param("act_head.fc2.weight")),
                       tape.param(param("act_head.fc2.bias")));
}

VarId ModelGraph::domain_logits(Tape &tape, VarId cls) {
    VarId h = tape.relu(tape.linear(cls, tape.param(param("dom_head.fc1.weight")),
                                    tape.param(param("dom_head.fc1.bias"))));
    return tape.linear(h, tape.param(param("dom_head.fc2.weight")),
                       tape.param(param("dom_head.fc2.bias")));
}

HeadOutputs ModelGraph::heads(const Tensor &batch) {
    Tape tape;
    Features f = forward_features(tape, batch);
    VarId logits = activity_logits(tape, f.cls);
    VarId probs = tape.softmax_lastdim(logits);
    VarId dprobs = tape.softmax_lastdim(domain_logits(tape, f.cls));
    HeadOutputs out;
    out.activity_logits = tape.value(logits);
    out.activity_probs = tape.value(probs);
    out.domain_probs = tape.value(dprobs);
    return out;
}

Tensor ModelGraph::activity_probs(const Tensor &batch) {
    Tape tape;
    Features f = forward_features(tape, batch);
    return tape.value(tape.softmax_lastdim(activity_logits(tape, f.cls)));
}

int ModelGraph::predict(const CsiSample &sample) {
    Tensor probs = activity_probs(stack_batch({&sample}));
    int best = 0;
    for (int64_t k = 1; k < probs.dim(1); ++k)
        if (probs.at2(0, k) > probs.at2(0, best)) best = static_cast<int>(k);
    return best;
}

TensorArchive ModelGraph::to_archive() const {
    TensorArchive a;
    a.config_hash = cfg_.hash();
    for (const Param &p : params_) a.add(p.name, p.value);
    return a;
}

ModelGraph ModelGraph::from_archive(const ModelConfig &cfg, const TensorArchive &archive) {
    ModelGraph m = create(cfg, 0);
    if (archive.config_hash != 0 && archive.config_hash != cfg.hash())
        throw FormatError("checkpoint config hash does not match the model config");
    if (archive.tensors.size() != m.params_.size())
        throw FormatError("checkpoint has " + std::to_string(archive.tensors.size()) +
                          " tensors, model expects " + std::to_string(m.params_.size()));
    for (Param &p : m.params_) {
        const Tensor *t = archive.find(p.name);
        if (!t) throw FormatError("checkpoint missing tensor " + p.name);
        if (t->shape != p.value.shape)
            throw FormatError("checkpoint tensor " + p.name + " has shape " + t->shape_str());
        p.value = *t;
    }
    return m;
}

ModelGraph ModelGraph::clone() const {
    ModelGraph m(cfg_);
    for (const Param &p : params_) m.add_param(p.name, p.value);
    return m;
}

Tensor stack_batch(const std::vector<const CsiSample *> &samples) {
    Tensor batch({static_cast<int64_t>(samples.size()), kSubcarriers, kTimeSteps});
    for (size_t i = 0; i < samples.size(); ++i) {
        const Tensor &a = samples[i]->amplitudes;
        std::copy(a.data.begin(), a.data.end(),
                  batch.data.begin() + static_cast<int64_t>(i) * a.numel());
    }
    return batch;
}

} // namespace datta
