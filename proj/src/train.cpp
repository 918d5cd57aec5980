#include "datta/train.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

#include "datta/errors.hpp"
#include "datta/metrics.hpp"

namespace datta {

namespace {

double clamped(double p, double eps) { return std::min(std::max(p, eps), 1.0 - eps); }

double cross_entropy(const std::vector<double> &probs, const std::vector<double> &onehot,
                     double eps) {
    if (probs.size() != onehot.size())
        throw std::invalid_argument("cross entropy: size mismatch");
    double loss = 0.0;
    for (size_t k = 0; k < probs.size(); ++k) loss -= onehot[k] * std::log(clamped(probs[k], eps));
    return loss;
}

} // namespace

double activity_loss(const std::vector<double> &probs, const std::vector<double> &onehot,
                     double eps) {
    return cross_entropy(probs, onehot, eps);
}

double domain_loss(const std::vector<double> &probs, const std::vector<double> &onehot,
                   double eps) {
    return cross_entropy(probs, onehot, eps);
}

double ccc_loss(const std::vector<double> &probs, double eps) {
    double loss = 0.0;
    for (double p : probs) {
        const double c = clamped(p, eps);
        loss -= std::log(c) + std::log(1.0 - c);
    }
    return loss;
}

double lambda_schedule(double p, double gamma) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("lambda_schedule: p must be in [0,1]");
    return (2.0 / (1.0 + std::exp(-10.0 * p)) - 1.0) * gamma;
}

double total_loss(double l_a, double l_d, double l_c, double alpha, double beta) {
    return l_a + alpha * l_d + beta * l_c;
}

VarId cross_entropy_graph(Tape &tape, VarId probs, const std::vector<int> &labels, float eps) {
    const Tensor &p = tape.value(probs);
    const int64_t batch = p.dim(0), classes = p.dim(1);
    if (static_cast<int64_t>(labels.size()) != batch)
        throw ShapeError("cross_entropy_graph: label count mismatch");
    Tensor w({batch, classes});
    const float scale = -1.0f / static_cast<float>(batch);
    for (int64_t b = 0; b < batch; ++b) w.at2(b, labels[static_cast<size_t>(b)]) = scale;
    return tape.wsum(tape.log(tape.clamp(probs, eps, 1.0f - eps)), std::move(w));
}

VarId ccc_graph(Tape &tape, VarId probs, float eps) {
    const Tensor &p = tape.value(probs);
    const int64_t batch = p.dim(0);
    Tensor w(p.shape, -1.0f / static_cast<float>(batch));
    VarId c = tape.clamp(probs, eps, 1.0f - eps);
    VarId lo = tape.wsum(tape.log(c), w);
    VarId hi = tape.wsum(tape.log(tape.affine(c, -1.0f, 1.0f)), std::move(w));
    return tape.add(lo, hi);
}

TensorArchive SourceStatistics::to_archive(uint64_t config_hash) const {
    TensorArchive a;
    a.config_hash = config_hash;
    Tensor ids({static_cast<int64_t>(layer_ids.size())});
    for (size_t i = 0; i < layer_ids.size(); ++i) ids.data[i] = static_cast<float>(layer_ids[i]);
    a.add("layer_ids", std::move(ids));
    for (int l : layer_ids) {
        a.add("layer" + std::to_string(l) + ".mean", mean.at(l));
        a.add("layer" + std::to_string(l) + ".var", var.at(l));
    }
    return a;
}

SourceStatistics SourceStatistics::from_archive(const TensorArchive &archive) {
    SourceStatistics s;
    const Tensor *ids = archive.find("layer_ids");
    if (!ids) throw FormatError("statistics archive missing layer_ids");
    for (float v : ids->data) {
        const int l = static_cast<int>(v);
        s.layer_ids.push_back(l);
        const Tensor *m = archive.find("layer" + std::to_string(l) + ".mean");
        const Tensor *vv = archive.find("layer" + std::to_string(l) + ".var");
        if (!m || !vv) throw FormatError("statistics archive missing layer " + std::to_string(l));
        s.mean[l] = *m;
        s.var[l] = *vv;
    }
    return s;
}

SourceStatistics compute_source_statistics(ModelGraph &model, const std::vector<CsiSample> &data,
                                           const std::vector<int> &layer_ids) {
    if (data.empty()) throw EmptyDataset("compute_source_statistics: no samples");
    for (int l : layer_ids)
        if (l < 1 || l > static_cast<int>(model.config().n_encoder_layers))
            throw ShapeError("compute_source_statistics: bad layer id " + std::to_string(l));

    const int64_t e = model.config().embed_dim;
    const int64_t row_start = model.config().include_class_token_in_stats ? 0 : 1;
    const int64_t batch_size = 32;

    SourceStatistics stats;
    stats.layer_ids = layer_ids;
    std::map<int, std::vector<double>> acc_mean, acc_var;
    for (int l : layer_ids) {
        acc_mean[l].assign(static_cast<size_t>(e), 0.0);
        acc_var[l].assign(static_cast<size_t>(e), 0.0);
    }

    // Pass 1: mean over all (sample, time) feature rows.
    int64_t total_rows = 0;
    auto sweep = [&](auto &&row_consumer) {
        for (size_t off = 0; off < data.size(); off += batch_size) {
            const size_t n = std::min(static_cast<size_t>(batch_size), data.size() - off);
            std::vector<const CsiSample *> ptrs(n);
            for (size_t i = 0; i < n; ++i) ptrs[i] = &data[off + i];
            Tape tape;
            auto feats = model.forward_features(tape, stack_batch(ptrs));
            for (int l : layer_ids) {
                const Tensor &phi = tape.value(feats.layer_maps[static_cast<size_t>(l - 1)]);
                row_consumer(l, phi, static_cast<int64_t>(n));
            }
        }
    };

    sweep([&](int l, const Tensor &phi, int64_t n) {
        auto &acc = acc_mean[l];
        for (int64_t b = 0; b < n; ++b)
            for (int64_t t = row_start; t < phi.dim(1); ++t)
                for (int64_t j = 0; j < e; ++j) acc[static_cast<size_t>(j)] += phi.at3(b, t, j);
        if (l == layer_ids.front()) total_rows += n * (phi.dim(1) - row_start);
    });
    for (int l : layer_ids) {
        Tensor m({e});
        for (int64_t j = 0; j < e; ++j)
            m.data[j] = static_cast<float>(acc_mean[l][static_cast<size_t>(j)] /
                                           static_cast<double>(total_rows));
        stats.mean[l] = std::move(m);
    }

    // Pass 2: population variance around the pass-1 mean.
    sweep([&](int l, const Tensor &phi, int64_t n) {
        auto &acc = acc_var[l];
        const Tensor &m = stats.mean[l];
        for (int64_t b = 0; b < n; ++b)
            for (int64_t t = row_start; t < phi.dim(1); ++t)
                for (int64_t j = 0; j < e; ++j) {
                    const double d = static_cast<double>(phi.at3(b, t, j)) - m.data[j];
                    acc[static_cast<size_t>(j)] += d * d;
                }
    });
    for (int l : layer_ids) {
        Tensor v({e});
        for (int64_t j = 0; j < e; ++j)
            v.data[j] = static_cast<float>(acc_var[l][static_cast<size_t>(j)] /
                                           static_cast<double>(total_rows));
        stats.var[l] = std::move(v);
    }
    return stats;
}

namespace {

std::vector<int> eval_predictions(ModelGraph &model, const std::vector<CsiSample> &samples) {
    std::vector<int> preds;
    preds.reserve(samples.size());
    const size_t batch_size = 64;
    for (size_t off = 0; off < samples.size(); off += batch_size) {
        const size_t n = std::min(batch_size, samples.size() - off);
        std::vector<const CsiSample *> ptrs(n);
        for (size_t i = 0; i < n; ++i) ptrs[i] = &samples[off + i];
        Tensor probs = model.activity_probs(stack_batch(ptrs));
        for (size_t i = 0; i < n; ++i) {
            int best = 0;
            for (int64_t k = 1; k < probs.dim(1); ++k)
                if (probs.at2(static_cast<int64_t>(i), k) >
                    probs.at2(static_cast<int64_t>(i), best))
                    best = static_cast<int>(k);
            preds.push_back(best);
        }
    }
    return preds;
}

} // namespace

TrainResult train_dat(const DatasetSplit &train_split, const DatasetSplit &val_split,
                      const ModelConfig &model_cfg, const DatConfig &dat_cfg,
                      const AugmentConfig &augment_cfg) {
    if (train_split.samples.empty()) throw EmptyDataset("train_dat: empty training split");

    // Dense re-indexing of the training domains.
    std::set<int> domains;
    for (const CsiSample &s : train_split.samples) domains.insert(s.domain);
    std::map<int, int> remap;
    for (int d : domains) remap.emplace(d, static_cast<int>(remap.size()));

    ModelConfig cfg = model_cfg;
    cfg.n_domains = static_cast<int64_t>(remap.size());
    ModelGraph model = ModelGraph::create(cfg, dat_cfg.rng_seed, dat_cfg.zero_init_heads);
    std::vector<Param *> params = model.all_params();

    const int64_t n = static_cast<int64_t>(train_split.samples.size());
    const int64_t steps_per_epoch = (n + dat_cfg.batch_size - 1) / dat_cfg.batch_size;
    const int64_t total_steps = dat_cfg.epochs * steps_per_epoch;

    std::vector<TrainLogEntry> log;
    log.reserve(static_cast<size_t>(total_steps));
    float best_f1 = -1.0f;
    float last_val_f1 = -1.0f;
    std::vector<Tensor> best_values;

    std::vector<int64_t> order(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

    int64_t step = 0;
    for (int64_t epoch = 0; epoch < dat_cfg.epochs; ++epoch) {
        std::mt19937_64 shuffle_rng(hash_combine(dat_cfg.rng_seed, 0x5350ull + epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        AugmentConfig epoch_aug = augment_cfg;
        epoch_aug.rng_seed = hash_combine(augment_cfg.rng_seed, static_cast<uint64_t>(epoch));

        for (int64_t off = 0; off < n; off += dat_cfg.batch_size, ++step) {
            const int64_t b = std::min<int64_t>(dat_cfg.batch_size, n - off);
            std::vector<CsiSample> batch_samples;
            batch_samples.reserve(static_cast<size_t>(b));
            std::vector<int> act_labels, dom_labels;
            for (int64_t i = 0; i < b; ++i) {
                const CsiSample &s =
                    train_split.samples[static_cast<size_t>(order[static_cast<size_t>(off + i)])];
                batch_samples.push_back(augment_cfg.apply_probability > 0.0f ? augment(s, epoch_aug)
                                                                             : s);
                act_labels.push_back(s.activity);
                dom_labels.push_back(remap.at(s.domain));
            }
            std::vector<const CsiSample *> ptrs;
            for (const CsiSample &s : batch_samples) ptrs.push_back(&s);

            const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
            const float lambda = static_cast<float>(lambda_schedule(progress, dat_cfg.gamma));

            Tape tape;
            auto feats = model.forward_features(tape, stack_batch(ptrs));
            VarId act_probs = tape.softmax_lastdim(model.activity_logits(tape, feats.cls));
            VarId l_a = cross_entropy_graph(tape, act_probs, act_labels, dat_cfg.prob_clamp_eps);
            VarId l_c = ccc_graph(tape, act_probs, dat_cfg.prob_clamp_eps);
            VarId loss = tape.add(l_a, tape.affine(l_c, dat_cfg.beta, 0.0f));
            float l_d_value = 0.0f;
            if (dat_cfg.use_domain_branch) {
                VarId reversed = tape.grl(feats.cls, lambda);
                VarId dom_probs = tape.softmax_lastdim(model.domain_logits(tape, reversed));
                VarId l_d =
                    cross_entropy_graph(tape, dom_probs, dom_labels, dat_cfg.prob_clamp_eps);
                l_d_value = tape.scalar(l_d);
                loss = tape.add(loss, tape.affine(l_d, dat_cfg.alpha, 0.0f));
            }

            const float loss_value = tape.scalar(loss);
            if (!std::isfinite(loss_value)) throw NonFiniteLoss(step);

            zero_grads(params);
            tape.backward(loss);
            adam_step(params, dat_cfg.learning_rate, step + 1);

            log.push_back(TrainLogEntry{step, loss_value, tape.scalar(l_a), l_d_value,
                                        tape.scalar(l_c), lambda, last_val_f1});
        }

        if (!val_split.samples.empty()) {
            std::vector<int> truth;
            for (const CsiSample &s : val_split.samples) truth.push_back(s.activity);
            const std::vector<int> preds = eval_predictions(model, val_split.samples);
            last_val_f1 = static_cast<float>(macro_f1(truth, preds));
            if (!log.empty()) log.back().val_f1 = last_val_f1;
            if (last_val_f1 > best_f1) {
                best_f1 = last_val_f1;
                best_values.clear();
                for (Param *p : params) best_values.push_back(p->value);
            }
        }
    }

    if (!best_values.empty())
        for (size_t i = 0; i < best_values.size(); ++i) params[i]->value = best_values[i];

    TrainResult result{std::move(model), SourceStatistics{}, std::move(log), std::move(remap),
                       best_f1 < 0.0f ? 0.0f : best_f1};
    result.stats =
        compute_source_statistics(result.model, train_split.samples, dat_cfg.stats_layer_ids);
    return result;
}

} // namespace datta
