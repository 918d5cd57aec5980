#include "datta/tta.hpp"

#include <cmath>
#include <stdexcept>

#include "datta/errors.hpp"

namespace datta {

int AdaptationConfig::max_layer() const {
    int m = 0;
    for (int l : layer_ids)
        if (l > m) m = l;
    return m;
}

void AdaptationConfig::validate() const {
    if (layer_ids.empty()) throw std::invalid_argument("AdaptationConfig: layer_ids empty");
    for (int l : layer_ids)
        if (l < 1 || l > 4) throw std::invalid_argument("AdaptationConfig: layer ids must be 1..4");
    if (ema_alpha <= 0.0f || ema_alpha > 1.0f)
        throw std::invalid_argument("AdaptationConfig: ema_alpha must be in (0,1]");
    if (reset_rate < 0.0f || reset_rate > 1.0f)
        throw std::invalid_argument("AdaptationConfig: reset_rate must be in [0,1]");
    if (steps_per_sample < 1)
        throw std::invalid_argument("AdaptationConfig: steps_per_sample must be >= 1");
}

AdaptationState AdaptationState::init(ModelGraph &model, const SourceStatistics &stats,
                                      const AdaptationConfig &cfg) {
    cfg.validate();
    AdaptationState state;
    for (int l : cfg.layer_ids) {
        if (!stats.mean.count(l) || !stats.var.count(l))
            throw ShapeMismatch("source statistics missing layer " + std::to_string(l));
        state.ema_mean[l] = stats.mean.at(l);
        state.ema_var[l] = stats.var.at(l);
    }
    for (Param *p : model.all_params()) {
        state.source_names.push_back(p->name);
        state.source_values.push_back(p->value);
    }
    state.rng.seed(cfg.rng_seed);
    return state;
}

void ema_update(AdaptationState &state, const std::map<int, LayerStats> &sample_stats,
                float ema_alpha) {
    for (auto &[l, est] : state.ema_mean) {
        const LayerStats &s = sample_stats.at(l);
        Tensor &var_est = state.ema_var.at(l);
        if (!est.same_shape(s.mean) || !var_est.same_shape(s.var))
            throw ShapeMismatch("ema_update: statistic shape mismatch");
        for (int64_t j = 0; j < est.numel(); ++j) {
            est.data[j] = ema_alpha * s.mean.data[j] + (1.0f - ema_alpha) * est.data[j];
            var_est.data[j] = ema_alpha * s.var.data[j] + (1.0f - ema_alpha) * var_est.data[j];
        }
    }
    ++state.step;
}

namespace {

// Builds the per-layer stat nodes on the tape; row 0 is the class token.
struct StatNodes {
    VarId mean = -1;
    VarId var = -1;
};

StatNodes stat_nodes(Tape &tape, VarId phi, bool include_cls) {
    VarId rows = phi;
    if (!include_cls) {
        const Tensor &v = tape.value(phi);
        rows = tape.slice_axis1(phi, 1, v.dim(1) - 1);
    }
    StatNodes s;
    s.mean = tape.reduce_mean_axis1(rows);
    s.var = tape.reduce_mean_axis1(tape.square(tape.sub_broadcast_rows(rows, s.mean)));
    return s;
}

Tensor first_row(const Tensor &t) {
    // (1, E) -> (E)
    Tensor out({t.dim(1)});
    std::copy(t.data.begin(), t.data.begin() + t.dim(1), out.data.begin());
    return out;
}

double norm_of_diff(const Tensor &a, const Tensor &b, bool use_l1) {
    if (!a.same_shape(b)) throw ShapeMismatch("statistic length mismatch");
    double acc = 0.0;
    for (int64_t j = 0; j < a.numel(); ++j) {
        const double d = static_cast<double>(a.data[j]) - b.data[j];
        acc += use_l1 ? std::fabs(d) : d * d;
    }
    return use_l1 ? acc : std::sqrt(acc);
}

} // namespace

std::map<int, LayerStats> compute_sample_stats(ModelGraph &model, const CsiSample &sample,
                                               const std::vector<int> &layer_ids) {
    Tape tape;
    auto feats = model.forward_features(tape, stack_batch({&sample}));
    const bool include_cls = model.config().include_class_token_in_stats;
    std::map<int, LayerStats> out;
    for (int l : layer_ids) {
        StatNodes s = stat_nodes(tape, feats.layer_maps[static_cast<size_t>(l - 1)], include_cls);
        out[l] = LayerStats{first_row(tape.value(s.mean)), first_row(tape.value(s.var))};
    }
    return out;
}

double alignment_loss_from_estimates(const std::map<int, Tensor> &est_mean,
                                     const std::map<int, Tensor> &est_var,
                                     const SourceStatistics &source, bool use_l1) {
    double loss = 0.0;
    for (const auto &[l, m] : est_mean) {
        loss += norm_of_diff(m, source.mean.at(l), use_l1);
        loss += norm_of_diff(est_var.at(l), source.var.at(l), use_l1);
    }
    return loss;
}

double alignment_loss(ModelGraph &model, const CsiSample &sample, const AdaptationState &state,
                      const SourceStatistics &source, const AdaptationConfig &cfg) {
    auto sample_stats = compute_sample_stats(model, sample, cfg.layer_ids);
    std::map<int, Tensor> est_mean, est_var;
    for (int l : cfg.layer_ids) {
        Tensor m = state.ema_mean.at(l);
        Tensor v = state.ema_var.at(l);
        for (int64_t j = 0; j < m.numel(); ++j) {
            m.data[j] = cfg.ema_alpha * sample_stats.at(l).mean.data[j] +
                        (1.0f - cfg.ema_alpha) * m.data[j];
            v.data[j] = cfg.ema_alpha * sample_stats.at(l).var.data[j] +
                        (1.0f - cfg.ema_alpha) * v.data[j];
        }
        est_mean[l] = std::move(m);
        est_var[l] = std::move(v);
    }
    return alignment_loss_from_estimates(est_mean, est_var, source, cfg.use_l1);
}

size_t bernoulli_reset(Tensor &theta, const Tensor &theta_bar, float reset_rate,
                       std::mt19937_64 &rng) {
    if (reset_rate < 0.0f || reset_rate > 1.0f)
        throw std::invalid_argument("bernoulli_reset: reset_rate must be in [0,1]");
    if (!theta.same_shape(theta_bar)) throw ShapeMismatch("bernoulli_reset: shape mismatch");
    if (reset_rate == 0.0f) return 0;
    if (reset_rate == 1.0f) {
        theta = theta_bar;
        return static_cast<size_t>(theta.numel());
    }
    size_t count = 0;
    std::bernoulli_distribution reset(reset_rate);
    for (int64_t j = 0; j < theta.numel(); ++j)
        if (reset(rng)) {
            theta.data[j] = theta_bar.data[j];
            ++count;
        }
    return count;
}

size_t weight_reset(ModelGraph &model, const AdaptationState &state, float reset_rate,
                    std::mt19937_64 &rng, const AdaptationConfig &cfg) {
    if (reset_rate < 0.0f || reset_rate > 1.0f)
        throw std::invalid_argument("weight_reset: reset_rate must be in [0,1]");
    if (reset_rate == 0.0f) return 0;

    auto params = model.all_params();
    if (params.size() != state.source_values.size())
        throw ShapeMismatch("weight_reset: source snapshot size mismatch");
    auto scope = model.adapt_scope(cfg.max_layer(), cfg.include_stem);

    size_t count = 0;
    for (Param *p : scope) {
        const Tensor *src = nullptr;
        for (size_t i = 0; i < params.size(); ++i)
            if (params[i] == p) { src = &state.source_values[i]; break; }
        if (!src || !src->same_shape(p->value))
            throw ShapeMismatch("weight_reset: snapshot shape mismatch for " + p->name);
        count += bernoulli_reset(p->value, *src, reset_rate, rng);
    }
    return count;
}

namespace {

double drift_norm_of(ModelGraph &model, const AdaptationState &state,
                     const AdaptationConfig &cfg) {
    auto params = model.all_params();
    auto scope = model.adapt_scope(cfg.max_layer(), cfg.include_stem);
    double acc = 0.0;
    for (Param *p : scope)
        for (size_t i = 0; i < params.size(); ++i)
            if (params[i] == p) {
                const Tensor &src = state.source_values[i];
                for (int64_t j = 0; j < p->value.numel(); ++j) {
                    const double d = static_cast<double>(p->value.data[j]) - src.data[j];
                    acc += d * d;
                }
                break;
            }
    return std::sqrt(acc);
}

} // namespace

AdaptOutcome adapt_step(ModelGraph &model, const CsiSample &sample, AdaptationState &state,
                        const SourceStatistics &source, const AdaptationConfig &cfg) {
    cfg.validate();
    AdaptOutcome outcome;
    const bool include_cls = model.config().include_class_token_in_stats;
    auto scope = model.adapt_scope(cfg.max_layer(), cfg.include_stem);

    // History terms are constants for the whole sample; the gradient flows
    // only through the current sample's contribution to the EMA.
    std::map<int, Tensor> hist_mean = state.ema_mean;
    std::map<int, Tensor> hist_var = state.ema_var;

    std::map<int, LayerStats> first_stats;
    for (int inner = 0; inner < cfg.steps_per_sample; ++inner) {
        Tape tape;
        auto feats = model.forward_features(tape, stack_batch({&sample}));
        VarId loss = -1;
        std::map<int, LayerStats> stats_now;
        for (int l : cfg.layer_ids) {
            StatNodes s =
                stat_nodes(tape, feats.layer_maps[static_cast<size_t>(l - 1)], include_cls);
            stats_now[l] =
                LayerStats{first_row(tape.value(s.mean)), first_row(tape.value(s.var))};

            const int64_t e = tape.value(s.mean).dim(1);
            Tensor mean_rest({1, e}), var_rest({1, e});
            for (int64_t j = 0; j < e; ++j) {
                mean_rest.at2(0, j) = (1.0f - cfg.ema_alpha) * hist_mean.at(l).data[j] -
                                      source.mean.at(l).data[j];
                var_rest.at2(0, j) =
                    (1.0f - cfg.ema_alpha) * hist_var.at(l).data[j] - source.var.at(l).data[j];
            }
            VarId mean_diff =
                tape.add_const(tape.affine(s.mean, cfg.ema_alpha, 0.0f), std::move(mean_rest));
            VarId var_diff =
                tape.add_const(tape.affine(s.var, cfg.ema_alpha, 0.0f), std::move(var_rest));
            VarId term = tape.add(cfg.use_l1 ? tape.l1norm(mean_diff) : tape.l2norm(mean_diff),
                                  cfg.use_l1 ? tape.l1norm(var_diff) : tape.l2norm(var_diff));
            loss = loss < 0 ? term : tape.add(loss, term);
        }

        const float loss_value = tape.scalar(loss);
        if (inner == 0) {
            outcome.tta_loss = loss_value;
            first_stats = stats_now;
        }
        if (!std::isfinite(loss_value)) {
            outcome.skipped = true;
            break;
        }
        if (cfg.tta_learning_rate != 0.0f) {
            zero_grads(scope);
            tape.backward(loss);
            sgd_step(scope, cfg.tta_learning_rate);
        }
    }

    // Commit the EMA update with the first-forward statistics (pre-update
    // parameters); a non-finite sample leaves the state untouched.
    if (!outcome.skipped) {
        bool finite = true;
        for (const auto &[l, s] : first_stats)
            if (!all_finite(s.mean) || !all_finite(s.var)) finite = false;
        if (finite)
            ema_update(state, first_stats, cfg.ema_alpha);
        else
            outcome.skipped = true;
    }

    outcome.reset_count = weight_reset(model, state, cfg.reset_rate, state.rng, cfg);
    outcome.drift_norm = drift_norm_of(model, state, cfg);
    outcome.prediction = model.predict(sample);
    return outcome;
}

TtaAdaptor::TtaAdaptor(const ModelGraph &source_model, const SourceStatistics &stats,
                       AdaptationConfig cfg)
    : model_(source_model.clone()), stats_(stats), cfg_(std::move(cfg)),
      state_(AdaptationState::init(model_, stats_, cfg_)) {}

AdaptOutcome TtaAdaptor::step(const CsiSample &sample) {
    return adapt_step(model_, sample, state_, stats_, cfg_);
}

} // namespace datta
