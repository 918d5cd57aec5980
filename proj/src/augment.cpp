#include "datta/augment.hpp"

#include <random>
#include <stdexcept>

#include "datta/config.hpp"

namespace datta {

namespace {
float clamp01(float v) { return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v); }
} // namespace

CsiSample amplitude_perturb(const CsiSample &s, float sigma, uint64_t rng_seed) {
    if (sigma < 0.0f) throw std::invalid_argument("amplitude_perturb: sigma must be >= 0");
    CsiSample out = s;
    if (sigma == 0.0f) return out;
    std::mt19937_64 rng(rng_seed);
    std::normal_distribution<float> noise(0.0f, sigma);
    for (int64_t f = 0; f < kSubcarriers; ++f)
        for (int64_t t = 0; t < s.valid_length; ++t)
            out.amplitudes.at2(f, t) = clamp01(out.amplitudes.at2(f, t) + noise(rng));
    return out;
}

CsiSample circular_rotate(const CsiSample &s, int64_t shift) {
    CsiSample out = s;
    const int64_t n = s.valid_length;
    if (n <= 0) return out;
    int64_t k = shift % n;
    if (k < 0) k += n;
    if (k == 0) return out;
    for (int64_t f = 0; f < kSubcarriers; ++f)
        for (int64_t t = 0; t < n; ++t)
            out.amplitudes.at2(f, (t + k) % n) = s.amplitudes.at2(f, t);
    return out;
}

CsiSample dropout_mean_replace(const CsiSample &s, float pixel_rate, float row_rate,
                               uint64_t rng_seed) {
    if (pixel_rate < 0.0f || pixel_rate > 1.0f || row_rate < 0.0f || row_rate > 1.0f)
        throw std::invalid_argument("dropout_mean_replace: rates must be in [0,1]");
    CsiSample out = s;
    if ((pixel_rate == 0.0f && row_rate == 0.0f) || s.valid_length == 0) return out;

    double sum = 0.0;
    for (int64_t f = 0; f < kSubcarriers; ++f)
        for (int64_t t = 0; t < s.valid_length; ++t) sum += s.amplitudes.at2(f, t);
    const float mean = static_cast<float>(sum / (kSubcarriers * s.valid_length));

    std::mt19937_64 rng(rng_seed);
    std::bernoulli_distribution drop_pixel(pixel_rate);
    std::bernoulli_distribution drop_row(row_rate);
    for (int64_t f = 0; f < kSubcarriers; ++f) {
        if (row_rate > 0.0f && drop_row(rng)) {
            for (int64_t t = 0; t < s.valid_length; ++t) out.amplitudes.at2(f, t) = mean;
            continue;
        }
        if (pixel_rate > 0.0f)
            for (int64_t t = 0; t < s.valid_length; ++t)
                if (drop_pixel(rng)) out.amplitudes.at2(f, t) = mean;
    }
    return out;
}

CsiSample augment(const CsiSample &s, const AugmentConfig &cfg) {
    if (cfg.apply_probability < 0.0f || cfg.apply_probability > 1.0f ||
        cfg.max_rotation_fraction < 0.0f || cfg.max_rotation_fraction > 1.0f)
        throw std::invalid_argument("augment: probabilities must be in [0,1]");

    const uint64_t base =
        hash_combine(cfg.rng_seed, fnv1a64(s.sample_id.data(), s.sample_id.size()));
    std::mt19937_64 gate_rng(hash_combine(base, 0));
    std::bernoulli_distribution gate(cfg.apply_probability);
    std::uniform_real_distribution<float> unit(0.0f, 1.0f);

    CsiSample out = s;
    if (cfg.apply_probability > 0.0f && gate(gate_rng)) {
        const auto max_shift =
            static_cast<int64_t>(cfg.max_rotation_fraction * static_cast<float>(s.valid_length));
        const auto shift = static_cast<int64_t>(unit(gate_rng) * static_cast<float>(max_shift + 1));
        out = circular_rotate(out, shift);
    }
    if (cfg.apply_probability > 0.0f && gate(gate_rng))
        out = amplitude_perturb(out, cfg.amplitude_jitter_sigma, hash_combine(base, 1));
    if (cfg.apply_probability > 0.0f && gate(gate_rng))
        out = dropout_mean_replace(out, cfg.pixel_dropout_rate, cfg.row_dropout_rate,
                                   hash_combine(base, 2));
    return out;
}

} // namespace datta
