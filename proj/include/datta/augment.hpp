#pragma once

#include <cstdint>

#include "datta/data.hpp"

namespace datta {

// Random CSI augmentations applied during training. All of them preserve
// shape, labels, valid_length, the zero padding, and the [0,1] value range.
struct AugmentConfig {
    float amplitude_jitter_sigma = 0.05f;
    float max_rotation_fraction = 1.0f;    // of valid_length
    float pixel_dropout_rate = 0.1f;
    float row_dropout_rate = 0.05f;
    float apply_probability = 0.5f;        // per augmentation
    uint64_t rng_seed = 0;
};

// Zero-mean Gaussian noise on non-padded entries, clamped to [0,1].
CsiSample amplitude_perturb(const CsiSample &s, float sigma, uint64_t rng_seed);

// Cyclic shift of the first valid_length columns; padding untouched.
CsiSample circular_rotate(const CsiSample &s, int64_t shift);

// Bernoulli pixel and subcarrier-row dropout inside the non-padded region;
// dropped entries are replaced by the pre-dropout mean of non-padded entries.
CsiSample dropout_mean_replace(const CsiSample &s, float pixel_rate, float row_rate,
                               uint64_t rng_seed);

// Applies rotate -> amplitude -> dropout, each independently with
// cfg.apply_probability. Deterministic per (cfg.rng_seed, s.sample_id).
CsiSample augment(const CsiSample &s, const AugmentConfig &cfg);

} // namespace datta
