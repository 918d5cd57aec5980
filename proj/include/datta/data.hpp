#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "datta/tensor.hpp"

namespace datta {

// CSI amplitude spectrogram geometry: 30 subcarriers of the first antenna,
// padded to 220 time steps at 100 Hz.
inline constexpr int64_t kSubcarriers = 30;
inline constexpr int64_t kTimeSteps = 220;
inline constexpr int64_t kMinValidLength = 120;
inline constexpr int64_t kMaxValidLength = 220;
inline constexpr int kNumActivities = 6;

// One amplitude spectrogram with labels. Columns at or beyond valid_length
// are zero padding; real entries are min-max normalized to [0,1].
struct CsiSample {
    Tensor amplitudes;  // (kSubcarriers, kTimeSteps)
    int activity = 0;
    int domain = 0;
    int valid_length = 0;
    std::string sample_id;
};

enum class PreprocessStatus { Ok, DegenerateRange, RejectTooShort, RejectTooLong };

struct PreprocessResult {
    PreprocessStatus status = PreprocessStatus::RejectTooShort;
    std::optional<CsiSample> sample;
    bool accepted() const {
        return status == PreprocessStatus::Ok || status == PreprocessStatus::DegenerateRange;
    }
};

// Sub-samples a packet stream to 100 Hz by uniform stride floor(rate/100)
// starting at index 0, rejects durations outside [120, 220] steps, zero-pads
// to 220 and min-max normalizes over the real (non-padded) entries.
// Each packet is a vector of kSubcarriers amplitudes.
PreprocessResult preprocess_stream(const std::vector<std::vector<float>> &raw_packets, int rate_hz,
                                   int activity = 0, int domain = 0,
                                   const std::string &sample_id = "");

enum class SplitName { Train, Val, ValTta, Test };

std::string split_name_str(SplitName s);

struct DatasetSplit {
    SplitName name = SplitName::Train;
    std::vector<CsiSample> samples;
    std::vector<int> domain_set() const;
};

struct SplitOptions {
    // Fraction of a domain's samples routed to the smaller split when the
    // domain is assigned to both splits of a group (Train+Val or ValTta+Test).
    double val_fraction = 0.2;
    double val_tta_fraction = 0.1;
    uint64_t rng_seed = 0;
};

// Assignment is a relation: a domain may be listed once (all samples to that
// split) or for both splits of the same group (samples divided by a
// deterministic per-sample hash). Listing a domain in both the {Train,Val}
// and {ValTta,Test} groups throws DomainOverlap.
std::map<SplitName, DatasetSplit> build_splits(
    const std::vector<CsiSample> &samples,
    const std::vector<std::pair<int, SplitName>> &domain_assignment,
    const SplitOptions &options = {});

// Synthetic-domain generation: a desk-scale substitute for real domains.
struct SyntheticDomainSpec {
    int domain_id = 0;
    float amplitude_offset = 0.0f;
    float amplitude_scale = 1.0f;
    std::vector<float> subcarrier_response;  // per-subcarrier gain, length kSubcarriers
    float noise_sigma = 0.0f;
    uint64_t rng_seed = 0;
};

// Clean spectrogram value for (activity, subcarrier, time step) at a given
// stream length; pure in all arguments.
using ActivityGenerator = std::function<float(int activity, int64_t subcarrier, int64_t t,
                                              int64_t total_len)>;

// Ridge/band templates distinguishable by a small temporal model.
ActivityGenerator default_activity_template();

// Emits n samples: template -> per-subcarrier gain -> scale -> offset ->
// Gaussian noise -> preprocess_stream. Deterministic given spec.rng_seed.
// Activities are assigned round-robin over [0, n_activities).
DatasetSplit synthesize_domain(const SyntheticDomainSpec &spec, int64_t n,
                               const ActivityGenerator &generator,
                               SplitName split = SplitName::Train,
                               int n_activities = kNumActivities);

// Raw (pre-preprocessing) packet stream for one synthetic sample; exposed so
// tests can check pre-normalization properties.
std::vector<std::vector<float>> synthesize_raw_stream(const SyntheticDomainSpec &spec,
                                                      int64_t sample_index,
                                                      const ActivityGenerator &generator,
                                                      int activity, int64_t total_len);

} // namespace datta
