#include "datta/data.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "datta/config.hpp"
#include "datta/errors.hpp"

namespace datta {

PreprocessResult preprocess_stream(const std::vector<std::vector<float>> &raw_packets, int rate_hz,
                                   int activity, int domain, const std::string &sample_id) {
    if (rate_hz < 100) throw std::invalid_argument("preprocess_stream: rate_hz must be >= 100");
    for (const auto &p : raw_packets)
        if (static_cast<int64_t>(p.size()) != kSubcarriers)
            throw ShapeError("preprocess_stream: packet with " + std::to_string(p.size()) +
                             " entries, expected " + std::to_string(kSubcarriers));

    const int64_t stride = rate_hz / 100;
    const int64_t n = static_cast<int64_t>(raw_packets.size());
    const int64_t retained = n == 0 ? 0 : (n + stride - 1) / stride;

    PreprocessResult result;
    if (retained < kMinValidLength) {
        result.status = PreprocessStatus::RejectTooShort;
        return result;
    }
    if (retained > kMaxValidLength) {
        result.status = PreprocessStatus::RejectTooLong;
        return result;
    }

    CsiSample s;
    s.amplitudes = Tensor({kSubcarriers, kTimeSteps});
    s.activity = activity;
    s.domain = domain;
    s.valid_length = static_cast<int>(retained);
    s.sample_id = sample_id;

    float lo = raw_packets[0][0], hi = raw_packets[0][0];
    for (int64_t t = 0; t < retained; ++t) {
        const auto &packet = raw_packets[static_cast<size_t>(t * stride)];
        for (int64_t f = 0; f < kSubcarriers; ++f) {
            const float v = packet[static_cast<size_t>(f)];
            s.amplitudes.at2(f, t) = v;
            if (v < lo) lo = v;
            if (v > hi) hi = v;
        }
    }

    if (hi == lo) {
        // Flat sample: zero everything rather than divide by zero.
        for (int64_t t = 0; t < retained; ++t)
            for (int64_t f = 0; f < kSubcarriers; ++f) s.amplitudes.at2(f, t) = 0.0f;
        result.status = PreprocessStatus::DegenerateRange;
        result.sample = std::move(s);
        return result;
    }

    const float inv = 1.0f / (hi - lo);
    for (int64_t t = 0; t < retained; ++t)
        for (int64_t f = 0; f < kSubcarriers; ++f)
            s.amplitudes.at2(f, t) = (s.amplitudes.at2(f, t) - lo) * inv;

    result.status = PreprocessStatus::Ok;
    result.sample = std::move(s);
    return result;
}

std::string split_name_str(SplitName s) {
    switch (s) {
        case SplitName::Train: return "train";
        case SplitName::Val: return "val";
        case SplitName::ValTta: return "val_tta";
        case SplitName::Test: return "test";
    }
    return "?";
}

std::vector<int> DatasetSplit::domain_set() const {
    std::vector<int> out;
    for (const CsiSample &s : samples) {
        bool seen = false;
        for (int d : out)
            if (d == s.domain) { seen = true; break; }
        if (!seen) out.push_back(s.domain);
    }
    return out;
}

namespace {

bool is_source_group(SplitName s) { return s == SplitName::Train || s == SplitName::Val; }

double unit_hash(const std::string &id, uint64_t seed) {
    uint64_t z = fnv1a64(id.data(), id.size(), seed ^ 0xcbf29ce484222325ull);
    // splitmix64 finalizer: FNV's upper bits avalanche poorly on short ids
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    z ^= z >> 31;
    return static_cast<double>(z >> 11) * (1.0 / 9007199254740992.0);  // 53-bit mantissa
}

} // namespace

std::map<SplitName, DatasetSplit> build_splits(
    const std::vector<CsiSample> &samples,
    const std::vector<std::pair<int, SplitName>> &domain_assignment, const SplitOptions &options) {
    // domain -> set of assigned splits
    std::map<int, std::vector<SplitName>> assigned;
    for (const auto &[domain, split] : domain_assignment) {
        auto &v = assigned[domain];
        bool dup = false;
        for (SplitName s : v)
            if (s == split) { dup = true; break; }
        if (!dup) v.push_back(split);
    }
    for (const auto &[domain, splits] : assigned) {
        bool src = false, tgt = false;
        for (SplitName s : splits) (is_source_group(s) ? src : tgt) = true;
        if (src && tgt)
            throw DomainOverlap("domain " + std::to_string(domain) +
                                " assigned to both source and target groups");
    }

    std::map<SplitName, DatasetSplit> out;
    for (SplitName s : {SplitName::Train, SplitName::Val, SplitName::ValTta, SplitName::Test})
        out[s].name = s;

    for (const CsiSample &sample : samples) {
        auto it = assigned.find(sample.domain);
        if (it == assigned.end())
            throw UnknownDomain("domain " + std::to_string(sample.domain) +
                                " missing from assignment");
        const auto &splits = it->second;
        SplitName target;
        if (splits.size() == 1) {
            target = splits[0];
        } else if (splits.size() == 2) {
            const bool source = is_source_group(splits[0]);
            const double frac = source ? options.val_fraction : options.val_tta_fraction;
            const SplitName minor = source ? SplitName::Val : SplitName::ValTta;
            const SplitName major = source ? SplitName::Train : SplitName::Test;
            target = unit_hash(sample.sample_id, options.rng_seed) < frac ? minor : major;
        } else {
            throw DomainOverlap("domain " + std::to_string(sample.domain) +
                                " assigned to more than two splits");
        }
        out[target].samples.push_back(sample);
    }
    return out;
}

namespace {

float gauss_bump(float x, float center, float width) {
    const float d = (x - center) / width;
    return std::exp(-0.5f * d * d);
}

} // namespace

ActivityGenerator default_activity_template() {
    return [](int activity, int64_t subcarrier, int64_t t, int64_t total_len) -> float {
        const float F = static_cast<float>(kSubcarriers);
        const float p = total_len > 1 ? static_cast<float>(t) / static_cast<float>(total_len - 1)
                                      : 0.0f;
        const float f = static_cast<float>(subcarrier);
        const float base = 0.15f;
        const float width = 2.5f;
        float ridge = 0.0f;
        switch (activity % kNumActivities) {
            case 0:  // ascending ridge
                ridge = gauss_bump(f, 2.0f + (F - 5.0f) * p, width);
                break;
            case 1:  // descending ridge
                ridge = gauss_bump(f, (F - 3.0f) - (F - 5.0f) * p, width);
                break;
            case 2:  // sinusoidal sweep
                ridge = gauss_bump(f, F * 0.5f + (F / 3.0f) * std::sin(6.2831853f * p), width);
                break;
            case 3:  // twin bands, slow amplitude modulation
                ridge = (0.6f + 0.4f * std::sin(12.566371f * p)) *
                        (gauss_bump(f, F * 0.25f, width) + gauss_bump(f, F * 0.75f, width));
                break;
            case 4:  // pulsed center band
                ridge = (std::sin(18.849556f * p) > 0.0f ? 1.0f : 0.1f) *
                        gauss_bump(f, F * 0.5f, width);
                break;
            default:  // V-shaped ridge
                ridge = gauss_bump(f, 3.0f + std::fabs(2.0f * p - 1.0f) * (F - 6.0f), width);
                break;
        }
        return base + 0.8f * ridge;
    };
}

std::vector<std::vector<float>> synthesize_raw_stream(const SyntheticDomainSpec &spec,
                                                      int64_t sample_index,
                                                      const ActivityGenerator &generator,
                                                      int activity, int64_t total_len) {
    if (spec.amplitude_scale <= 0.0f)
        throw std::invalid_argument("synthesize: amplitude_scale must be > 0");
    std::vector<float> gains = spec.subcarrier_response;
    if (gains.empty()) gains.assign(static_cast<size_t>(kSubcarriers), 1.0f);
    if (static_cast<int64_t>(gains.size()) != kSubcarriers)
        throw ShapeError("synthesize: subcarrier_response length");
    for (float g : gains)
        if (g <= 0.0f) throw std::invalid_argument("synthesize: subcarrier_response must be > 0");

    std::mt19937_64 rng(hash_combine(spec.rng_seed, static_cast<uint64_t>(sample_index) * 2 + 1));
    std::normal_distribution<float> noise(0.0f, 1.0f);

    std::vector<std::vector<float>> stream(static_cast<size_t>(total_len));
    for (int64_t t = 0; t < total_len; ++t) {
        auto &packet = stream[static_cast<size_t>(t)];
        packet.resize(static_cast<size_t>(kSubcarriers));
        for (int64_t f = 0; f < kSubcarriers; ++f) {
            float v = generator(activity, f, t, total_len);
            v = v * gains[static_cast<size_t>(f)] * spec.amplitude_scale + spec.amplitude_offset;
            if (spec.noise_sigma > 0.0f) v += spec.noise_sigma * noise(rng);
            packet[static_cast<size_t>(f)] = v;
        }
    }
    return stream;
}

DatasetSplit synthesize_domain(const SyntheticDomainSpec &spec, int64_t n,
                               const ActivityGenerator &generator, SplitName split,
                               int n_activities) {
    DatasetSplit out;
    out.name = split;
    out.samples.reserve(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        std::mt19937_64 rng(hash_combine(spec.rng_seed, static_cast<uint64_t>(i) * 2));
        std::uniform_int_distribution<int64_t> len_dist(kMinValidLength, kMaxValidLength);
        const int64_t total_len = len_dist(rng);
        const int activity = static_cast<int>(i % n_activities);
        auto stream = synthesize_raw_stream(spec, i, generator, activity, total_len);
        std::string id = "d" + std::to_string(spec.domain_id) + "_s" + std::to_string(i);
        PreprocessResult r = preprocess_stream(stream, 100, activity, spec.domain_id, id);
        if (!r.accepted())
            throw std::logic_error("synthesize_domain produced a rejected stream");
        out.samples.push_back(std::move(*r.sample));
    }
    return out;
}

} // namespace datta
