#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "datta/errors.hpp"
#include "datta/harness.hpp"
#include "support/test_utils.hpp"

using namespace datta;

namespace {

// Brute-force confusion-matrix macro-F1, independent of the library path.
double oracle_macro_f1(const std::vector<int> &truth, const std::vector<int> &pred) {
    int max_class = 0;
    for (int c : truth) max_class = std::max(max_class, c);
    for (int c : pred) max_class = std::max(max_class, c);
    const int n = max_class + 1;
    std::vector<std::vector<long long>> cm(static_cast<size_t>(n),
                                           std::vector<long long>(static_cast<size_t>(n), 0));
    for (size_t i = 0; i < truth.size(); ++i)
        ++cm[static_cast<size_t>(truth[i])][static_cast<size_t>(pred[i])];
    double sum = 0.0;
    int counted = 0;
    for (int c = 0; c < n; ++c) {
        long long tp = cm[static_cast<size_t>(c)][static_cast<size_t>(c)];
        long long row = 0, col = 0;
        for (int j = 0; j < n; ++j) {
            row += cm[static_cast<size_t>(c)][static_cast<size_t>(j)];
            col += cm[static_cast<size_t>(j)][static_cast<size_t>(c)];
        }
        if (row == 0 && col == 0) continue;  // class absent from both
        ++counted;
        const long long fp = col - tp, fn = row - tp;
        const double denom = static_cast<double>(2 * tp + fp + fn);
        sum += denom > 0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
    }
    return counted ? sum / counted : 0.0;
}

class TruthPredictor : public Predictor {
public:
    PredictionRecord predict(const CsiSample &s) override {
        return PredictionRecord{s.activity, 0.0, 0.0};
    }
};

class ConstantPredictor : public Predictor {
public:
    explicit ConstantPredictor(int k) : k_(k) {}
    PredictionRecord predict(const CsiSample &) override { return PredictionRecord{k_, 0, 0}; }

private:
    int k_;
};

DatasetSplit multi_domain_split(const std::vector<int> &domains, int per_domain,
                                int activities = kNumActivities) {
    auto generator = default_activity_template();
    DatasetSplit out;
    out.name = SplitName::Test;
    for (int d : domains) {
        auto spec = testsupport::ramp_domain(d, 0.3 * d, 0.02f);
        auto split = synthesize_domain(spec, per_domain, generator, SplitName::Test, activities);
        for (auto &s : split.samples) out.samples.push_back(std::move(s));
    }
    return out;
}

} // namespace

TEST_CASE("macro_f1 hand-checked cases") {
    CHECK(macro_f1({0, 1, 2, 1}, {0, 1, 2, 1}) == doctest::Approx(1.0));
    // binary with TP=1, FP=1, FN=1, TN=1 per class
    CHECK(macro_f1({0, 0, 1, 1}, {0, 1, 0, 1}) == doctest::Approx(0.5));
    CHECK(macro_f1({0, 0, 1, 1}, {1, 1, 0, 0}) == doctest::Approx(0.0));
    // classes absent from both truth and prediction are excluded
    CHECK(macro_f1({0, 0, 5, 5}, {0, 0, 5, 5}) == doctest::Approx(1.0));
}

TEST_CASE("constant predictor on a balanced 6-class split") {
    // accuracy 1/6; predicted class F1 = 2/7, the other five get 0
    std::vector<int> truth, pred;
    for (int i = 0; i < 60; ++i) {
        truth.push_back(i % 6);
        pred.push_back(2);
    }
    CHECK(accuracy(truth, pred) == doctest::Approx(1.0 / 6.0));
    CHECK(macro_f1(truth, pred) == doctest::Approx((2.0 / 7.0) / 6.0).epsilon(1e-9));
}

TEST_CASE("macro_f1 matches the confusion-matrix oracle on random vectors") {
    std::mt19937 rng(303);
    for (int trial = 0; trial < 200; ++trial) {
        std::uniform_int_distribution<int> len(1, 60), cls(0, 5);
        const int n = len(rng);
        std::vector<int> truth, pred;
        for (int i = 0; i < n; ++i) {
            truth.push_back(cls(rng));
            pred.push_back(cls(rng));
        }
        CHECK(macro_f1(truth, pred) == doctest::Approx(oracle_macro_f1(truth, pred)).epsilon(1e-9));
    }
}

TEST_CASE("rolling_f1 window semantics") {
    SUBCASE("constant-correct stream is constant 1.0") {
        std::vector<int> truth(250, 1), pred(250, 1);
        auto series = rolling_f1(truth, pred, 100);
        REQUIRE(series.size() == 151);
        for (double v : series) CHECK(v == doctest::Approx(1.0));
    }
    SUBCASE("step change reaches 1.0 exactly 100 samples after the change") {
        // wrong for 150 samples, then correct
        std::vector<int> truth(400, 1);
        std::vector<int> pred;
        for (int i = 0; i < 400; ++i) pred.push_back(i < 150 ? 0 : 1);
        auto series = rolling_f1(truth, pred, 100);
        // series index i covers records [i, i+99]
        for (size_t i = 0; i < series.size(); ++i) {
            if (i < 150)
                CHECK(series[i] < 1.0);
            else
                CHECK(series[i] == doctest::Approx(1.0));
        }
    }
    SUBCASE("window larger than the stream gives an empty series") {
        std::vector<int> truth(50, 0), pred(50, 0);
        CHECK(rolling_f1(truth, pred, 100).empty());
    }
}

TEST_CASE("sequence_order protocols") {
    DatasetSplit split = multi_domain_split({0, 2, 5}, 6, 3);

    SUBCASE("ascending visits domains in increasing order, each sample once") {
        SequenceSpec spec;
        spec.mode = SequenceSpec::Mode::Ascending;
        auto order = sequence_order(split, spec);
        REQUIRE(order.size() == split.samples.size());
        int prev_domain = -1;
        for (int64_t idx : order) {
            const int d = split.samples[static_cast<size_t>(idx)].domain;
            CHECK(d >= prev_domain);
            prev_domain = d;
        }
        std::vector<int64_t> sorted = order;
        std::sort(sorted.begin(), sorted.end());
        for (size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == static_cast<int64_t>(i));
    }
    SUBCASE("descending is the domain-reverse of ascending") {
        SequenceSpec spec;
        spec.mode = SequenceSpec::Mode::Descending;
        auto order = sequence_order(split, spec);
        int prev_domain = 1 << 20;
        for (int64_t idx : order) {
            const int d = split.samples[static_cast<size_t>(idx)].domain;
            CHECK(d <= prev_domain);
            prev_domain = d;
        }
    }
    SUBCASE("alternating emits the specified block pattern") {
        SequenceSpec spec;
        spec.mode = SequenceSpec::Mode::Alternating;
        spec.domain_order = {0, 2};
        spec.repeats = 3;
        auto order = sequence_order(split, spec);
        REQUIRE(order.size() == 12);  // domains 0 and 2 only, 6 samples each
        for (size_t i = 0; i < order.size(); ++i) {
            const int expect = (i / 3) % 2 == 0 ? 0 : 2;
            CHECK(split.samples[static_cast<size_t>(order[i])].domain == expect);
        }
    }
    SUBCASE("shuffled is a seeded permutation") {
        SequenceSpec spec;
        spec.mode = SequenceSpec::Mode::Shuffled;
        spec.rng_seed = 7;
        auto a = sequence_order(split, spec);
        auto b = sequence_order(split, spec);
        CHECK(a == b);
        spec.rng_seed = 8;
        CHECK(sequence_order(split, spec) != a);
        std::sort(a.begin(), a.end());
        for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == static_cast<int64_t>(i));
    }
    SUBCASE("unknown domains are rejected") {
        SequenceSpec spec;
        spec.mode = SequenceSpec::Mode::Alternating;
        spec.domain_order = {0, 9};
        CHECK_THROWS_AS(sequence_order(split, spec), UnknownDomain);
    }
}

TEST_CASE("evaluate aggregates records in protocol order") {
    DatasetSplit split = multi_domain_split({0, 1}, 10, 2);
    SequenceSpec spec;
    spec.mode = SequenceSpec::Mode::Ascending;

    TruthPredictor perfect;
    RunMetrics m = evaluate(perfect, split, spec);
    CHECK(m.records.size() == split.samples.size());
    CHECK(m.accuracy == doctest::Approx(1.0));
    CHECK(m.macro_f1 == doctest::Approx(1.0));
    for (const SampleRecord &r : m.records) CHECK(r.latency_ms >= 0.0);

    ConstantPredictor constant(0);
    RunMetrics c = evaluate(constant, split, spec);
    CHECK(c.accuracy == doctest::Approx(0.5));
}

TEST_CASE("bench_inference counting contract") {
    auto generator = default_activity_template();
    auto spec = testsupport::ramp_domain(0, 0.4, 0.02f);
    auto samples = synthesize_domain(spec, 4, generator, SplitName::Test, 2).samples;

    ModelConfig cfg;
    cfg.embed_dim = 8;
    cfg.n_heads = 2;
    cfg.mlp_hidden = 16;
    cfg.stem_kernel = 32;
    cfg.stem_stride = 16;
    cfg.n_domains = 2;
    ModelGraph model = ModelGraph::create(cfg, 3);
    SourceStatistics stats = compute_source_statistics(model, samples, {1});

    AdaptationConfig acfg;
    acfg.layer_ids = {1};
    acfg.tta_learning_rate = 1e-5f;
    acfg.reset_rate = 1e-3f;
    auto result = bench_inference(model, stats, acfg, samples, 25, 5);
    REQUIRE(result.size() == 3);
    for (const auto &[name, stat] : result) {
        CHECK(stat.iters == 25);  // warmup excluded, exactly n_iters records
        CHECK(stat.mean_ms > 0.0);
    }
}

TEST_CASE("run_experiment determinism, sequence orders and ablation grid") {
    Config cfg = Config::from_string(R"(
model.embed_dim = 8
model.n_heads = 2
model.mlp_hidden = 16
model.stem_kernel = 32
model.stem_stride = 16
synth.n_domains = 3
synth.per_domain = 20
synth.activities = 2
synth.domain0.gain_slope = 0.8
synth.domain0.noise = 0.03
synth.domain1.gain_slope = -0.8
synth.domain1.noise = 0.05
synth.domain2.gain_slope = 0.0
synth.domain2.noise = 0.08
split.source_domains = 0,1
split.target_domains = 2
train.epochs = 1
train.batch_size = 10
train.rng_seed = 3
tta.learning_rate = 1e-4
tta.reset_rate = 1e-3
eval.modes = ascending,descending
eval.adapt = true
exp.grid = augment,reset
)");

    namespace fs = std::filesystem;
    const std::string dir_a = (fs::temp_directory_path() / "datta_exp_a").string();
    const std::string dir_b = (fs::temp_directory_path() / "datta_exp_b").string();
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
    run_experiment(cfg, dir_a);
    run_experiment(cfg, dir_b);

    SUBCASE("identical config gives byte-identical metrics files") {
        for (const auto &entry : fs::directory_iterator(dir_a)) {
            if (entry.path().extension() != ".txt" && entry.path().extension() != ".tsv") continue;
            std::ifstream fa(entry.path());
            std::ifstream fb(dir_b + "/" + entry.path().filename().string());
            REQUIRE(fb.good());
            std::stringstream sa, sb;
            sa << fa.rdbuf();
            sb << fb.rdbuf();
            CHECK(sa.str() == sb.str());
        }
    }
    SUBCASE("ascending and descending emit reversed domain orders") {
        auto domains_of = [&](const std::string &path) {
            std::ifstream in(path);
            REQUIRE(in.good());
            std::string line;
            std::vector<int> domains;
            while (std::getline(in, line)) {
                if (line.empty() || line[0] == '#') continue;
                std::istringstream ss(line);
                std::string id;
                int pred, truth, dom;
                ss >> id >> pred >> truth >> dom;
                if (domains.empty() || domains.back() != dom) domains.push_back(dom);
            }
            return domains;
        };
        auto asc = domains_of(dir_a + "/metrics_ascending_aug1_reset1.txt");
        auto desc = domains_of(dir_a + "/metrics_descending_aug1_reset1.txt");
        std::reverse(desc.begin(), desc.end());
        CHECK(asc == desc);
    }
    SUBCASE("grid produces one row per combination") {
        std::ifstream in(dir_a + "/results.tsv");
        std::string line;
        int rows = 0;
        std::getline(in, line);  // header
        while (std::getline(in, line))
            if (!line.empty()) ++rows;
        // {augment off,on} x {reset off,on} x {ascending,descending}
        CHECK(rows == 8);
    }
    SUBCASE("manifest carries the config hash and seeds") {
        std::ifstream in(dir_a + "/manifest.json");
        std::stringstream ss;
        ss << in.rdbuf();
        CHECK(ss.str().find("config_hash") != std::string::npos);
        CHECK(ss.str().find("seeds") != std::string::npos);
    }
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
}

TEST_CASE("config parsing and hashing") {
    Config c = Config::from_string("a.b = 1\n# comment\nc.d = hello\n");
    CHECK(c.get_int("a.b", 0) == 1);
    CHECK(c.get("c.d", "") == "hello");
    CHECK(c.get_double("missing", 2.5) == 2.5);
    const uint64_t h1 = c.hash();
    Config c2 = Config::from_string("c.d = hello\na.b = 1\n");
    CHECK(c2.hash() == h1);  // canonical ordering
    c2.set("a.b", "2");
    CHECK(c2.hash() != h1);
    CHECK_THROWS(Config::from_string("not a key value line\n"));
}
