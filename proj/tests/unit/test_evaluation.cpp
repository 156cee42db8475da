#include "phishscope/errors.hpp"
#include "phishscope/evaluation.hpp"

#include "doctest.h"
#include "generators.hpp"

#include <fstream>
#include <set>
#include <sstream>

using namespace phishscope;
namespace fs = std::filesystem;

namespace {

struct Table2Row {
    const char* name;
    std::size_t tp, fp, tn, fn;
    double precision, recall, accuracy;
};

const Table2Row kTable2[] = {
#include "table2.inc"
};

const fs::path kCorpus = fs::path(TEST_DATA_DIR) / "corpus";

// Fresh scratch directory per test case.
struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("phishscope-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write(const fs::path& p, const std::string& content) {
    fs::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << content;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

SampleRecord scored(Label label, bool predicted, std::optional<int> score) {
    SampleRecord r;
    r.label = label;
    DetectionVerdict v;
    v.is_phishing = predicted;
    v.phishing_score = score;
    r.verdict = v;
    return r;
}

class RefusingProvider : public Provider {
public:
    RawModelResponse complete(const ProviderRequest&) override {
        ++calls;
        throw ProviderRefusal(400, "no");
    }
    std::atomic<int> calls{0};
};

ProviderProfile priced(double in, double out) {
    ProviderProfile p = builtin_mock_profile();
    p.price_per_1k_input = in;
    p.price_per_1k_output = out;
    return p;
}

} // namespace

TEST_CASE("metrics reproduce the published table") {
    for (const auto& row : kTable2) {
        CAPTURE(row.name);
        const auto m = compute_metrics({row.tp, row.fp, row.tn, row.fn});
        REQUIRE(m.precision);
        REQUIRE(m.recall);
        REQUIRE(m.accuracy);
        CHECK(std::abs(*m.precision * 100 - row.precision) <= 0.005);
        CHECK(std::abs(*m.recall * 100 - row.recall) <= 0.005);
        CHECK(std::abs(*m.accuracy * 100 - row.accuracy) <= 0.005);
    }
    CHECK(std::size(kTable2) == 12);
}

TEST_CASE("undefined ratios") {
    const auto m = compute_metrics({0, 0, 10, 0});
    CHECK_FALSE(m.precision);
    CHECK_FALSE(m.recall);
    CHECK(m.accuracy == 1.0);
    CHECK_FALSE(compute_metrics({}).accuracy);
    CHECK(format_table_row({0, 0, 10, 0}, m) == "0 0 10 0 n/a n/a 100.00%");
    CHECK(format_table_row({5, 0, 5, 0}, compute_metrics({5, 0, 5, 0})) == "5 0 5 0 100.00% 100.00% 100.00%");
}

TEST_CASE("aggregate matches a brute-force recount") {
    testgen::Rng rng(53);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<SampleRecord> records;
        std::size_t tp = 0, fp = 0, tn = 0, fn = 0, failed = 0;
        const std::size_t n = testgen::uniform(rng, 1, 200);
        for (std::size_t i = 0; i < n; ++i) {
            const Label label = testgen::chance(rng, 0.5) ? Label::phishing : Label::legitimate;
            if (testgen::chance(rng, 0.1)) {
                SampleRecord bad;
                bad.label = label;
                bad.error_kind = "Unparseable";
                records.push_back(bad);
                ++failed;
                continue;
            }
            const bool pred = testgen::chance(rng, 0.5);
            records.push_back(scored(label, pred, static_cast<int>(testgen::uniform(rng, 0, 10))));
            if (label == Label::phishing) (pred ? tp : fn)++;
            else (pred ? fp : tn)++;
        }
        const auto result = aggregate(records, builtin_mock_profile());
        CHECK(result.matrix == ConfusionMatrix{tp, fp, tn, fn});
        CHECK(result.errors == failed);
        CHECK(result.histogram.scored_total() == n - failed);
    }
    CHECK(classify(Label::phishing, true) == Outcome::tp);
    CHECK(classify(Label::phishing, false) == Outcome::fn);
    CHECK(classify(Label::legitimate, true) == Outcome::fp);
    CHECK(classify(Label::legitimate, false) == Outcome::tn);
}

TEST_CASE("score histogram") {
    CHECK(histogram_scores({}) == ScoreHistogram{});
    std::vector<SampleRecord> records = {
        scored(Label::phishing, true, 8),    scored(Label::phishing, true, 8),   scored(Label::legitimate, false, 0),
        scored(Label::legitimate, true, 7),  scored(Label::phishing, false, 2),  scored(Label::phishing, true, std::nullopt),
    };
    const auto h = histogram_scores(records);
    CHECK(h.bins[8][static_cast<int>(Outcome::tp)] == 2);
    CHECK(h.bins[0][static_cast<int>(Outcome::tn)] == 1);
    CHECK(h.bins[7][static_cast<int>(Outcome::fp)] == 1);
    CHECK(h.bins[2][static_cast<int>(Outcome::fn)] == 1);
    CHECK(h.unscored == 1);
    CHECK(h.scored_total() == 5);
    const std::string csv = histogram_csv(h);
    CHECK(csv.starts_with("score,TP,TN,FP,FN\n0,0,1,0,0\n"));
    CHECK(csv.find("\n8,2,0,0,0\n") != std::string::npos);
    CHECK(histogram_svg(h).find("<svg") != std::string::npos);

    // disagreement diagnostic
    CHECK(scored(Label::phishing, true, 2).score_disagrees());
    CHECK(scored(Label::phishing, false, 9).score_disagrees());
    CHECK_FALSE(scored(Label::phishing, true, 5).score_disagrees());
    CHECK_FALSE(scored(Label::phishing, true, std::nullopt).score_disagrees());
}

TEST_CASE("cost accounting") {
    CHECK(token_cost(1000, 500, priced(0.03, 0.06)) == doctest::Approx(0.06).epsilon(1e-12));
    CHECK(token_cost(1000, 1000, priced(0.002, 0.002)) == doctest::Approx(0.004).epsilon(1e-12));
    CHECK(token_cost(0, 0, priced(0.03, 0.06)) == 0.0);
    CHECK(token_cost(123456, 7890, priced(0, 0)) == 0.0);

    testgen::Rng rng(59);
    const auto p = priced(0.03, 0.06);
    for (int i = 0; i < 500; ++i) {
        const std::size_t a = testgen::uniform(rng, 0, 100000), b = testgen::uniform(rng, 0, 100000);
        const std::size_t c = testgen::uniform(rng, 0, 100000), d = testgen::uniform(rng, 0, 100000);
        const std::size_t k = testgen::uniform(rng, 1, 20);
        CHECK(token_cost(a + c, b + d, p) == doctest::Approx(token_cost(a, b, p) + token_cost(c, d, p)));
        CHECK(token_cost(k * a, k * b, p) == doctest::Approx(k * token_cost(a, b, p)));
    }

    std::vector<SampleRecord> records(3);
    for (auto& r : records) {
        r.input_tokens = 1000;
        r.output_tokens = 500;
    }
    const auto report = estimate_cost(records, p);
    CHECK(report.total_input_tokens == 3000);
    CHECK(report.total_output_tokens == 1500);
    CHECK(report.total_cost == doctest::Approx(0.18));
}

TEST_CASE("latency percentiles") {
    const auto s = latency_stats({5, 1, 4, 2, 3, 6, 7, 8, 9, 10});
    CHECK(s.count == 10);
    CHECK(s.mean_ms == doctest::Approx(5.5));
    CHECK(s.p50_ms == 5);
    CHECK(s.p95_ms == 10);
    CHECK(latency_stats({}).count == 0);
}

TEST_CASE("dataset loading") {
    SUBCASE("two phishing and three legitimate") {
        TempDir dir;
        for (int i = 0; i < 2; ++i) write(dir.path / "phishing" / ("p" + std::to_string(i) + ".eml"), "From: a@b\n\nx");
        for (int i = 0; i < 3; ++i) write(dir.path / "legitimate" / ("l" + std::to_string(i) + ".eml"), "From: a@b\n\ny");
        write(dir.path / "legitimate" / "notes.txt", "ignored");
        const auto ds = load_dataset(dir.path);
        REQUIRE(ds.samples.size() == 5);
        CHECK(ds.samples[0].label == Label::legitimate);  // lexicographic by path
        CHECK(std::count_if(ds.samples.begin(), ds.samples.end(), [](auto& s) { return s.label == Label::phishing; }) == 2);
        CHECK(ds.skipped.empty());
    }
    SUBCASE("empty root") {
        TempDir dir;
        CHECK_THROWS_AS(load_dataset(dir.path), EmptyDataset);
        CHECK_THROWS_AS(load_dataset(dir.path / "missing"), EmptyDataset);
    }
    SUBCASE("one corrupt file among ten") {
        TempDir dir;
        for (int i = 0; i < 9; ++i) write(dir.path / "phishing" / ("m" + std::to_string(i) + ".eml"), "From: a@b\n\nx");
        write(dir.path / "phishing" / "broken.eml", "no header section here at all");
        const auto ds = load_dataset(dir.path);
        CHECK(ds.samples.size() == 9);
        REQUIRE(ds.skipped.size() == 1);
        CHECK(ds.skipped[0].path.filename() == "broken.eml");
        CHECK_FALSE(ds.skipped[0].reason.empty());
    }
}

TEST_CASE("offline corpus evaluation") {
    const auto ds = load_dataset(kCorpus);
    REQUIRE(ds.samples.size() == 10);
    Gateway gw(builtin_mock_profile());
    const auto first = evaluate_corpus(ds.samples, gw, {});
    CHECK(first.matrix == ConfusionMatrix{5, 0, 5, 0});
    CHECK(first.metrics.accuracy == 1.0);
    CHECK(first.errors == 0);
    CHECK(first.histogram.scored_total() == 10);
    CHECK(first.disagreements == 0);

    EvalOptions one_worker;
    one_worker.workers = 1;
    const auto second = evaluate_corpus(ds.samples, gw, one_worker);
    CHECK(second.matrix == first.matrix);
    REQUIRE(second.records.size() == first.records.size());
    for (std::size_t i = 0; i < first.records.size(); ++i) {
        CHECK(record_to_json(second.records[i])["verdict"] == record_to_json(first.records[i])["verdict"]);
        CHECK(second.records[i].path == first.records[i].path);
        CHECK(second.records[i].sha256 == first.records[i].sha256);
    }
    CHECK(first.records[0].sha256.size() == 64);
}

TEST_CASE("failing provider") {
    const auto ds = load_dataset(kCorpus);
    auto refusing = std::make_shared<RefusingProvider>();
    Gateway gw(builtin_mock_profile(), refusing);
    const auto result = evaluate_corpus(ds.samples, gw, {});
    CHECK(result.matrix == ConfusionMatrix{});
    CHECK(result.errors == 10);
    CHECK(result.records.size() == 10);
    for (const auto& r : result.records) CHECK(r.error_kind == "ProviderRefusal");
    CHECK(refusing->calls == 10);  // refusals are not retried
    CHECK_THROWS_AS(enforce_failure_ceiling(result, 0.5), FailureCeilingExceeded);
    CHECK_NOTHROW(enforce_failure_ceiling(result, 1.0));
    CHECK_THROWS_AS(evaluate_corpus({}, gw, {}), EmptyDataset);
}

TEST_CASE("cached verdicts skip the provider") {
    const auto ds = load_dataset(kCorpus);
    TempDir dir;
    Gateway gw(builtin_mock_profile());
    const auto first = evaluate_corpus(ds.samples, gw, {});
    write_artifacts(dir.path, first, gw.profile());

    auto mock = std::make_shared<MockProvider>(builtin_mock_profile());
    Gateway fresh(builtin_mock_profile(), mock);
    EvalOptions opts;
    opts.cache = load_record_cache(dir.path / "records.jsonl");
    CHECK(opts.cache.size() == 10);
    const auto again = evaluate_corpus(ds.samples, fresh, opts);
    CHECK(mock->calls() == 0);
    CHECK(again.cache_hits == 10);
    CHECK(again.matrix == first.matrix);

    // a different variant is a different key
    EvalOptions simple = opts;
    simple.pipeline.prompt = PromptVariant::simple;
    evaluate_corpus(ds.samples, fresh, simple);
    CHECK(mock->calls() == 10);
    CHECK(load_record_cache(dir.path / "nothing.jsonl").empty());
}

TEST_CASE("records serialize losslessly") {
    testgen::Rng rng(61);
    for (int i = 0; i < 200; ++i) {
        SampleRecord r;
        r.path = "x/" + std::to_string(i) + ".eml";
        if (testgen::chance(rng, 0.8)) r.label = testgen::chance(rng, 0.5) ? Label::phishing : Label::legitimate;
        r.sha256 = sha256_hex(std::to_string(i));
        r.profile = "mock";
        r.variant = PromptVariant::embedded_schema_simple;
        r.schema_properties = {"is_phishing"};
        r.reduction_log = {"organize_multipart"};
        r.email_tokens = i;
        if (testgen::chance(rng, 0.7)) r.verdict = testgen::random_verdict(rng);
        else r.error_kind = "Unparseable", r.error = "nothing found";
        r.input_tokens = 10 * i;
        r.output_tokens = i;
        r.latency_ms = 1.5;
        r.total_latency_ms = 2.5;
        r.attempts = 2;
        const SampleRecord back = record_from_json(nlohmann::json::parse(record_to_json(r).dump()));
        CHECK(record_to_json(back) == record_to_json(r));
        CHECK(back.cache_key() == r.cache_key());
    }
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("artifacts and atomic writes") {
    TempDir dir;
    const auto target = dir.path / "out.txt";
    write_file_atomic(target, "first");
    write_file_atomic(target, "second");
    CHECK(slurp(target) == "second");
    std::size_t entries = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir.path)) ++entries;
    CHECK(entries == 1);  // no temporary left behind

    Gateway gw(builtin_mock_profile());
    const auto result = evaluate_corpus(load_dataset(kCorpus).samples, gw, {});
    write_artifacts(dir.path / "run", result, gw.profile(), true);
    for (const char* f : {"metrics.json", "records.jsonl", "histogram.csv", "cost.json", "histogram.svg"}) {
        CAPTURE(f);
        CHECK(fs::exists(dir.path / "run" / f));
    }
    const auto metrics = nlohmann::json::parse(slurp(dir.path / "run" / "metrics.json"));
    CHECK(metrics.dump().find("\"tp\":5") != std::string::npos);
    std::istringstream lines(slurp(dir.path / "run" / "records.jsonl"));
    std::size_t n = 0;
    for (std::string line; std::getline(lines, line);) {
        CHECK(nlohmann::json::accept(line));
        ++n;
    }
    CHECK(n == 10);
    const auto cost = nlohmann::json::parse(slurp(dir.path / "run" / "cost.json"));
    CHECK(cost.dump().find("0.0") != std::string::npos);
}
