#pragma once

#include "phishscope/gateway.hpp"
#include "phishscope/simplifier.hpp"
#include "phishscope/verdict.hpp"

#include "json.hpp"

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace phishscope {

enum class Label { phishing, legitimate };

std::string_view to_string(Label label);

struct LabeledSample {
    std::filesystem::path path;
    Label label = Label::legitimate;
};

struct SkippedFile {
    std::filesystem::path path;
    std::string reason;
};

struct Dataset {
    std::vector<LabeledSample> samples;
    std::vector<SkippedFile> skipped;
};

/// Reads <root>/phishing/*.eml and <root>/legitimate/*.eml in lexicographic
/// order. Files that cannot be read or parsed are skipped and listed with a
/// reason. Throws EmptyDataset when nothing usable remains.
Dataset load_dataset(const std::filesystem::path& root);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct ConfusionMatrix {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
    bool operator==(const ConfusionMatrix&) const = default;
};

/// nullopt marks an undefined ratio (zero denominator).
struct EvalMetrics {
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> accuracy;
};

EvalMetrics compute_metrics(const ConfusionMatrix& m);

enum class Outcome { tp, tn, fp, fn };

std::string_view to_string(Outcome outcome);
Outcome classify(Label label, bool predicted_phishing);

// ---------------------------------------------------------------------------
// Per-sample pipeline
// ---------------------------------------------------------------------------

struct PipelineOptions {
    PromptVariant prompt = PromptVariant::normal;  // normal or simple; the profile picks the embedded form
    TokenBudget budget{3000};
    std::optional<TokenizerId> tokenizer;  // defaults to the profile's tokenizer
    std::string dummy_to = "user@example.com";
    std::vector<std::string> denylist;  // extra header patterns
    SimplifyOptions simplify;
};

struct SampleRecord {
    std::string path;
    std::optional<Label> label;
    std::string sha256;
    std::string profile;
    PromptVariant variant = PromptVariant::normal;
    std::vector<std::string> schema_properties;
    std::vector<std::string> reduction_log;
    std::size_t email_tokens = 0;
    std::optional<DetectionVerdict> verdict;
    std::string error_kind;  // empty on success
    std::string error;
    std::size_t input_tokens = 0;
    std::size_t output_tokens = 0;
    double latency_ms = 0;        // last attempt
    double total_latency_ms = 0;  // end to end, retries included
    int attempts = 0;

    bool ok() const { return verdict.has_value(); }
    std::optional<Outcome> outcome() const;
    /// is_phishing and the score point different ways (score below 5 for a
    /// phishing verdict, above 5 for a legitimate one).
    bool score_disagrees() const;
    /// Key used to reuse a cached verdict: content hash, profile and variant.
    std::string cache_key() const;
};

nlohmann::json record_to_json(const SampleRecord& record);
SampleRecord record_from_json(const nlohmann::json& object);

std::string sha256_hex(std::string_view bytes);

/// Run parse, sanitize, anonymize, simplify, render, submit and interpret
/// on one message. Pipeline errors are recorded, not thrown.
SampleRecord analyze_email(const RawEmail& raw, Gateway& gateway, const PipelineOptions& options);

// ---------------------------------------------------------------------------
// Aggregates
// ---------------------------------------------------------------------------

struct ScoreHistogram {
    // bins[score][outcome], outcome indexed as Outcome
    std::array<std::array<std::size_t, 4>, 11> bins{};
    std::size_t unscored = 0;

    std::size_t scored_total() const;
    bool operator==(const ScoreHistogram&) const = default;
};

ScoreHistogram histogram_scores(const std::vector<SampleRecord>& records);

struct CostReport {
    std::size_t total_input_tokens = 0;
    std::size_t total_output_tokens = 0;
    double total_cost = 0;  // USD

    bool operator==(const CostReport&) const = default;
};

CostReport estimate_cost(const std::vector<SampleRecord>& records, const ProviderProfile& profile);
double token_cost(std::size_t input_tokens, std::size_t output_tokens, const ProviderProfile& profile);

struct LatencyStats {
    std::size_t count = 0;
    double mean_ms = 0, p50_ms = 0, p95_ms = 0;
};

/// Nearest-rank percentiles over the given samples.
LatencyStats latency_stats(std::vector<double> samples_ms);

struct EvalOptions {
    PipelineOptions pipeline;
    int workers = 4;
    /// Verdicts from an earlier run, by SampleRecord::cache_key().
    std::map<std::string, SampleRecord> cache;
    std::function<void(const SampleRecord&)> on_record;  // called from the collector
};

struct EvalResult {
    ConfusionMatrix matrix;
    EvalMetrics metrics;
    ScoreHistogram histogram;
    CostReport cost;
    LatencyStats attempt_latency;
    LatencyStats end_to_end_latency;
    std::vector<SampleRecord> records;  // in sample order
    std::size_t errors = 0;
    std::size_t cache_hits = 0;
    std::size_t disagreements = 0;
};

/// Tally the matrix and aggregates from finished records. Failed samples are
/// left out of the matrix.
EvalResult aggregate(std::vector<SampleRecord> records, const ProviderProfile& profile);

/// Evaluate every sample with a worker pool. Throws EmptyDataset for no
/// samples; per-sample failures are recorded and counted.
EvalResult evaluate_corpus(const std::vector<LabeledSample>& samples, Gateway& gateway, EvalOptions options);

/// Throws FailureCeilingExceeded when the failed fraction is above `ceiling`.
void enforce_failure_ceiling(const EvalResult& result, double ceiling);

/// Records of a previous records.jsonl keyed for reuse; failed records are
/// not reused. A missing file yields an empty map.
std::map<std::string, SampleRecord> load_record_cache(const std::filesystem::path& records_jsonl);

/// "TP FP TN FN precision recall accuracy", percentages with two decimals.
std::string format_table_row(const ConfusionMatrix& m, const EvalMetrics& metrics);

nlohmann::json metrics_to_json(const EvalResult& result);
nlohmann::json cost_to_json(const CostReport& cost, const ProviderProfile& profile);
std::string histogram_csv(const ScoreHistogram& histogram);
std::string histogram_svg(const ScoreHistogram& histogram);

/// Write through a temporary file in the same directory, then rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// metrics.json, records.jsonl, histogram.csv, cost.json and, optionally,
/// histogram.svg under `out_dir`.
void write_artifacts(const std::filesystem::path& out_dir, const EvalResult& result, const ProviderProfile& profile,
                     bool chart = false);

} // namespace phishscope
