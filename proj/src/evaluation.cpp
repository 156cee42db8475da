#include "phishscope/evaluation.hpp"

#include "phishscope/errors.hpp"
#include "phishscope/headers.hpp"
#include "phishscope/mime.hpp"
#include "phishscope/response_parsing.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>
#include <typeinfo>

namespace phishscope {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Label label) { return label == Label::phishing ? "phishing" : "legitimate"; }

std::string_view to_string(Outcome outcome) {
    switch (outcome) {
    case Outcome::tp: return "TP";
    case Outcome::tn: return "TN";
    case Outcome::fp: return "FP";
    case Outcome::fn: return "FN";
    }
    return "TN";
}

Outcome classify(Label label, bool predicted_phishing) {
    if (label == Label::phishing) return predicted_phishing ? Outcome::tp : Outcome::fn;
    return predicted_phishing ? Outcome::fp : Outcome::tn;
}

namespace {

std::optional<std::string> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) return std::nullopt;
    return std::move(buf).str();
}

} // namespace

Dataset load_dataset(const fs::path& root) {
    Dataset out;
    std::vector<std::pair<fs::path, Label>> files;
    std::error_code ec;
    for (auto [dir, label] : {std::pair{"phishing", Label::phishing}, std::pair{"legitimate", Label::legitimate}}) {
        const fs::path sub = root / dir;
        if (!fs::is_directory(sub, ec)) continue;
        for (const auto& entry : fs::directory_iterator(sub, ec)) {
            if (entry.path().extension() != ".eml" && entry.path().extension() != ".EML") continue;
            files.emplace_back(entry.path(), label);
        }
    }
    std::sort(files.begin(), files.end());

    for (const auto& [path, label] : files) {
        auto bytes = read_file(path);
        if (!bytes) {
            out.skipped.push_back({path, "unreadable"});
            continue;
        }
        if (bytes->empty()) {
            out.skipped.push_back({path, "empty file"});
            continue;
        }
        try {
            parse_eml({*bytes, path.string()});
        } catch (const MalformedMessage& e) {
            out.skipped.push_back({path, e.what()});
            continue;
        }
        out.samples.push_back({path, label});
    }
    if (out.samples.empty()) throw EmptyDataset("no usable .eml files under " + root.string());
    return out;
}

EvalMetrics compute_metrics(const ConfusionMatrix& m) {
    auto ratio = [](std::size_t num, std::size_t den) -> std::optional<double> {
        if (den == 0) return std::nullopt;
        return static_cast<double>(num) / static_cast<double>(den);
    };
    return {ratio(m.tp, m.tp + m.fp), ratio(m.tp, m.tp + m.fn), ratio(m.tp + m.tn, m.total())};
}

std::optional<Outcome> SampleRecord::outcome() const {
    if (!verdict || !label) return std::nullopt;
    return classify(*label, verdict->is_phishing);
}

bool SampleRecord::score_disagrees() const {
    if (!verdict || !verdict->phishing_score) return false;
    const int s = *verdict->phishing_score;
    return verdict->is_phishing ? s < 5 : s > 5;
}

std::string SampleRecord::cache_key() const {
    return sha256 + "|" + profile + "|" + std::string(to_string(variant));
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

json record_to_json(const SampleRecord& r) {
    json j;
    j["path"] = r.path;
    j["label"] = r.label ? json(std::string(to_string(*r.label))) : json(nullptr);
    j["sha256"] = r.sha256;
    j["profile"] = r.profile;
    j["variant"] = std::string(to_string(r.variant));
    j["schema_properties"] = r.schema_properties;
    j["reduction_log"] = r.reduction_log;
    j["email_tokens"] = r.email_tokens;
    j["verdict"] = r.verdict ? json::parse(verdict_to_json(*r.verdict)) : json(nullptr);
    auto outcome = r.outcome();
    j["outcome"] = outcome ? json(std::string(to_string(*outcome))) : json(nullptr);
    j["score_disagrees"] = r.score_disagrees();
    j["error_kind"] = r.error_kind.empty() ? json(nullptr) : json(r.error_kind);
    j["error"] = r.error.empty() ? json(nullptr) : json(r.error);
    j["input_tokens"] = r.input_tokens;
    j["output_tokens"] = r.output_tokens;
    j["latency_ms"] = r.latency_ms;
    j["total_latency_ms"] = r.total_latency_ms;
    j["attempts"] = r.attempts;
    return j;
}

SampleRecord record_from_json(const json& j) {
    SampleRecord r;
    r.path = j.at("path").get<std::string>();
    if (!j.at("label").is_null()) {
        r.label = j["label"].get<std::string>() == "phishing" ? Label::phishing : Label::legitimate;
    }
    r.sha256 = j.at("sha256").get<std::string>();
    r.profile = j.at("profile").get<std::string>();
    auto variant = parse_prompt_variant(j.at("variant").get<std::string>());
    if (!variant) throw ConfigError("record has unknown variant");
    r.variant = *variant;
    r.schema_properties = j.value("schema_properties", std::vector<std::string>{});
    r.reduction_log = j.value("reduction_log", std::vector<std::string>{});
    r.email_tokens = j.value("email_tokens", std::size_t{0});
    if (j.contains("verdict") && !j["verdict"].is_null()) r.verdict = verdict_from_json(j["verdict"]);
    if (j.contains("error_kind") && j["error_kind"].is_string()) r.error_kind = j["error_kind"].get<std::string>();
    if (j.contains("error") && j["error"].is_string()) r.error = j["error"].get<std::string>();
    r.input_tokens = j.value("input_tokens", std::size_t{0});
    r.output_tokens = j.value("output_tokens", std::size_t{0});
    r.latency_ms = j.value("latency_ms", 0.0);
    r.total_latency_ms = j.value("total_latency_ms", 0.0);
    r.attempts = j.value("attempts", 0);
    return r;
}

namespace {

std::string error_kind(const std::exception& e) {
    // most specific first
    if (dynamic_cast<const MalformedMessage*>(&e)) return "MalformedMessage";
    if (dynamic_cast<const UnknownTokenizer*>(&e)) return "UnknownTokenizer";
    if (dynamic_cast<const NoBody*>(&e)) return "NoBody";
    if (dynamic_cast<const BudgetUnreachable*>(&e)) return "BudgetUnreachable";
    if (dynamic_cast<const TransportError*>(&e)) return "TransportError";
    if (dynamic_cast<const AuthError*>(&e)) return "AuthError";
    if (dynamic_cast<const ProviderRefusal*>(&e)) return "ProviderRefusal";
    if (dynamic_cast<const SchemaViolation*>(&e)) return "SchemaViolation";
    if (dynamic_cast<const Unparseable*>(&e)) return "Unparseable";
    if (dynamic_cast<const InvalidScore*>(&e)) return "InvalidScore";
    if (dynamic_cast<const RationalesTooLong*>(&e)) return "RationalesTooLong";
    if (dynamic_cast<const MissingField*>(&e)) return "MissingField";
    if (dynamic_cast<const ConfigError*>(&e)) return "ConfigError";
    return "Error";
}

} // namespace

SampleRecord analyze_email(const RawEmail& raw, Gateway& gateway, const PipelineOptions& options) {
    const ProviderProfile& profile = gateway.profile();
    SampleRecord r;
    r.path = raw.source_path.value_or("");
    r.sha256 = sha256_hex(raw.bytes);
    r.profile = profile.name;
    r.variant = resolve_variant(options.prompt, profile.supports_structured_output);
    const ResponseSchema schema = build_function_schema(r.variant);
    for (const auto& p : schema.properties) r.schema_properties.push_back(p.name);

    try {
        ParsedEmail email = parse_eml(raw);
        email = sanitize_headers(std::move(email), options.denylist);
        email = anonymize_recipients(std::move(email), options.dummy_to);
        const TokenizerId tokenizer = options.tokenizer.value_or(profile.tokenizer);
        const TokenizerRegistry& registry = *options.simplify.tokenizers;
        SimplifiedEmail simplified = simplify(email, tokenizer, options.budget, options.simplify);
        r.reduction_log = simplified.reduction_log;
        RenderedPrompt prompt = render_prompt(simplified, r.variant, tokenizer, registry);
        r.email_tokens = prompt.email_token_count;

        RawModelResponse response = gateway.submit(prompt, schema);
        r.input_tokens = response.input_tokens;
        r.output_tokens = response.output_tokens;
        r.latency_ms = response.latency.count();
        r.total_latency_ms = response.total_latency.count();
        r.attempts = response.attempts;
        r.verdict = interpret_response(response, schema, r.variant);
    } catch (const Error& e) {
        r.error_kind = error_kind(e);
        r.error = e.what();
    } catch (const std::invalid_argument& e) {
        r.error_kind = "ConfigError";
        r.error = e.what();
    }
    return r;
}

std::size_t ScoreHistogram::scored_total() const {
    std::size_t n = 0;
    for (const auto& row : bins) {
        for (auto c : row) n += c;
    }
    return n;
}

ScoreHistogram histogram_scores(const std::vector<SampleRecord>& records) {
    ScoreHistogram h;
    for (const auto& r : records) {
        auto outcome = r.outcome();
        if (!outcome) continue;
        const auto& score = r.verdict->phishing_score;
        if (!score || *score < kMinScore || *score > kMaxScore) {
            ++h.unscored;
            continue;
        }
        ++h.bins[static_cast<std::size_t>(*score)][static_cast<std::size_t>(*outcome)];
    }
    return h;
}

double token_cost(std::size_t input_tokens, std::size_t output_tokens, const ProviderProfile& profile) {
    return (static_cast<double>(input_tokens) * profile.price_per_1k_input +
            static_cast<double>(output_tokens) * profile.price_per_1k_output) /
           1000.0;
}

CostReport estimate_cost(const std::vector<SampleRecord>& records, const ProviderProfile& profile) {
    CostReport c;
    for (const auto& r : records) {
        c.total_input_tokens += r.input_tokens;
        c.total_output_tokens += r.output_tokens;
    }
    c.total_cost = token_cost(c.total_input_tokens, c.total_output_tokens, profile);
    return c;
}

LatencyStats latency_stats(std::vector<double> xs) {
    LatencyStats s;
    s.count = xs.size();
    if (xs.empty()) return s;
    std::sort(xs.begin(), xs.end());
    double sum = 0;
    for (double x : xs) sum += x;
    s.mean_ms = sum / static_cast<double>(xs.size());
    auto rank = [&](double p) {
        auto k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(xs.size())));
        return xs[std::clamp<std::size_t>(k, 1, xs.size()) - 1];
    };
    s.p50_ms = rank(0.50);
    s.p95_ms = rank(0.95);
    return s;
}

EvalResult aggregate(std::vector<SampleRecord> records, const ProviderProfile& profile) {
    EvalResult res;
    std::vector<double> attempt, end_to_end;
    for (const auto& r : records) {
        if (r.attempts > 0) {
            attempt.push_back(r.latency_ms);
            end_to_end.push_back(r.total_latency_ms);
        }
        if (!r.ok()) {
            ++res.errors;
            continue;
        }
        if (r.score_disagrees()) ++res.disagreements;
        switch (r.outcome().value_or(Outcome::tn)) {
        case Outcome::tp: ++res.matrix.tp; break;
        case Outcome::fp: ++res.matrix.fp; break;
        case Outcome::tn: ++res.matrix.tn; break;
        case Outcome::fn: ++res.matrix.fn; break;
        }
    }
    res.metrics = compute_metrics(res.matrix);
    res.histogram = histogram_scores(records);
    res.cost = estimate_cost(records, profile);
    res.attempt_latency = latency_stats(std::move(attempt));
    res.end_to_end_latency = latency_stats(std::move(end_to_end));
    res.records = std::move(records);
    return res;
}

EvalResult evaluate_corpus(const std::vector<LabeledSample>& samples, Gateway& gateway, EvalOptions options) {
    if (samples.empty()) throw EmptyDataset("no samples to evaluate");
    const ProviderProfile& profile = gateway.profile();
    const PromptVariant variant = resolve_variant(options.pipeline.prompt, profile.supports_structured_output);

    std::vector<std::optional<SampleRecord>> slots(samples.size());
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> cache_hits{0};
    std::mutex mutex;
    std::condition_variable cv;
    std::deque<std::size_t> finished;

    auto work = [&] {
        for (std::size_t i = next++; i < samples.size(); i = next++) {
            const auto& sample = samples[i];
            SampleRecord r;
            if (auto bytes = read_file(sample.path)) {
                SampleRecord probe;
                probe.sha256 = sha256_hex(*bytes);
                probe.profile = profile.name;
                probe.variant = variant;
                if (auto hit = options.cache.find(probe.cache_key()); hit != options.cache.end()) {
                    r = hit->second;
                    ++cache_hits;
                } else {
                    r = analyze_email({std::move(*bytes), sample.path.string()}, gateway, options.pipeline);
                }
            } else {
                r.sha256 = "";
                r.profile = profile.name;
                r.variant = variant;
                r.error_kind = "Unreadable";
                r.error = "cannot read " + sample.path.string();
            }
            r.path = sample.path.string();
            r.label = sample.label;
            {
                std::lock_guard lock(mutex);
                slots[i] = std::move(r);
                finished.push_back(i);
            }
            cv.notify_one();
        }
    };

    const std::size_t width = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(options.workers, 1)), 1,
                                                      samples.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < width; ++t) pool.emplace_back(work);

    // single collector
    for (std::size_t collected = 0; collected < samples.size(); ++collected) {
        std::unique_lock lock(mutex);
        cv.wait(lock, [&] { return !finished.empty(); });
        std::size_t i = finished.front();
        finished.pop_front();
        lock.unlock();
        if (options.on_record) options.on_record(*slots[i]);
    }
    for (auto& t : pool) t.join();

    std::vector<SampleRecord> records;
    records.reserve(samples.size());
    for (auto& s : slots) records.push_back(std::move(*s));
    EvalResult res = aggregate(std::move(records), profile);
    res.cache_hits = cache_hits.load();
    return res;
}

void enforce_failure_ceiling(const EvalResult& result, double ceiling) {
    if (result.records.empty()) return;
    const double rate = static_cast<double>(result.errors) / static_cast<double>(result.records.size());
    if (rate > ceiling) {
        throw FailureCeilingExceeded(std::to_string(result.errors) + " of " + std::to_string(result.records.size()) +
                                     " samples failed, above the ceiling of " + std::to_string(ceiling));
    }
}

std::map<std::string, SampleRecord> load_record_cache(const fs::path& path) {
    std::map<std::string, SampleRecord> cache;
    std::ifstream in(path);
    if (!in) return cache;
    std::string line;
    while (std::getline(in, line)) {
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) continue;
        try {
            SampleRecord r = record_from_json(j);
            if (r.ok()) cache.emplace(r.cache_key(), std::move(r));
        } catch (const std::exception&) {
            // stale or hand-edited line; recompute that sample
        }
    }
    return cache;
}

namespace {

std::string percent(const std::optional<double>& v) {
    if (!v) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", *v * 100.0);
    return buf;
}

json ratio_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json latency_json(const LatencyStats& s) {
    return {{"count", s.count}, {"mean_ms", s.mean_ms}, {"p50_ms", s.p50_ms}, {"p95_ms", s.p95_ms}};
}

} // namespace

std::string format_table_row(const ConfusionMatrix& m, const EvalMetrics& metrics) {
    std::ostringstream out;
    out << m.tp << ' ' << m.fp << ' ' << m.tn << ' ' << m.fn << ' ' << percent(metrics.precision) << ' '
        << percent(metrics.recall) << ' ' << percent(metrics.accuracy);
    return out.str();
}

json metrics_to_json(const EvalResult& r) {
    return {
        {"confusion_matrix", {{"tp", r.matrix.tp}, {"fp", r.matrix.fp}, {"tn", r.matrix.tn}, {"fn", r.matrix.fn}}},
        {"precision", ratio_json(r.metrics.precision)},
        {"recall", ratio_json(r.metrics.recall)},
        {"accuracy", ratio_json(r.metrics.accuracy)},
        {"samples", r.records.size()},
        {"evaluated", r.matrix.total()},
        {"errors", r.errors},
        {"cache_hits", r.cache_hits},
        {"score_disagreements", r.disagreements},
        {"unscored_verdicts", r.histogram.unscored},
        {"latency_per_attempt", latency_json(r.attempt_latency)},
        {"latency_end_to_end", latency_json(r.end_to_end_latency)},
    };
}

json cost_to_json(const CostReport& c, const ProviderProfile& profile) {
    return {
        {"profile", profile.name},
        {"currency", "USD"},
        {"price_per_1k_input", profile.price_per_1k_input},
        {"price_per_1k_output", profile.price_per_1k_output},
        {"total_input_tokens", c.total_input_tokens},
        {"total_output_tokens", c.total_output_tokens},
        {"total_cost", c.total_cost},
    };
}

std::string histogram_csv(const ScoreHistogram& h) {
    std::string out = "score,TP,TN,FP,FN\n";
    for (std::size_t s = 0; s < h.bins.size(); ++s) {
        out += std::to_string(s);
        for (auto c : h.bins[s]) out += "," + std::to_string(c);
        out += '\n';
    }
    return out;
}

std::string histogram_svg(const ScoreHistogram& h) {
    constexpr int width = 660, height = 320, left = 40, bottom = 280, group = 55, bar = 11;
    static const char* colors[] = {"#1b9e77", "#7570b3", "#d95f02", "#e7298a"};
    std::size_t peak = 1;
    for (const auto& row : h.bins) {
        for (auto c : row) peak = std::max(peak, c);
    }
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    svg << "<line x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << width - 10 << "\" y2=\"" << bottom
        << "\" stroke=\"black\"/>\n";
    for (std::size_t s = 0; s < h.bins.size(); ++s) {
        const int x0 = left + static_cast<int>(s) * group + 5;
        for (std::size_t k = 0; k < 4; ++k) {
            const double frac = static_cast<double>(h.bins[s][k]) / static_cast<double>(peak);
            const int bar_h = static_cast<int>(std::lround(frac * 240));
            svg << "<rect x=\"" << x0 + static_cast<int>(k) * bar << "\" y=\"" << bottom - bar_h << "\" width=\""
                << bar - 1 << "\" height=\"" << bar_h << "\" fill=\"" << colors[k] << "\"/>\n";
        }
        svg << "<text x=\"" << x0 + 16 << "\" y=\"" << bottom + 16 << "\" font-size=\"11\">" << s << "</text>\n";
    }
    for (std::size_t k = 0; k < 4; ++k) {
        svg << "<text x=\"" << left + 10 + static_cast<int>(k) * 60 << "\" y=\"20\" font-size=\"12\" fill=\""
            << colors[k] << "\">" << to_string(static_cast<Outcome>(k)) << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

void write_file_atomic(const fs::path& path, std::string_view content) {
    fs::path tmp = path;
    tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw Error("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error("cannot rename into " + path.string());
    }
}

void write_artifacts(const fs::path& out_dir, const EvalResult& result, const ProviderProfile& profile, bool chart) {
    fs::create_directories(out_dir);
    std::string lines;
    for (const auto& r : result.records) lines += record_to_json(r).dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
    write_file_atomic(out_dir / "records.jsonl", lines);
    write_file_atomic(out_dir / "metrics.json", metrics_to_json(result).dump(2) + "\n");
    write_file_atomic(out_dir / "histogram.csv", histogram_csv(result.histogram));
    write_file_atomic(out_dir / "cost.json", cost_to_json(result.cost, profile).dump(2) + "\n");
    if (chart) write_file_atomic(out_dir / "histogram.svg", histogram_svg(result.histogram));
}

} // namespace phishscope
