// phishscope command line: `scan` one message or `evaluate` a labeled corpus.
//
// Settings are resolved flags first, then the --config JSON file, then the
// built-in defaults.

#include "phishscope/errors.hpp"
#include "phishscope/evaluation.hpp"
#include "phishscope/headers.hpp"
#include "phishscope/mime.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

namespace ps = phishscope;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ConfigKey {
    const char* name;
    const char* help;
};

// Every key accepted in the --config file. Unknown keys are rejected, so
// this table is also what --help prints.
const ConfigKey kConfigKeys[] = {
    {"profiles", "list of provider profile objects (name, api_style, endpoint, model_id, "
                 "supports_structured_output, tokenizer, price_per_1k_input, price_per_1k_output, "
                 "max_in_flight, timeout_ms, credential_env, max_attempts, initial_backoff_ms, "
                 "mock_delay_ms, mock_rules)"},
    {"profile", "profile name to use (default: mock)"},
    {"prompt", "normal | simple (default: normal)"},
    {"token_limit", "token budget for the serialized email (default: 3000)"},
    {"tokenizer", "token counting scheme (default: the profile's, approx4)"},
    {"workers", "evaluation worker threads (default: 4)"},
    {"dummy_to", "address replacing every recipient (default: user@example.com)"},
    {"out", "evaluation output directory (default: phishscope-out)"},
    {"keep_attributes", "HTML attributes kept by pruning (default: src href alt title name id class)"},
    {"elision_marker", "line replacing trimmed plain text (default: [...])"},
    {"denylist", "extra header name patterns to remove, e.g. \"X-Spam-*\""},
    {"failure_ceiling", "largest tolerated fraction of failed samples (default: 1.0)"},
    {"max_attempts", "override the profile's attempts per request (default: profile, 3)"},
    {"chart", "also write histogram.svg (default: false)"},
};

struct RunConfig {
    json file = json::object();
    std::vector<ps::ProviderProfile> profiles = {ps::builtin_mock_profile()};
    std::string profile = "mock";
    std::string prompt = "normal";
    std::size_t token_limit = 3000;
    std::string tokenizer;
    int workers = 4;
    std::string dummy_to = "user@example.com";
    std::string out = "phishscope-out";
    std::vector<std::string> keep_attributes = ps::PruneOptions{}.keep_attributes;
    std::string elision_marker = "[...]";
    std::vector<std::string> denylist;
    double failure_ceiling = 1.0;
    int max_attempts = 0;  // 0 keeps the profile value
    bool chart = false;
};

template <typename T>
void take(const json& file, const char* key, T& target) {
    if (!file.contains(key)) return;
    try {
        target = file.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ps::ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

void load_config_file(const std::string& path, RunConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw ps::ConfigError("cannot open config file " + path);
    json file = json::parse(in, nullptr, false);
    if (file.is_discarded() || !file.is_object()) throw ps::ConfigError("config file is not a JSON object: " + path);
    for (const auto& [key, _] : file.items()) {
        bool known = false;
        for (const auto& k : kConfigKeys) known |= key == k.name;
        if (!known) throw ps::ConfigError("unknown config key '" + key + "' (see --help)");
    }
    cfg.profiles = ps::profiles_from_json(file);
    take(file, "profile", cfg.profile);
    take(file, "prompt", cfg.prompt);
    take(file, "token_limit", cfg.token_limit);
    take(file, "tokenizer", cfg.tokenizer);
    take(file, "workers", cfg.workers);
    take(file, "dummy_to", cfg.dummy_to);
    take(file, "out", cfg.out);
    take(file, "keep_attributes", cfg.keep_attributes);
    take(file, "elision_marker", cfg.elision_marker);
    take(file, "denylist", cfg.denylist);
    take(file, "failure_ceiling", cfg.failure_ceiling);
    take(file, "max_attempts", cfg.max_attempts);
    take(file, "chart", cfg.chart);
}

ps::ProviderProfile select_profile(const RunConfig& cfg) {
    for (auto p : cfg.profiles) {
        if (p.name != cfg.profile) continue;
        if (cfg.max_attempts > 0) p.max_attempts = cfg.max_attempts;
        if (!cfg.tokenizer.empty()) p.tokenizer.name = cfg.tokenizer;
        return p;
    }
    throw ps::ConfigError("no profile named '" + cfg.profile + "'");
}

ps::PipelineOptions pipeline_options(const RunConfig& cfg) {
    ps::PipelineOptions opt;
    auto variant = ps::parse_prompt_variant(cfg.prompt);
    if (!variant || (*variant != ps::PromptVariant::normal && *variant != ps::PromptVariant::simple)) {
        throw ps::ConfigError("prompt must be normal or simple, got '" + cfg.prompt + "'");
    }
    opt.prompt = *variant;
    try {
        opt.budget = ps::TokenBudget(cfg.token_limit);
    } catch (const std::invalid_argument& e) {
        throw ps::ConfigError(e.what());
    }
    if (!ps::is_valid_address(cfg.dummy_to)) throw ps::ConfigError("dummy_to is not an address: " + cfg.dummy_to);
    opt.dummy_to = cfg.dummy_to;
    opt.denylist = cfg.denylist;
    opt.simplify.prune.keep_attributes = cfg.keep_attributes;
    opt.simplify.elision_marker = cfg.elision_marker;
    return opt;
}

std::string config_keys_help() {
    std::string text = "Config file keys (--config FILE, JSON object):\n";
    for (const auto& k : kConfigKeys) text += "  " + std::string(k.name) + "\n      " + k.help + "\n";
    text += "\nPrecedence: command-line flags > config file > defaults.\n"
            "Credentials are read from the environment variable named by a profile's credential_env.\n"
            "scan exit status: 0 legitimate, 2 phishing, 1 error.";
    return text;
}

int run_scan(const RunConfig& cfg, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        std::cerr << "phishscope: cannot read " << path << "\n";
        return 1;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string bytes = std::move(buf).str();
    if (bytes.empty()) {
        std::cerr << "phishscope: " << path << " is empty\n";
        return 1;
    }
    ps::Gateway gateway(select_profile(cfg));
    ps::SampleRecord record = ps::analyze_email({std::move(bytes), path}, gateway, pipeline_options(cfg));
    if (!record.ok()) {
        std::cerr << "phishscope: " << record.error_kind << ": " << record.error << "\n";
        return 1;
    }
    std::cout << ps::verdict_to_json(*record.verdict) << "\n";
    return record.verdict->is_phishing ? 2 : 0;
}

int run_evaluate(const RunConfig& cfg, const std::string& root, bool use_cache) {
    ps::Dataset dataset = ps::load_dataset(root);
    for (const auto& skip : dataset.skipped) {
        std::cerr << "phishscope: skipped " << skip.path.string() << ": " << skip.reason << "\n";
    }
    ps::ProviderProfile profile = select_profile(cfg);
    ps::Gateway gateway(profile);

    ps::EvalOptions opt;
    opt.pipeline = pipeline_options(cfg);
    opt.workers = cfg.workers;
    const fs::path out = cfg.out;
    if (use_cache) opt.cache = ps::load_record_cache(out / "records.jsonl");
    opt.on_record = [](const ps::SampleRecord& r) {
        if (!r.ok()) std::cerr << "phishscope: " << r.path << ": " << r.error_kind << ": " << r.error << "\n";
    };

    ps::EvalResult result = ps::evaluate_corpus(dataset.samples, gateway, std::move(opt));
    ps::write_artifacts(out, result, profile, cfg.chart);
    std::cout << ps::format_table_row(result.matrix, result.metrics) << "\n";
    std::cerr << "phishscope: " << result.records.size() << " samples, " << result.errors << " errors, "
              << result.cache_hits << " cached, cost $" << result.cost.total_cost << "; artifacts in "
              << out.string() << "\n";
    ps::enforce_failure_ceiling(result, cfg.failure_ceiling);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"phishscope: LLM-assisted phishing email detection"};
    app.footer(config_keys_help());
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::string> profile, prompt, tokenizer, out, dummy_to;
    std::optional<std::size_t> token_limit;
    std::optional<int> workers, max_attempts;
    std::optional<double> failure_ceiling;
    bool chart = false;
    bool no_cache = false;

    app.add_option("--config", config_path, "JSON config file (keys listed below)");
    app.add_option("--profile", profile, "provider profile name [config: profile]");
    app.add_option("--prompt", prompt, "prompt template [config: prompt]")->check(CLI::IsMember({"normal", "simple"}));
    app.add_option("--token-limit", token_limit, "token budget for the email text [config: token_limit]")
        ->check(CLI::PositiveNumber);
    app.add_option("--tokenizer", tokenizer, "token counting scheme [config: tokenizer]");
    app.add_option("--dummy-to", dummy_to, "address replacing every recipient [config: dummy_to]");
    app.add_option("--max-attempts", max_attempts, "attempts per provider request [config: max_attempts]")
        ->check(CLI::PositiveNumber);

    auto* scan = app.add_subcommand("scan", "analyze one .eml file and print the verdict JSON");
    std::string scan_path;
    scan->add_option("path", scan_path, ".eml file")->required();

    auto* evaluate = app.add_subcommand("evaluate", "evaluate a corpus laid out as ROOT/{phishing,legitimate}/*.eml");
    std::string root;
    evaluate->add_option("root", root, "dataset root")->required();
    evaluate->add_option("--out", out, "output directory [config: out]");
    evaluate->add_option("--workers", workers, "worker threads [config: workers]")->check(CLI::PositiveNumber);
    evaluate->add_option("--failure-ceiling", failure_ceiling,
                         "largest tolerated fraction of failed samples [config: failure_ceiling]")
        ->check(CLI::Range(0.0, 1.0));
    evaluate->add_flag("--chart", chart, "also write histogram.svg [config: chart]");
    evaluate->add_flag("--no-cache", no_cache, "ignore verdicts cached in OUT/records.jsonl");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg;
        if (!config_path.empty()) load_config_file(config_path, cfg);
        if (profile) cfg.profile = *profile;
        if (prompt) cfg.prompt = *prompt;
        if (token_limit) cfg.token_limit = *token_limit;
        if (tokenizer) cfg.tokenizer = *tokenizer;
        if (dummy_to) cfg.dummy_to = *dummy_to;
        if (max_attempts) cfg.max_attempts = *max_attempts;
        if (out) cfg.out = *out;
        if (workers) cfg.workers = *workers;
        if (failure_ceiling) cfg.failure_ceiling = *failure_ceiling;
        if (chart) cfg.chart = true;

        if (*scan) return run_scan(cfg, scan_path);
        return run_evaluate(cfg, root, !no_cache);
    } catch (const std::exception& e) {
        std::cerr << "phishscope: " << e.what() << "\n";
        return 1;
    }
}
