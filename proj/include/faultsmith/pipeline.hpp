#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "faultsmith/config.hpp"
#include "faultsmith/corpus.hpp"
#include "faultsmith/embedding.hpp"
#include "faultsmith/errors.hpp"
#include "faultsmith/evaluator.hpp"
#include "faultsmith/llmclient.hpp"
#include "faultsmith/promptgen.hpp"
#include "faultsmith/remote_embedder.hpp"
#include "faultsmith/selector.hpp"
#include "faultsmith/sha256.hpp"
#include "faultsmith/validator.hpp"

namespace faultsmith {

/// Staged pipeline over a run directory. Every stage reads its upstream
/// JSON-lines artifacts, writes its own plus a manifest of input/output
/// hashes and counts, and is deterministic for a fixed config: rerunning a
/// stage with unchanged inputs reproduces its manifest byte for byte.
class Pipeline {
public:
    explicit Pipeline(RunConfig cfg) : cfg_(std::move(cfg)), run_dir_(cfg_.run_dir) {
        cfg_.validate();
        std::filesystem::create_directories(run_dir_);
        // the hash covers the semantic configuration only; where the run
        // lands on disk must not perturb cross-machine manifest equality
        RunConfig hash_view = cfg_;
        hash_view.run_dir.clear();
        config_hash_ = sha256_hex(hash_view.serialize());
        write_text(run_dir_ / "effective_config.toml", cfg_.serialize());
    }

    const RunConfig& config() const { return cfg_; }
    const std::filesystem::path& run_dir() const { return run_dir_; }

    nlohmann::json run_stage(const std::string& stage) {
        if (stage == "ingest") return ingest();
        if (stage == "prompt") return prompt();
        if (stage == "generate") return generate_stage();
        if (stage == "validate") return validate_stage();
        if (stage == "select") return select_stage();
        if (stage == "random-select") return random_select_stage();
        if (stage == "assemble") return assemble_stage();
        if (stage == "characterize") return characterize_stage();
        if (stage == "evaluate") return evaluate_stage();
        throw Error(ErrorCode::BadConfig, "unknown stage " + stage);
    }

    // ---------------------------------------------------------------- ingest
    nlohmann::json ingest() {
        if (cfg_.task == TaskFlow::Clone) return ingest_clone_flow();
        if (cfg_.corpus_path.empty())
            throw Error(ErrorCode::BadConfig, "paths.corpus is not set");

        const IngestResult result = ingest_functions(cfg_.corpus_path);
        const Corpus deduped = dedup(result.corpus);
        const SplitResult splits =
            split(deduped, {cfg_.train_ratio, cfg_.valid_ratio, cfg_.test_ratio, cfg_.split_seed});

        write_corpus("corpus.jsonl", deduped);
        write_rejects("rejects.jsonl", result.rejects);
        write_corpus("train.jsonl", splits.train);
        write_corpus("valid.jsonl", splits.valid);
        write_corpus("test.jsonl", splits.test);

        return write_manifest("ingest", {{cfg_.corpus_path, sha256_file_hex(cfg_.corpus_path)}},
                              {"corpus.jsonl", "rejects.jsonl", "train.jsonl", "valid.jsonl", "test.jsonl"},
                              {{"ingested", result.corpus.size()},
                               {"rejected", result.rejects.size()},
                               {"deduped", deduped.size()},
                               {"train", splits.train.size()},
                               {"valid", splits.valid.size()},
                               {"test", splits.test.size()}});
    }

    // ---------------------------------------------------------------- prompt
    nlohmann::json prompt() {
        if (cfg_.task == TaskFlow::Clone) return prompt_clone_flow();
        const Corpus train = read_corpus(require_artifact("train.jsonl"));
        const std::vector<TrainingPair> pool = training_pairs(train);
        if (pool.size() < cfg_.k_shots)
            throw Error(ErrorCode::PoolTooSmall,
                        "train split holds " + std::to_string(pool.size()) + " pairs; prompt.k_shots=" +
                            std::to_string(cfg_.k_shots));

        const auto embedder = make_embedder();
        ExampleSelector selector(pool, *embedder, cfg_.k_shots, cfg_.prompt_seed);

        std::vector<nlohmann::json> rows;
        std::size_t queries = 0;
        for (const auto& rec : train.records) {
            if (rec.label != Label::NonBuggy) continue;
            ++queries;
            const auto shot_ids = selector.select(embedder->embed(rec.code), rec.id);
            std::vector<TrainingPair> shots;
            shots.reserve(shot_ids.size());
            for (const auto& id : shot_ids) shots.push_back(selector.pair(id));
            rows.push_back(to_json(build_fault_prompt(rec, shots)));
        }
        write_jsonl("prompts.jsonl", rows);

        return write_manifest("prompt", upstream_hashes({"train.jsonl"}), {"prompts.jsonl"},
                              {{"queries", queries}, {"pool_pairs", pool.size()}});
    }

    // -------------------------------------------------------------- generate
    nlohmann::json generate_stage() {
        const auto prompts = read_prompts(require_artifact("prompts.jsonl"));
        const std::map<std::string, FunctionRecord> sources = source_map();
        const std::map<std::string, CloneTask> tasks = task_map();

        std::unique_ptr<GeneratorPort> port;
        if (cfg_.generator_kind == "mock") {
            port = std::make_unique<MockGenerator>(sources, cfg_.mock_seed);
        } else {
            RemoteGeneratorConfig remote;
            remote.endpoint = cfg_.endpoint;
            remote.max_retries = cfg_.max_retries;
            remote.backoff_ms = cfg_.backoff_ms;
            port = std::make_unique<RemoteGenerator>(remote);
        }

        std::vector<GeneratedCandidate> candidates;
        std::vector<nlohmann::json> failures;
        std::vector<nlohmann::json> audit;
        for (const auto& prompt_spec : prompts) {
            SamplingConfig sampling;
            sampling.top_p = cfg_.top_p;
            sampling.temperature = cfg_.temperature;
            sampling.n_samples =
                prompt_spec.kind == PromptKind::CloneGen ? cfg_.clone_n_samples : cfg_.n_samples;
            sampling.max_tokens = cfg_.max_tokens;
            sampling.model = cfg_.model;
            sampling.timeout_s = cfg_.request_timeout_s;

            Language language = Language::Other;
            if (const auto it = sources.find(prompt_spec.query_id); it != sources.end())
                language = it->second.language;
            else if (const auto it2 = tasks.find(prompt_spec.query_id); it2 != tasks.end())
                language = it2->second.language;

            try {
                GenerateResult result =
                    generate(prompt_spec, sampling, *port, language, cfg_.max_in_flight);
                for (auto& cand : result.candidates) candidates.push_back(std::move(cand));
                for (const auto& failure : result.failures)
                    failures.push_back({{"source_id", prompt_spec.query_id},
                                        {"sample_index", failure.sample_index},
                                        {"error", failure.error}});
                for (auto& entry : result.audit) audit.push_back(std::move(entry));
            } catch (const Error& e) {
                // a fully failed prompt is recorded, not fabricated
                failures.push_back({{"source_id", prompt_spec.query_id},
                                    {"sample_index", nullptr},
                                    {"error", e.what()}});
            }
        }

        std::sort(candidates.begin(), candidates.end(),
                  [](const GeneratedCandidate& a, const GeneratedCandidate& b) {
                      if (a.source_id != b.source_id) return a.source_id < b.source_id;
                      return a.sample_index < b.sample_index;
                  });
        std::vector<nlohmann::json> rows;
        rows.reserve(candidates.size());
        for (const auto& cand : candidates) rows.push_back(to_json(cand));
        write_jsonl("candidates.jsonl", rows);
        write_jsonl("generation_failures.jsonl", failures);
        write_jsonl("audit.jsonl", audit);

        return write_manifest("generate", upstream_hashes({"prompts.jsonl"}),
                              {"candidates.jsonl", "generation_failures.jsonl", "audit.jsonl"},
                              {{"candidates", candidates.size()}, {"failures", failures.size()}});
    }

    // -------------------------------------------------------------- validate
    nlohmann::json validate_stage() {
        const auto candidates = read_candidates(require_artifact("candidates.jsonl"));
        const std::map<std::string, FunctionRecord> sources = source_map();
        const std::map<std::string, CloneTask> tasks = task_map();

        std::vector<ValidationJob> jobs;
        jobs.reserve(candidates.size());
        for (const auto& cand : candidates) {
            ValidationJob job;
            job.candidate_id = cand.candidate_id;
            job.code = cand.code;
            if (const auto it = sources.find(cand.source_id); it != sources.end()) {
                if (!it->second.test_cmd)
                    throw Error(ErrorCode::BadTemplate,
                                "source " + cand.source_id + " has no test_cmd for validation");
                job.test_cmd = *it->second.test_cmd;
                job.language = it->second.language;
            } else if (const auto it2 = tasks.find(cand.source_id); it2 != tasks.end()) {
                job.test_cmd = it2->second.test_cmd;
                job.language = it2->second.language;
            } else {
                throw Error(ErrorCode::MissingUpstreamArtifact,
                            "candidate " + cand.candidate_id + " references unknown source " +
                                cand.source_id);
            }
            jobs.push_back(std::move(job));
        }

        ValidatorConfig vcfg;
        vcfg.timeout_s = cfg_.validate_timeout_s;
        vcfg.fail_markers = cfg_.fail_markers;
        vcfg.workers = cfg_.workers;
        const auto outcomes = validate_all(jobs, vcfg, run_dir_ / "sandbox");

        std::vector<nlohmann::json> rows;
        rows.reserve(outcomes.size());
        std::map<std::string, std::size_t> verdict_counts{
            {"test_fail", 0}, {"test_pass", 0}, {"timeout", 0}, {"other", 0}};
        for (const auto& outcome : outcomes) {
            rows.push_back(to_json(outcome));
            ++verdict_counts[to_string(outcome.verdict)];
        }
        write_jsonl("outcomes.jsonl", rows);

        std::map<std::string, std::size_t> counts;
        for (const auto& [verdict, count] : verdict_counts) counts[verdict] = count;
        counts["validated"] = outcomes.size();
        return write_manifest("validate", upstream_hashes({"candidates.jsonl"}),
                              {"outcomes.jsonl"}, counts);
    }

    // ---------------------------------------------------------------- select
    nlohmann::json select_stage() {
        if (cfg_.task == TaskFlow::Clone) return select_clone_flow();
        const auto scored = compute_scores();

        std::vector<nlohmann::json> score_rows;
        score_rows.reserve(scored.candidates.size());
        for (const auto& s : scored.candidates) score_rows.push_back(to_json(s));
        write_jsonl("scores.jsonl", score_rows);
        write_text(run_dir_ / "reference_stats.json", to_json(scored.stats).dump(2) + "\n");

        const auto selected = select_faults(scored.candidates, cfg_.fraction);
        std::vector<nlohmann::json> rows;
        rows.reserve(selected.size());
        for (const auto& pair : selected)
            rows.push_back({{"source_id", pair.source_id}, {"candidate_id", pair.candidate_id}});
        write_jsonl("selected.jsonl", rows);

        return write_manifest("select",
                              upstream_hashes({"outcomes.jsonl", "candidates.jsonl", "train.jsonl"}),
                              {"scores.jsonl", "selected.jsonl", "reference_stats.json"},
                              {{"kept", scored.candidates.size()},
                               {"selected", selected.size()},
                               {"fraction_pct", static_cast<std::size_t>(cfg_.fraction * 100.0 + 0.5)}});
    }

    // --------------------------------------------------------- random-select
    nlohmann::json random_select_stage() {
        const auto scored = read_scores(require_artifact("scores.jsonl"));
        if (scored.empty())
            throw Error(ErrorCode::EmptyTraining, "scores.jsonl holds no candidates");
        const auto selected = random_select(scored, cfg_.fraction, cfg_.random_seed);
        std::vector<nlohmann::json> rows;
        rows.reserve(selected.size());
        for (const auto& pair : selected)
            rows.push_back({{"source_id", pair.source_id}, {"candidate_id", pair.candidate_id}});
        write_jsonl("random_selected.jsonl", rows);

        return write_manifest("random-select", upstream_hashes({"scores.jsonl"}),
                              {"random_selected.jsonl"},
                              {{"selected", selected.size()},
                               {"seed", static_cast<std::size_t>(cfg_.random_seed)}});
    }

    // -------------------------------------------------------------- assemble
    nlohmann::json assemble_stage() {
        const Corpus train = read_corpus(require_artifact("train.jsonl"));
        const auto selected_rows = read_jsonl(require_artifact("selected.jsonl"));
        const auto candidates = read_candidates(require_artifact("candidates.jsonl"));
        const std::map<std::string, FunctionRecord> sources = source_map();

        std::map<std::string, const GeneratedCandidate*> by_id;
        for (const auto& cand : candidates) by_id[cand.candidate_id] = &cand;

        std::vector<GeneratedPair> pairs;
        for (const auto& row : selected_rows) {
            const std::string candidate_id = row.at("candidate_id").get<std::string>();
            const std::string source_id = row.at("source_id").get<std::string>();
            const auto cand_it = by_id.find(candidate_id);
            const auto src_it = sources.find(source_id);
            if (cand_it == by_id.end() || src_it == sources.end())
                throw Error(ErrorCode::MissingUpstreamArtifact,
                            "selected pair references unknown artifact: " + candidate_id);
            pairs.push_back({src_it->second, *cand_it->second});
        }

        std::ostringstream label;
        label << static_cast<int>(cfg_.fraction * 100.0 + 0.5) << "pct";
        const Corpus assembled = assemble_dataset(train, pairs, label.str());
        write_corpus("augmented_train.jsonl", assembled);

        return write_manifest("assemble",
                              upstream_hashes({"train.jsonl", "selected.jsonl", "candidates.jsonl"}),
                              {"augmented_train.jsonl"},
                              {{"base", train.size()},
                               {"added_pairs", pairs.size()},
                               {"assembled", assembled.size()}});
    }

    // ---------------------------------------------------------- characterize
    nlohmann::json characterize_stage() {
        const auto outcomes = read_outcomes(require_artifact("outcomes.jsonl"));
        const auto candidates = read_candidates(require_artifact("candidates.jsonl"));
        const std::map<std::string, FunctionRecord> sources = source_map();

        std::map<std::string, const GeneratedCandidate*> by_id;
        for (const auto& cand : candidates) by_id[cand.candidate_id] = &cand;

        std::vector<CharacterizeItem> items;
        for (const auto& id : filter_by_task(outcomes, PromptKind::FaultGen)) {
            const auto cand_it = by_id.find(id);
            if (cand_it == by_id.end()) continue;
            const auto src_it = sources.find(cand_it->second->source_id);
            if (src_it == sources.end()) continue;
            items.push_back({src_it->second.project, src_it->second.code, cand_it->second->code});
        }

        const auto report = characterize(items);
        nlohmann::json doc;
        doc["columns"] = {"test_fail", "add", "remove", "modify", "edit_distance"};
        doc["rows"] = nlohmann::json::array();
        for (const auto& row : report) doc["rows"].push_back(to_json(row));
        write_text(run_dir_ / "characteristics.json", doc.dump(2) + "\n");

        return write_manifest("characterize",
                              upstream_hashes({"outcomes.jsonl", "candidates.jsonl"}),
                              {"characteristics.json"},
                              {{"confirmed_faults", items.size()}, {"projects", report.size()}});
    }

    // -------------------------------------------------------------- evaluate
    nlohmann::json evaluate_stage() {
        if (cfg_.predictions_path.empty() && cfg_.retrieval_path.empty() && cfg_.pass_k_path.empty())
            throw Error(ErrorCode::BadConfig,
                        "evaluate needs at least one of evaluator.predictions/retrieval/pass_k");

        nlohmann::json report;
        nlohmann::json inputs = nlohmann::json::object();

        if (!cfg_.predictions_path.empty()) {
            const auto records = read_predictions(cfg_.predictions_path);
            const auto aggregate =
                cfg_.fl_aggregate == "macro" ? FlAggregate::Macro : FlAggregate::Micro;
            const FlMetrics metrics = evaluate_predictions(records, aggregate);
            nlohmann::json section{
                {"F1-score", metrics.f1},   {"Recall", metrics.recall}, {"Precision", metrics.precision},
                {"Accuracy", metrics.accuracy}, {"FPR", metrics.fpr},
                {"aggregate", cfg_.fl_aggregate}, {"functions", records.size()},
            };
            if (!metrics.degenerate.empty()) section["degenerate"] = metrics.degenerate;
            report["fault_localization"] = section;
            inputs[cfg_.predictions_path] = sha256_file_hex(cfg_.predictions_path);
        }
        if (!cfg_.retrieval_path.empty()) {
            const RetrievalRun run = read_retrieval(cfg_.retrieval_path);
            report["clone_detection"] = {{"MAP@R", map_at_r(run.queries, run.labels)},
                                         {"queries", run.queries.size()}};
            inputs[cfg_.retrieval_path] = sha256_file_hex(cfg_.retrieval_path);
        }
        if (!cfg_.pass_k_path.empty()) {
            const auto records = read_pass_at_k(cfg_.pass_k_path);
            const auto means = mean_pass_at_k(records, cfg_.pass_k_cuts);
            nlohmann::json section{{"tasks", records.size()}};
            for (const auto& [k, value] : means) section["pass@" + std::to_string(k)] = value;
            report["clone_generation"] = section;
            inputs[cfg_.pass_k_path] = sha256_file_hex(cfg_.pass_k_path);
        }

        write_text(run_dir_ / "report.json", report.dump(2) + "\n");
        nlohmann::json manifest{
            {"stage", "evaluate"},
            {"config_sha256", config_hash_},
            {"inputs", inputs},
            {"outputs", {{"report.json", sha256_file_hex(run_dir_ / "report.json")}}},
            {"counts", {{"sections", report.size()}}},
        };
        write_text(run_dir_ / "manifest_evaluate.json", manifest.dump(2) + "\n");
        return manifest;
    }

    // --------------------------------------------------------------- helpers
    static std::vector<TrainingPair> training_pairs(const Corpus& corpus) {
        std::vector<TrainingPair> pairs;
        for (const auto& rec : corpus.records) {
            if (rec.label != Label::Buggy || !rec.fixed_code) continue;
            pairs.push_back({rec.id, *rec.fixed_code, rec.code});
        }
        return pairs;
    }

    std::filesystem::path require_artifact(const std::string& name) const {
        const auto path = run_dir_ / name;
        if (!std::filesystem::exists(path))
            throw Error(ErrorCode::MissingUpstreamArtifact,
                        name + " not found in " + run_dir_.string() + "; run the upstream stage first");
        return path;
    }

private:
    struct ScoredSet {
        std::vector<ScoredCandidate> candidates;
        ReferenceStats stats;
    };

    std::unique_ptr<Embedder> make_embedder() const {
        if (cfg_.embedder_kind == "remote") {
            RemoteEmbedderConfig remote;
            remote.endpoint = cfg_.embed_endpoint;
            return std::make_unique<RemoteEmbedder>(remote);
        }
        return std::make_unique<HashingEmbedder>(cfg_.embed_dim);
    }

    ScoredSet compute_scores() {
        const auto outcomes = read_outcomes(require_artifact("outcomes.jsonl"));
        const auto candidates = read_candidates(require_artifact("candidates.jsonl"));
        const Corpus train = read_corpus(require_artifact("train.jsonl"));
        const std::map<std::string, FunctionRecord> sources = source_map();

        const auto embedder = make_embedder();
        ScoredSet result;
        result.stats = reference_stats(training_pairs(train), *embedder);

        std::set<std::string> kept;
        for (const auto& id : filter_by_task(outcomes, PromptKind::FaultGen)) kept.insert(id);

        for (const auto& cand : candidates) {
            if (!kept.count(cand.candidate_id)) continue;
            const auto src_it = sources.find(cand.source_id);
            if (src_it == sources.end())
                throw Error(ErrorCode::MissingUpstreamArtifact,
                            "candidate " + cand.candidate_id + " references unknown source");
            result.candidates.push_back(
                score_candidate(src_it->second.code, cand, result.stats, *embedder));
        }
        return result;
    }

    nlohmann::json ingest_clone_flow() {
        if (cfg_.clone_tasks_path.empty())
            throw Error(ErrorCode::BadConfig, "paths.clone_tasks is not set");
        const CloneTaskIngestResult result = ingest_clone_tasks(cfg_.clone_tasks_path);
        std::vector<nlohmann::json> rows;
        rows.reserve(result.tasks.size());
        for (const auto& task : result.tasks)
            rows.push_back({{"task_id", task.task_id},
                            {"prompt", task.prompt},
                            {"test_cmd", task.test_cmd},
                            {"language", to_string(task.language)}});
        write_jsonl("clone_tasks.jsonl", rows);
        write_rejects("rejects.jsonl", result.rejects);
        return write_manifest("ingest",
                              {{cfg_.clone_tasks_path, sha256_file_hex(cfg_.clone_tasks_path)}},
                              {"clone_tasks.jsonl", "rejects.jsonl"},
                              {{"tasks", result.tasks.size()}, {"rejected", result.rejects.size()}});
    }

    nlohmann::json prompt_clone_flow() {
        const auto tasks = read_clone_tasks(require_artifact("clone_tasks.jsonl"));
        std::vector<nlohmann::json> rows;
        rows.reserve(tasks.size());
        for (const auto& task : tasks) rows.push_back(to_json(build_clone_prompt(task)));
        write_jsonl("prompts.jsonl", rows);
        return write_manifest("prompt", upstream_hashes({"clone_tasks.jsonl"}), {"prompts.jsonl"},
                              {{"tasks", tasks.size()}});
    }

    nlohmann::json select_clone_flow() {
        const auto outcomes = read_outcomes(require_artifact("outcomes.jsonl"));
        const auto candidates = read_candidates(require_artifact("candidates.jsonl"));

        std::set<std::string> kept_ids;
        for (const auto& id : filter_by_task(outcomes, PromptKind::CloneGen)) kept_ids.insert(id);

        std::map<std::string, std::vector<CloneItem>> groups;
        for (const auto& cand : candidates)
            if (kept_ids.count(cand.candidate_id))
                groups[cand.source_id].push_back({cand.candidate_id, cand.code});
        for (auto it = groups.begin(); it != groups.end();) {
            if (it->second.size() < 2)
                it = groups.erase(it); // a lone valid clone has no distance signal
            else
                ++it;
        }

        const auto kept = select_clones(groups);
        std::vector<nlohmann::json> rows;
        std::size_t total = 0;
        for (const auto& [task_id, ids] : kept) {
            rows.push_back({{"task_id", task_id}, {"kept", ids}});
            total += ids.size();
        }
        write_jsonl("selected_clones.jsonl", rows);
        return write_manifest("select", upstream_hashes({"outcomes.jsonl", "candidates.jsonl"}),
                              {"selected_clones.jsonl"},
                              {{"tasks", kept.size()}, {"kept", total}});
    }

    // readers ---------------------------------------------------------------

    static std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
        return detail::read_jsonl_objects(path);
    }

    static Corpus read_corpus(const std::filesystem::path& path) {
        const IngestResult result = ingest_functions(path);
        if (!result.rejects.empty())
            throw Error(ErrorCode::SchemaViolation,
                        path.string() + " holds malformed rows; artifact is corrupt");
        return result.corpus;
    }

    static std::vector<CloneTask> read_clone_tasks(const std::filesystem::path& path) {
        const CloneTaskIngestResult result = ingest_clone_tasks(path);
        if (!result.rejects.empty())
            throw Error(ErrorCode::SchemaViolation,
                        path.string() + " holds malformed rows; artifact is corrupt");
        return result.tasks;
    }

    static std::vector<PromptSpec> read_prompts(const std::filesystem::path& path) {
        std::vector<PromptSpec> prompts;
        for (const auto& obj : read_jsonl(path)) {
            PromptSpec prompt;
            const auto kind = parse_prompt_kind(obj.at("kind").get<std::string>());
            if (!kind)
                throw Error(ErrorCode::SchemaViolation, "unknown prompt kind in " + path.string());
            prompt.kind = *kind;
            prompt.text = obj.at("text").get<std::string>();
            prompt.query_id = obj.at("query_id").get<std::string>();
            for (const auto& shot : obj.at("shots")) prompt.shots.push_back(shot.get<std::string>());
            prompts.push_back(std::move(prompt));
        }
        return prompts;
    }

    static std::vector<GeneratedCandidate> read_candidates(const std::filesystem::path& path) {
        std::vector<GeneratedCandidate> candidates;
        for (const auto& obj : read_jsonl(path)) {
            GeneratedCandidate cand;
            cand.candidate_id = obj.at("candidate_id").get<std::string>();
            cand.source_id = obj.at("source_id").get<std::string>();
            cand.code = obj.at("code").get<std::string>();
            cand.raw = obj.at("raw").get<std::string>();
            cand.generator =
                obj.at("generator").get<std::string>() == "mock" ? GeneratorKind::Mock : GeneratorKind::Remote;
            cand.model = obj.at("model").get<std::string>();
            cand.sample_index = obj.at("sample_index").get<std::size_t>();
            candidates.push_back(std::move(cand));
        }
        return candidates;
    }

    static std::vector<ValidationOutcome> read_outcomes(const std::filesystem::path& path) {
        std::vector<ValidationOutcome> outcomes;
        for (const auto& obj : read_jsonl(path)) {
            ValidationOutcome outcome;
            outcome.candidate_id = obj.at("candidate_id").get<std::string>();
            const auto verdict = parse_verdict(obj.at("verdict").get<std::string>());
            if (!verdict)
                throw Error(ErrorCode::SchemaViolation, "unknown verdict in " + path.string());
            outcome.verdict = *verdict;
            outcome.wall_time_s = obj.at("wall_time_s").get<double>();
            if (obj.contains("exit_code") && !obj.at("exit_code").is_null())
                outcome.exit_code = obj.at("exit_code").get<int>();
            outcome.log_excerpt = obj.value("log_excerpt", "");
            outcomes.push_back(std::move(outcome));
        }
        return outcomes;
    }

    std::vector<ScoredCandidate> read_scores(const std::filesystem::path& path) const {
        std::vector<ScoredCandidate> scored;
        for (const auto& obj : read_jsonl(path)) {
            ScoredCandidate s;
            s.candidate_id = obj.at("candidate_id").get<std::string>();
            s.source_id = obj.at("source_id").get<std::string>();
            s.metrics.lc = obj.at("lc").get<double>();
            s.metrics.ed = obj.at("ed").get<std::size_t>();
            s.metrics.ss = obj.at("ss").get<double>();
            s.score = obj.at("score").get<double>();
            scored.push_back(std::move(s));
        }
        return scored;
    }

    std::map<std::string, FunctionRecord> source_map() {
        std::map<std::string, FunctionRecord> map;
        const auto path = run_dir_ / "corpus.jsonl";
        if (std::filesystem::exists(path)) {
            const Corpus corpus = read_corpus(path);
            for (const auto& rec : corpus.records) map[rec.id] = rec;
        }
        return map;
    }

    std::map<std::string, CloneTask> task_map() {
        std::map<std::string, CloneTask> map;
        const auto path = run_dir_ / "clone_tasks.jsonl";
        if (std::filesystem::exists(path)) {
            for (const auto& task : read_clone_tasks(path)) map[task.task_id] = task;
        }
        return map;
    }

    // writers ---------------------------------------------------------------

    void write_text(const std::filesystem::path& path, const std::string& content) const {
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
        out << content;
    }

    void write_jsonl(const std::string& name, const std::vector<nlohmann::json>& rows) const {
        std::ostringstream out;
        for (const auto& row : rows) out << row.dump() << '\n';
        write_text(run_dir_ / name, out.str());
    }

    void write_corpus(const std::string& name, const Corpus& corpus) const {
        std::vector<nlohmann::json> rows;
        rows.reserve(corpus.size());
        for (const auto& rec : corpus.records) rows.push_back(to_json(rec));
        write_jsonl(name, rows);
    }

    void write_rejects(const std::string& name, const std::vector<RejectEntry>& rejects) const {
        std::vector<nlohmann::json> rows;
        rows.reserve(rejects.size());
        for (const auto& reject : rejects)
            rows.push_back({{"line", reject.line_number},
                            {"field", reject.field},
                            {"message", reject.message}});
        write_jsonl(name, rows);
    }

    // Validation outcomes carry wall-clock times and captured logs, which
    // vary run to run. Wherever that artifact enters a manifest its hash is
    // taken over the stable (candidate_id, verdict, exit_code) projection, so
    // a changed verdict invalidates downstream manifests but timing noise
    // does not. Every other artifact is hashed byte for byte.
    std::string hash_artifact(const std::string& name) const {
        const auto path = run_dir_ / name;
        if (name != "outcomes.jsonl") return sha256_file_hex(path);
        Sha256 canonical;
        for (const auto& outcome : read_outcomes(path)) {
            canonical.update(outcome.candidate_id);
            canonical.update("|");
            canonical.update(to_string(outcome.verdict));
            canonical.update("|");
            canonical.update(outcome.exit_code ? std::to_string(*outcome.exit_code) : "none");
            canonical.update("\n");
        }
        return canonical.hex_digest();
    }

    nlohmann::json upstream_hashes(const std::vector<std::string>& names) const {
        nlohmann::json inputs = nlohmann::json::object();
        for (const auto& name : names) {
            require_artifact(name);
            inputs[name] = hash_artifact(name);
        }
        return inputs;
    }

    nlohmann::json write_manifest(const std::string& stage, nlohmann::json inputs,
                                  const std::vector<std::string>& output_names,
                                  std::map<std::string, std::size_t> counts) const {
        nlohmann::json outputs = nlohmann::json::object();
        for (const auto& name : output_names) outputs[name] = hash_artifact(name);
        nlohmann::json counts_json = nlohmann::json::object();
        for (const auto& [key, value] : counts) counts_json[key] = value;
        nlohmann::json manifest{
            {"stage", stage},          {"config_sha256", config_hash_}, {"inputs", std::move(inputs)},
            {"outputs", std::move(outputs)}, {"counts", std::move(counts_json)},
        };
        std::string name = "manifest_" + stage + ".json";
        for (char& c : name)
            if (c == '-') c = '_';
        write_text(run_dir_ / name, manifest.dump(2) + "\n");
        return manifest;
    }

    RunConfig cfg_;
    std::filesystem::path run_dir_;
    std::string config_hash_;
};

} // namespace faultsmith
