// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <thread>

#include "clueseek/rollout.hpp"

namespace clueseek {

enum class PipelineStage {
    ClueLocalization,
    ValidityVerification,
    TrajectoryGeneration,
    LogicalConsistencyCheck,
};

inline constexpr PipelineStage kPipelineStages[] = {
    PipelineStage::ClueLocalization,
    PipelineStage::ValidityVerification,
    PipelineStage::TrajectoryGeneration,
    PipelineStage::LogicalConsistencyCheck,
};

inline const char * to_string(PipelineStage s) {
    switch (s) {
        case PipelineStage::ClueLocalization:        return "clue_localization";
        case PipelineStage::ValidityVerification:    return "validity_verification";
        case PipelineStage::TrajectoryGeneration:    return "trajectory_generation";
        case PipelineStage::LogicalConsistencyCheck: return "logical_consistency_check";
    }
    return "?";
}

struct Verdict {
    bool        pass = false;
    std::string reason;
};

struct JudgeInput {
    const Sample & sample;
    PipelineStage  stage;
    const json &   stage_output;
};

/// Judges are pluggable: rule-based for tests, HTTP clients for real model
/// backends. Throwing Error(JudgeFailure) triggers retry with backoff.
using Judge = std::function<Verdict(const JudgeInput &)>;

struct CandidateRecord {
    Sample                         sample;
    std::map<std::string, json>    stage_outputs; // keyed by stage name
    std::map<std::string, Verdict> verdicts;

    bool passed(PipelineStage s) const {
        auto it = verdicts.find(to_string(s));
        return it != verdicts.end() && it->second.pass;
    }
};

/// Deterministic stand-ins for the judged stage outputs: localization echoes
/// the annotated clues, generation synthesizes a reference trajectory (one
/// crop per clue, then the key answer).
inline json build_stage_output(PipelineStage stage, const Sample & sample) {
    json out;
    switch (stage) {
        case PipelineStage::ClueLocalization: {
            json clues = json::array();
            for (const TimeInterval & iv : sample.clue_intervals) {
                clues.push_back({{"start", iv.start}, {"end", iv.end}});
            }
            out["clue_intervals"] = std::move(clues);
            break;
        }
        case PipelineStage::ValidityVerification:
            out["clue_count"] = sample.clue_intervals.size();
            out["answer_key"] = sample.answer_key;
            break;
        case PipelineStage::TrajectoryGeneration: {
            json turns = json::array();
            int  index = 1;
            for (const TimeInterval & iv : sample.clue_intervals) {
                turns.push_back({{"index", index++},
                                 {"action", "crop"},
                                 {"temporal_segment", {iv.start, iv.end}}});
            }
            turns.push_back({{"index", index}, {"action", "answer"}, {"text", sample.answer_key}});
            out["turns"] = std::move(turns);
            break;
        }
        case PipelineStage::LogicalConsistencyCheck:
            out["turn_count"] = sample.clue_intervals.size() + 1;
            out["answer"]     = sample.answer_key;
            break;
    }
    return out;
}

/// Builtin rule judges: accept_all, reject_all, clue_overlap (every clue must
/// overlap a manifest event), has_options.
inline Judge make_builtin_judge(const std::string & name, const ManifestStore * manifests = nullptr) {
    if (name == "accept_all") {
        return [](const JudgeInput &) { return Verdict{true, ""}; };
    }
    if (name == "reject_all") {
        return [](const JudgeInput &) { return Verdict{false, "rejected"}; };
    }
    if (name == "has_options") {
        return [](const JudgeInput & in) {
            return in.sample.options.empty() ? Verdict{false, "no options"} : Verdict{true, ""};
        };
    }
    if (name == "clue_overlap") {
        if (!manifests) {
            throw Error(ErrorCode::BadConfig, "clue_overlap judge needs a manifest store");
        }
        const ManifestStore * store = manifests;
        return [store](const JudgeInput & in) {
            auto it = store->find(in.sample.manifest_ref);
            if (it == store->end()) {
                return Verdict{false, "unknown manifest"};
            }
            for (const TimeInterval & iv : in.sample.clue_intervals) {
                if (it->second.events_overlapping(iv).empty()) {
                    return Verdict{false, "clue does not overlap any event"};
                }
            }
            return Verdict{true, ""};
        };
    }
    throw Error(ErrorCode::BadConfig, "unknown builtin judge '" + name + "'");
}

struct StageReport {
    int inputs = 0;
    int passes = 0;
    int fails  = 0;
};

struct PipelineReport {
    std::map<std::string, StageReport> stages;
    int survivors = 0;
};

struct PipelineOptions {
    std::string               checkpoint_dir; // empty: no checkpointing
    bool                      resume        = false;
    int                       concurrency   = 1;
    int                       judge_retries = 3;
    std::chrono::milliseconds backoff{5};
};

struct PipelineResult {
    std::vector<CandidateRecord> records;
    std::vector<size_t>          survivor_indices;
    PipelineReport               report;
};

namespace detail {

inline uint64_t fnv64(const std::string & data, uint64_t h = 1469598103934665603ull) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

struct StageCheckpoint {
    std::map<size_t, std::pair<Verdict, json>> entries; // record idx -> (verdict, output)
};

inline std::filesystem::path stage_file(const std::string & dir, size_t stage_idx,
                                        PipelineStage stage) {
    return std::filesystem::path(dir) /
           ("stage" + std::to_string(stage_idx + 1) + "_" + to_string(stage) + ".jsonl");
}

inline std::filesystem::path stage_meta_file(const std::string & dir, size_t stage_idx) {
    return std::filesystem::path(dir) / ("stage" + std::to_string(stage_idx + 1) + ".meta.json");
}

inline StageCheckpoint load_stage_checkpoint(const std::filesystem::path & file) {
    StageCheckpoint cp;
    std::ifstream in(file);
    std::string   line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) continue; // torn tail line from a killed run
        if (!j.contains("record") || !j.contains("pass")) continue;
        Verdict v;
        v.pass   = j.at("pass").get<bool>();
        v.reason = j.value("reason", "");
        cp.entries[j.at("record").get<size_t>()] = {v, j.value("output", json::object())};
    }
    return cp;
}

inline void write_stage_checkpoint(const std::filesystem::path & file, const StageCheckpoint & cp) {
    const std::filesystem::path tmp = file.string() + ".tmp";
    {
        std::ofstream out(tmp);
        for (const auto & [idx, entry] : cp.entries) {
            json j;
            j["record"] = idx;
            j["pass"]   = entry.first.pass;
            j["reason"] = entry.first.reason;
            j["output"] = entry.second;
            out << j.dump() << "\n";
        }
    }
    std::filesystem::rename(tmp, file);
}

} // namespace detail

/// Four fixed stages, each a barrier: build the stage document, ask the
/// stage's judge, keep only passing records for the next stage. Checkpoints
/// are content-addressed per stage, so a killed run resumes to identical
/// results and an unchanged rerun skips judged records.
inline PipelineResult run_pipeline(const std::vector<Sample> & samples,
                                   const std::map<std::string, Judge> & judges,
                                   const PipelineOptions & opts = {}) {
    for (PipelineStage stage : kPipelineStages) {
        if (!judges.count(to_string(stage))) {
            throw Error(ErrorCode::BadConfig,
                        std::string("missing judge for stage '") + to_string(stage) + "'");
        }
    }
    if (!opts.checkpoint_dir.empty()) {
        std::filesystem::create_directories(opts.checkpoint_dir);
    }

    PipelineResult result;
    result.records.reserve(samples.size());
    for (const Sample & s : samples) {
        result.records.push_back(CandidateRecord{s, {}, {}});
    }

    std::vector<size_t> alive(samples.size());
    for (size_t i = 0; i < alive.size(); ++i) alive[i] = i;

    for (size_t stage_idx = 0; stage_idx < 4; ++stage_idx) {
        const PipelineStage stage      = kPipelineStages[stage_idx];
        const std::string   stage_name = to_string(stage);
        const Judge &       judge      = judges.at(stage_name);

        StageReport & report = result.report.stages[stage_name];
        report.inputs        = static_cast<int>(alive.size());

        // Content address: the records entering this stage.
        uint64_t hash = detail::fnv64(stage_name);
        for (size_t idx : alive) {
            hash = detail::fnv64(serialize_sample(result.records[idx].sample), hash);
        }
        const std::string input_hash = std::to_string(hash);

        detail::StageCheckpoint checkpoint;
        std::filesystem::path   file, meta;
        bool                    checkpointing = !opts.checkpoint_dir.empty();
        if (checkpointing) {
            file = detail::stage_file(opts.checkpoint_dir, stage_idx, stage);
            meta = detail::stage_meta_file(opts.checkpoint_dir, stage_idx);
            if (opts.resume && std::filesystem::exists(meta)) {
                std::ifstream min(meta);
                std::stringstream ss;
                ss << min.rdbuf();
                json mj = json::parse(ss.str(), nullptr, false);
                if (!mj.is_discarded() && mj.value("input_hash", "") == input_hash &&
                    std::filesystem::exists(file)) {
                    checkpoint = detail::load_stage_checkpoint(file);
                }
            }
        }

        std::vector<size_t> todo;
        for (size_t idx : alive) {
            if (!checkpoint.entries.count(idx)) todo.push_back(idx);
        }

        auto judge_one = [&](size_t idx) -> std::pair<Verdict, json> {
            const Sample & sample = result.records[idx].sample;
            json doc = build_stage_output(stage, sample);
            JudgeInput input{sample, stage, doc};
            for (int attempt = 0;; ++attempt) {
                try {
                    return {judge(input), std::move(doc)};
                } catch (const Error & e) {
                    if (e.code() != ErrorCode::JudgeFailure) throw;
                    if (attempt + 1 >= opts.judge_retries) {
                        return {Verdict{false, "judge_error"}, std::move(doc)};
                    }
                    std::this_thread::sleep_for(opts.backoff * (1 << attempt));
                }
            }
        };

        std::vector<std::pair<Verdict, json>> outcomes(todo.size());
        if (opts.concurrency <= 1 || todo.size() <= 1) {
            for (size_t k = 0; k < todo.size(); ++k) outcomes[k] = judge_one(todo[k]);
        } else {
            std::atomic<size_t> cursor{0};
            auto worker = [&] {
                for (;;) {
                    const size_t k = cursor.fetch_add(1);
                    if (k >= todo.size()) return;
                    outcomes[k] = judge_one(todo[k]);
                }
            };
            std::vector<std::thread> threads;
            const int nthreads = std::min<int>(opts.concurrency, static_cast<int>(todo.size()));
            for (int t = 0; t < nthreads; ++t) threads.emplace_back(worker);
            for (auto & t : threads) t.join();
        }
        for (size_t k = 0; k < todo.size(); ++k) {
            checkpoint.entries[todo[k]] = std::move(outcomes[k]);
        }

        if (checkpointing) {
            detail::write_stage_checkpoint(file, checkpoint);
            std::ofstream mout(meta);
            mout << "{\"input_hash\":\"" << input_hash << "\"}\n";
        }

        std::vector<size_t> next;
        for (size_t idx : alive) {
            const auto & [verdict, output]                = checkpoint.entries.at(idx);
            result.records[idx].stage_outputs[stage_name] = output;
            result.records[idx].verdicts[stage_name]      = verdict;
            if (verdict.pass) {
                next.push_back(idx);
                report.passes += 1;
            } else {
                report.fails += 1;
            }
        }
        alive = std::move(next);
    }

    result.survivor_indices     = alive;
    result.report.survivors = static_cast<int>(alive.size());
    return result;
}

/// Quadrant classification from clue count and the saliency of the events
/// each clue resolves to. Reflection and free-format samples pass through
/// unchanged.
inline TaskType classify_taxonomy(const Sample & sample, const VideoManifest & manifest) {
    if (sample.task_type == TaskType::SelfReflectionTool ||
        sample.task_type == TaskType::FreeFormatTool) {
        return sample.task_type;
    }
    if (sample.clue_intervals.empty()) {
        throw Error(ErrorCode::UnresolvableClue, "sample has no clue intervals to classify");
    }
    bool any_subtle = false;
    for (const TimeInterval & iv : sample.clue_intervals) {
        const auto events = manifest.events_overlapping(iv);
        if (events.empty()) {
            throw Error(ErrorCode::UnresolvableClue, "clue interval overlaps no manifest event");
        }
        for (const Event * e : events) {
            if (e->saliency == Saliency::Subtle) any_subtle = true;
        }
    }
    const bool multi = sample.clue_intervals.size() >= 2;
    if (multi) {
        return any_subtle ? TaskType::MultiClueTool : TaskType::MultiClueDirect;
    }
    return any_subtle ? TaskType::SingleClueTool : TaskType::SingleClueDirect;
}

// ---- dataset statistics ------------------------------------------------------

struct DatasetStats {
    int                        total = 0;
    std::map<std::string, int> by_task_type;
    std::map<std::string, int> by_source; // manifest_ref
    std::map<int, int>         by_clue_count;
    std::map<std::string, int> by_duration_bucket;
};

inline std::string duration_bucket(double seconds) {
    if (seconds < 60.0)   return "lt_1m";
    if (seconds < 300.0)  return "1m_to_5m";
    if (seconds < 900.0)  return "5m_to_15m";
    if (seconds < 3600.0) return "15m_to_60m";
    return "ge_60m";
}

inline DatasetStats dataset_stats(const std::vector<Sample> & samples,
                                  const ManifestStore * manifests = nullptr) {
    DatasetStats stats;
    stats.total = static_cast<int>(samples.size());
    for (TaskType t : kAllTaskTypes) {
        stats.by_task_type[to_string(t)] = 0;
    }
    for (const Sample & s : samples) {
        stats.by_task_type[to_string(s.task_type)] += 1;
        stats.by_source[s.manifest_ref] += 1;
        stats.by_clue_count[static_cast<int>(s.clue_intervals.size())] += 1;
        double duration = 0.0;
        if (manifests) {
            auto it = manifests->find(s.manifest_ref);
            if (it != manifests->end()) duration = it->second.duration_s;
        }
        if (duration <= 0.0) {
            for (const TimeInterval & iv : s.clue_intervals) {
                duration = std::max(duration, iv.end);
            }
        }
        stats.by_duration_bucket[duration > 0.0 ? duration_bucket(duration) : "unknown"] += 1;
    }
    return stats;
}

inline std::string serialize_stats(const DatasetStats & stats) {
    std::string out = "{\"total\":" + wire::num(stats.total) + ",\"by_task_type\":{";
    bool first = true;
    for (TaskType t : kAllTaskTypes) { // fixed enum order
        if (!first) out += ",";
        first = false;
        out += wire::str(to_string(t)) + ":" + wire::num(stats.by_task_type.at(to_string(t)));
    }
    out += "},\"by_source\":{";
    first = true;
    for (const auto & [src, n] : stats.by_source) {
        if (!first) out += ",";
        first = false;
        out += wire::str(src) + ":" + wire::num(n);
    }
    out += "},\"by_clue_count\":{";
    first = true;
    for (const auto & [count, n] : stats.by_clue_count) {
        if (!first) out += ",";
        first = false;
        out += wire::str(std::to_string(count)) + ":" + wire::num(n);
    }
    out += "},\"by_duration_bucket\":{";
    first = true;
    for (const auto & [bucket, n] : stats.by_duration_bucket) {
        if (!first) out += ",";
        first = false;
        out += wire::str(bucket) + ":" + wire::num(n);
    }
    out += "}}";
    return out;
}

/// Dumps a deterministic random k-percent slice of survivors for manual
/// review.
inline std::vector<size_t> sample_for_review(const std::vector<size_t> & survivors,
                                             double percent, uint64_t seed) {
    if (percent < 0.0 || percent > 100.0) {
        throw Error(ErrorCode::BadConfig, "percent must be in [0, 100]");
    }
    std::vector<size_t> pool = survivors;
    DetRng rng(seed);
    for (size_t i = pool.size(); i > 1; --i) {
        std::swap(pool[i - 1], pool[rng.below(i)]);
    }
    const size_t take = static_cast<size_t>(static_cast<double>(pool.size()) * percent / 100.0);
    pool.resize(take);
    std::sort(pool.begin(), pool.end());
    return pool;
}

} // namespace clueseek
