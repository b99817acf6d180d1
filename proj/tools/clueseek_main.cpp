// SPDX-License-Identifier: Apache-2.0
//
// Single entry point for the toolchain: dataset generation, episode
// simulation, reward scoring, mask export, advantage computation, quota
// planning, trajectory validation, the synthesis pipeline, and the crop tool
// service.

#include <csignal>
#include <ctime>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "clueseek/config.hpp"
#include "clueseek/datapipe.hpp"
#include "clueseek/datapipe_http.hpp"
#include "clueseek/rollout_remote.hpp"
#include "clueseek/attention_mask.hpp"
#include "clueseek/toolserver_http.hpp"

namespace {

using namespace clueseek;

std::string read_file(const std::string & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string & path, const std::string & content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
    }
    out << content;
}

ManifestStore load_manifest_store(const std::vector<std::string> & paths) {
    ManifestStore store;
    for (const std::string & path : paths) {
        VideoManifest m = load_manifest(read_file(path));
        store[m.id]     = std::move(m);
    }
    return store;
}

std::vector<Sample> load_samples(const std::string & path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
    }
    return parse_samples_jsonl(in);
}

std::vector<Trajectory> load_trajectories(const std::string & path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
    }
    std::vector<Trajectory> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(parse_trajectory(line));
        } catch (const Error & e) {
            throw Error(e.code(), "line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

const Sample & resolve_sample(const std::vector<Sample> & samples, const std::string & ref) {
    size_t idx = 0;
    try {
        idx = std::stoul(ref);
    } catch (const std::exception &) {
        throw Error(ErrorCode::Malformed, "sample_ref '" + ref + "' is not a sample index");
    }
    if (idx >= samples.size()) {
        throw Error(ErrorCode::Malformed, "sample_ref '" + ref + "' out of range");
    }
    return samples[idx];
}

PolicySpec parse_policy_arg(const std::string & arg) {
    PolicySpec spec;
    if (arg == "oracle") {
        spec.kind = PolicyKind::Oracle;
    } else if (arg == "random") {
        spec.kind = PolicyKind::Random;
    } else if (arg.rfind("scripted:", 0) == 0) {
        spec.kind = PolicyKind::Scripted;
        const json j = parse_json(read_file(arg.substr(9)), "script file");
        if (!j.is_array()) {
            throw Error(ErrorCode::BadConfig, "script file must be a JSON array of strings");
        }
        for (const json & step : j) {
            spec.script.push_back(step.get<std::string>());
        }
    } else if (arg.rfind("remote:", 0) == 0) {
        spec.kind     = PolicyKind::Remote;
        spec.endpoint = arg.substr(7);
    } else {
        throw Error(ErrorCode::BadConfig,
                    "policy must be oracle, random, scripted:FILE, or remote:URL");
    }
    return spec;
}

struct GroupRecord {
    std::vector<GroupSample> samples;
};

GroupRecord parse_group_line(const std::string & line) {
    const json j = parse_json(line, "group");
    const json & rewards = require_field(j, "rewards", "group");
    GroupRecord rec;
    for (size_t i = 0; i < rewards.size(); ++i) {
        GroupSample s;
        s.reward = rewards[i].get<double>();
        if (j.contains("turn_counts")) s.turn_count = j.at("turn_counts").at(i).get<int>();
        if (j.contains("context_tokens")) s.context_tokens = j.at("context_tokens").at(i).get<long>();
        if (j.contains("token_ratios")) {
            for (const json & r : j.at("token_ratios").at(i)) {
                s.token_ratios.push_back(r.get<double>());
            }
        }
        rec.samples.push_back(std::move(s));
    }
    return rec;
}

// ---- subcommand bodies -----------------------------------------------------

int cmd_gen(uint64_t seed, int n, const std::string & profile_arg,
            const std::string & out_manifest, const std::string & out_samples) {
    const TaxonomyProfile profile = parse_profile(profile_arg);
    const SyntheticBatch  batch   = generate_synthetic(seed, profile, n);
    write_file(out_manifest, serialize_manifest(batch.manifest) + "\n");
    write_file(out_samples, serialize_samples_jsonl(batch.samples));
    std::cout << "{\"manifest_id\":" << wire::str(batch.manifest.id)
              << ",\"samples\":" << batch.samples.size() << "}\n";
    return 0;
}

int cmd_simulate(const std::string & samples_path, const std::vector<std::string> & manifest_paths,
                 const std::string & policy_arg, const GlobalConfig & cfg, bool train_mode,
                 int turn_limit_override, uint64_t seed_override, bool seed_set, int parallelism,
                 const std::string & out_path, const std::string & report_path) {
    const std::vector<Sample> samples = load_samples(samples_path);
    const ManifestStore       store   = load_manifest_store(manifest_paths);
    const PolicySpec          spec    = parse_policy_arg(policy_arg);

    EpisodeConfig ecfg = train_mode ? EpisodeConfig::train_defaults() : cfg.episode;
    ecfg.quota         = cfg.quota;
    if (train_mode) {
        ecfg.seed                     = cfg.episode.seed;
        ecfg.subtle_visibility_tokens = cfg.episode.subtle_visibility_tokens;
        ecfg.forced_answer_prompt     = cfg.episode.forced_answer_prompt;
    }
    if (turn_limit_override > 0) ecfg.turn_limit = turn_limit_override;
    if (seed_set) ecfg.seed = seed_override;

    const SuiteResult suite =
        run_suite(samples, store, spec, ecfg, parallelism, make_policy_with_remote, cfg.reward);

    if (!out_path.empty()) {
        std::string lines;
        for (const EpisodeResult & ep : suite.episodes) {
            lines += serialize_trajectory(ep.trajectory);
            lines += "\n";
        }
        write_file(out_path, lines);
    }
    const std::string report = serialize_report(suite.report) + "\n";
    if (!report_path.empty()) {
        write_file(report_path, report);
    }
    std::cout << report;
    return 0;
}

int cmd_score(const std::string & traj_path, const std::string & samples_path,
              const GlobalConfig & cfg, const std::string & out_path) {
    const std::vector<Sample>     samples = load_samples(samples_path);
    const std::vector<Trajectory> trajs   = load_trajectories(traj_path);
    std::string lines;
    for (const Trajectory & t : trajs) {
        const RewardBreakdown b = score_trajectory(t, resolve_sample(samples, t.sample_ref), cfg.reward);
        lines += serialize_breakdown(b);
        lines += "\n";
    }
    if (out_path.empty()) {
        std::cout << lines;
    } else {
        write_file(out_path, lines);
    }
    return 0;
}

int cmd_eval(const std::string & traj_path, const std::string & samples_path,
             const GlobalConfig & cfg, const std::string & report_path) {
    const std::vector<Sample>     samples = load_samples(samples_path);
    const std::vector<Trajectory> trajs   = load_trajectories(traj_path);

    std::vector<EpisodeResult> episodes;
    std::vector<Sample>        ordered;
    for (const Trajectory & t : trajs) {
        EpisodeResult ep;
        ep.trajectory = t;
        const Sample & sample = resolve_sample(samples, t.sample_ref);
        ep.breakdown          = score_trajectory(t, sample, cfg.reward);
        episodes.push_back(std::move(ep));
        ordered.push_back(sample);
    }
    const MetricsReport report  = aggregate_report(episodes, ordered);
    const std::string   rendered = serialize_report(report) + "\n";
    if (!report_path.empty()) {
        write_file(report_path, rendered);
    }
    std::cout << rendered;
    return 0;
}

int cmd_mask_build(const std::string & in_path, const std::string & format_arg,
                   const std::string & out_path) {
    const AnnotatedSequence seq = parse_annotated_sequence(read_file(in_path));
    const MaskSpec          m   = build_mask(seq);
    MaskFormat format;
    if (format_arg == "dense01") {
        format = MaskFormat::Dense01;
    } else if (format_arg == "blocked_ranges") {
        format = MaskFormat::BlockedRanges;
    } else {
        throw Error(ErrorCode::BadConfig, "format must be dense01 or blocked_ranges");
    }
    const std::string rendered = export_mask(m, format);
    if (out_path.empty()) {
        std::cout << rendered;
    } else {
        write_file(out_path, rendered);
    }
    return 0;
}

int cmd_mask_select(const std::string & ids_path, double ratio, uint64_t seed) {
    std::ifstream in(ids_path);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open '" + ids_path + "'");
    }
    std::string id;
    while (std::getline(in, id)) {
        if (!id.empty() && should_apply(id, ratio, seed)) {
            std::cout << id << "\n";
        }
    }
    return 0;
}

int cmd_advantage(const std::string & groups_path, const GlobalConfig & cfg, bool filter,
                  const std::string & objective_arg, const std::string & out_path) {
    std::ifstream in(groups_path);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open '" + groups_path + "'");
    }
    std::vector<GroupRecord> groups;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) groups.push_back(parse_group_line(line));
    }

    std::vector<size_t> retained(groups.size());
    for (size_t i = 0; i < retained.size(); ++i) retained[i] = i;
    if (filter) {
        std::vector<std::vector<double>> rewards;
        for (const GroupRecord & g : groups) {
            std::vector<double> r;
            for (const GroupSample & s : g.samples) r.push_back(s.reward);
            rewards.push_back(std::move(r));
        }
        retained = dynamic_sampling_filter(rewards);
    }

    std::string lines;
    for (size_t idx : retained) {
        const GroupAdvantage adv = group_advantages(groups[idx].samples, cfg.limits);
        if (objective_arg == "none") {
            lines += serialize_group_advantage(adv);
        } else {
            const ObjectiveLevel level =
                objective_arg == "token" ? ObjectiveLevel::Token : ObjectiveLevel::Sequence;
            const double obj = surrogate_objective(adv, groups[idx].samples, cfg.limits, level);
            lines += "{\"advantage\":" + serialize_group_advantage(adv) +
                     ",\"objective\":" + wire::num(obj) + "}";
        }
        lines += "\n";
    }
    if (out_path.empty()) {
        std::cout << lines;
    } else {
        write_file(out_path, lines);
    }
    return 0;
}

int cmd_quota_plan(const std::vector<double> & segment, const std::string & strategy_arg,
                   double duration, const GlobalConfig & cfg) {
    CropDirective d;
    d.temporal_segment  = TimeInterval{round_ms(segment[0]), round_ms(segment[1])};
    d.sampling_strategy = strategy_from_string(strategy_arg);
    const double effective_duration = duration > 0.0 ? duration : d.temporal_segment.end;
    std::cout << serialize_plan(compute_sampling_plan(d, cfg.quota, effective_duration)) << "\n";
    return 0;
}

int cmd_validate_trajectory(const std::string & in_path) {
    std::ifstream in(in_path);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open '" + in_path + "'");
    }
    std::string line;
    size_t lineno = 0, count = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            parse_trajectory(line);
            ++count;
        } catch (const Error & e) {
            std::cerr << "line " << lineno << ": " << e.what() << "\n";
            return 1;
        }
    }
    std::cout << "ok: " << count << " trajectories\n";
    return 0;
}

std::map<std::string, Judge> parse_judges_arg(const std::string & arg, const ManifestStore & store) {
    std::map<std::string, Judge> judges;
    for (PipelineStage stage : kPipelineStages) {
        judges[to_string(stage)] = make_builtin_judge("accept_all");
    }
    size_t pos = 0;
    while (pos < arg.size()) {
        size_t comma = arg.find(',', pos);
        if (comma == std::string::npos) comma = arg.size();
        const std::string part = arg.substr(pos, comma - pos);
        pos = comma + 1;
        if (part.empty()) continue;
        const size_t eq = part.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::BadConfig, "judge entry '" + part + "' is not stage=judge");
        }
        const std::string stage = part.substr(0, eq);
        const std::string judge = part.substr(eq + 1);
        if (!judges.count(stage)) {
            throw Error(ErrorCode::BadConfig, "unknown pipeline stage '" + stage + "'");
        }
        judges[stage] = judge.rfind("http", 0) == 0 ? make_http_judge(judge)
                                                    : make_builtin_judge(judge, &store);
    }
    return judges;
}

int cmd_pipeline_run(const std::string & samples_path, const std::vector<std::string> & manifest_paths,
                     const std::string & judges_arg, const std::string & checkpoint_dir, bool resume,
                     int concurrency, const std::string & report_path,
                     const std::string & survivors_path) {
    const std::vector<Sample> samples = load_samples(samples_path);
    const ManifestStore       store   = load_manifest_store(manifest_paths);

    PipelineOptions opts;
    opts.checkpoint_dir = checkpoint_dir;
    opts.resume         = resume;
    opts.concurrency    = concurrency;

    const PipelineResult result = run_pipeline(samples, parse_judges_arg(judges_arg, store), opts);

    std::string report = "{\"stages\":{";
    bool first = true;
    for (PipelineStage stage : kPipelineStages) {
        const StageReport & sr = result.report.stages.at(to_string(stage));
        if (!first) report += ",";
        first = false;
        report += wire::str(to_string(stage)) + ":{\"inputs\":" + wire::num(sr.inputs) +
                  ",\"passes\":" + wire::num(sr.passes) + ",\"fails\":" + wire::num(sr.fails) + "}";
    }
    report += "},\"survivors\":" + wire::num(result.report.survivors) + "}\n";
    if (!report_path.empty()) {
        write_file(report_path, report);
    }
    std::cout << report;

    if (!survivors_path.empty()) {
        std::string lines;
        for (size_t idx : result.survivor_indices) {
            lines += serialize_sample(result.records[idx].sample);
            lines += "\n";
        }
        write_file(survivors_path, lines);
    }
    return 0;
}

int cmd_pipeline_stats(const std::string & samples_path,
                       const std::vector<std::string> & manifest_paths) {
    const std::vector<Sample> samples = load_samples(samples_path);
    if (manifest_paths.empty()) {
        std::cout << serialize_stats(dataset_stats(samples)) << "\n";
    } else {
        const ManifestStore store = load_manifest_store(manifest_paths);
        std::cout << serialize_stats(dataset_stats(samples, &store)) << "\n";
    }
    return 0;
}

int cmd_pipeline_sample_export(const std::string & survivors_path, double percent, uint64_t seed) {
    const std::vector<Sample> samples = load_samples(survivors_path);
    std::vector<size_t> indices(samples.size());
    for (size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    for (size_t idx : sample_for_review(indices, percent, seed)) {
        std::cout << serialize_sample(samples[idx]) << "\n";
    }
    return 0;
}

int cmd_serve(const std::vector<std::string> & manifest_paths, const GlobalConfig & cfg,
              const std::string & host, int port, bool stdio, bool deterministic) {
    std::function<long long()> clock;
    if (!deterministic) {
        clock = [] { return static_cast<long long>(std::time(nullptr)); };
    }
    ToolService service(cfg.quota, cfg.episode.subtle_visibility_tokens, clock);
    for (const std::string & path : manifest_paths) {
        service.register_manifest(load_manifest(read_file(path)));
    }
    if (stdio) {
        run_stdio_tool_loop(service, std::cin, std::cout);
        return 0;
    }
    HttpToolServer server(service);
    std::cerr << "serving on " << host << ":" << port << "\n";
    return server.listen(host, port) ? 0 : 1;
}

} // namespace

int main(int argc, char ** argv) {
    CLI::App app{"long-video clue-seeking tool-invocation runtime"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "config file (JSON); 'default' for builtin defaults")
        ->capture_default_str();

    // gen
    auto * gen = app.add_subcommand("gen", "generate a synthetic manifest and sample set");
    uint64_t    gen_seed = 0;
    int         gen_n    = 10;
    std::string gen_profile = "uniform";
    std::string gen_out_manifest, gen_out_samples;
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--n", gen_n, "number of samples");
    gen->add_option("--profile", gen_profile, "uniform | all-<TaskType> | Type=w,...");
    gen->add_option("--out-manifest", gen_out_manifest, "manifest output path")->required();
    gen->add_option("--out-samples", gen_out_samples, "samples JSONL output path")->required();

    // simulate
    auto * sim = app.add_subcommand("simulate", "run episodes over samples with a policy");
    std::string sim_samples, sim_policy = "oracle", sim_out, sim_report;
    std::vector<std::string> sim_manifests;
    bool     sim_train       = false;
    int      sim_turn_limit  = 0;
    uint64_t sim_seed        = 0;
    int      sim_parallelism = 1;
    sim->add_option("--samples", sim_samples, "samples JSONL")->required();
    sim->add_option("--manifest", sim_manifests, "manifest file (repeatable)")->required();
    sim->add_option("--policy", sim_policy, "oracle | random | scripted:FILE | remote:URL");
    sim->add_flag("--train-mode", sim_train, "training limits: 6 turns, no forced answer");
    sim->add_option("--turn-limit", sim_turn_limit, "override tool-round limit");
    auto * sim_seed_opt = sim->add_option("--seed", sim_seed, "suite seed");
    sim->add_option("--parallelism", sim_parallelism, "worker threads");
    sim->add_option("--out", sim_out, "trajectories JSONL output");
    sim->add_option("--report", sim_report, "metrics report output");

    // score
    auto * score = app.add_subcommand("score", "score trajectories against samples");
    std::string score_traj, score_samples, score_out;
    score->add_option("--trajectories", score_traj, "trajectories JSONL")->required();
    score->add_option("--samples", score_samples, "samples JSONL")->required();
    score->add_option("--out", score_out, "output path (default stdout)");

    // eval
    auto * eval = app.add_subcommand("eval", "metrics report from existing trajectories");
    std::string eval_traj, eval_samples, eval_report;
    eval->add_option("--trajectories", eval_traj, "trajectories JSONL")->required();
    eval->add_option("--samples", eval_samples, "samples JSONL")->required();
    eval->add_option("--report", eval_report, "report output path (default stdout)");

    // mask
    auto * mask = app.add_subcommand("mask", "task-decoupled attention masks");
    mask->require_subcommand(1);
    auto * mask_build = mask->add_subcommand("build", "build a mask from an annotated sequence");
    std::string mb_in, mb_format = "dense01", mb_out;
    mask_build->add_option("--in", mb_in, "annotated sequence JSON")->required();
    mask_build->add_option("--format", mb_format, "dense01 | blocked_ranges");
    mask_build->add_option("--out", mb_out, "output path (default stdout)");
    auto * mask_select = mask->add_subcommand("select", "pick ids for mask application");
    std::string ms_ids;
    double      ms_ratio = 0.1;
    uint64_t    ms_seed  = 0;
    mask_select->add_option("--ids-file", ms_ids, "one sample id per line")->required();
    mask_select->add_option("--ratio", ms_ratio, "application ratio");
    mask_select->add_option("--seed", ms_seed, "selection seed");

    // advantage
    auto * adv = app.add_subcommand("advantage", "group-relative advantages from reward groups");
    std::string adv_groups, adv_objective = "none", adv_out;
    bool        adv_filter = false;
    adv->add_option("--groups", adv_groups, "groups JSONL: {rewards, turn_counts, context_tokens}")
        ->required();
    adv->add_flag("--filter", adv_filter, "drop zero-variance groups (dynamic sampling)");
    adv->add_option("--objective", adv_objective, "none | sequence | token");
    adv->add_option("--out", adv_out, "output path (default stdout)");

    // quota
    auto * quota = app.add_subcommand("quota", "visual token quota arithmetic");
    quota->require_subcommand(1);
    auto * quota_plan = quota->add_subcommand("plan", "sampling plan for a directive");
    std::vector<double> qp_segment;
    std::string         qp_strategy = "medium";
    double              qp_duration = 0.0;
    quota_plan->add_option("--segment", qp_segment, "start end (seconds)")
        ->expected(2)
        ->required();
    quota_plan->add_option("--strategy", qp_strategy, "coarse | medium | fine");
    quota_plan->add_option("--duration", qp_duration, "video duration for clamping");

    // validate-trajectory
    auto * validate = app.add_subcommand("validate-trajectory", "validate a trajectory JSONL file");
    std::string val_in;
    validate->add_option("--in", val_in, "trajectories JSONL")->required();

    // pipeline
    auto * pipe = app.add_subcommand("pipeline", "four-stage synthesis pipeline");
    pipe->require_subcommand(1);
    auto * pipe_run = pipe->add_subcommand("run", "run the pipeline over samples");
    std::string pr_samples, pr_judges, pr_checkpoints, pr_report, pr_survivors;
    std::vector<std::string> pr_manifests;
    bool pr_resume      = false;
    int  pr_concurrency = 1;
    pipe_run->add_option("--samples", pr_samples, "samples JSONL")->required();
    pipe_run->add_option("--manifest", pr_manifests, "manifest file (repeatable)");
    pipe_run->add_option("--stage-judges", pr_judges,
                         "stage=judge pairs; builtin names or http URLs");
    pipe_run->add_option("--checkpoint-dir", pr_checkpoints, "checkpoint directory");
    pipe_run->add_flag("--resume", pr_resume, "reuse matching checkpoints");
    pipe_run->add_option("--concurrency", pr_concurrency, "judges per stage in flight");
    pipe_run->add_option("--report", pr_report, "per-stage report output");
    pipe_run->add_option("--survivors-out", pr_survivors, "surviving samples JSONL output");
    auto * pipe_stats = pipe->add_subcommand("stats", "dataset histogram");
    std::string ps_samples;
    std::vector<std::string> ps_manifests;
    pipe_stats->add_option("--samples", ps_samples, "samples JSONL")->required();
    pipe_stats->add_option("--manifest", ps_manifests, "manifest file (repeatable)");
    auto * pipe_export = pipe->add_subcommand("sample-export", "random slice of survivors for review");
    std::string pe_survivors;
    double      pe_percent = 5.0;
    uint64_t    pe_seed    = 0;
    pipe_export->add_option("--survivors", pe_survivors, "survivors JSONL")->required();
    pipe_export->add_option("--percent", pe_percent, "percentage to export");
    pipe_export->add_option("--seed", pe_seed, "selection seed");

    // serve
    auto * serve = app.add_subcommand("serve", "run the crop tool service");
    std::vector<std::string> sv_manifests;
    std::string sv_host = "127.0.0.1";
    int         sv_port = 8080;
    bool        sv_stdio = false, sv_det = false;
    serve->add_option("--manifest", sv_manifests, "manifest file (repeatable)")->required();
    serve->add_option("--host", sv_host, "bind host");
    serve->add_option("--port", sv_port, "bind port");
    serve->add_flag("--stdio", sv_stdio, "newline-delimited JSON over stdin/stdout");
    serve->add_flag("--deterministic", sv_det, "fixed clock for reproducible fixtures");

    // config
    auto * config = app.add_subcommand("config", "configuration utilities");
    config->require_subcommand(1);
    config->add_subcommand("dump", "print the effective config");

    try {
        app.parse(argc, argv);

        const GlobalConfig cfg = load_config(config_path);

        if (*gen) return cmd_gen(gen_seed, gen_n, gen_profile, gen_out_manifest, gen_out_samples);
        if (*sim) {
            return cmd_simulate(sim_samples, sim_manifests, sim_policy, cfg, sim_train,
                                sim_turn_limit, sim_seed, sim_seed_opt->count() > 0,
                                sim_parallelism, sim_out, sim_report);
        }
        if (*score) return cmd_score(score_traj, score_samples, cfg, score_out);
        if (*eval) return cmd_eval(eval_traj, eval_samples, cfg, eval_report);
        if (*mask_build) return cmd_mask_build(mb_in, mb_format, mb_out);
        if (*mask_select) return cmd_mask_select(ms_ids, ms_ratio, ms_seed);
        if (*adv) return cmd_advantage(adv_groups, cfg, adv_filter, adv_objective, adv_out);
        if (*quota_plan) return cmd_quota_plan(qp_segment, qp_strategy, qp_duration, cfg);
        if (*validate) return cmd_validate_trajectory(val_in);
        if (*pipe_run) {
            return cmd_pipeline_run(pr_samples, pr_manifests, pr_judges, pr_checkpoints, pr_resume,
                                    pr_concurrency, pr_report, pr_survivors);
        }
        if (*pipe_stats) return cmd_pipeline_stats(ps_samples, ps_manifests);
        if (*pipe_export) return cmd_pipeline_sample_export(pe_survivors, pe_percent, pe_seed);
        if (*serve) return cmd_serve(sv_manifests, cfg, sv_host, sv_port, sv_stdio, sv_det);
        if (*config) {
            std::cout << serialize_config(cfg) << "\n";
            return 0;
        }
        return 2;
    } catch (const CLI::CallForHelp & e) {
        return app.exit(e);
    } catch (const CLI::ParseError & e) {
        app.exit(e);
        return 2;
    } catch (const clueseek::Error & e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const std::exception & e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
