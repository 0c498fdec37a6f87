// gwr — run Selection-Broadcast Cycle scenarios, compare engines, and
// demonstrate chunk-accelerated replay.
//
// Exit codes: 0 success, 2 configuration error, 3 scenario error,
// 4 acceptance mismatch (fig4 numbers off).

#include <CLI11.hpp>
#include <iostream>

#include "gwr/harness.hpp"
#include "gwr/metrics.hpp"
#include "gwr/policy.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kScenarioError = 3;
constexpr int kMismatch = 4;

struct CommonFlags {
    std::string scenario_path;
    std::string engine = "gwt";
    std::string policy;
    std::uint64_t seed = 0;
    std::string trace_out;
    std::string memory_in;
    std::string memory_out;
    std::uint64_t max_cycles = 0;
    bool no_memory = false;
    bool parallel_collect = false;
};

gwr::MetricsReport trace_metrics(const gwr::RunOutput& out) {
    return gwr::compute_metrics(
        gwr::parse_trace(gwr::trace_to_string(out.header, out.events)));
}

void write_trace(const std::string& path, const gwr::RunOutput& out,
                 const gwr::MetricsReport& metrics) {
    const gwr::json line = gwr::metrics_to_json(metrics);
    gwr::write_trace_file(path, out.header, out.events, &line);
}

std::string default_trace_path(const gwr::Scenario& scenario, const std::string& engine) {
    const std::string kind = engine.rfind("pipeline", 0) == 0 ? "pipeline" : "gwt";
    return scenario.name + "." + kind + ".jsonl";
}

int cmd_run(const CommonFlags& flags) {
    if (!flags.policy.empty()) {
        try {
            gwr::parse_policy(flags.policy);
        } catch (const std::invalid_argument& e) {
            std::cerr << "--policy: " << e.what() << "\n";
            return kConfigError;
        }
    }
    bool use_pipeline = false;
    std::vector<std::string> order;
    if (flags.engine != "gwt") {
        if (flags.engine == "pipeline") {
            use_pipeline = true;
        } else if (flags.engine.rfind("pipeline:", 0) == 0) {
            use_pipeline = true;
            try {
                order = gwr::parse_pipeline_order(flags.engine.substr(9));
            } catch (const std::invalid_argument& e) {
                std::cerr << "--engine: " << e.what() << "\n";
                return kConfigError;
            }
        } else {
            std::cerr << "--engine: expected \"gwt\", \"pipeline\", or \"pipeline:<slots>\", got \""
                      << flags.engine << "\"\n";
            return kConfigError;
        }
    }

    gwr::RunOptions options;
    options.policy = flags.policy;
    options.seed = flags.seed;
    options.max_cycles = flags.max_cycles;
    options.no_memory = flags.no_memory;
    options.parallel_collect = flags.parallel_collect;
    if (!flags.memory_in.empty()) {
        try {
            options.memory_in = gwr::EpisodeStore::load(flags.memory_in);
        } catch (const std::exception& e) {
            std::cerr << "--memory-in: " << e.what() << "\n";
            return kConfigError;
        }
    }

    gwr::Scenario scenario;
    try {
        scenario = gwr::load_scenario(flags.scenario_path);
    } catch (const gwr::ScenarioError& e) {
        std::cerr << e.what() << "\n";
        return kScenarioError;
    }

    gwr::RunOutput out;
    try {
        out = use_pipeline ? gwr::run_pipeline(scenario, options, order)
                           : gwr::run_gwt(scenario, options);
    } catch (const gwr::ScenarioError& e) {
        std::cerr << e.what() << "\n";
        return kScenarioError;
    }

    const gwr::MetricsReport metrics = trace_metrics(out);
    const std::string trace_path =
        flags.trace_out.empty() ? default_trace_path(scenario, flags.engine) : flags.trace_out;
    write_trace(trace_path, out, metrics);

    if (!flags.memory_out.empty()) {
        if (!out.memory_out) {
            std::cerr << "--memory-out: run had no memory module (disabled by scenario, "
                         "--no-memory, or pipeline engine)\n";
            return kConfigError;
        }
        out.memory_out->save(flags.memory_out);
    }

    std::cout << gwr::metrics_table(metrics);
    std::cout << "stop: " << gwr::stop_reason_name(out.stop) << "\n";
    std::cout << "trace: " << trace_path << "\n";
    return kOk;
}

int cmd_compare(const CommonFlags& flags) {
    gwr::Scenario scenario;
    try {
        scenario = gwr::load_scenario(flags.scenario_path);
    } catch (const gwr::ScenarioError& e) {
        std::cerr << e.what() << "\n";
        return kScenarioError;
    }

    gwr::RunOptions options;
    options.policy = flags.policy;
    options.seed = flags.seed;
    options.max_cycles = flags.max_cycles;
    options.no_memory = flags.no_memory;

    try {
        const gwr::RunOutput gwt = gwr::run_gwt(scenario, options);
        const gwr::RunOutput pipeline = gwr::run_pipeline(scenario, options);
        const gwr::MetricsReport gm = trace_metrics(gwt);
        const gwr::MetricsReport pm = trace_metrics(pipeline);
        if (!flags.trace_out.empty()) {
            write_trace(flags.trace_out + ".gwt.jsonl", gwt, gm);
            write_trace(flags.trace_out + ".pipeline.jsonl", pipeline, pm);
        }
        std::cout << gwr::compare_table(gm, pm);
    } catch (const gwr::ScenarioError& e) {
        std::cerr << e.what() << "\n";
        return kScenarioError;
    }
    return kOk;
}

int cmd_fig4(const std::string& scenario_path, bool no_memory, std::uint64_t chunk_cap,
             std::uint64_t seed) {
    gwr::Scenario scenario;
    try {
        scenario = gwr::load_scenario(scenario_path);
    } catch (const gwr::ScenarioError& e) {
        std::cerr << e.what() << "\n";
        return kScenarioError;
    }
    if (chunk_cap > 0) scenario.memory.chunk_cap = chunk_cap;

    gwr::RunOptions first_options;
    first_options.seed = seed;
    first_options.no_memory = no_memory;
    const gwr::RunOutput first = gwr::run_gwt(scenario, first_options);

    gwr::RunOptions replay_options = first_options;
    replay_options.memory_in = first.memory_out;
    const gwr::RunOutput replay = gwr::run_gwt(scenario, replay_options);
    const gwr::MetricsReport replay_metrics = trace_metrics(replay);

    const std::uint64_t saved = replay_metrics.cycles_saved;
    std::cout << first.cycles << " → " << replay.cycles << ", saved " << saved << "\n";

    const bool accelerated = !no_memory && scenario.memory_enabled && scenario.memory.chunk_cap >= 2;
    const std::uint64_t want_first = 3;
    const std::uint64_t want_replay = accelerated ? 2 : 3;
    const std::uint64_t want_saved = accelerated ? scenario.memory.chunk_cap - 1 : 0;
    if (first.cycles != want_first || replay.cycles != want_replay || saved != want_saved) {
        std::cerr << "expected " << want_first << " → " << want_replay << ", saved "
                  << want_saved << "\n";
        return kMismatch;
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Selection-Broadcast Cycle runtime"};
    app.require_subcommand(1);

    CommonFlags run_flags;
    CLI::App* run = app.add_subcommand("run", "run one scenario on one engine");
    run->add_option("--scenario", run_flags.scenario_path, "scenario file")->required();
    run->add_option("--engine", run_flags.engine, "gwt | pipeline:<slot,slot,...>");
    run->add_option("--policy", run_flags.policy, "max | threshold:<t> | recency:<l>");
    run->add_option("--seed", run_flags.seed, "run seed");
    run->add_option("--trace-out", run_flags.trace_out, "trace file path");
    run->add_option("--memory-in", run_flags.memory_in, "load a memory snapshot");
    run->add_option("--memory-out", run_flags.memory_out, "save the memory snapshot");
    run->add_option("--max-cycles", run_flags.max_cycles, "override the scenario cycle cap");
    run->add_flag("--no-memory", run_flags.no_memory, "run without the memory module");
    run->add_flag("--parallel-collect", run_flags.parallel_collect,
                  "poll modules concurrently in Collect");

    CommonFlags compare_flags;
    CLI::App* compare = app.add_subcommand("compare", "gwt vs pipeline on one scenario");
    compare->add_option("--scenario", compare_flags.scenario_path, "scenario file")->required();
    compare->add_option("--policy", compare_flags.policy, "selection policy override");
    compare->add_option("--seed", compare_flags.seed, "run seed");
    compare->add_option("--max-cycles", compare_flags.max_cycles,
                        "override the scenario cycle cap");
    compare->add_option("--trace-out", compare_flags.trace_out,
                        "trace path prefix (writes <prefix>.gwt.jsonl and "
                        "<prefix>.pipeline.jsonl)");
    compare->add_flag("--no-memory", compare_flags.no_memory,
                      "run without the memory module");

    std::string fig4_scenario = "scenarios/fig4-abstract.json";
    bool fig4_no_memory = false;
    std::uint64_t fig4_chunk_cap = 0;
    std::uint64_t fig4_seed = 0;
    CLI::App* fig4 = app.add_subcommand("fig4", "chunk-accelerated replay demonstration");
    fig4->add_option("--scenario", fig4_scenario, "abstract scenario file");
    fig4->add_flag("--no-memory", fig4_no_memory, "disable the memory module");
    fig4->add_option("--chunk-cap", fig4_chunk_cap, "override the chunk length cap");
    fig4->add_option("--seed", fig4_seed, "run seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }

    try {
        if (run->parsed()) return cmd_run(run_flags);
        if (compare->parsed()) return cmd_compare(compare_flags);
        if (fig4->parsed()) {
            return cmd_fig4(fig4_scenario, fig4_no_memory, fig4_chunk_cap, fig4_seed);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    }
    return kConfigError;
}
