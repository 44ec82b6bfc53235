// agp — command-line surface over the resource registries, the evolution
// engine, trace files and the control-plane server.
//
// Exit codes: 0 success, 1 domain error, 2 usage error.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <thread>

#include "CLI11.hpp"

#include "agp/agp.hpp"
#include "agp/config.hpp"

namespace fs = std::filesystem;
using agp::json;

namespace {

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop = true; }

std::string resolve_home(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("AGP_HOME")) return env;
    return ".agp";
}

fs::path registry_dir(const std::string& home) { return fs::path(home) / "registry"; }

agp::EntityKind want_kind(const std::string& text) {
    auto k = agp::parse_kind(text);
    if (!k) throw agp::Error(agp::ErrorKind::InvalidArgument, "unknown kind '" + text + "'");
    return *k;
}

agp::Version want_version(const std::string& text) {
    auto v = agp::Version::parse(text);
    if (!v) throw agp::Error(agp::ErrorKind::InvalidArgument, "bad version '" + text + "'");
    return *v;
}

const std::vector<std::string> kOptimizers = {"reflection", "textgrad", "reinforcepp", "grpo"};

void print_optimizer_catalogue(std::ostream& out) {
    out << "available optimizers:\n";
    for (const auto& o : kOptimizers) out << "  " << o << "\n";
}

struct EvolveOutcome {
    double score = 0.0;
    int rounds = 0;
    bool converged = false;
    std::string solution;
    std::vector<double> scores;
};

EvolveOutcome run_optimizer(const std::string& optimizer, const agp::AgentSystem& system,
                            const agp::Objective& objective, const agp::OptimizerConfig& cfg,
                            const std::string& y_star, const std::string& y_sft) {
    EvolveOutcome out;
    if (optimizer == "reflection") {
        agp::SeplEngine engine(system, objective);
        agp::ReflectionOptimizer opt(cfg.evaluator_model);
        const agp::LoopResult r = engine.run_loop(opt, cfg.rl.budget);
        out.score = r.best_score;
        out.rounds = r.iterations;
        out.converged = r.converged;
        out.solution = r.state.output();
        for (const auto& ev : r.evaluations) out.scores.push_back(ev.score);
        return out;
    }
    if (optimizer == "textgrad") {
        const agp::TextGradResult r = agp::textgrad_loop(system, objective, cfg.evaluator_model,
                                                         cfg.optimizer_model, cfg.rl.budget);
        agp::SeplEngine engine(system, objective);
        agp::VariableSet final_state = engine.lift_variables();
        agp::Trace final_trace("final");
        const agp::Evaluation ev = engine.evaluate(final_state, final_trace);
        final_trace.close({final_state.output(), ev.converged});
        out.score = ev.score;
        out.rounds = r.rounds;
        out.converged = r.converged;
        out.solution = final_state.output();
        out.scores.push_back(ev.score);
        return out;
    }
    if (optimizer == "reinforcepp") {
        const agp::RlLoopResult r = agp::reinforcepp_loop(system, objective, y_star, y_sft,
                                                          cfg.rl, cfg.evaluator_model);
        out.score = objective.score_of(r.solution);
        out.rounds = r.iterations;
        out.converged = r.satisfied;
        out.solution = r.solution;
        for (const auto& ev : r.evaluations) out.scores.push_back(ev.score);
        return out;
    }
    if (optimizer == "grpo") {
        const agp::RlLoopResult r =
            agp::grpo_loop(system, objective, y_star, cfg.rl, cfg.evaluator_model);
        out.score = objective.score_of(r.solution);
        out.rounds = r.iterations;
        out.converged = r.satisfied;
        out.solution = r.solution;
        for (const auto& ev : r.evaluations) out.scores.push_back(ev.score);
        return out;
    }
    throw agp::Error(agp::ErrorKind::InvalidArgument, "unknown optimizer '" + optimizer + "'");
}

void print_outcome(const std::string& task, const std::string& optimizer,
                   const EvolveOutcome& out, bool json_out) {
    if (json_out) {
        json scores = json::array();
        for (double s : out.scores) scores.push_back(s);
        std::cout << json{{"task", task},
                          {"optimizer", optimizer},
                          {"rounds", out.rounds},
                          {"score", out.score},
                          {"converged", out.converged},
                          {"solution", out.solution},
                          {"scores", scores}}
                         .dump(2)
                  << "\n";
        return;
    }
    std::cout << "task: " << task << "\noptimizer: " << optimizer
              << "\nrounds: " << out.rounds << "\nscore: " << out.score
              << "\nconverged: " << (out.converged ? "true" : "false")
              << "\nsolution: " << out.solution << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"agent resource registries with versioned lineage and closed-loop evolution"};
    app.require_subcommand(1);

    bool json_out = false;
    std::string home_flag;
    std::string config_path;
    app.add_flag("--json", json_out, "machine-readable output");
    app.add_option("--home", home_flag, "state directory (default: $AGP_HOME or ./.agp)");
    app.add_option("--config", config_path, "gateway/optimizer config file (agp.json)");

    // registry ------------------------------------------------------------
    auto* registry_cmd = app.add_subcommand("registry", "inspect and manage resource records");
    registry_cmd->require_subcommand(1);

    std::string kind_filter;
    auto* reg_list = registry_cmd->add_subcommand("list", "list registered resource names");
    reg_list->add_option("--kind", kind_filter, "restrict to one kind");

    std::string show_kind, show_name, show_version;
    auto* reg_show = registry_cmd->add_subcommand("show", "show a record and its history");
    reg_show->add_option("kind", show_kind)->required();
    reg_show->add_option("name", show_name)->required();
    reg_show->add_option("--version", show_version, "show a historical snapshot");

    std::string diff_kind, diff_name, diff_a, diff_b;
    auto* reg_diff = registry_cmd->add_subcommand("diff", "field-level diff of two versions");
    reg_diff->add_option("kind", diff_kind)->required();
    reg_diff->add_option("name", diff_name)->required();
    reg_diff->add_option("a", diff_a)->required();
    reg_diff->add_option("b", diff_b)->required();

    std::string restore_kind, restore_name, restore_version;
    auto* reg_restore =
        registry_cmd->add_subcommand("restore", "restore a historical version as a new head");
    reg_restore->add_option("kind", restore_kind)->required();
    reg_restore->add_option("name", restore_name)->required();
    reg_restore->add_option("version", restore_version)->required();

    // evolve ----------------------------------------------------------------
    auto* evolve_cmd = app.add_subcommand("evolve", "run the evolution loop");
    auto* evolve_run = evolve_cmd->add_subcommand("run", "evolve a task file");
    std::string task_file, optimizer_name = "reflection";
    int budget = 0;
    evolve_run->add_option("--task", task_file, "task file (JSON)")->required();
    evolve_run->add_option("--optimizer", optimizer_name, "reflection|textgrad|reinforcepp|grpo");
    evolve_run->add_option("--budget", budget, "iteration budget T");

    // trace -------------------------------------------------------------------
    auto* trace_cmd = app.add_subcommand("trace", "trace file utilities");
    auto* trace_dump = trace_cmd->add_subcommand("dump", "print a JSONL trace");
    std::string trace_file;
    trace_dump->add_option("file", trace_file)->required();

    // serve ---------------------------------------------------------------------
    auto* serve_cmd = app.add_subcommand("serve", "start the control-plane server");
    std::string bind_addr = "127.0.0.1:8377";
    serve_cmd->add_option("--bind", bind_addr, "host:port");

    // demo -----------------------------------------------------------------------
    auto* demo_cmd = app.add_subcommand("demo", "run a bundled toy task");
    std::string demo_task;
    std::string demo_optimizer = "reflection";
    int demo_budget = 3;
    demo_cmd->add_option("task", demo_task, "string-target|arithmetic-format")->required();
    demo_cmd->add_option("--optimizer", demo_optimizer, "reflection|textgrad|reinforcepp|grpo");
    demo_cmd->add_option("--budget", demo_budget, "iteration budget T");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    const std::string home = resolve_home(home_flag);

    try {
        if (reg_list->parsed()) {
            agp::RegistrySet regs;
            if (fs::exists(registry_dir(home))) agp::load_registry_set(regs, registry_dir(home));
            json out = json::object();
            for (agp::EntityKind k : agp::kAllKinds) {
                if (!kind_filter.empty() && kind_filter != agp::kind_name(k)) continue;
                out[agp::kind_name(k)] = regs.of(k).list();
            }
            if (json_out) {
                std::cout << out.dump(2) << "\n";
            } else {
                for (auto it = out.begin(); it != out.end(); ++it) {
                    std::cout << it.key() << ":";
                    if (it.value().empty()) std::cout << " (none)";
                    std::cout << "\n";
                    for (const auto& n : it.value()) std::cout << "  " << n.get<std::string>()
                                                               << "\n";
                }
            }
            return 0;
        }

        if (reg_show->parsed()) {
            agp::RegistrySet regs;
            agp::load_registry_set(regs, registry_dir(home));
            agp::Registry& reg = regs.of(want_kind(show_kind));
            json record;
            if (show_version.empty()) {
                record = agp::record_to_json(reg.get_info(show_name));
            } else {
                record =
                    agp::record_to_json(reg.snapshot(show_name, want_version(show_version)).record);
            }
            json history = json::array();
            for (const auto& h : reg.history(show_name))
                history.push_back({{"version", h.version.str()},
                                   {"content_hash", h.content_hash},
                                   {"parent", h.parent ? json(h.parent->str()) : json(nullptr)}});
            if (json_out) {
                std::cout << json{{"record", record}, {"history", history}}.dump(2) << "\n";
            } else {
                std::cout << record.dump(2) << "\nhistory:\n";
                for (const auto& h : history)
                    std::cout << "  " << h["version"].get<std::string>() << "  "
                              << h["content_hash"].get<std::string>() << "\n";
            }
            return 0;
        }

        if (reg_diff->parsed()) {
            agp::RegistrySet regs;
            agp::load_registry_set(regs, registry_dir(home));
            const auto changes = regs.of(want_kind(diff_kind))
                                     .diff(diff_name, want_version(diff_a), want_version(diff_b));
            json out = json::array();
            for (const auto& c : changes)
                out.push_back({{"field", c.field}, {"old", c.old_value}, {"new", c.new_value}});
            if (json_out) {
                std::cout << out.dump(2) << "\n";
            } else if (changes.empty()) {
                std::cout << "(no changes)\n";
            } else {
                for (const auto& c : changes)
                    std::cout << c.field << ": " << c.old_value.dump() << " -> "
                              << c.new_value.dump() << "\n";
            }
            return 0;
        }

        if (reg_restore->parsed()) {
            agp::RegistrySet regs;
            agp::load_registry_set(regs, registry_dir(home));
            const agp::Version v = regs.of(want_kind(restore_kind))
                                       .restore(restore_name, want_version(restore_version));
            agp::save_registry_set(regs, registry_dir(home));
            if (json_out)
                std::cout << json{{"version", v.str()}}.dump() << "\n";
            else
                std::cout << restore_name << " -> " << v.str() << "\n";
            return 0;
        }

        if (evolve_run->parsed()) {
            if (std::find(kOptimizers.begin(), kOptimizers.end(), optimizer_name) ==
                kOptimizers.end()) {
                std::cerr << "unknown optimizer '" << optimizer_name << "'\n";
                print_optimizer_catalogue(std::cerr);
                return 2;
            }
            const json spec = agp::load_json_file(task_file);
            const agp::Objective objective = agp::Objective::from_json(spec.at("objective"));

            agp::RegistrySet regs;
            for (const auto& [kind_text, records] : spec.value("records", json::object()).items()) {
                const agp::EntityKind k = want_kind(kind_text);
                for (const auto& r : records)
                    regs.of(k).register_record(agp::record_from_json(r));
            }

            agp::ModelGateway gateway;
            if (spec.contains("gateway")) agp::apply_gateway_config(gateway, spec["gateway"]);
            if (!config_path.empty()) {
                const json cfg = agp::load_json_file(config_path);
                if (cfg.contains("gateway")) agp::apply_gateway_config(gateway, cfg["gateway"]);
            }

            agp::OptimizerConfig cfg;
            if (spec.contains("optimizer")) cfg = agp::OptimizerConfig::from_json(spec["optimizer"]);
            if (budget > 0) cfg.rl.budget = budget;

            const std::string entry = spec.value("system", json::object())
                                          .value("entry", std::string("agent/main"));
            const auto slash = entry.find('/');
            if (slash == std::string::npos)
                throw agp::Error(agp::ErrorKind::InvalidArgument,
                                 "system.entry must be '<kind>/<name>'");
            agp::AgentSystem system;
            system.registries = &regs;
            system.gateway = &gateway;
            system.entry_kind = want_kind(entry.substr(0, slash));
            system.entry_name = entry.substr(slash + 1);

            const std::string y_star =
                spec.value("reference", json::object())
                    .value("y_star", objective.success.value);
            const std::string y_sft =
                spec.value("reference", json::object()).value("y_sft", y_star);

            const EvolveOutcome out =
                run_optimizer(optimizer_name, system, objective, cfg, y_star, y_sft);
            print_outcome(objective.task, optimizer_name, out, json_out);
            return 0;
        }

        if (trace_dump->parsed()) {
            const agp::Trace t = agp::load_trace(trace_file);
            if (json_out) {
                json events = json::array();
                for (const auto& e : t.events())
                    events.push_back({{"seq", e.seq},
                                      {"span", e.span_id},
                                      {"parent", e.parent_span ? json(*e.parent_span)
                                                               : json(nullptr)},
                                      {"kind", agp::trace_event_kind_name(e.kind)},
                                      {"payload", e.payload},
                                      {"ts", e.ts_ms}});
                std::cout << json{{"trace_id", t.trace_id()},
                                  {"outcome",
                                   {{"final_answer", t.outcome().final_answer},
                                    {"success", t.outcome().success}}},
                                  {"events", events}}
                                 .dump(2)
                          << "\n";
            } else {
                std::cout << "trace " << t.trace_id() << " (" << t.size() << " events), answer: "
                          << t.outcome().final_answer
                          << (t.outcome().success ? " [ok]\n" : " [failed]\n");
                for (const auto& e : t.events())
                    std::cout << "  #" << e.seq << " " << agp::trace_event_kind_name(e.kind)
                              << " " << e.span_id << " " << e.payload.dump() << "\n";
            }
            return 0;
        }

        if (serve_cmd->parsed()) {
            const auto colon = bind_addr.rfind(':');
            if (colon == std::string::npos)
                throw agp::Error(agp::ErrorKind::InvalidArgument, "--bind must be host:port");
            const std::string host = bind_addr.substr(0, colon);
            const int port = std::stoi(bind_addr.substr(colon + 1));

            agp::RegistrySet regs;
            if (fs::exists(registry_dir(home))) agp::load_registry_set(regs, registry_dir(home));
            agp::ModelGateway gateway;
            if (!config_path.empty()) {
                const json cfg = agp::load_json_file(config_path);
                if (cfg.contains("gateway")) agp::apply_gateway_config(gateway, cfg["gateway"]);
            }

            agp::RpcServer server(&regs, &gateway);
            server.start(host, port);
            std::signal(SIGINT, handle_signal);
            std::signal(SIGTERM, handle_signal);
            std::cout << "listening on " << server.url() << " (POST /rpc, GET /catalogue)\n";
            while (!g_stop)
                std::this_thread::sleep_for(std::chrono::milliseconds(100));
            server.stop();
            agp::save_registry_set(regs, registry_dir(home));
            return 0;
        }

        if (demo_cmd->parsed()) {
            if (std::find(kOptimizers.begin(), kOptimizers.end(), demo_optimizer) ==
                kOptimizers.end()) {
                std::cerr << "unknown optimizer '" << demo_optimizer << "'\n";
                print_optimizer_catalogue(std::cerr);
                return 2;
            }
            agp::ToyTask task;
            try {
                task = agp::toytasks::by_name(demo_task);
            } catch (const agp::Error&) {
                std::cerr << "unknown toy task '" << demo_task << "'\navailable tasks:\n";
                for (const auto& n : agp::toytasks::names()) std::cerr << "  " << n << "\n";
                return 2;
            }
            agp::RegistrySet regs;
            agp::ModelGateway gateway;
            const agp::AgentSystem system = agp::toytasks::install(task, regs, gateway);
            agp::OptimizerConfig cfg;
            cfg.evaluator_model = agp::toytasks::kCriticModel;
            cfg.optimizer_model = agp::toytasks::kCriticModel;
            cfg.rl.budget = demo_budget;
            const EvolveOutcome out =
                run_optimizer(demo_optimizer, system, task.objective, cfg,
                              task.objective.success.value, task.reference_solution);
            print_outcome(task.name, demo_optimizer, out, json_out);
            return 0;
        }
    } catch (const agp::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
