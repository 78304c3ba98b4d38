// taillight: synthetic data, tree generation, training, evaluation and the
// ablation report from one JSON config.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "taillight/experiment.hpp"

namespace fs = std::filesystem;
using namespace taillight;
using json = nlohmann::json;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "experiment config (JSON)")->required();
    cmd->add_option("--seed", c.seed, "override config seed");
    cmd->add_option("--out", c.out, "override output directory");
}

ExperimentConfig load(const Common& c) {
    ExperimentConfig cfg = ExperimentConfig::load(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (c.out) cfg.out = *c.out;
    return cfg;
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string(), path.string());
    out << text;
}

std::string task_dir(std::size_t t) {
    char name[32];
    std::snprintf(name, sizeof name, "task_%02zu", t);
    return name;
}

int cmd_gen_data(const ExperimentConfig& cfg) {
    const World w = generate_world(cfg.synthetic, cfg.task_count, cfg.seed);
    save_world(w, cfg.out);
    std::cout << json{{"bundle", (fs::path(cfg.out) / "bundle").string()},
                      {"texts", (fs::path(cfg.out) / "texts.jsonl").string()},
                      {"fixture", (fs::path(cfg.out) / "fixture.json").string()},
                      {"classes", w.bundle.class_count()},
                      {"phrases", w.texts.size()}}
                     .dump()
              << '\n';
    return 0;
}

int cmd_gen_tree(const ExperimentConfig& cfg) {
    ExperimentInputs in = load_inputs(cfg);
    std::vector<ClassId> ids;
    for (const auto& r : in.bundle.classes) ids.push_back(r.id);
    const TaskSplit split = make_task_split(ids, cfg.task_count, named_stream(cfg.seed, "split")());
    const StoreTextEncoder encoder(in.texts);
    const SLTree tree = build_tree(in.bundle, split, cfg.tail_threshold, cfg.max_phrases, *in.llm, encoder);
    const fs::path path = fs::path(cfg.out) / "tree.json";
    tree.save(path);
    std::cout << json{{"tree", path.string()}, {"layers", tree.layer_count()}}.dump() << '\n';
    return 0;
}

int cmd_train(const ExperimentConfig& cfg) {
    ExperimentInputs in = load_inputs(cfg);
    const auto res = run_training(cfg, in, RunOptions{true, false});
    const fs::path out = cfg.out;
    for (std::size_t t = 0; t < res.checkpoints.size(); ++t)
        save_checkpoint(res.checkpoints[t], out / "checkpoints" / task_dir(t));
    std::string log;
    for (const auto& r : res.log) log += r.to_json_line() + "\n";
    write_file(out / "train_log.jsonl", log);
    res.tree.save(out / "tree.json");
    write_file(out / "config.json", cfg.to_json().dump(2) + "\n");
    std::cout << json{{"checkpoints", res.checkpoints.size()}, {"epochs_logged", res.log.size()}}.dump() << '\n';
    return 0;
}

int cmd_eval(const ExperimentConfig& cfg) {
    ExperimentInputs in = load_inputs(cfg);
    const fs::path out = cfg.out;
    const SLTree tree = in.tree ? *in.tree : SLTree::load(out / "tree.json");
    std::vector<TaskState> states;
    for (std::size_t t = 0; t < cfg.task_count; ++t) states.push_back(load_checkpoint(out / "checkpoints" / task_dir(t)));
    const auto res = evaluate_states(cfg, in.bundle, in.texts, tree, states);
    const auto report = make_report(cfg, in.bundle, in.texts, res);
    write_report(report, out);
    std::cout << report.metrics_json;
    return 0;
}

int cmd_report(const ExperimentConfig& cfg) {
    const auto ab = run_ablation(cfg);
    const fs::path out = cfg.out;
    const json doc = ab.to_json();
    write_file(out / "ablation.json", doc.dump(2) + "\n");
    std::string csv = "variant,seed,a_last,f_avg,tail_weight_center\n";
    char buf[160];
    for (const auto& r : ab.runs) {
        std::snprintf(buf, sizeof buf, "%s,%llu,%.17g,%.17g,%.17g\n", r.variant.c_str(),
                      static_cast<unsigned long long>(r.seed), r.a_last, r.f_avg, r.tail_weight_center);
        csv += buf;
    }
    write_file(out / "ablation.csv", csv);
    std::cout << doc.at("median_a_last").dump(2) << '\n';
    return 0;
}

int cmd_run(const ExperimentConfig& cfg) {
    std::cout << run_experiment(cfg).metrics_json;
    return 0;
}

void print_error(const std::string& code, const std::string& message, const std::string& path) {
    json e{{"error", code}, {"message", message}};
    if (!path.empty()) e["path"] = path;
    std::cerr << e.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"taillight: long-tail class-incremental learning over frozen embeddings"};
    app.require_subcommand(1);
    Common common;
    struct Sub {
        const char* name;
        const char* help;
        int (*run)(const ExperimentConfig&);
    };
    const Sub subs[] = {
        {"gen-data", "write a synthetic bundle, text store and LLM fixture", cmd_gen_data},
        {"gen-tree", "generate the SL-Tree for every task", cmd_gen_tree},
        {"train", "train all tasks and write per-task checkpoints", cmd_train},
        {"eval", "evaluate checkpoints and write metrics and CSV reports", cmd_eval},
        {"report", "run the ablation grid over the configured seeds", cmd_report},
        {"run", "train and evaluate in one pass", cmd_run},
    };
    std::vector<std::pair<CLI::App*, const Sub*>> cmds;
    for (const auto& s : subs) {
        auto* cmd = app.add_subcommand(s.name, s.help);
        add_common(cmd, common);
        cmds.emplace_back(cmd, &s);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("InvalidArguments", e.what(), "");
        return 2;
    }

    try {
        for (const auto& [cmd, sub] : cmds)
            if (cmd->parsed()) return sub->run(load(common));
    } catch (const Error& e) {
        print_error(std::string(to_string(e.code())), e.what(), e.path());
        return exit_code_for(e.code());
    } catch (const fs::filesystem_error& e) {
        print_error("IoError", e.what(), e.path1().string());
        return 2;
    } catch (const std::exception& e) {
        print_error("Internal", e.what(), "");
        return 4;
    }
    return 2;
}
