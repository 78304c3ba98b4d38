#pragma once
// End-to-end plumbing: experiment config, the synthetic world used for
// desk-scale runs, per-task train/eval, report emission and the ablation grid.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "taillight/embedding_store.hpp"
#include "taillight/evaluation.hpp"
#include "taillight/llm_client.hpp"
#include "taillight/sltree.hpp"
#include "taillight/trainer.hpp"

namespace taillight {

/// Generator for a synthetic bundle plus a text world and LLM fixture that
/// answers every prompt tree generation can issue.
struct WorldSpec {
    std::size_t class_count = 20;
    std::size_t dim = 32;
    std::size_t n_max = 500;
    double rho = 0.01;
    std::size_t test_count = 20;
    double separation = 0.3;    // max cosine between visual class means
    double noise = 0.15;        // per-coordinate visual noise
    double fixed_noise = 0.8;   // template text vs class mean
    double generic_mix = 1.0;   // pull of Prompt-2 phrases toward the task direction
    double generic_noise = 0.3; // Prompt-2 phrases
    double text_noise = 0.3;    // other phrases
    double gap = 0.0;           // norm of a shared offset added to every visual feature
    double twist = 0.0;         // visual = (cos t I + sin t Q) x for a random orthogonal Q

    friend bool operator==(const WorldSpec&, const WorldSpec&) = default;
};

void to_json(nlohmann::json& j, const WorldSpec& w);
void from_json(const nlohmann::json& j, WorldSpec& w);

struct DataPaths {
    std::string bundle;   // empty: generate the synthetic world in memory
    std::string texts;
    std::string fixture;
    std::string tree;     // empty: generate the tree
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::size_t task_count = 5;
    std::size_t tail_threshold = 100;
    DataPaths data;
    WorldSpec synthetic;
    std::string llm = "fixture";  // or "http"
    std::size_t max_phrases = 5;
    TrainConfig train;
    std::vector<std::uint64_t> ablation_seeds{0, 1, 2, 3, 4};
    std::string out = "runs/default";

    void validate() const;
    nlohmann::json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig load(const std::filesystem::path& path);

    /// Hex FNV-1a of the canonical JSON (out path excluded).
    std::string hash() const;
};

struct World {
    EmbeddingBundle bundle;
    TextEmbeddingStore texts;
    FixtureLlmClient fixture;
    TaskSplit split;
};

/// Bundle, texts and fixture for one seed; the fixture covers the seed's task split.
World generate_world(const WorldSpec& spec, std::size_t task_count, std::uint64_t seed);
void save_world(const World& world, const std::filesystem::path& directory);

struct ExperimentInputs {
    EmbeddingBundle bundle;
    TextEmbeddingStore texts;
    std::unique_ptr<LlmClient> llm;
    std::optional<SLTree> tree;
};

/// Files named in config.data, or the synthetic world when no bundle is given.
ExperimentInputs load_inputs(const ExperimentConfig& config);

std::set<ClassId> tail_classes(const EmbeddingBundle& bundle, std::size_t threshold);

/// Tree for every task of the split, merged in task order.
SLTree build_tree(const EmbeddingBundle& bundle, const TaskSplit& split, std::size_t tail_threshold,
                  std::size_t max_phrases, LlmClient& llm, const TextEncoder& encoder);

struct ExperimentResult {
    TaskSplit split;
    SLTree tree;
    AccuracyMatrix accuracy;
    std::map<ClassId, double> class_accuracy;  // after the final task
    std::map<ClassId, double> baseline_accuracy;  // zero-shot, same tree
    std::vector<EpochRecord> log;
    std::vector<TaskState> checkpoints;  // state after each task
    LayerWeights weights;
    Adapter adapter;
    double margin_disagreement = 0.0;  // share of test rows where c* != returned label
};

struct RunOptions {
    bool keep_checkpoints = false;
    bool with_baseline = true;
};

ExperimentResult run_training(const ExperimentConfig& config, ExperimentInputs& inputs,
                              const RunOptions& options = {});

/// Evaluate per-task states (e.g. loaded checkpoints) into an accuracy matrix.
ExperimentResult evaluate_states(const ExperimentConfig& config, const EmbeddingBundle& bundle,
                                 const TextEmbeddingStore& texts, const SLTree& tree,
                                 const std::vector<TaskState>& states);

struct ReportBundle {
    std::string metrics_json;
    std::string per_class_csv;
    std::string weight_centers_csv;
    std::string text_similarity_csv;
};

ReportBundle make_report(const ExperimentConfig& config, const EmbeddingBundle& bundle,
                         const TextEmbeddingStore& texts, const ExperimentResult& result);
void write_report(const ReportBundle& report, const std::filesystem::path& directory);

/// Load inputs, train, evaluate, write checkpoints, log and report under config.out.
ReportBundle run_experiment(const ExperimentConfig& config);
ReportBundle run_experiment(const std::filesystem::path& config_path);

struct Variant {
    std::string name;
    TrainConfig train;
};

/// zero_shot, sl_tree, ce_only, kd, alignment, adaptive, r_con, r_freq.
std::vector<Variant> ablation_variants(const TrainConfig& base);

struct VariantRun {
    std::string variant;
    std::uint64_t seed = 0;
    double a_last = 0.0;
    double f_avg = 0.0;
    std::map<ClassId, double> class_accuracy;
    double tail_weight_center = 0.0;
};

struct AblationResult {
    std::vector<VariantRun> runs;
    std::set<ClassId> tails;  // per seed the same bundle counts, so the same tail set

    const VariantRun& find(const std::string& variant, std::uint64_t seed) const;
    double median_a_last(const std::string& variant) const;
    nlohmann::json to_json() const;
};

AblationResult run_ablation(const ExperimentConfig& config);

}  // namespace taillight
