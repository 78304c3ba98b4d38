#pragma once
// Stratified language tree: layered per-class phrase lists generated by
// prompting an LLM from coarse (task summary) to fine (pairwise comparison).
//
// Layer layout for one task:
//   0      task summary (Prompt 1), the same single phrase for every class
//   1      fixed template "a photo of <label>"
//   2      distinctive features (Prompt 2)
//   3..    one shared layer per refinement round (Prompt 3)
//   last   pairwise comparisons (Prompt 4), when any cluster reached size 2

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "taillight/embedding_store.hpp"
#include "taillight/llm_client.hpp"
#include "taillight/numerics.hpp"

namespace taillight {

enum class TemplateKind { Fixed, P1, P2, P3, P4 };

std::string_view to_string(TemplateKind kind) noexcept;
TemplateKind template_kind_from(std::string_view name);

struct PromptTemplate {
    TemplateKind kind;
    std::string text;  // slots written as {name}

    static PromptTemplate of(TemplateKind kind);
};

using PromptBindings = std::map<std::string, std::string>;

/// Fills every {slot}; a missing or empty binding is MissingSlot.
std::string render_prompt(const PromptTemplate& tmpl, const PromptBindings& bindings);

/// "cat + dog + fox", the label binding used by Prompt 1.
std::string join_labels(const std::vector<std::string>& labels);

inline constexpr std::size_t kMaxPhraseWords = 12;
inline constexpr std::size_t kMaxRefinementRounds = 8;
inline constexpr double kConfusionDistance = 0.5;

/// Split on commas, semicolons and newlines; trim; cap each phrase at 12 words.
std::vector<std::string> postprocess_response(std::string_view raw);

struct NodeProvenance {
    std::size_t task = 0;
    TemplateKind kind = TemplateKind::Fixed;
    std::string prompt_hash;  // hex FNV-1a of the rendered prompt
    std::string error;        // non-empty when the query failed

    friend bool operator==(const NodeProvenance&, const NodeProvenance&) = default;
};

struct TreeNode {
    std::vector<std::string> phrases;
    std::optional<NodeProvenance> provenance;

    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct TreeClass {
    std::string label;
    std::size_t task = 0;
    std::vector<TreeNode> layers;

    friend bool operator==(const TreeClass&, const TreeClass&) = default;
};

class SLTree {
public:
    std::size_t layer_count() const noexcept { return layer_count_; }
    const std::map<ClassId, TreeClass>& classes() const noexcept { return classes_; }
    const std::map<std::size_t, std::string>& task_phrases() const noexcept { return task_phrases_; }
    const std::map<std::size_t, std::size_t>& task_layer_counts() const noexcept { return task_layers_; }

    bool has_class(ClassId id) const { return classes_.count(id) > 0; }
    const TreeClass& at(ClassId id) const;
    const std::vector<std::string>& phrases(ClassId id, std::size_t layer) const;
    std::vector<ClassId> class_ids() const;

    /// Grow every class to at least `count` layers with empty nodes.
    void pad_to(std::size_t count);

    void add_class(ClassId id, std::string label, std::size_t task);
    TreeNode& node(ClassId id, std::size_t layer);
    void set_task_phrase(std::size_t task, std::string phrase) { task_phrases_[task] = std::move(phrase); }
    void set_task_layer_count(std::size_t task, std::size_t count) { task_layers_[task] = count; }

    /// Classes of tasks <= last_task, with the layer count those tasks use.
    SLTree prefix(std::size_t last_task) const;

    std::string to_json() const;
    static SLTree from_json(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static SLTree load(const std::filesystem::path& path);

    friend bool operator==(const SLTree&, const SLTree&) = default;

private:
    std::size_t layer_count_ = 0;
    std::map<ClassId, TreeClass> classes_;
    std::map<std::size_t, std::string> task_phrases_;
    std::map<std::size_t, std::size_t> task_layers_;
};

/// Mean over non-empty layers of the per-layer mean phrase embedding.
Vector class_text_representation(const SLTree& tree, ClassId id, const TextEncoder& encoder);

struct ConfusionCluster {
    ClassId center = 0;
    std::set<ClassId> members;
    std::map<ClassId, double> similarity;  // q_jk for every task class k
};

/// members = {k : 1 - cos(g_j, g_k) < 0.5} plus j itself.
ConfusionCluster confusion_cluster(const SLTree& tree, ClassId tail, std::span<const ClassId> task_classes,
                                   const TextEncoder& encoder);

struct TreeRequest {
    std::size_t task = 0;
    std::vector<ClassId> classes;
    std::set<ClassId> tails;
    std::map<ClassId, std::string> labels;
    std::size_t max_phrases = 5;
};

/// One SL-Tree for a task. LLM failures leave the node empty with the error
/// recorded in its provenance; generation continues.
SLTree generate_tree(const TreeRequest& request, LlmClient& llm, const TextEncoder& encoder);

/// Union of two trees over disjoint class sets; layer counts padded to the max.
SLTree merge_trees(const SLTree& existing, const SLTree& fresh);

/// g^l rows for the given classes: mean phrase embedding, or zero for empty nodes.
std::vector<Matrix> layer_text_features(const SLTree& tree, std::span<const ClassId> class_ids,
                                        const TextEncoder& encoder);

}  // namespace taillight
