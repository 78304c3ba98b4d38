#pragma once
// Merged training objective over (theta = adapter, alpha = layer weights),
// its analytic gradients, and the per-task alternating optimization loop.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "taillight/adapter.hpp"
#include "taillight/adaptive_guidance.hpp"
#include "taillight/alignment_guidance.hpp"
#include "taillight/numerics.hpp"

namespace taillight {

struct TrainConfig {
    double lambda_alg = 0.025;
    double lambda_kd = 1.0;
    double lambda_con = 0.3;
    double lambda_freq = 0.6;
    double lr_theta = 1e-3;
    double lr_alpha = 1e-3;
    std::size_t epochs = 30;
    std::size_t alpha_period = 5;
    std::size_t alpha_steps = 1;
    std::size_t batch_size = 64;
    double logit_scale = 100.0;
    double temperature = 0.1;
    std::size_t replay_cap = 0;  // 0 = uncapped
    bool train_adapter = true;
    bool learn_alpha = true;
    std::string alpha_init = "uniform";  // or "fixed": one-hot on the template layer

    void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Everything the objective needs besides theta.
struct ObjectiveContext {
    const Matrix* features = nullptr;     // raw rows of B_bal, original rows first
    std::span<const ClassId> labels;      // one per row
    std::size_t original_count = 0;       // |B|
    const LayerFeatures* text = nullptr;  // seen classes
    const LayerWeights* weights = nullptr;
    const Adapter* old_adapter = nullptr;  // f_old, null during the first task
    std::set<ClassId> current;             // classes of the current task
    const FrequencyPrior* prior = nullptr;
    double lambda_alg = 0.0;
    double lambda_kd = 0.0;
    double lambda_con = 0.0;
    double lambda_freq = 0.0;
    double logit_scale = 100.0;
    double temperature = 0.1;
};

struct ObjectiveTerms {
    double ce = 0.0;
    double alignment = 0.0;
    double distillation = 0.0;
    double entropy = 0.0;    // sum over seen rows of R_con
    double frequency = 0.0;  // sum over current rows of R_freq
    double lambda_alg = 0.0, lambda_kd = 0.0, lambda_con = 0.0, lambda_freq = 0.0;

    double theta_view() const { return ce + lambda_alg * alignment + lambda_kd * distillation; }
    double total() const { return theta_view() + lambda_con * entropy + lambda_freq * frequency; }
};

ObjectiveTerms total_objective(const ObjectiveContext& ctx, const Adapter& adapter);

struct ObjectiveGradients {
    Matrix weight;
    Vector bias;
    std::map<ClassId, Vector> alpha;  // every seen class
};

/// d total / d(W, b) and d total / d alpha_{:,c}. NonFiniteGradient on overflow.
ObjectiveGradients gradients(const ObjectiveContext& ctx, const Adapter& adapter,
                             ObjectiveTerms* terms = nullptr);

/// J_k: class k's share of the objective. Summed over seen classes it equals the total.
double per_class_objective(const ObjectiveContext& ctx, const Adapter& adapter, ClassId k);

/// Adam on the adapter parameters.
class Adam {
public:
    Adam(std::size_t dim, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(Adapter& adapter, const Matrix& grad_w, std::span<const double> grad_b);
    std::size_t steps() const noexcept { return t_; }

private:
    double lr_, beta1_, beta2_, eps_;
    std::size_t t_ = 0;
    Vector m_, v_;
};

/// Seeded stream derived from (seed, name, index).
Rng named_stream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0);

struct TaskState {
    std::size_t task = 0;  // index of the task being (or last) trained
    std::vector<ClassId> seen;
    std::map<ClassId, std::size_t> current_counts;
    double mean_count = 0.0;
    Adapter adapter;
    std::optional<Adapter> old_adapter;
    LayerWeights weights;
    MemoryBank memory;

    static TaskState initial(std::size_t dim);
};

struct EpochRecord {
    std::size_t task = 0;
    std::size_t epoch = 0;
    std::size_t batches = 0;
    double ce = 0.0;
    double alignment = 0.0;
    double distillation = 0.0;
    double entropy = 0.0;
    double frequency = 0.0;
    double theta_view = 0.0;
    bool alpha_update = false;
    double alpha_entropy_mean = 0.0;
    double alpha_entropy_min = 0.0;

    std::string to_json_line() const;
};

struct TaskData {
    std::size_t task = 0;
    std::vector<ClassId> classes;
    LabeledFeatures train;
};

/// Prepare state for task t: extend seen classes, resize alpha to the tree's
/// layer count and add rows for the new classes.
void begin_task(TaskState& state, const TaskData& data, std::size_t layer_count, const TrainConfig& config);

/// Run all epochs for one task, then snapshot f_old, store class statistics
/// and freeze the task's alpha rows.
std::vector<EpochRecord> train_task(const TaskData& data, TaskState& state, const LayerFeatures& text,
                                    const TrainConfig& config, std::uint64_t seed);

/// adapter.bin/.json, alpha.json and memory/ under directory.
void save_checkpoint(const TaskState& state, const std::filesystem::path& directory);

/// Adapter, alpha and memory; the other TaskState fields are left empty.
TaskState load_checkpoint(const std::filesystem::path& directory);

}  // namespace taillight
