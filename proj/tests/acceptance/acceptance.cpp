// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
// Usage: acceptance [benchmark config]

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "../instances.hpp"
#include "../oracles.hpp"
#include "../tree_fixtures.hpp"
#include "taillight/evaluation.hpp"
#include "taillight/experiment.hpp"

using namespace taillight;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(const char* name, bool ok, const std::string& detail) {
    std::printf("%s %-22s %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
    std::fflush(stdout);
    failures += !ok;
}

template <class... A>
std::string fmt(const char* f, A... a) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, a...);
    return buf;
}

// Errors inside a criterion count as its failure, not a crash.
void guarded(const char* name, const std::function<void()>& body) {
    try {
        body();
    } catch (const std::exception& e) {
        report(name, false, std::string("threw: ") + e.what());
    }
}

void simplex() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(20240601);
    std::uniform_int_distribution<std::size_t> dim(2, 12);
    std::normal_distribution<double> g(0.0, 2.0);
    double worst = 0.0, worst_sum = 0.0, most_negative = 0.0;
    for (int i = 0; i < 1000; ++i) {
        Vector v(dim(rng));
        for (double& x : v) x = g(rng);
        const Vector p = project_to_simplex(v);
        worst = std::max(worst, oracle::max_abs_diff(p, oracle::simplex_projection(v)));
        double s = 0.0;
        for (double x : p) {
            s += x;
            most_negative = std::min(most_negative, x);
        }
        worst_sum = std::max(worst_sum, std::abs(s - 1.0));
    }
    const double t = seconds_since(t0);
    report("simplex_projection", worst <= 1e-9 && worst_sum <= 1e-12 && most_negative >= 0.0 && t < 10.0,
           fmt("linf=%.2e sum_err=%.2e min=%.1e time=%.2fs", worst, worst_sum, most_negative, t));
}

void gradient_check() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> lam(0.1, 1.0);
    double theta = 0.0, alpha = 0.0;
    for (std::uint64_t i = 0; i < 50; ++i) {
        auto in = instances::random_instance(1000 + i, 8, 4, 3, 16);
        in.lambdas = {lam(rng), lam(rng), lam(rng), lam(rng)};
        // the trainer's default scale and temperature
        in.logit_scale = 100.0;
        in.temperature = 0.1;
        const auto r = instances::check_gradients(in);
        theta = std::max(theta, r.theta_error);
        alpha = std::max(alpha, r.alpha_error);
    }
    const double t = seconds_since(t0);
    report("gradient_correctness", theta < 1e-4 && alpha < 1e-4 && t < 60.0,
           fmt("max_rel theta=%.2e alpha=%.2e over 50 instances time=%.2fs", theta, alpha, t));
}

std::map<ClassId, Vector> regularizer_gradient(const instances::Instance& x) {
    instances::Instance bare = x;
    bare.lambdas.con = bare.lambdas.freq = 0.0;
    const auto full = gradients(x.context(), x.adapter).alpha;
    const auto rest = gradients(bare.context(), bare.adapter).alpha;
    std::map<ClassId, Vector> out;
    for (const auto& [c, g] : full) {
        Vector d(g.size());
        for (std::size_t l = 0; l < g.size(); ++l) d[l] = g[l] - rest.at(c)[l];
        out[c] = d;
    }
    return out;
}

void cross_partials() {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0), radius(0.0, 0.1);
    double cross = 0.0, decomposition = 0.0;
    for (std::uint64_t i = 0; i < 50; ++i) {
        auto in = instances::random_instance(2000 + i);
        double sum = 0.0;
        for (ClassId k : in.text.classes) sum += per_class_objective(in.context(), in.adapter, k);
        decomposition = std::max(decomposition, std::abs(sum - total_objective(in.context(), in.adapter).total()));

        const auto before = regularizer_gradient(in);
        const ClassId moved = in.text.classes[i % in.text.classes.size()];
        Vector row = in.weights.row(moved), delta(row.size());
        for (double& v : delta) v = u(rng);
        const double scale = radius(rng) / norm2(delta);
        for (std::size_t l = 0; l < row.size(); ++l) row[l] += scale * delta[l];
        // the regularizers live on the simplex; projecting back only shortens the step
        in.weights.set_row(moved, project_to_simplex(row));
        const auto after = regularizer_gradient(in);
        for (ClassId k : in.text.classes)
            if (k != moved) cross = std::max(cross, oracle::max_abs_diff(before.at(k), after.at(k)));
    }
    report("cross_partials", cross < 1e-10 && decomposition < 1e-10,
           fmt("max_cross=%.2e max_sum_Jk_err=%.2e", cross, decomposition));
}

std::size_t count_kind(const SLTree& tree, ClassId id, TemplateKind kind) {
    std::size_t n = 0;
    for (const auto& node : tree.at(id).layers)
        if (node.provenance && node.provenance->kind == kind) ++n;
    return n;
}

void sl_tree() {
    auto sep = fixtures::three_class_task(true);
    const StoreTextEncoder e1(sep.texts);
    const SLTree a = generate_tree(sep.request, sep.llm, e1);
    const bool ok_a = count_kind(a, 0, TemplateKind::P3) == 1 && count_kind(a, 0, TemplateKind::P4) == 1 &&
                      a.at(0).layers[3].provenance->kind == TemplateKind::P3 &&
                      a.at(0).layers[4].provenance->kind == TemplateKind::P4;

    auto stuck = fixtures::three_class_task(false);
    const StoreTextEncoder e2(stuck.texts);
    const SLTree b = generate_tree(stuck.request, stuck.llm, e2);
    const bool ok_b = count_kind(b, 0, TemplateKind::P3) == 8 && count_kind(b, 0, TemplateKind::P4) == 0;

    auto later = fixtures::three_class_task(true, 1, 10);
    const StoreTextEncoder e3(later.texts);
    const SLTree c = generate_tree(later.request, later.llm, e3);
    const SLTree merged = merge_trees(a, c);
    bool ok_c = true;
    for (ClassId id : a.class_ids())
        for (std::size_t l = 0; l < a.layer_count(); ++l)
            ok_c = ok_c && merged.at(id).layers[l] == a.at(id).layers[l];
    // bytes of every earlier phrase survive a serialization round trip of the merge
    const SLTree back = SLTree::from_json(merged.to_json());
    for (ClassId id : a.class_ids())
        for (std::size_t l = 0; l < a.layer_count(); ++l) ok_c = ok_c && back.phrases(id, l) == a.phrases(id, l);

    report("sl_tree_generation", ok_a && ok_b && ok_c,
           fmt("(a)=%s (b)=%s p3=%zu (c)=%s", ok_a ? "ok" : "bad", ok_b ? "ok" : "bad",
               count_kind(b, 0, TemplateKind::P3), ok_c ? "ok" : "bad"));
}

void zero_shot_anchoring() {
    std::size_t rows = 0, mismatches = 0;
    const std::pair<std::size_t, std::size_t> shapes[] = {{20, 32}, {12, 16}, {7, 8}};
    for (std::uint64_t seed = 0; seed < 3; ++seed)
        for (const auto& [classes, dim] : shapes) {
            WorldSpec spec;
            spec.class_count = classes;
            spec.dim = dim;
            spec.n_max = 60;
            spec.rho = 0.1;
            spec.twist = 0.3 * static_cast<double>(seed);
            spec.gap = 0.2 * static_cast<double>(seed);
            World w = generate_world(spec, 1, seed);
            const StoreTextEncoder enc(w.texts);
            const SLTree tree = build_tree(w.bundle, w.split, 100, 5, w.fixture, enc);

            TrainConfig cfg;
            cfg.alpha_init = "fixed";
            TaskState state = TaskState::initial(dim);
            TaskData data{0, w.split.tasks[0], stack_train(w.bundle, w.split.tasks[0])};
            begin_task(state, data, tree.layer_count(), cfg);
            const LayerFeatures text = make_layer_features(tree, state.seen, enc);
            const LabeledFeatures test = stack_test(w.bundle, state.seen);
            const auto preds = predict_rows(state.adapter.apply_rows(test.features), text, state.weights);

            // nearest fixed-template text by cosine, ties to the smaller id
            std::vector<Vector> fixed;
            for (ClassId c : state.seen) fixed.push_back(enc.encode(tree.phrases(c, 1).at(0)));
            for (std::size_t r = 0; r < test.features.rows(); ++r) {
                std::size_t best = 0;
                double best_cos = -2.0;
                for (std::size_t c = 0; c < fixed.size(); ++c) {
                    const double q = cosine_similarity(test.features.row(r), fixed[c]);
                    if (q > best_cos) {
                        best_cos = q;
                        best = c;
                    }
                }
                mismatches += preds[r].label != state.seen[best];
                ++rows;
            }
        }
    report("zero_shot_anchoring", mismatches == 0, fmt("mismatches=%zu of %zu rows over 9 bundles", mismatches, rows));
}

void ablation(const ExperimentConfig& config) {
    const auto t0 = Clock::now();
    const AblationResult r = run_ablation(config);
    const double t = seconds_since(t0);
    auto med = [&](const char* v) { return r.median_a_last(v); };
    const double ce = med("ce_only"), kd = med("kd"), alg = med("alignment"), ad = med("adaptive"),
                 con = med("r_con"), freq = med("r_freq"), zs = med("zero_shot");
    const bool order = ce < kd && kd < alg && alg < ad && ad <= con && con <= freq;
    const bool collapse = ce <= zs - 0.20;
    report("ablation_ordering", order && collapse && t < 300.0,
           fmt("ce=%.3f kd=%.3f align=%.3f adaptive=%.3f r_con=%.3f r_freq=%.3f zero_shot=%.3f ce_gap=%.3f time=%.1fs",
               ce, kd, alg, ad, con, freq, zs, zs - ce, t));

    std::size_t tail_wins = 0, center_wins = 0;
    std::string tg, wc;
    for (std::uint64_t seed : config.ablation_seeds) {
        const auto& base = r.find("alignment", seed);
        const auto& full = r.find("r_freq", seed);
        double tail = 0.0, head = 0.0;
        std::size_t nt = 0, nh = 0;
        for (const auto& [id, acc] : full.class_accuracy) {
            const double d = acc - base.class_accuracy.at(id);
            if (r.tails.count(id)) {
                tail += d;
                ++nt;
            } else {
                head += d;
                ++nh;
            }
        }
        tail /= static_cast<double>(std::max<std::size_t>(nt, 1));
        head /= static_cast<double>(std::max<std::size_t>(nh, 1));
        tail_wins += nt > 0 && tail > head;
        tg += fmt(" s%llu:%+.3f/%+.3f", static_cast<unsigned long long>(seed), tail, head);

        const double on = full.tail_weight_center, off = r.find("r_con", seed).tail_weight_center;
        center_wins += on > off;
        wc += fmt(" s%llu:%.3f>%.3f", static_cast<unsigned long long>(seed), on, off);
    }
    const std::size_t n = config.ablation_seeds.size();
    report("tail_gain", tail_wins >= 4, fmt("%zu/%zu seeds (tail/head delta)%s", tail_wins, n, tg.c_str()));
    report("weight_center_shift", center_wins >= 4, fmt("%zu/%zu seeds%s", center_wins, n, wc.c_str()));
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

void determinism(ExperimentConfig config) {
    const fs::path root = fs::temp_directory_path() / "taillight_acceptance";
    fs::remove_all(root);
    config.out = (root / "a").string();
    run_experiment(config);
    config.out = (root / "b").string();
    run_experiment(config);
    const std::string a = slurp(root / "a" / "metrics.json"), b = slurp(root / "b" / "metrics.json");
    report("determinism", !a.empty() && a == b, fmt("metrics.json %zu bytes, identical=%s", a.size(), a == b ? "yes" : "no"));
}

void metric_toys() {
    auto tenths = [](std::initializer_list<std::initializer_list<std::size_t>> rows) {
        AccuracyMatrix m(rows.size());
        std::size_t t = 0;
        for (const auto& row : rows) {
            std::size_t i = 0;
            for (std::size_t c : row) m.set(t, i++, c, 10);
            ++t;
        }
        return m;
    };
    const AccuracyMatrix plain = tenths({{9}, {8, 9}, {7, 6, 8}});
    const AccuracyMatrix better = tenths({{5}, {6, 7}, {9, 8, 6}});
    const AccuracyMatrix peak = tenths({{5}, {8, 9}, {7, 6, 3}});
    const bool ok = a_last(plain) == 21.0 / 30.0 && f_avg(plain) == ((0.9 - 0.7) + (0.9 - 0.6)) / 2 &&
                    a_last(better) == 23.0 / 30.0 && f_avg(better) == 0.0 && a_last(peak) == 16.0 / 30.0 &&
                    f_avg(peak) == ((0.8 - 0.7) + (0.9 - 0.6)) / 2;
    report("metric_toys", ok,
           fmt("a_last=%.4f/%.4f/%.4f f_avg=%.4f/%.4f/%.4f", a_last(plain), a_last(better), a_last(peak),
               f_avg(plain), f_avg(better), f_avg(peak)));
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path config_path = argc > 1 ? fs::path(argv[1]) : fs::path(TAILLIGHT_BENCHMARK_CONFIG);
    guarded("simplex_projection", simplex);
    guarded("gradient_correctness", gradient_check);
    guarded("cross_partials", cross_partials);
    guarded("sl_tree_generation", sl_tree);
    guarded("zero_shot_anchoring", zero_shot_anchoring);
    ExperimentConfig config;
    try {
        config = ExperimentConfig::load(config_path);
    } catch (const std::exception& e) {
        for (const char* n : {"ablation_ordering", "tail_gain", "weight_center_shift", "determinism"})
            report(n, false, std::string("config: ") + e.what());
        guarded("metric_toys", metric_toys);
        return 1;
    }
    try {
        ablation(config);
    } catch (const std::exception& e) {
        for (const char* n : {"ablation_ordering", "tail_gain", "weight_center_shift"})
            report(n, false, std::string("threw: ") + e.what());
    }
    guarded("determinism", [&] { determinism(config); });
    guarded("metric_toys", metric_toys);
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
