#include "taillight/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace taillight {

using json = nlohmann::json;

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& section) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, section + " must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw Error(ErrorCode::InvalidConfig, "unknown " + section + " field \"" + key + "\"");
    }
}

template <typename T>
void read_field(const json& j, const char* key, T& field, const std::string& section) {
    if (!j.contains(key)) return;
    try {
        j.at(key).get_to(field);
    } catch (const json::exception&) {
        throw Error(ErrorCode::InvalidConfig, section + " field \"" + key + "\" has the wrong type");
    }
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
    return buf;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string(), path.string());
    out << text;
}

Vector random_unit(std::size_t dim, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector v(dim);
    for (;;) {
        for (double& x : v) x = normal(rng);
        if (norm2(v) > 1e-6) return normalize(v);
    }
}

// normalize(base + scale * u) for a fresh random unit u.
Vector jitter(std::span<const double> base, double scale, Rng& rng) {
    Vector u = random_unit(base.size(), rng);
    Vector v(base.begin(), base.end());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] += scale * u[k];
    return normalize(v);
}

std::string task_phrase_text(std::size_t t) { return "objects that share the look of group " + std::to_string(t); }

}  // namespace

void to_json(json& j, const WorldSpec& w) {
    j = json{{"class_count", w.class_count}, {"dim", w.dim},
             {"n_max", w.n_max},             {"rho", w.rho},
             {"test_count", w.test_count},   {"separation", w.separation},
             {"noise", w.noise},             {"fixed_noise", w.fixed_noise},
             {"generic_mix", w.generic_mix}, {"generic_noise", w.generic_noise}, {"text_noise", w.text_noise},
             {"gap", w.gap}, {"twist", w.twist}};
}

void from_json(const json& j, WorldSpec& w) {
    const std::string s = "synthetic";
    reject_unknown(j, {"class_count", "dim", "n_max", "rho", "test_count", "separation", "noise", "fixed_noise",
                       "generic_mix", "generic_noise", "text_noise", "gap", "twist"},
                   s);
    read_field(j, "class_count", w.class_count, s);
    read_field(j, "dim", w.dim, s);
    read_field(j, "n_max", w.n_max, s);
    read_field(j, "rho", w.rho, s);
    read_field(j, "test_count", w.test_count, s);
    read_field(j, "separation", w.separation, s);
    read_field(j, "noise", w.noise, s);
    read_field(j, "fixed_noise", w.fixed_noise, s);
    read_field(j, "generic_mix", w.generic_mix, s);
    read_field(j, "generic_noise", w.generic_noise, s);
    read_field(j, "text_noise", w.text_noise, s);
    read_field(j, "gap", w.gap, s);
    read_field(j, "twist", w.twist, s);
}

void ExperimentConfig::validate() const {
    train.validate();
    if (task_count < 1) throw Error(ErrorCode::InvalidConfig, "task_count must be >= 1");
    if (llm != "fixture" && llm != "http") throw Error(ErrorCode::InvalidConfig, "llm must be \"fixture\" or \"http\"");
    if (!(synthetic.rho > 0.0) || synthetic.rho > 1.0) throw Error(ErrorCode::InvalidRho, "rho must lie in (0, 1]");
    if (synthetic.class_count < task_count) throw Error(ErrorCode::TooManyTasks, "more tasks than classes");
    if (ablation_seeds.empty()) throw Error(ErrorCode::InvalidConfig, "ablation needs at least one seed");
}

json ExperimentConfig::to_json() const {
    json train_j, synth_j;
    taillight::to_json(train_j, train);
    taillight::to_json(synth_j, synthetic);
    return json{{"seed", seed},
                {"task_count", task_count},
                {"tail_threshold", tail_threshold},
                {"data", {{"bundle", data.bundle}, {"texts", data.texts}, {"fixture", data.fixture}, {"tree", data.tree}}},
                {"synthetic", synth_j},
                {"llm", {{"source", llm}, {"max_phrases", max_phrases}}},
                {"train", train_j},
                {"ablation", {{"seeds", ablation_seeds}}},
                {"out", out}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    const std::string s = "config";
    reject_unknown(j, {"seed", "task_count", "tail_threshold", "data", "synthetic", "llm", "train", "ablation", "out"},
                   s);
    ExperimentConfig c;
    read_field(j, "seed", c.seed, s);
    read_field(j, "task_count", c.task_count, s);
    read_field(j, "tail_threshold", c.tail_threshold, s);
    read_field(j, "out", c.out, s);
    if (j.contains("data")) {
        const auto& d = j.at("data");
        reject_unknown(d, {"bundle", "texts", "fixture", "tree"}, "data");
        read_field(d, "bundle", c.data.bundle, "data");
        read_field(d, "texts", c.data.texts, "data");
        read_field(d, "fixture", c.data.fixture, "data");
        read_field(d, "tree", c.data.tree, "data");
    }
    if (j.contains("synthetic")) taillight::from_json(j.at("synthetic"), c.synthetic);
    if (j.contains("llm")) {
        const auto& l = j.at("llm");
        reject_unknown(l, {"source", "max_phrases"}, "llm");
        read_field(l, "source", c.llm, "llm");
        read_field(l, "max_phrases", c.max_phrases, "llm");
    }
    if (j.contains("train")) taillight::from_json(j.at("train"), c.train);
    if (j.contains("ablation")) {
        const auto& a = j.at("ablation");
        reject_unknown(a, {"seeds"}, "ablation");
        read_field(a, "seeds", c.ablation_seeds, "ablation");
    }
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path.string(), path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("config: ") + e.what(), path.string());
    }
    return from_json(doc);
}

std::string ExperimentConfig::hash() const {
    json j = to_json();
    j.erase("out");
    return hex64(fnv1a64(j.dump()));
}

World generate_world(const WorldSpec& spec, std::size_t task_count, std::uint64_t seed) {
    World w;
    SyntheticSpec vs;
    vs.class_count = spec.class_count;
    vs.dim = spec.dim;
    vs.train_counts = make_longtail_counts(spec.n_max, spec.rho, spec.class_count);
    vs.test_count = spec.test_count;
    vs.separation = spec.separation;
    vs.noise = spec.noise;
    vs.seed = named_stream(seed, "world-visual")();
    SyntheticData data = generate_synthetic_bundle(vs);
    w.bundle = std::move(data.bundle);
    const Matrix& mu = data.class_means;
    if (spec.twist != 0.0) {
        // Gram-Schmidt on a Gaussian matrix gives the orthogonal part.
        Rng twist_rng = named_stream(seed, "world-twist");
        Matrix q(spec.dim, spec.dim);
        for (std::size_t r = 0; r < spec.dim; ++r) {
            Vector v = random_unit(spec.dim, twist_rng);
            for (std::size_t k = 0; k < r; ++k) {
                const double p = dot(v, q.row(k));
                for (std::size_t i = 0; i < spec.dim; ++i) v[i] -= p * q(k, i);
            }
            v = normalize(v);
            std::copy(v.begin(), v.end(), q.row(r).begin());
        }
        const double c = std::cos(spec.twist), sn = std::sin(spec.twist);
        Vector in(spec.dim);
        for (auto& m : w.bundle.data)
            for (auto* block : {&m.train, &m.test})
                for (std::size_t row = 0; row * spec.dim < block->size(); ++row) {
                    float* x = block->data() + row * spec.dim;
                    std::copy(x, x + spec.dim, in.begin());
                    for (std::size_t i = 0; i < spec.dim; ++i)
                        x[i] = static_cast<float>(c * in[i] + sn * dot(q.row(i), in));
                }
    }
    if (spec.gap > 0.0) {
        // Visual and text embeddings of the same class do not coincide; the adapter has to learn the shift.
        Rng gap_rng = named_stream(seed, "world-gap");
        const Vector offset = random_unit(spec.dim, gap_rng);
        for (auto& m : w.bundle.data)
            for (auto* block : {&m.train, &m.test})
                for (std::size_t i = 0; i < block->size(); ++i)
                    (*block)[i] += static_cast<float>(spec.gap * offset[i % spec.dim]);
    }

    std::vector<ClassId> ids;
    for (const auto& r : w.bundle.classes) ids.push_back(r.id);
    w.split = make_task_split(ids, task_count, named_stream(seed, "split")());

    Rng rng = named_stream(seed, "world-text");
    w.texts = TextEmbeddingStore(spec.dim);
    auto label = [&](ClassId c) { return w.bundle.record(c).label; };

    for (std::size_t t = 0; t < w.split.task_count(); ++t) {
        std::vector<ClassId> cls = w.split.tasks[t];
        std::sort(cls.begin(), cls.end());
        Vector mean(spec.dim, 0.0);
        for (ClassId c : cls)
            for (std::size_t k = 0; k < spec.dim; ++k) mean[k] += mu(c, k) / static_cast<double>(cls.size());
        const Vector direction = normalize(mean);

        const std::string task_phrase = task_phrase_text(t);
        w.texts.insert(task_phrase, jitter(direction, spec.text_noise, rng));
        std::vector<std::string> labels;
        for (ClassId c : cls) labels.push_back(label(c));
        w.fixture.set(render_prompt(PromptTemplate::of(TemplateKind::P1), {{"labels", join_labels(labels)}}),
                      {task_phrase});

        for (ClassId c : cls) {
            const std::string name = label(c);
            const auto mc = mu.row(c);
            w.texts.insert(render_prompt(PromptTemplate::of(TemplateKind::Fixed), {{"label", name}}),
                           jitter(mc, spec.fixed_noise, rng));

            Vector generic(mc.begin(), mc.end());
            for (std::size_t k = 0; k < spec.dim; ++k) generic[k] += spec.generic_mix * direction[k];
            const std::string p2 = name + " general shape and colour";
            w.texts.insert(p2, jitter(normalize(generic), spec.generic_noise, rng));
            w.fixture.set(render_prompt(PromptTemplate::of(TemplateKind::P2), {{"label", name}}), {p2});

            Vector specific(mc.begin(), mc.end());
            for (std::size_t k = 0; k < spec.dim; ++k) specific[k] -= mean[k];
            const std::string p3 = name + " details unusual within group " + std::to_string(t);
            w.texts.insert(p3, jitter(normalize(specific), spec.text_noise, rng));
            w.fixture.set(render_prompt(PromptTemplate::of(TemplateKind::P3), {{"label", name}, {"task", task_phrase}}),
                          {p3});

            for (ClassId k : cls) {
                if (k == c) continue;
                Vector diff(mc.begin(), mc.end());
                for (std::size_t q = 0; q < spec.dim; ++q) diff[q] -= mu(k, q);
                const std::string p4 = name + " unlike " + label(k);
                w.texts.insert(p4, jitter(normalize(diff), spec.text_noise, rng));
                w.fixture.set(render_prompt(PromptTemplate::of(TemplateKind::P4), {{"label", name}, {"other", label(k)}}),
                              {p4});
            }
        }
    }
    return w;
}

void save_world(const World& world, const std::filesystem::path& directory) {
    save_bundle(world.bundle, directory / "bundle");
    world.texts.save_jsonl(directory / "texts.jsonl");
    world.fixture.save(directory / "fixture.json");
    json split = json::array();
    for (const auto& t : world.split.tasks) split.push_back(t);
    write_text(directory / "split.json", split.dump(2) + "\n");
}

ExperimentInputs load_inputs(const ExperimentConfig& config) {
    ExperimentInputs in;
    if (config.data.bundle.empty()) {
        World w = generate_world(config.synthetic, config.task_count, config.seed);
        in.bundle = std::move(w.bundle);
        in.texts = std::move(w.texts);
        in.llm = std::make_unique<FixtureLlmClient>(std::move(w.fixture));
    } else {
        in.bundle = load_bundle(config.data.bundle);
        if (config.data.texts.empty()) throw Error(ErrorCode::InvalidConfig, "data.texts is required with data.bundle");
        in.texts = TextEmbeddingStore::load_jsonl(config.data.texts);
        check_joinable(in.bundle, in.texts);
        if (config.llm == "http") {
            in.llm = std::make_unique<HttpLlmClient>(HttpLlmClient::from_env());
        } else {
            if (config.data.fixture.empty() && config.data.tree.empty())
                throw Error(ErrorCode::InvalidConfig, "data.fixture or data.tree is required");
            in.llm = std::make_unique<FixtureLlmClient>(
                config.data.fixture.empty() ? FixtureLlmClient{} : FixtureLlmClient::from_file(config.data.fixture));
        }
    }
    if (!config.data.tree.empty()) in.tree = SLTree::load(config.data.tree);
    return in;
}

std::set<ClassId> tail_classes(const EmbeddingBundle& bundle, std::size_t threshold) {
    std::set<ClassId> out;
    for (const auto& r : bundle.classes)
        if (r.train_count < threshold) out.insert(r.id);
    return out;
}

SLTree build_tree(const EmbeddingBundle& bundle, const TaskSplit& split, std::size_t tail_threshold,
                  std::size_t max_phrases, LlmClient& llm, const TextEncoder& encoder) {
    const auto tails = tail_classes(bundle, tail_threshold);
    SLTree tree;
    for (std::size_t t = 0; t < split.task_count(); ++t) {
        TreeRequest req;
        req.task = t;
        req.classes = split.tasks[t];
        req.max_phrases = max_phrases;
        for (ClassId c : req.classes) {
            req.labels[c] = bundle.record(c).label;
            if (tails.count(c)) req.tails.insert(c);
        }
        tree = merge_trees(tree, generate_tree(req, llm, encoder));
    }
    return tree;
}

namespace {

// The synthetic world derives its fixture from this same stream.
TaskSplit split_for(const ExperimentConfig& config, const EmbeddingBundle& bundle) {
    std::vector<ClassId> ids;
    for (const auto& r : bundle.classes) ids.push_back(r.id);
    return make_task_split(ids, config.task_count, named_stream(config.seed, "split")());
}

std::vector<ClassId> classes_through(const TaskSplit& split, std::size_t t) {
    std::vector<ClassId> out;
    for (std::size_t i = 0; i <= t; ++i) out.insert(out.end(), split.tasks[i].begin(), split.tasks[i].end());
    std::sort(out.begin(), out.end());
    return out;
}

struct Tally {
    std::map<ClassId, std::pair<std::size_t, std::size_t>> per_class;  // correct, total
    std::size_t disagreements = 0;
    std::size_t rows = 0;
};

void evaluate_row(const EmbeddingBundle& bundle, const TaskSplit& split, std::size_t t, const LayerFeatures& text,
                  const Adapter& adapter, const LayerWeights& weights, AccuracyMatrix& acc, Tally* tally) {
    for (std::size_t i = 0; i <= t; ++i) {
        const LabeledFeatures test = stack_test(bundle, split.tasks[i]);
        if (test.labels.empty()) throw Error(ErrorCode::IncompleteMatrix, "task " + std::to_string(i) + " has no test rows");
        const auto preds = predict_rows(adapter.apply_rows(test.features), text, weights);
        std::size_t correct = 0;
        for (std::size_t r = 0; r < preds.size(); ++r) {
            const bool ok = preds[r].label == test.labels[r];
            correct += ok;
            if (tally) {
                auto& pc = tally->per_class[test.labels[r]];
                pc.first += ok;
                ++pc.second;
                tally->disagreements += preds[r].label != preds[r].margin_class;
                ++tally->rows;
            }
        }
        acc.set(t, i, correct, test.labels.size());
    }
}

std::map<ClassId, double> to_accuracy(const Tally& tally) {
    std::map<ClassId, double> out;
    for (const auto& [id, ct] : tally.per_class)
        out[id] = static_cast<double>(ct.first) / static_cast<double>(ct.second);
    return out;
}

std::map<ClassId, double> zero_shot_accuracy(const EmbeddingBundle& bundle, const TaskSplit& split,
                                             const SLTree& tree, const TextEncoder& encoder) {
    const std::size_t last = split.task_count() - 1;
    const auto seen = classes_through(split, last);
    const SLTree prefix = tree.prefix(last);
    const LayerFeatures text = make_layer_features(prefix, seen, encoder);
    LayerWeights w(prefix.layer_count());
    for (ClassId c : seen) {
        Vector row(prefix.layer_count(), 0.0);
        row[1] = 1.0;
        w.add_class(c, split.task_of(c), std::move(row));
    }
    AccuracyMatrix acc(split.task_count());
    Tally tally;
    evaluate_row(bundle, split, last, text, Adapter::identity(bundle.dim), w, acc, &tally);
    return to_accuracy(tally);
}

}  // namespace

ExperimentResult run_training(const ExperimentConfig& config, ExperimentInputs& inputs, const RunOptions& options) {
    config.validate();
    const EmbeddingBundle& bundle = inputs.bundle;
    ExperimentResult res;
    res.split = split_for(config, bundle);
    const StoreTextEncoder encoder(inputs.texts);
    if (inputs.tree) {
        res.tree = *inputs.tree;
    } else {
        if (!inputs.llm) throw Error(ErrorCode::LlmUnavailable, "no LLM client configured");
        res.tree = build_tree(bundle, res.split, config.tail_threshold, config.max_phrases, *inputs.llm, encoder);
    }
    for (ClassId c = 0; c < bundle.class_count(); ++c)
        if (!res.tree.has_class(c)) throw Error(ErrorCode::UnknownClass, "tree lacks class " + std::to_string(c));

    const std::size_t tasks = res.split.task_count();
    res.accuracy = AccuracyMatrix(tasks);
    TaskState state = TaskState::initial(bundle.dim);
    Tally tally;
    for (std::size_t t = 0; t < tasks; ++t) {
        TaskData data{t, res.split.tasks[t], stack_train(bundle, res.split.tasks[t])};
        const SLTree prefix = res.tree.prefix(t);
        begin_task(state, data, prefix.layer_count(), config.train);
        const LayerFeatures text = make_layer_features(prefix, state.seen, encoder);
        auto log = train_task(data, state, text, config.train, config.seed);
        res.log.insert(res.log.end(), log.begin(), log.end());
        evaluate_row(bundle, res.split, t, text, state.adapter, state.weights, res.accuracy,
                     t + 1 == tasks ? &tally : nullptr);
        if (options.keep_checkpoints) res.checkpoints.push_back(state);
    }
    res.class_accuracy = to_accuracy(tally);
    res.margin_disagreement =
        tally.rows ? static_cast<double>(tally.disagreements) / static_cast<double>(tally.rows) : 0.0;
    res.weights = state.weights;
    res.adapter = state.adapter;
    if (options.with_baseline) res.baseline_accuracy = zero_shot_accuracy(bundle, res.split, res.tree, encoder);
    return res;
}

ExperimentResult evaluate_states(const ExperimentConfig& config, const EmbeddingBundle& bundle,
                                 const TextEmbeddingStore& texts, const SLTree& tree,
                                 const std::vector<TaskState>& states) {
    ExperimentResult res;
    res.split = split_for(config, bundle);
    res.tree = tree;
    const std::size_t tasks = res.split.task_count();
    if (states.size() != tasks)
        throw Error(ErrorCode::IncompleteMatrix, "expected " + std::to_string(tasks) + " task checkpoints");
    const StoreTextEncoder encoder(texts);
    res.accuracy = AccuracyMatrix(tasks);
    Tally tally;
    for (std::size_t t = 0; t < tasks; ++t) {
        const SLTree prefix = tree.prefix(t);
        const LayerFeatures text = make_layer_features(prefix, classes_through(res.split, t), encoder);
        evaluate_row(bundle, res.split, t, text, states[t].adapter, states[t].weights, res.accuracy,
                     t + 1 == tasks ? &tally : nullptr);
    }
    res.class_accuracy = to_accuracy(tally);
    res.margin_disagreement =
        tally.rows ? static_cast<double>(tally.disagreements) / static_cast<double>(tally.rows) : 0.0;
    res.weights = states.back().weights;
    res.adapter = states.back().adapter;
    res.checkpoints = states;
    res.baseline_accuracy = zero_shot_accuracy(bundle, res.split, tree, encoder);
    return res;
}

ReportBundle make_report(const ExperimentConfig& config, const EmbeddingBundle& bundle,
                         const TextEmbeddingStore& texts, const ExperimentResult& result) {
    std::map<ClassId, std::size_t> counts;
    for (const auto& r : bundle.classes) counts[r.id] = r.train_count;
    const auto breakdown =
        head_tail_breakdown(result.class_accuracy, counts, config.tail_threshold, result.baseline_accuracy);

    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json metrics{{"a_last", a_last(result.accuracy)},
                 {"f_avg", result.accuracy.task_count() >= 2 ? json(f_avg(result.accuracy)) : json(nullptr)},
                 {"per_task_accuracy", result.accuracy.rows()},
                 {"head_acc", opt(breakdown.head_acc)},
                 {"tail_acc", opt(breakdown.tail_acc)},
                 {"head_delta", opt(breakdown.head_delta)},
                 {"tail_delta", opt(breakdown.tail_delta)},
                 {"margin_disagreement", result.margin_disagreement},
                 {"config_hash", config.hash()},
                 {"seed", config.seed}};

    ReportBundle rb;
    rb.metrics_json = metrics.dump(2) + "\n";

    std::ostringstream pc;
    pc << "id,label,count,is_tail,acc,delta\n";
    for (const auto& c : breakdown.classes)
        pc << c.id << ',' << bundle.record(c.id).label << ',' << c.count << ',' << (c.tail ? 1 : 0) << ','
           << fmt(c.acc) << ',' << fmt(c.delta) << '\n';
    rb.per_class_csv = pc.str();

    const std::size_t layers = result.weights.layer_count();
    std::ostringstream wc;
    wc << "class,center\n";
    if (layers >= 3) {
        const Vector phi = layer_positions(layers);
        for (ClassId c : result.weights.classes()) wc << c << ',' << fmt(weight_center(result.weights.row(c), phi)) << '\n';
    }
    rb.weight_centers_csv = wc.str();

    const auto ids = result.weights.classes();
    const SLTree prefix = result.tree.prefix(result.split.task_count() - 1);
    const StoreTextEncoder encoder(texts);
    const LayerFeatures text = make_layer_features(prefix, ids, encoder);
    std::vector<Vector> fused;
    for (ClassId c : ids) {
        Vector v = text.fused(c, result.weights.row(c));
        const double n = norm2(v);
        if (n > 1e-15)
            for (double& x : v) x /= n;
        fused.push_back(std::move(v));
    }
    std::ostringstream ts;
    ts << "class";
    for (ClassId c : ids) ts << ',' << c;
    ts << '\n';
    for (std::size_t a = 0; a < ids.size(); ++a) {
        ts << ids[a];
        for (std::size_t b = 0; b < ids.size(); ++b) ts << ',' << fmt(dot(fused[a], fused[b]));
        ts << '\n';
    }
    rb.text_similarity_csv = ts.str();
    return rb;
}

void write_report(const ReportBundle& report, const std::filesystem::path& directory) {
    write_text(directory / "metrics.json", report.metrics_json);
    write_text(directory / "per_class.csv", report.per_class_csv);
    write_text(directory / "weight_centers.csv", report.weight_centers_csv);
    write_text(directory / "text_similarity.csv", report.text_similarity_csv);
}

ReportBundle run_experiment(const ExperimentConfig& config) {
    ExperimentInputs inputs = load_inputs(config);
    const auto result = run_training(config, inputs, RunOptions{true, true});
    const std::filesystem::path out = config.out;
    std::filesystem::create_directories(out);
    for (std::size_t t = 0; t < result.checkpoints.size(); ++t) {
        char name[32];
        std::snprintf(name, sizeof name, "task_%02zu", t);
        save_checkpoint(result.checkpoints[t], out / "checkpoints" / name);
    }
    std::string log;
    for (const auto& r : result.log) log += r.to_json_line() + "\n";
    write_text(out / "train_log.jsonl", log);
    result.tree.save(out / "tree.json");
    write_text(out / "config.json", config.to_json().dump(2) + "\n");
    ReportBundle report = make_report(config, inputs.bundle, inputs.texts, result);
    write_report(report, out);
    return report;
}

ReportBundle run_experiment(const std::filesystem::path& config_path) {
    return run_experiment(ExperimentConfig::load(config_path));
}

std::vector<Variant> ablation_variants(const TrainConfig& base) {
    std::vector<Variant> v;
    TrainConfig c = base;
    c.train_adapter = false;
    c.learn_alpha = false;
    c.alpha_init = "fixed";
    v.push_back({"zero_shot", c});
    c.alpha_init = "uniform";
    v.push_back({"sl_tree", c});

    c = base;
    c.alpha_init = "uniform";
    c.train_adapter = true;
    c.learn_alpha = false;
    c.lambda_alg = c.lambda_kd = c.lambda_con = c.lambda_freq = 0.0;
    v.push_back({"ce_only", c});
    c.lambda_kd = base.lambda_kd;
    v.push_back({"kd", c});
    c.lambda_alg = base.lambda_alg;
    v.push_back({"alignment", c});
    c.learn_alpha = true;
    v.push_back({"adaptive", c});
    c.lambda_con = base.lambda_con;
    v.push_back({"r_con", c});
    c.lambda_freq = base.lambda_freq;
    v.push_back({"r_freq", c});
    return v;
}

const VariantRun& AblationResult::find(const std::string& variant, std::uint64_t seed) const {
    for (const auto& r : runs)
        if (r.variant == variant && r.seed == seed) return r;
    throw Error(ErrorCode::InvalidConfig, "no ablation run " + variant + "/" + std::to_string(seed));
}

double AblationResult::median_a_last(const std::string& variant) const {
    std::vector<double> v;
    for (const auto& r : runs)
        if (r.variant == variant) v.push_back(r.a_last);
    if (v.empty()) throw Error(ErrorCode::InvalidConfig, "no ablation runs for " + variant);
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

json AblationResult::to_json() const {
    json rows = json::array();
    std::vector<std::string> names;
    for (const auto& r : runs) {
        if (std::find(names.begin(), names.end(), r.variant) == names.end()) names.push_back(r.variant);
        json cls = json::object();
        for (const auto& [id, a] : r.class_accuracy) cls[std::to_string(id)] = a;
        rows.push_back({{"variant", r.variant},
                        {"seed", r.seed},
                        {"a_last", r.a_last},
                        {"f_avg", r.f_avg},
                        {"tail_weight_center", r.tail_weight_center},
                        {"class_accuracy", cls}});
    }
    json medians = json::object();
    for (const auto& n : names) medians[n] = median_a_last(n);
    return json{{"runs", rows}, {"median_a_last", medians}, {"tails", tails}};
}

AblationResult run_ablation(const ExperimentConfig& config) {
    AblationResult out;
    const auto variants = ablation_variants(config.train);
    for (std::uint64_t seed : config.ablation_seeds) {
        ExperimentConfig cfg = config;
        cfg.seed = seed;
        ExperimentInputs inputs = load_inputs(cfg);
        out.tails = tail_classes(inputs.bundle, cfg.tail_threshold);
        const StoreTextEncoder encoder(inputs.texts);
        if (!inputs.tree)
            inputs.tree = build_tree(inputs.bundle, split_for(cfg, inputs.bundle), cfg.tail_threshold,
                                     cfg.max_phrases, *inputs.llm, encoder);
        for (const auto& v : variants) {
            cfg.train = v.train;
            const auto res = run_training(cfg, inputs, RunOptions{false, false});
            VariantRun run;
            run.variant = v.name;
            run.seed = seed;
            run.a_last = a_last(res.accuracy);
            run.f_avg = res.accuracy.task_count() >= 2 ? f_avg(res.accuracy) : 0.0;
            run.class_accuracy = res.class_accuracy;
            const Vector phi = layer_positions(res.weights.layer_count());
            double sum = 0.0;
            std::size_t n = 0;
            for (ClassId c : out.tails) {
                if (!res.weights.contains(c)) continue;
                sum += weight_center(res.weights.row(c), phi);
                ++n;
            }
            run.tail_weight_center = n ? sum / static_cast<double>(n) : 0.0;
            out.runs.push_back(std::move(run));
        }
    }
    return out;
}

}  // namespace taillight
