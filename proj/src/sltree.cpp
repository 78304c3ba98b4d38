#include "taillight/sltree.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace taillight {

using json = nlohmann::json;

std::string_view to_string(TemplateKind kind) noexcept {
    switch (kind) {
        case TemplateKind::Fixed: return "Fixed";
        case TemplateKind::P1: return "P1";
        case TemplateKind::P2: return "P2";
        case TemplateKind::P3: return "P3";
        case TemplateKind::P4: return "P4";
    }
    return "Fixed";
}

TemplateKind template_kind_from(std::string_view name) {
    for (auto k : {TemplateKind::Fixed, TemplateKind::P1, TemplateKind::P2, TemplateKind::P3, TemplateKind::P4})
        if (to_string(k) == name) return k;
    throw Error(ErrorCode::InvalidConfig, "unknown template kind " + std::string(name));
}

PromptTemplate PromptTemplate::of(TemplateKind kind) {
    switch (kind) {
        case TemplateKind::Fixed:
            return {kind, "a photo of {label}"};
        case TemplateKind::P1:
            return {kind,
                    "Please summarize the task in one sentence from the point of view of category "
                    "which includes both {labels}"};
        case TemplateKind::P2:
            return {kind, "Please tell me the most distinctive visual feature of {label}"};
        case TemplateKind::P3:
            return {kind,
                    "Please tell me the most distinctive visual features of {label} from the datasets "
                    "which include {task}"};
        case TemplateKind::P4:
            return {kind, "Please tell me the most distinctive visual features of {label} compared to {other}"};
    }
    throw Error(ErrorCode::InvalidConfig, "unknown template kind");
}

std::string render_prompt(const PromptTemplate& tmpl, const PromptBindings& bindings) {
    std::string out;
    out.reserve(tmpl.text.size() + 64);
    std::size_t pos = 0;
    while (pos < tmpl.text.size()) {
        const auto open = tmpl.text.find('{', pos);
        if (open == std::string::npos) {
            out.append(tmpl.text, pos, std::string::npos);
            break;
        }
        const auto close = tmpl.text.find('}', open);
        if (close == std::string::npos)
            throw Error(ErrorCode::MissingSlot, "unterminated slot in template");
        out.append(tmpl.text, pos, open - pos);
        const std::string slot = tmpl.text.substr(open + 1, close - open - 1);
        auto it = bindings.find(slot);
        if (it == bindings.end() || it->second.empty())
            throw Error(ErrorCode::MissingSlot, "no binding for {" + slot + "}");
        out += it->second;
        pos = close + 1;
    }
    return out;
}

std::string join_labels(const std::vector<std::string>& labels) {
    std::string out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (i > 0) out += " + ";
        out += labels[i];
    }
    return out;
}

namespace {

std::vector<std::string> split_words(std::string_view s) {
    std::vector<std::string> words;
    std::string cur;
    for (char ch : s) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!cur.empty()) words.push_back(std::move(cur)), cur.clear();
        } else {
            cur += ch;
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

std::string cap_words(std::string_view s) {
    auto words = split_words(s);
    if (words.size() > kMaxPhraseWords) words.resize(kMaxPhraseWords);
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i > 0) out += ' ';
        out += words[i];
    }
    return out;
}

std::string hash_hex(const std::string& prompt) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(prompt)));
    return buf;
}

std::string join_raw(const std::vector<std::string>& phrases, const char* sep) {
    std::string out;
    for (std::size_t i = 0; i < phrases.size(); ++i) {
        if (i > 0) out += sep;
        out += phrases[i];
    }
    return out;
}

// Query, postprocess, and write into a node. Failures are recorded, not thrown.
void fill_node(TreeNode& node, std::size_t task, TemplateKind kind, const std::string& prompt,
               LlmClient& llm, std::size_t max_phrases) {
    NodeProvenance prov{task, kind, hash_hex(prompt), {}};
    try {
        auto phrases = postprocess_response(join_raw(llm.query(prompt, max_phrases), "\n"));
        for (auto& p : phrases)
            if (std::find(node.phrases.begin(), node.phrases.end(), p) == node.phrases.end())
                node.phrases.push_back(std::move(p));
    } catch (const Error& e) {
        if (e.code() != ErrorCode::LlmUnavailable && e.code() != ErrorCode::EmptyResponse) throw;
        prov.error = e.what();
    }
    node.provenance = std::move(prov);
}

}  // namespace

std::vector<std::string> postprocess_response(std::string_view raw) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        auto capped = cap_words(cur);
        if (!capped.empty()) out.push_back(std::move(capped));
        cur.clear();
    };
    for (char ch : raw) {
        if (ch == ',' || ch == ';' || ch == '\n' || ch == '\r')
            flush();
        else
            cur += ch;
    }
    flush();
    if (out.empty()) throw Error(ErrorCode::EmptyResponse, "response contained no phrases");
    return out;
}

const TreeClass& SLTree::at(ClassId id) const {
    auto it = classes_.find(id);
    if (it == classes_.end()) throw Error(ErrorCode::UnknownClass, "class " + std::to_string(id) + " not in tree");
    return it->second;
}

const std::vector<std::string>& SLTree::phrases(ClassId id, std::size_t layer) const {
    return at(id).layers.at(layer).phrases;
}

std::vector<ClassId> SLTree::class_ids() const {
    std::vector<ClassId> ids;
    for (const auto& [id, _] : classes_) ids.push_back(id);
    return ids;
}

void SLTree::pad_to(std::size_t count) {
    layer_count_ = std::max(layer_count_, count);
    for (auto& [_, cls] : classes_)
        if (cls.layers.size() < layer_count_) cls.layers.resize(layer_count_);
}

void SLTree::add_class(ClassId id, std::string label, std::size_t task) {
    if (classes_.count(id)) throw Error(ErrorCode::ClassCollision, "class " + std::to_string(id) + " already in tree");
    TreeClass cls{std::move(label), task, std::vector<TreeNode>(layer_count_)};
    classes_.emplace(id, std::move(cls));
}

TreeNode& SLTree::node(ClassId id, std::size_t layer) {
    auto it = classes_.find(id);
    if (it == classes_.end()) throw Error(ErrorCode::UnknownClass, "class " + std::to_string(id) + " not in tree");
    if (layer >= layer_count_) pad_to(layer + 1);
    return it->second.layers[layer];
}

SLTree SLTree::prefix(std::size_t last_task) const {
    SLTree out;
    std::size_t count = 0;
    for (const auto& [task, n] : task_layers_)
        if (task <= last_task) {
            out.task_layers_[task] = n;
            count = std::max(count, n);
        }
    for (const auto& [task, phrase] : task_phrases_)
        if (task <= last_task) out.task_phrases_[task] = phrase;
    for (const auto& [id, cls] : classes_) {
        if (cls.task > last_task) continue;
        TreeClass copy = cls;
        copy.layers.resize(count);
        out.classes_.emplace(id, std::move(copy));
    }
    out.layer_count_ = count;
    return out;
}

std::string SLTree::to_json() const {
    json doc;
    doc["version"] = 1;
    doc["layer_count"] = layer_count_;
    json tasks = json::array();
    std::set<std::size_t> task_ids;
    for (const auto& [t, _] : task_layers_) task_ids.insert(t);
    for (const auto& [t, _] : task_phrases_) task_ids.insert(t);
    for (std::size_t t : task_ids) {
        json entry = {{"task", t}};
        if (auto it = task_layers_.find(t); it != task_layers_.end()) entry["layer_count"] = it->second;
        if (auto it = task_phrases_.find(t); it != task_phrases_.end()) entry["phrase"] = it->second;
        tasks.push_back(entry);
    }
    doc["tasks"] = tasks;
    json classes = json::array();
    for (const auto& [id, cls] : classes_) {
        json layers = json::array();
        for (const auto& node : cls.layers) {
            json n = {{"phrases", node.phrases}};
            if (node.provenance) {
                n["kind"] = std::string(to_string(node.provenance->kind));
                n["task"] = node.provenance->task;
                n["prompt_hash"] = node.provenance->prompt_hash;
                if (!node.provenance->error.empty()) n["error"] = node.provenance->error;
            }
            layers.push_back(n);
        }
        classes.push_back({{"id", id}, {"label", cls.label}, {"task", cls.task}, {"layers", layers}});
    }
    doc["classes"] = classes;
    return doc.dump(2) + "\n";
}

SLTree SLTree::from_json(std::string_view text) {
    SLTree tree;
    try {
        auto doc = json::parse(text);
        if (doc.at("version").get<int>() != 1) throw Error(ErrorCode::InvalidConfig, "unsupported tree version");
        tree.layer_count_ = doc.at("layer_count").get<std::size_t>();
        for (const auto& t : doc.at("tasks")) {
            const auto id = t.at("task").get<std::size_t>();
            if (t.contains("layer_count")) tree.task_layers_[id] = t["layer_count"].get<std::size_t>();
            if (t.contains("phrase")) tree.task_phrases_[id] = t["phrase"].get<std::string>();
        }
        for (const auto& c : doc.at("classes")) {
            TreeClass cls;
            cls.label = c.at("label").get<std::string>();
            cls.task = c.at("task").get<std::size_t>();
            for (const auto& n : c.at("layers")) {
                TreeNode node;
                node.phrases = n.at("phrases").get<std::vector<std::string>>();
                if (n.contains("kind")) {
                    NodeProvenance prov;
                    prov.kind = template_kind_from(n["kind"].get<std::string>());
                    prov.task = n.at("task").get<std::size_t>();
                    prov.prompt_hash = n.at("prompt_hash").get<std::string>();
                    if (n.contains("error")) prov.error = n["error"].get<std::string>();
                    node.provenance = std::move(prov);
                }
                cls.layers.push_back(std::move(node));
            }
            if (cls.layers.size() != tree.layer_count_)
                throw Error(ErrorCode::InvalidConfig, "class layer count differs from tree layer count");
            const auto id = c.at("id").get<ClassId>();
            if (!tree.classes_.emplace(id, std::move(cls)).second)
                throw Error(ErrorCode::ClassCollision, "class " + std::to_string(id) + " repeated in tree");
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("tree JSON: ") + e.what());
    }
    return tree;
}

void SLTree::save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string(), path.string());
    out << to_json();
}

SLTree SLTree::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string(), path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

namespace {

Vector layer_mean(const std::vector<std::string>& phrases, const TextEncoder& encoder) {
    Vector acc(encoder.dim(), 0.0);
    for (const auto& p : phrases) {
        const Vector e = encoder.encode(p);
        if (e.size() != acc.size()) throw Error(ErrorCode::DimMismatch, "encoder returned wrong dimension");
        for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += e[k];
    }
    const double inv = 1.0 / static_cast<double>(phrases.size());
    for (double& x : acc) x *= inv;
    return acc;
}

}  // namespace

Vector class_text_representation(const SLTree& tree, ClassId id, const TextEncoder& encoder) {
    const auto& cls = tree.at(id);
    Vector acc(encoder.dim(), 0.0);
    std::size_t used = 0;
    for (const auto& node : cls.layers) {
        if (node.phrases.empty()) continue;
        const Vector m = layer_mean(node.phrases, encoder);
        for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += m[k];
        ++used;
    }
    if (used == 0) throw Error(ErrorCode::NoPhrases, "class " + std::to_string(id) + " has no phrases");
    for (double& x : acc) x /= static_cast<double>(used);
    return acc;
}

ConfusionCluster confusion_cluster(const SLTree& tree, ClassId tail, std::span<const ClassId> task_classes,
                                   const TextEncoder& encoder) {
    ConfusionCluster cluster;
    cluster.center = tail;
    cluster.members.insert(tail);
    const Vector gj = class_text_representation(tree, tail, encoder);
    for (ClassId k : task_classes) {
        const double q = k == tail ? 1.0 : cosine_similarity(gj, class_text_representation(tree, k, encoder));
        cluster.similarity[k] = q;
        if (1.0 - q < kConfusionDistance) cluster.members.insert(k);
    }
    return cluster;
}

SLTree generate_tree(const TreeRequest& request, LlmClient& llm, const TextEncoder& encoder) {
    const std::size_t task = request.task;
    std::vector<ClassId> classes = request.classes;
    std::sort(classes.begin(), classes.end());
    auto label_of = [&](ClassId id) -> const std::string& {
        auto it = request.labels.find(id);
        if (it == request.labels.end() || it->second.empty())
            throw Error(ErrorCode::InvalidConfig, "class " + std::to_string(id) + " has no label");
        return it->second;
    };

    SLTree tree;
    tree.pad_to(3);
    for (ClassId id : classes) tree.add_class(id, label_of(id), task);

    // G^0: one task-level sentence shared by every class of the task.
    std::vector<std::string> labels;
    for (ClassId id : classes) labels.push_back(label_of(id));
    const std::string label_list = join_labels(labels);
    const std::string p1 = render_prompt(PromptTemplate::of(TemplateKind::P1), {{"labels", label_list}});
    NodeProvenance p1_prov{task, TemplateKind::P1, hash_hex(p1), {}};
    std::string task_phrase;
    try {
        auto raw = llm.query(p1, request.max_phrases);
        task_phrase = cap_words(join_raw(raw, ", "));
        if (task_phrase.empty()) throw Error(ErrorCode::EmptyResponse, "empty task summary");
        tree.set_task_phrase(task, task_phrase);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::LlmUnavailable && e.code() != ErrorCode::EmptyResponse) throw;
        p1_prov.error = e.what();
    }
    for (ClassId id : classes) {
        auto& node = tree.node(id, 0);
        if (!task_phrase.empty()) node.phrases = {task_phrase};
        node.provenance = p1_prov;
    }

    // G^1: fixed template, rendered locally.
    for (ClassId id : classes) {
        const auto text = render_prompt(PromptTemplate::of(TemplateKind::Fixed), {{"label", label_of(id)}});
        auto& node = tree.node(id, 1);
        node.phrases = {text};
        node.provenance = NodeProvenance{task, TemplateKind::Fixed, hash_hex(text), {}};
    }

    // G^2: distinctive features per class.
    for (ClassId id : classes) {
        const auto prompt = render_prompt(PromptTemplate::of(TemplateKind::P2), {{"label", label_of(id)}});
        fill_node(tree.node(id, 2), task, TemplateKind::P2, prompt, llm, request.max_phrases);
    }

    const std::string task_description = task_phrase.empty() ? label_list : task_phrase;
    std::size_t rounds_used = 0;
    std::vector<std::pair<ClassId, ClassId>> comparisons;

    for (ClassId tail : classes) {
        if (!request.tails.count(tail)) continue;
        auto cluster = confusion_cluster(tree, tail, classes, encoder);
        std::size_t index = 0;
        while (cluster.members.size() > 2 && index < kMaxRefinementRounds) {
            const std::size_t layer = 3 + index;
            tree.pad_to(layer + 1);
            for (ClassId member : cluster.members) {
                const auto prompt = render_prompt(PromptTemplate::of(TemplateKind::P3),
                                                  {{"label", label_of(member)}, {"task", task_description}});
                auto& node = tree.node(member, layer);
                if (node.provenance && node.provenance->prompt_hash == hash_hex(prompt)) continue;
                fill_node(node, task, TemplateKind::P3, prompt, llm, request.max_phrases);
            }
            ++index;
            cluster = confusion_cluster(tree, tail, classes, encoder);
        }
        rounds_used = std::max(rounds_used, index);
        if (cluster.members.size() == 2) {
            const ClassId other = *cluster.members.begin() == tail ? *cluster.members.rbegin()
                                                                   : *cluster.members.begin();
            comparisons.emplace_back(tail, other);
        }
    }

    std::size_t layer_count = 3 + rounds_used;
    if (!comparisons.empty()) {
        const std::size_t layer = layer_count++;
        tree.pad_to(layer + 1);
        for (auto [tail, other] : comparisons) {
            const auto prompt = render_prompt(PromptTemplate::of(TemplateKind::P4),
                                              {{"label", label_of(tail)}, {"other", label_of(other)}});
            fill_node(tree.node(tail, layer), task, TemplateKind::P4, prompt, llm, request.max_phrases);
        }
    }
    tree.pad_to(layer_count);
    tree.set_task_layer_count(task, layer_count);
    return tree;
}

SLTree merge_trees(const SLTree& existing, const SLTree& fresh) {
    for (const auto& [id, _] : fresh.classes())
        if (existing.has_class(id))
            throw Error(ErrorCode::ClassCollision, "class " + std::to_string(id) + " present in both trees");
    SLTree out = existing;
    out.pad_to(fresh.layer_count());
    for (const auto& [id, cls] : fresh.classes()) {
        out.add_class(id, cls.label, cls.task);
        for (std::size_t l = 0; l < cls.layers.size(); ++l) out.node(id, l) = cls.layers[l];
    }
    for (const auto& [t, phrase] : fresh.task_phrases()) out.set_task_phrase(t, phrase);
    for (const auto& [t, n] : fresh.task_layer_counts()) out.set_task_layer_count(t, n);
    return out;
}

std::vector<Matrix> layer_text_features(const SLTree& tree, std::span<const ClassId> class_ids,
                                        const TextEncoder& encoder) {
    std::vector<Matrix> layers(tree.layer_count(), Matrix(class_ids.size(), encoder.dim()));
    for (std::size_t r = 0; r < class_ids.size(); ++r) {
        const auto& cls = tree.at(class_ids[r]);
        for (std::size_t l = 0; l < tree.layer_count(); ++l) {
            if (l >= cls.layers.size() || cls.layers[l].phrases.empty()) continue;
            const Vector m = layer_mean(cls.layers[l].phrases, encoder);
            std::copy(m.begin(), m.end(), layers[l].row(r).begin());
        }
    }
    return layers;
}

}  // namespace taillight
